// ddg-lab: synthetic multi-domain experiments with a discrete representation
// codebook. Subcommands: gen-data, train, eval, loo, ablate, theorem-check,
// inspect-codebook.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddg/config.hpp"
#include "ddg/report.hpp"
#include "ddg/serialize.hpp"
#include "ddg/theory.hpp"
#include "ddg/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
  int jobs = 1;
};

int thread_cap() {
  if (const char* env = std::getenv("DDG_LAB_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) return cap;
  }
  return 1 << 16;  // effectively uncapped
}

ddg::LabConfig load(const CommonOpts& opts) {
  ddg::LabConfig cfg = ddg::load_config(opts.config_path);
  if (opts.seed_set) cfg.run.seed = opts.seed;
  if (!opts.out.empty()) cfg.output_dir = opts.out;
  fs::create_directories(cfg.output_dir);
  return cfg;
}

ddg::DomainDataset dataset_for(const ddg::LabConfig& cfg) {
  // the dataset is a pure function of the manifest; an exported file is only
  // a cache, so regenerating is always equivalent
  if (!cfg.dataset_path.empty() && fs::exists(cfg.dataset_path))
    return ddg::read_dataset(cfg.dataset_path);
  return ddg::generate(cfg.run.manifest, cfg.run.specs);
}

std::uint64_t file_fnv1a(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string train_log_csv(const std::vector<ddg::TrainLogEntry>& log) {
  std::ostringstream os;
  os << "iteration,loss,l_cla,l_con,l_comm,val_accuracy,perplexity\n";
  os.precision(17);
  for (const auto& e : log)
    os << e.iteration << ',' << e.loss << ',' << e.l_cla << ',' << e.l_con << ','
       << e.l_comm << ',' << e.val_accuracy << ',' << e.perplexity << '\n';
  return os.str();
}

int cmd_gen_data(const CommonOpts& opts) {
  const ddg::LabConfig cfg = load(opts);
  std::string path = cfg.dataset_path;
  if (path.empty()) path = (fs::path(cfg.output_dir) / "dataset.bin").string();
  if (fs::exists(path) && !opts.force) {
    std::cerr << "refusing to overwrite " << path << " (use --force)\n";
    return 2;
  }
  const auto ds = ddg::generate(cfg.run.manifest, cfg.run.specs);
  ddg::write_dataset(path, ds);
  std::cout << "wrote " << path << "\nhash " << std::hex << file_fnv1a(path) << std::dec
            << '\n';
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const ddg::LabConfig cfg = load(opts);
  const auto ds = dataset_for(cfg);
  const std::string ckpt_path = (fs::path(cfg.output_dir) / "checkpoint.bin").string();
  auto result = ddg::train(cfg.run, ds, [&](const ddg::Checkpoint& ck) {
    ddg::save_checkpoint(ckpt_path, ck);
  });
  for (const auto& e : result.log)
    std::cout << "iter " << e.iteration << " loss " << e.loss << " cla " << e.l_cla
              << " con " << e.l_con << " comm " << e.l_comm << " val "
              << e.val_accuracy * 100.0 << "% ppl " << e.perplexity << '\n';
  ddg::write_text_file((fs::path(cfg.output_dir) / "train_log.csv").string(),
                       train_log_csv(result.log));
  json j;
  j["schema"] = "ddg-train-report-v1";
  j["config_hash"] = ddg::config_hash(cfg.run);
  j["best_val_accuracy_pct"] = result.checkpoint.best_val_accuracy * 100.0;
  j["best_iteration"] = result.checkpoint.iteration;
  j["wall_time_sec"] = seconds_since(t0);
  write_json((fs::path(cfg.output_dir) / "train_report.json").string(), j);
  std::cout << "best val " << result.checkpoint.best_val_accuracy * 100.0 << "% at iter "
            << result.checkpoint.iteration << "\nwrote " << ckpt_path << '\n';
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& ckpt_path) {
  const ddg::LabConfig cfg = load(opts);
  const auto ds = dataset_for(cfg);
  const auto ckpt = ddg::load_checkpoint(ckpt_path);
  const auto accs = ddg::evaluate_per_domain(ckpt, ds);
  json j;
  j["schema"] = "ddg-eval-report-v1";
  j["config_hash"] = ddg::config_hash(ckpt.config);
  auto arr = json::array();
  for (std::size_t d = 0; d < accs.size(); ++d) {
    json e;
    e["domain"] = d;
    e["accuracy_pct"] = accs[d] * 100.0;
    e["is_target"] = (static_cast<int>(d) == ckpt.config.target_domain);
    arr.push_back(e);
  }
  j["domains"] = arr;
  std::cout << j.dump(2) << '\n';
  write_json((fs::path(cfg.output_dir) / "eval_report.json").string(), j);
  return 0;
}

int cmd_loo(const CommonOpts& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const ddg::LabConfig cfg = load(opts);
  const auto ds = dataset_for(cfg);
  const int jobs = std::min(opts.jobs, thread_cap());
  const auto loo = ddg::leave_one_out(cfg.run, ds, jobs);
  for (const auto& run : loo.runs) {
    std::cout << "target " << run.target_domain << " acc "
              << run.target_accuracy * 100.0 << "% (val "
              << run.best_val_accuracy * 100.0 << "%)\n";
    ddg::save_checkpoint((fs::path(cfg.output_dir) /
                          ("checkpoint_target" + std::to_string(run.target_domain) + ".bin"))
                             .string(),
                         run.checkpoint);
  }
  std::cout << "average " << loo.average * 100.0 << "% gs " << loo.gs * 100.0 << '\n';
  write_json((fs::path(cfg.output_dir) / "loo_report.json").string(),
             ddg::loo_report_json(loo, cfg.run, seconds_since(t0)));
  ddg::write_text_file((fs::path(cfg.output_dir) / "loo_report.csv").string(),
                       ddg::loo_report_csv(loo, cfg.run));
  return 0;
}

int cmd_ablate(const CommonOpts& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const ddg::LabConfig cfg = load(opts);
  const auto ds = dataset_for(cfg);
  const int jobs = std::min(opts.jobs, thread_cap());
  const auto rows = ddg::ablate(cfg.run, ds, cfg.ablation_seeds, jobs);
  for (const auto& row : rows)
    std::cout << row.id << " (" << row.description << "): "
              << row.mean_target_accuracy * 100.0 << "%\n";
  write_json((fs::path(cfg.output_dir) / "ablation_report.json").string(),
             ddg::ablation_report_json(rows, cfg.run, seconds_since(t0)));
  ddg::write_text_file((fs::path(cfg.output_dir) / "ablation_report.csv").string(),
                       ddg::ablation_report_csv(rows, cfg.run));
  return 0;
}

ddg::PiecewiseDensity parse_density(const json& j) {
  ddg::PiecewiseDensity p;
  p.breakpoints = j.at("breakpoints").get<std::vector<double>>();
  p.densities = j.at("densities").get<std::vector<double>>();
  p.validate();
  return p;
}

int cmd_theorem_check(const CommonOpts& opts) {
  int cases = 200;
  std::uint64_t seed = 20240815;
  std::vector<double> b_phis = {0.5, 1.0, 3.0};
  json user_pairs = json::array();
  std::string out_dir = opts.out.empty() ? "." : opts.out;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw std::runtime_error("cannot open: " + opts.config_path);
    json spec = json::parse(in);
    for (auto it = spec.begin(); it != spec.end(); ++it)
      if (it.key() != "cases" && it.key() != "seed" && it.key() != "b_phi" &&
          it.key() != "pairs")
        throw std::runtime_error("theorem-check: unknown key '" + it.key() + "'");
    if (spec.contains("cases")) cases = spec.at("cases").get<int>();
    if (spec.contains("seed")) seed = spec.at("seed").get<std::uint64_t>();
    if (spec.contains("b_phi")) b_phis = spec.at("b_phi").get<std::vector<double>>();
    if (spec.contains("pairs")) user_pairs = spec.at("pairs");
  }
  if (opts.seed_set) seed = opts.seed;

  const auto suite = ddg::run_theorem_suite(cases, seed, b_phis);
  json j = ddg::theorem_suite_json(suite);
  auto reports = json::array();
  int violations = suite.violations;
  for (const json& pair : user_pairs) {
    const auto p = parse_density(pair.at("p"));
    const auto q = parse_density(pair.at("q"));
    const int cells = pair.value("partition_cells", 4);
    const double b = pair.value("b_phi", 1.0);
    const auto report =
        ddg::theorem_check(p, q, ddg::Partition::uniform(p.lo(), p.hi(), cells), b);
    reports.push_back(ddg::gap_report_json(report));
    if (report.discrete_gap > report.continuous_gap + 1e-12) ++violations;
  }
  j["user_pairs"] = reports;
  j["violations"] = violations;
  std::cout << j.dump(2) << '\n';
  std::cout << "violations: " << violations << '\n';
  fs::create_directories(out_dir);
  write_json((fs::path(out_dir) / "theorem_report.json").string(), j);
  return violations == 0 ? 0 : 1;
}

int cmd_inspect(const CommonOpts& opts, const std::string& ckpt_path, int sub_bins) {
  const ddg::LabConfig cfg = load(opts);
  const auto ds = dataset_for(cfg);
  const auto ckpt = ddg::load_checkpoint(ckpt_path);
  const auto res = ddg::inspect_codebook(ckpt, ds, sub_bins);
  write_json((fs::path(cfg.output_dir) / "inspection.json").string(),
             ddg::inspection_json(res, ckpt.config));
  ddg::write_text_file((fs::path(cfg.output_dir) / "codeword_indices.csv").string(),
                       ddg::inspection_index_csv(res, ds));
  // quick console summary: worst-case coarse/fine ratio
  double max_coarse = 0.0, max_fine = 0.0;
  for (std::size_t a = 0; a < res.l1_coarse.size(); ++a)
    for (std::size_t b = 0; b < res.l1_coarse.size(); ++b) {
      max_coarse = std::max(max_coarse, res.l1_coarse[a][b]);
      max_fine = std::max(max_fine, res.l1_fine[a][b]);
    }
  std::cout << "max cross-domain usage L1 (codewords): " << max_coarse
            << "\nmax cross-domain usage L1 (refined): " << max_fine << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discrete-codebook domain generalization lab"};
  app.require_subcommand(1);

  CommonOpts opts;
  auto add_common = [&](CLI::App* cmd, bool config_required = true) {
    auto* c = cmd->add_option("--config", opts.config_path, "experiment config (JSON)");
    if (config_required) c->required();
    cmd->add_option("--out", opts.out, "output directory override");
    cmd->add_option("--seed", opts.seed, "master seed override")
        ->each([&](const std::string&) { opts.seed_set = true; });
    cmd->add_flag("--force", opts.force, "overwrite existing outputs");
    cmd->add_option("--jobs", opts.jobs, "parallel runs (capped by DDG_LAB_THREADS)");
  };

  auto* gen = app.add_subcommand("gen-data", "generate and export the dataset");
  add_common(gen);
  auto* train = app.add_subcommand("train", "train one target-domain run");
  add_common(train);
  std::string ckpt_path;
  auto* eval = app.add_subcommand("eval", "per-domain accuracy of a checkpoint");
  add_common(eval);
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  auto* loo = app.add_subcommand("loo", "leave-one-domain-out protocol");
  add_common(loo);
  auto* ablate = app.add_subcommand("ablate", "six-row component ablation");
  add_common(ablate);
  auto* theorem = app.add_subcommand("theorem-check", "gap-inequality suite");
  add_common(theorem, /*config_required=*/false);
  int sub_bins = 2;
  auto* inspect = app.add_subcommand("inspect-codebook", "patch-to-codeword maps");
  add_common(inspect);
  inspect->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  inspect->add_option("--sub-bins", sub_bins, "distance shells per codeword");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(opts);
    if (train->parsed()) return cmd_train(opts);
    if (eval->parsed()) return cmd_eval(opts, ckpt_path);
    if (loo->parsed()) return cmd_loo(opts);
    if (ablate->parsed()) return cmd_ablate(opts);
    if (theorem->parsed()) return cmd_theorem_check(opts);
    if (inspect->parsed()) return cmd_inspect(opts, ckpt_path, sub_bins);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
