#include "ddg/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ddg {

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

InspectionResult inspect_codebook(const Checkpoint& ckpt, const DomainDataset& dataset,
                                  int sub_bins) {
  if (sub_bins < 1) throw std::invalid_argument("inspect_codebook: sub_bins must be >= 1");
  const ModelConfig mc = ckpt.config.model_config();
  if (mc.feature_dim != ckpt.codebook.dim)
    throw std::invalid_argument("inspect_codebook: feature/codeword dim mismatch");
  const Codebook& cb = ckpt.codebook;
  const int g = mc.grid();
  const int n = cb.num_codewords;

  InspectionResult res;
  res.grid = g;
  res.num_codewords = n;
  res.sub_bins = sub_bins;

  // pass 1: assignments and distances for every sample
  std::vector<std::vector<double>> sample_dists(dataset.samples.size());
  std::vector<std::vector<double>> per_codeword_dists(n);
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    std::vector<const std::vector<double>*> one{&dataset.samples[i].image};
    auto patches = make_patch_batch(mc, one);
    auto features = encode(patches, ckpt.student);
    std::vector<int> indices;
    std::vector<double> sq;
    assign_nearest(cb, features->values.data(), g * g, indices, sq);
    for (int c = 0; c < g * g; ++c) per_codeword_dists[indices[c]].push_back(sq[c]);
    res.index_grids.push_back(std::move(indices));
    sample_dists[i] = std::move(sq);
  }

  // global per-codeword distance quantiles define the shell thresholds, so
  // the fine binning is the same partition for every domain
  std::vector<std::vector<double>> thresholds(n);
  for (int k = 0; k < n; ++k) {
    auto& d = per_codeword_dists[k];
    std::sort(d.begin(), d.end());
    for (int s = 1; s < sub_bins; ++s) {
      if (d.empty()) {
        thresholds[k].push_back(0.0);
      } else {
        const std::size_t pos =
            std::min(d.size() - 1, d.size() * static_cast<std::size_t>(s) / sub_bins);
        thresholds[k].push_back(d[pos]);
      }
    }
  }

  const int m = dataset.manifest.domains;
  res.domain_usage.assign(m, std::vector<double>(n, 0.0));
  res.domain_fine.assign(m, std::vector<double>(static_cast<std::size_t>(n) * sub_bins, 0.0));
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const int dom = dataset.samples[i].domain;
    for (int c = 0; c < g * g; ++c) {
      const int idx = res.index_grids[i][c];
      res.domain_usage[dom][idx] += 1.0;
      int shell = 0;
      for (double t : thresholds[idx])
        if (sample_dists[i][c] > t) ++shell;
      res.domain_fine[dom][static_cast<std::size_t>(idx) * sub_bins + shell] += 1.0;
    }
  }

  res.l1_coarse.assign(m, std::vector<double>(m, 0.0));
  res.l1_fine.assign(m, std::vector<double>(m, 0.0));
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      if (a == b) continue;
      res.l1_coarse[a][b] = histogram_l1(res.domain_usage[a], res.domain_usage[b]);
      res.l1_fine[a][b] = histogram_l1(res.domain_fine[a], res.domain_fine[b]);
    }
  return res;
}

nlohmann::json loo_report_json(const LooResult& loo, const RunConfig& config,
                               double wall_time_sec) {
  nlohmann::json j;
  j["schema"] = "ddg-loo-report-v1";
  j["config_hash"] = hex64(config_hash(config));
  j["seed"] = config.seed;
  j["wall_time_sec"] = wall_time_sec;
  j["average_target_accuracy_pct"] = loo.average * 100.0;
  j["gs"] = loo.gs * 100.0;
  auto runs = nlohmann::json::array();
  for (const auto& run : loo.runs) {
    nlohmann::json r;
    r["target_domain"] = run.target_domain;
    r["target_accuracy_pct"] = run.target_accuracy * 100.0;
    r["best_val_accuracy_pct"] = run.best_val_accuracy * 100.0;
    runs.push_back(r);
  }
  j["runs"] = runs;
  return j;
}

std::string loo_report_csv(const LooResult& loo, const RunConfig& config) {
  std::ostringstream os;
  os << "target_domain,target_accuracy_pct,best_val_accuracy_pct,config_hash\n";
  const std::string hash = hex64(config_hash(config));
  for (const auto& run : loo.runs)
    os << run.target_domain << ',' << fmt(run.target_accuracy * 100.0) << ','
       << fmt(run.best_val_accuracy * 100.0) << ',' << hash << '\n';
  return os.str();
}

nlohmann::json ablation_report_json(const std::vector<AblationRow>& rows,
                                    const RunConfig& config, double wall_time_sec) {
  nlohmann::json j;
  j["schema"] = "ddg-ablation-report-v1";
  j["config_hash"] = hex64(config_hash(config));
  j["seed"] = config.seed;
  j["wall_time_sec"] = wall_time_sec;
  auto arr = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r;
    r["row"] = row.id;
    r["description"] = row.description;
    r["quantize"] = row.quantize;
    r["commitment"] = row.commitment;
    r["mode"] = row.mode == CodebookMode::kEma     ? "ema"
                : row.mode == CodebookMode::kSgdVq ? "sgd-vq"
                                                   : "frozen";
    r["mean_target_accuracy_pct"] = row.mean_target_accuracy * 100.0;
    auto seeds = nlohmann::json::array();
    for (double a : row.per_seed_target_accuracy) seeds.push_back(a * 100.0);
    r["per_seed_target_accuracy_pct"] = seeds;
    arr.push_back(r);
  }
  j["rows"] = arr;
  return j;
}

std::string ablation_report_csv(const std::vector<AblationRow>& rows,
                                const RunConfig& config) {
  std::ostringstream os;
  os << "row,description,mean_target_accuracy_pct,config_hash\n";
  const std::string hash = hex64(config_hash(config));
  for (const auto& row : rows)
    os << row.id << ",\"" << row.description << "\","
       << fmt(row.mean_target_accuracy * 100.0) << ',' << hash << '\n';
  return os.str();
}

nlohmann::json gap_report_json(const GapReport& report) {
  nlohmann::json j;
  j["schema"] = "ddg-gap-report-v1";
  j["b_phi"] = report.b_phi;
  j["continuous_gap"] = report.continuous_gap;
  j["discrete_gap"] = report.discrete_gap;
  auto arr = nlohmann::json::array();
  for (const auto& c : report.intervals) {
    nlohmann::json i;
    i["lo"] = c.lo;
    i["hi"] = c.hi;
    i["continuous"] = c.continuous;
    i["discrete"] = c.discrete;
    i["equality"] = c.equality;
    arr.push_back(i);
  }
  j["intervals"] = arr;
  return j;
}

nlohmann::json theorem_suite_json(const TheoremSuiteResult& result) {
  nlohmann::json j;
  j["schema"] = "ddg-theorem-suite-v1";
  j["cases"] = result.cases;
  j["violations"] = result.violations;
  j["max_excess"] = result.max_excess;
  j["max_equality_error"] = result.max_equality_error;
  return j;
}

nlohmann::json inspection_json(const InspectionResult& res, const RunConfig& config) {
  nlohmann::json j;
  j["schema"] = "ddg-inspection-report-v1";
  j["config_hash"] = hex64(config_hash(config));
  j["num_codewords"] = res.num_codewords;
  j["sub_bins"] = res.sub_bins;
  j["domain_usage"] = res.domain_usage;
  j["l1_coarse"] = res.l1_coarse;
  j["l1_fine"] = res.l1_fine;
  return j;
}

std::string inspection_index_csv(const InspectionResult& res,
                                 const DomainDataset& dataset) {
  std::ostringstream os;
  os << "sample,domain,label";
  for (int c = 0; c < res.grid * res.grid; ++c) os << ",cell" << c;
  os << '\n';
  for (std::size_t i = 0; i < res.index_grids.size(); ++i) {
    os << i << ',' << dataset.samples[i].domain << ',' << dataset.samples[i].label;
    for (int idx : res.index_grids[i]) os << ',' << idx;
    os << '\n';
  }
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace ddg
