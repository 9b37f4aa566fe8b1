#include "ddg/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace ddg {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::runtime_error("config: unknown key '" + it.key() + "' in " + context);
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

CodebookMode parse_mode(const std::string& s) {
  if (s == "ema") return CodebookMode::kEma;
  if (s == "sgd-vq") return CodebookMode::kSgdVq;
  if (s == "frozen") return CodebookMode::kFrozen;
  throw std::runtime_error("config: codebook_mode must be ema, sgd-vq, or frozen");
}

}  // namespace

LabConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config: parse error in " + path + ": " + e.what());
  }
  check_keys(root, {"dataset", "run", "output"}, "top level");

  LabConfig cfg;
  const auto base = std::filesystem::absolute(path).parent_path();

  if (root.contains("dataset")) {
    const json& d = root.at("dataset");
    check_keys(d,
               {"seed", "classes", "domains", "samples_per_domain", "image_side",
                "patch_size", "domain_specs"},
               "dataset");
    DatasetManifest& m = cfg.run.manifest;
    get_if(d, "seed", m.seed);
    get_if(d, "classes", m.classes);
    get_if(d, "domains", m.domains);
    get_if(d, "samples_per_domain", m.samples_per_domain);
    get_if(d, "image_side", m.image_side);
    get_if(d, "patch_size", m.patch_size);
    if (d.contains("domain_specs")) {
      const json& arr = d.at("domain_specs");
      if (static_cast<int>(arr.size()) != m.domains)
        throw std::runtime_error("config: domain_specs must list one entry per domain");
      cfg.run.specs.clear();
      int id = 0;
      for (const json& s : arr) {
        check_keys(s, {"gain", "bias", "noise", "pattern"}, "domain_specs");
        DomainSpec spec;
        spec.domain_id = id++;
        get_if(s, "gain", spec.gain);
        get_if(s, "bias", spec.bias);
        get_if(s, "noise", spec.noise_amplitude);
        get_if(s, "pattern", spec.pattern);
        cfg.run.specs.push_back(spec);
      }
    }
  }
  if (cfg.run.specs.empty())
    cfg.run.specs = default_domain_specs(cfg.run.manifest.domains);

  if (root.contains("run")) {
    const json& r = root.at("run");
    check_keys(r,
               {"target_domain", "iterations", "batch_size", "lr", "momentum",
                "weight_decay", "lr_decay_at", "lr_decay_factor", "alpha", "beta", "eta",
                "temperature", "quantize", "codebook_size", "codebook_gamma",
                "codebook_mode", "hidden", "feature_dim", "teacher_decay",
                "val_fraction", "val_interval", "seed", "ablation_seeds"},
               "run");
    RunConfig& c = cfg.run;
    get_if(r, "target_domain", c.target_domain);
    get_if(r, "iterations", c.iterations);
    get_if(r, "batch_size", c.batch_size);
    get_if(r, "lr", c.lr);
    get_if(r, "momentum", c.momentum);
    get_if(r, "weight_decay", c.weight_decay);
    get_if(r, "lr_decay_at", c.lr_decay_at);
    get_if(r, "lr_decay_factor", c.lr_decay_factor);
    get_if(r, "alpha", c.weights.alpha);
    get_if(r, "beta", c.weights.beta);
    get_if(r, "eta", c.weights.eta);
    get_if(r, "temperature", c.weights.temperature);
    get_if(r, "quantize", c.quantize);
    get_if(r, "codebook_size", c.codebook_size);
    get_if(r, "codebook_gamma", c.codebook_gamma);
    if (r.contains("codebook_mode"))
      c.codebook_mode = parse_mode(r.at("codebook_mode").get<std::string>());
    get_if(r, "hidden", c.hidden);
    get_if(r, "feature_dim", c.feature_dim);
    get_if(r, "teacher_decay", c.teacher_decay);
    get_if(r, "val_fraction", c.val_fraction);
    get_if(r, "val_interval", c.val_interval);
    get_if(r, "seed", c.seed);
    get_if(r, "ablation_seeds", cfg.ablation_seeds);
  }

  cfg.output_dir = ".";
  if (root.contains("output")) {
    const json& o = root.at("output");
    check_keys(o, {"dataset", "dir"}, "output");
    if (o.contains("dataset"))
      cfg.dataset_path = (base / o.at("dataset").get<std::string>()).string();
    if (o.contains("dir")) cfg.output_dir = (base / o.at("dir").get<std::string>()).string();
  }
  if (cfg.output_dir == ".") cfg.output_dir = base.string();
  return cfg;
}

}  // namespace ddg
