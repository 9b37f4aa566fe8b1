#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ddg/codebook.hpp"
#include "ddg/data.hpp"
#include "ddg/model.hpp"

namespace ddg {

struct RunConfig {
  DatasetManifest manifest;
  std::vector<DomainSpec> specs;

  int target_domain = 0;
  int iterations = 2000;
  int batch_size = 32;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lr_decay_at = 0.8;      // fraction of total iterations
  double lr_decay_factor = 0.1;

  LossWeights weights;
  bool quantize = true;          // off = identity passthrough (ablation row I)
  int codebook_size = 64;
  double codebook_gamma = 0.99;
  CodebookMode codebook_mode = CodebookMode::kEma;

  int hidden = 32;
  int feature_dim = 16;
  double teacher_decay = 0.999;

  double val_fraction = 0.2;
  int val_interval = 50;
  std::uint64_t seed = 7;

  ModelConfig model_config() const {
    ModelConfig mc;
    mc.image_side = manifest.image_side;
    mc.patch_size = manifest.patch_size;
    mc.hidden = hidden;
    mc.feature_dim = feature_dim;
    mc.classes = manifest.classes;
    return mc;
  }
  void validate() const;
};

struct Checkpoint {
  std::uint32_t version = 1;
  RunConfig config;
  ModelParams student;
  TeacherState teacher;
  Codebook codebook;
  std::uint64_t iteration = 0;
  double best_val_accuracy = 0.0;
};

std::vector<char> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<char>& bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a over the serialized RunConfig; recorded in reports so they refuse
// to aggregate across mismatched configs.
std::uint64_t config_hash(const RunConfig& config);

struct TrainLogEntry {
  int iteration = 0;
  double loss = 0.0;
  double l_cla = 0.0;
  double l_con = 0.0;
  double l_comm = 0.0;
  double val_accuracy = 0.0;
  double perplexity = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;  // best source-validation snapshot
  std::vector<TrainLogEntry> log;
};

// `on_snapshot`, when set, fires every time a new best-validation checkpoint
// is taken; a NaN abort therefore leaves the last good checkpoint behind.
TrainResult train(const RunConfig& config, const DomainDataset& dataset,
                  const std::function<void(const Checkpoint&)>& on_snapshot = {});

// Argmax accuracy over the given sample indices.
double evaluate(const Checkpoint& ckpt, const DomainDataset& dataset,
                const std::vector<int>& indices);
// Accuracy per domain id, dataset order.
std::vector<double> evaluate_per_domain(const Checkpoint& ckpt,
                                        const DomainDataset& dataset);

struct LooRun {
  int target_domain = 0;
  double target_accuracy = 0.0;
  double best_val_accuracy = 0.0;
  Checkpoint checkpoint;
};

struct LooResult {
  std::vector<LooRun> runs;  // one per domain, domain order
  double average = 0.0;
  double gs = 0.0;
};

// One model per held-out domain; per-target seeds derived from the master
// seed so domain order never matters. Runs fan out over `jobs` threads.
LooResult leave_one_out(const RunConfig& config_template, const DomainDataset& dataset,
                        int jobs = 1);

struct AblationRow {
  std::string id;           // "I".."VI"
  std::string description;
  bool quantize = false;
  bool commitment = false;
  CodebookMode mode = CodebookMode::kFrozen;
  std::vector<double> per_seed_target_accuracy;  // LOO average per master seed
  double mean_target_accuracy = 0.0;
};

// Applies one ablation row's toggles to a config template.
RunConfig apply_ablation_row(const RunConfig& config_template, const AblationRow& row);
std::vector<AblationRow> ablation_rows();

// Six-row component ablation, each row averaged over `seeds` master seeds.
std::vector<AblationRow> ablate(const RunConfig& config_template,
                                const DomainDataset& dataset, int seeds, int jobs = 1);

}  // namespace ddg
