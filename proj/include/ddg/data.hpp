#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddg/rng.hpp"

namespace ddg {

// Per-domain style: pixel' = gain*pixel + bias + pattern + noise. Classes
// carry the semantics (shape motifs); domains only restyle them.
struct DomainSpec {
  int domain_id = 0;
  double gain = 1.0;
  double bias = 0.0;
  double noise_amplitude = 0.0;
  int pattern = 0;  // 0 none, 1 horizontal stripes, 2 vertical stripes, 3 checker
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  int classes = 5;
  int domains = 4;
  int samples_per_domain = 500;
  int image_side = 28;
  int patch_size = 4;
};

struct Sample {
  std::vector<double> image;  // image_side^2, row-major
  int label = 0;
  int domain = 0;
};

struct DomainDataset {
  DatasetManifest manifest;
  std::vector<DomainSpec> specs;
  std::vector<Sample> samples;  // grouped by domain, manifest order
};

// The class motif before any styling; identical across domains for a given
// (seed, instance index).
std::vector<double> render_motif(const DatasetManifest& manifest, int label,
                                 int instance_index);
// Deterministic background pattern value at (row, col) for a spec.
double pattern_value(const DomainSpec& spec, int row, int col);

DomainDataset generate(const DatasetManifest& manifest,
                       const std::vector<DomainSpec>& specs);

// Stock style roster: distinct gain/bias/noise/pattern per domain.
std::vector<DomainSpec> default_domain_specs(int domains);

// Indices into dataset.samples, restricted to `domains`, stratified by
// (domain, class). Validation gets round(fraction * stratum size) samples.
struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
};

SplitIndices split_train_val(const DomainDataset& dataset, const std::vector<int>& domains,
                             double fraction, std::uint64_t seed);

// Seeded epoch shuffle; chunks of batch_size, last short batch kept.
class Batches {
 public:
  Batches(std::vector<int> indices, int batch_size, std::uint64_t epoch_seed);
  // Fills `out` with the next batch of sample indices; false when exhausted.
  bool next(std::vector<int>& out);

 private:
  std::vector<int> order_;
  int batch_size_;
  std::size_t cursor_ = 0;
};

void write_dataset(const std::string& path, const DomainDataset& dataset);
DomainDataset read_dataset(const std::string& path);

}  // namespace ddg
