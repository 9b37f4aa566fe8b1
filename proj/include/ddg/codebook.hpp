#pragma once

#include <cstdint>
#include <vector>

#include "ddg/rng.hpp"
#include "ddg/tensor.hpp"

namespace ddg {

enum class CodebookMode { kEma, kSgdVq, kFrozen };

// h x w grid of channel vectors, row-major over (row, col, channel).
struct FeatureGrid {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> values;
  std::vector<int> assignment;  // optional, one codeword index per cell

  int cells() const { return height * width; }
};

struct QuantizeResult {
  FeatureGrid quantized;
  std::vector<int> indices;       // one per cell
  std::vector<double> sq_distances;
};

// Discrete representation codebook with EMA accumulators. In EMA mode the
// codeword matrix is maintained as sums/counts and never receives gradients;
// in SGD-VQ mode the codeword tensor is a trainable parameter.
struct Codebook {
  int num_codewords = 0;
  int dim = 0;
  double gamma = 0.99;
  CodebookMode mode = CodebookMode::kEma;
  bool resurrect_dead = false;  // off by default; re-seeds a dead codeword
                                // from a random in-batch feature when on

  TensorPtr codewords;               // [N, dim]
  std::vector<double> ema_counts;    // N
  std::vector<double> ema_sums;      // N * dim
};

// Counts all 1, sums ~ N(0,1) per coordinate, codewords = sums.
Codebook init_codebook(int num_codewords, int dim, double gamma, CodebookMode mode,
                       std::uint64_t seed);

// Nearest codeword per row under L2, lowest index on ties. `rows` vectors of
// length cb.dim packed in `z`.
void assign_nearest(const Codebook& cb, const double* z, int rows,
                    std::vector<int>& indices, std::vector<double>& sq_distances);

QuantizeResult quantize(const FeatureGrid& z, const Codebook& cb);

// Graph-level quantization of z:[rows, dim]: output values are the selected
// codewords, backward copies the gradient to z unchanged (straight-through).
TensorPtr quantize_st(const TensorPtr& z, const Codebook& cb, std::vector<int>* indices_out);

// ||Z - sg(Z^q)||^2 under the mean convention; gradient reaches z only.
TensorPtr commitment_loss(const TensorPtr& z, const std::vector<double>& zq_values);

// ||sg(Z) - Z^q||^2 under the mean convention; gradient reaches the selected
// codeword rows only. EMA mode rejects this path.
TensorPtr vq_loss_sgd(Codebook& cb, const std::vector<double>& z_values,
                      const std::vector<int>& indices);

// N_v <- g*N_v + (1-g)|H|, m_v <- g*m_v + (1-g)*sum(H), e_v = m_v/N_v for
// every codeword, including unassigned ones (|H| = 0).
void ema_update(Codebook& cb, const double* z, int rows, const std::vector<int>& indices,
                Rng* resurrect_rng = nullptr);

struct CodewordStats {
  std::vector<std::int64_t> histogram;  // usage per codeword
  double perplexity = 0.0;              // exp(entropy of normalized usage)
  int dead = 0;                         // codewords with zero usage
};

CodewordStats codeword_stats(const std::vector<int>& assignments, int num_codewords);

}  // namespace ddg
