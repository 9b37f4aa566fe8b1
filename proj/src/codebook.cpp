#include "ddg/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ddg {

Codebook init_codebook(int num_codewords, int dim, double gamma, CodebookMode mode,
                       std::uint64_t seed) {
  if (num_codewords < 1 || dim < 1)
    throw std::invalid_argument("init_codebook: N and dim must be >= 1");
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("init_codebook: gamma must lie in [0,1]");
  Codebook cb;
  cb.num_codewords = num_codewords;
  cb.dim = dim;
  cb.gamma = gamma;
  cb.mode = mode;
  cb.ema_counts.assign(num_codewords, 1.0);
  cb.ema_sums.resize(static_cast<std::size_t>(num_codewords) * dim);
  Rng rng(seed);
  for (double& v : cb.ema_sums) v = rng.normal();
  cb.codewords = make_tensor({num_codewords, dim}, cb.ema_sums,
                             /*requires_grad=*/mode == CodebookMode::kSgdVq);
  return cb;
}

void assign_nearest(const Codebook& cb, const double* z, int rows,
                    std::vector<int>& indices, std::vector<double>& sq_distances) {
  indices.resize(rows);
  sq_distances.resize(rows);
  const int n = cb.num_codewords, d = cb.dim;
  const double* cw = cb.codewords->values.data();
  for (int r = 0; r < rows; ++r) {
    const double* v = z + static_cast<std::size_t>(r) * d;
    int best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      const double* e = cw + static_cast<std::size_t>(k) * d;
      double dist = 0.0;
      for (int c = 0; c < d; ++c) {
        const double diff = v[c] - e[c];
        dist += diff * diff;
      }
      if (dist < best_dist) {  // strict: ties keep the lowest index
        best_dist = dist;
        best = k;
      }
    }
    indices[r] = best;
    sq_distances[r] = best_dist;
  }
}

QuantizeResult quantize(const FeatureGrid& z, const Codebook& cb) {
  if (z.channels != cb.dim)
    throw std::invalid_argument("quantize: feature channels != codeword dim");
  QuantizeResult res;
  assign_nearest(cb, z.values.data(), z.cells(), res.indices, res.sq_distances);
  res.quantized.height = z.height;
  res.quantized.width = z.width;
  res.quantized.channels = z.channels;
  res.quantized.values.resize(z.values.size());
  res.quantized.assignment = res.indices;
  const double* cw = cb.codewords->values.data();
  for (int r = 0; r < z.cells(); ++r)
    for (int c = 0; c < cb.dim; ++c)
      res.quantized.values[static_cast<std::size_t>(r) * cb.dim + c] =
          cw[static_cast<std::size_t>(res.indices[r]) * cb.dim + c];
  return res;
}

TensorPtr quantize_st(const TensorPtr& z, const Codebook& cb,
                      std::vector<int>* indices_out) {
  if (z->shape.size() != 2 || z->shape[1] != cb.dim)
    throw std::invalid_argument("quantize_st: expected z:[rows, dim]");
  const int rows = z->shape[0];
  std::vector<int> indices;
  std::vector<double> sq;
  assign_nearest(cb, z->values.data(), rows, indices, sq);
  std::vector<double> qvals(z->values.size());
  const double* cw = cb.codewords->values.data();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cb.dim; ++c)
      qvals[static_cast<std::size_t>(r) * cb.dim + c] =
          cw[static_cast<std::size_t>(indices[r]) * cb.dim + c];
  if (indices_out) *indices_out = std::move(indices);
  return straight_through(z, std::move(qvals));
}

TensorPtr commitment_loss(const TensorPtr& z, const std::vector<double>& zq_values) {
  if (zq_values.size() != z->values.size())
    throw std::invalid_argument("commitment_loss: shape mismatch");
  auto zq_const = make_tensor(z->shape, zq_values, /*requires_grad=*/false);
  return mean_sq(sub(z, zq_const));
}

TensorPtr vq_loss_sgd(Codebook& cb, const std::vector<double>& z_values,
                      const std::vector<int>& indices) {
  if (cb.mode != CodebookMode::kSgdVq)
    throw std::runtime_error("vq_loss_sgd: codebook is not in SGD-VQ mode");
  if (z_values.size() != indices.size() * static_cast<std::size_t>(cb.dim))
    throw std::invalid_argument("vq_loss_sgd: value/index count mismatch");
  auto selected = gather_rows(cb.codewords, indices);
  auto z_const = make_tensor(selected->shape, z_values, /*requires_grad=*/false);
  return mean_sq(sub(selected, z_const));
}

void ema_update(Codebook& cb, const double* z, int rows, const std::vector<int>& indices,
                Rng* resurrect_rng) {
  if (cb.mode != CodebookMode::kEma)
    throw std::runtime_error("ema_update: codebook is not in EMA mode");
  if (static_cast<int>(indices.size()) != rows)
    throw std::invalid_argument("ema_update: assignment/grid mismatch");
  const int n = cb.num_codewords, d = cb.dim;
  const double g = cb.gamma;

  std::vector<double> batch_count(n, 0.0);
  std::vector<double> batch_sum(static_cast<std::size_t>(n) * d, 0.0);
  for (int r = 0; r < rows; ++r) {
    const int v = indices[r];
    if (v < 0 || v >= n) throw std::invalid_argument("ema_update: index out of range");
    batch_count[v] += 1.0;
    for (int c = 0; c < d; ++c)
      batch_sum[static_cast<std::size_t>(v) * d + c] +=
          z[static_cast<std::size_t>(r) * d + c];
  }

  double* cw = cb.codewords->values.data();
  for (int v = 0; v < n; ++v) {
    cb.ema_counts[v] = g * cb.ema_counts[v] + (1.0 - g) * batch_count[v];
    for (int c = 0; c < d; ++c) {
      const std::size_t i = static_cast<std::size_t>(v) * d + c;
      cb.ema_sums[i] = g * cb.ema_sums[i] + (1.0 - g) * batch_sum[i];
    }
    // floor keeps the division finite after long disuse; in normal runs the
    // count stays well above it
    const double denom = std::max(cb.ema_counts[v], 1e-12);
    for (int c = 0; c < d; ++c) {
      const std::size_t i = static_cast<std::size_t>(v) * d + c;
      cw[i] = cb.ema_sums[i] / denom;
    }
  }

  if (cb.resurrect_dead && resurrect_rng && rows > 0) {
    for (int v = 0; v < n; ++v) {
      if (batch_count[v] > 0.0 || cb.ema_counts[v] > 1e-3) continue;
      const int r = static_cast<int>(resurrect_rng->uniform_index(rows));
      for (int c = 0; c < d; ++c) {
        const std::size_t i = static_cast<std::size_t>(v) * d + c;
        cb.ema_sums[i] = z[static_cast<std::size_t>(r) * d + c];
        cw[i] = cb.ema_sums[i];
      }
      cb.ema_counts[v] = 1.0;
    }
  }
}

CodewordStats codeword_stats(const std::vector<int>& assignments, int num_codewords) {
  if (assignments.empty())
    throw std::invalid_argument("codeword_stats: no assignments");
  CodewordStats stats;
  stats.histogram.assign(num_codewords, 0);
  for (int idx : assignments) {
    if (idx < 0 || idx >= num_codewords)
      throw std::invalid_argument("codeword_stats: index out of range");
    ++stats.histogram[idx];
  }
  const double total = static_cast<double>(assignments.size());
  double entropy = 0.0;
  for (std::int64_t count : stats.histogram) {
    if (count == 0) {
      ++stats.dead;
      continue;
    }
    const double p = static_cast<double>(count) / total;
    entropy -= p * std::log(p);
  }
  stats.perplexity = std::exp(entropy);
  return stats;
}

}  // namespace ddg
