#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ddg/codebook.hpp"
#include "ddg/rng.hpp"

using namespace ddg;

namespace {

FeatureGrid grid_1x1(std::vector<double> v) {
  FeatureGrid g;
  g.height = 1;
  g.width = 1;
  g.channels = static_cast<int>(v.size());
  g.values = std::move(v);
  return g;
}

Codebook codebook_from(std::vector<std::vector<double>> words) {
  const int n = static_cast<int>(words.size());
  const int d = static_cast<int>(words[0].size());
  Codebook cb = init_codebook(n, d, 0.99, CodebookMode::kEma, 1);
  for (int k = 0; k < n; ++k)
    for (int c = 0; c < d; ++c) cb.codewords->values[k * d + c] = words[k][c];
  return cb;
}

}  // namespace

TEST_CASE("init: counts all one, codewords equal sums, seeds reproduce") {
  auto a = init_codebook(16, 4, 0.99, CodebookMode::kEma, 42);
  auto b = init_codebook(16, 4, 0.99, CodebookMode::kEma, 42);
  for (double c : a.ema_counts) CHECK(c == 1.0);
  CHECK(a.codewords->values == a.ema_sums);
  CHECK(a.codewords->values == b.codewords->values);
  auto c = init_codebook(16, 4, 0.99, CodebookMode::kEma, 43);
  CHECK(a.codewords->values != c.codewords->values);
  CHECK_THROWS_AS(init_codebook(0, 4, 0.99, CodebookMode::kEma, 1), std::invalid_argument);
}

TEST_CASE("quantize maps to the nearest codeword") {
  // brute-force distances: 1, 4, 0.25 -> third codeword wins
  auto cb = codebook_from({{1.0, 0.0}, {0.0, 2.0}, {-0.5, 0.0}});
  auto res = quantize(grid_1x1({0.0, 0.0}), cb);
  CHECK(res.indices[0] == 2);
  CHECK(res.sq_distances[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(res.quantized.values[0] == -0.5);
  CHECK(res.quantized.values[1] == 0.0);
}

TEST_CASE("quantize: exact codeword match has zero distance") {
  auto cb = codebook_from({{1.0, 0.0}, {0.0, 2.0}});
  auto res = quantize(grid_1x1({0.0, 2.0}), cb);
  CHECK(res.indices[0] == 1);
  CHECK(res.sq_distances[0] == 0.0);
}

TEST_CASE("quantize ties break toward the lowest index") {
  auto cb = codebook_from({{1.0, 0.0}, {0.0, 0.0}});
  auto res = quantize(grid_1x1({0.5, 0.0}), cb);
  CHECK(res.indices[0] == 0);
}

TEST_CASE("quantize rejects dimension mismatch") {
  auto cb = codebook_from({{1.0, 0.0}});
  FeatureGrid g = grid_1x1({1.0, 2.0, 3.0});
  CHECK_THROWS_AS(quantize(g, cb), std::invalid_argument);
}

TEST_CASE("quantization is idempotent") {
  Rng rng(5);
  auto cb = init_codebook(8, 3, 0.99, CodebookMode::kEma, 9);
  FeatureGrid g;
  g.height = 4;
  g.width = 4;
  g.channels = 3;
  g.values.resize(48);
  for (double& v : g.values) v = rng.normal();
  auto first = quantize(g, cb);
  auto second = quantize(first.quantized, cb);
  CHECK(second.indices == first.indices);
  for (double d : second.sq_distances) CHECK(d == 0.0);
}

TEST_CASE("straight-through contract is elementwise exact") {
  Rng rng(3);
  auto cb = init_codebook(4, 2, 0.99, CodebookMode::kEma, 17);
  std::vector<double> zv(10);
  for (double& v : zv) v = rng.normal();
  auto z = make_tensor({5, 2}, zv, true);
  std::vector<int> indices;
  auto zq = quantize_st(z, cb, &indices);
  // arbitrary downstream loss
  auto w = make_tensor({5, 2}, {0.3, -1.0, 0.7, 0.2, 0.1, 0.9, -0.4, 0.5, 1.1, -0.2});
  auto loss = sum(mul(zq, w));
  backward(loss);
  // gradient at z must equal the gradient at zq, i.e. the weights, exactly
  for (std::size_t i = 0; i < zv.size(); ++i) CHECK(z->grad[i] == w->values[i]);
}

TEST_CASE("straight-through plus commitment adds the commitment term") {
  auto cb = codebook_from({{0.0, 0.0}});
  auto z = make_tensor({1, 2}, {1.0, 0.0}, true);
  std::vector<int> indices;
  auto zq = quantize_st(z, cb, &indices);
  auto loss = add(sum(zq), commitment_loss(z, zq->values));
  backward(loss);
  // ST contributes 1 per coordinate, commitment contributes 2(z-zq)/count
  CHECK(z->grad[0] == doctest::Approx(1.0 + 1.0).epsilon(1e-15));
  CHECK(z->grad[1] == doctest::Approx(1.0 + 0.0).epsilon(1e-15));
}

TEST_CASE("commitment loss value and gradient under the mean convention") {
  auto z = make_tensor({1, 2}, {1.0, 0.0}, true);
  std::vector<double> zq = {0.0, 0.0};
  auto loss = commitment_loss(z, zq);
  CHECK(loss->values[0] == doctest::Approx(0.5).epsilon(1e-15));
  backward(loss);
  CHECK(z->grad[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(z->grad[1] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("commitment loss is zero at a fixed point") {
  auto z = make_tensor({2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(commitment_loss(z, z->values)->values[0] == 0.0);
}

TEST_CASE("vq loss trains selected codewords only") {
  auto cb = init_codebook(3, 2, 0.99, CodebookMode::kSgdVq, 8);
  cb.codewords->values = {0.0, 0.0, 5.0, 5.0, -5.0, -5.0};
  std::vector<double> z = {1.0, 0.0};
  auto loss = vq_loss_sgd(cb, z, {0});
  CHECK(loss->values[0] == doctest::Approx(0.5).epsilon(1e-15));
  backward(loss);
  CHECK(cb.codewords->grad[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(cb.codewords->grad[1] == doctest::Approx(0.0).epsilon(1e-15));
  for (int i = 2; i < 6; ++i) CHECK(cb.codewords->grad[i] == 0.0);
}

TEST_CASE("vq loss is rejected in EMA mode") {
  auto cb = init_codebook(3, 2, 0.99, CodebookMode::kEma, 8);
  std::vector<double> z = {1.0, 0.0};
  CHECK_THROWS_AS(vq_loss_sgd(cb, z, {0}), std::runtime_error);
}

TEST_CASE("ema update with gamma=0 is one k-means step") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    auto cb = init_codebook(4, 2, 0.0, CodebookMode::kEma, 100 + trial);
    const int rows = 8;
    std::vector<double> z(rows * 2);
    for (double& v : z) v = rng.normal();
    std::vector<int> indices, counts(4, 0);
    std::vector<double> sq;
    assign_nearest(cb, z.data(), rows, indices, sq);
    std::vector<double> centroid(8, 0.0);
    for (int r = 0; r < rows; ++r) {
      ++counts[indices[r]];
      centroid[indices[r] * 2] += z[r * 2];
      centroid[indices[r] * 2 + 1] += z[r * 2 + 1];
    }
    ema_update(cb, z.data(), rows, indices);
    for (int v = 0; v < 4; ++v) {
      if (counts[v] == 0) continue;
      CHECK(std::abs(cb.codewords->values[v * 2] - centroid[v * 2] / counts[v]) < 1e-12);
      CHECK(std::abs(cb.codewords->values[v * 2 + 1] - centroid[v * 2 + 1] / counts[v]) <
            1e-12);
    }
  }
}

TEST_CASE("ema recurrence worked example") {
  auto cb = init_codebook(1, 2, 0.99, CodebookMode::kEma, 5);
  cb.ema_counts = {1.0};
  cb.ema_sums = {0.0, 0.0};
  cb.codewords->values = {0.0, 0.0};
  std::vector<double> z = {1.0, 1.0, 3.0, 3.0};
  ema_update(cb, z.data(), 2, {0, 0});
  CHECK(cb.ema_counts[0] == doctest::Approx(1.01).epsilon(1e-15));
  CHECK(cb.ema_sums[0] == doctest::Approx(0.04).epsilon(1e-15));
  CHECK(std::abs(cb.codewords->values[0] - 0.04 / 1.01) < 1e-12);
  CHECK(std::abs(cb.codewords->values[0] - 0.039604) < 1e-6);
}

TEST_CASE("ema invariant holds after every update, unassigned codewords decay") {
  Rng rng(2);
  auto cb = init_codebook(6, 3, 0.99, CodebookMode::kEma, 77);
  for (int step = 0; step < 50; ++step) {
    const int rows = 5;
    std::vector<double> z(rows * 3);
    for (double& v : z) v = rng.normal();
    std::vector<int> indices;
    std::vector<double> sq;
    assign_nearest(cb, z.data(), rows, indices, sq);
    const auto counts_before = cb.ema_counts;
    ema_update(cb, z.data(), rows, indices);
    for (int v = 0; v < 6; ++v) {
      for (int c = 0; c < 3; ++c)
        CHECK(std::abs(cb.codewords->values[v * 3 + c] -
                       cb.ema_sums[v * 3 + c] / cb.ema_counts[v]) < 1e-12);
      bool assigned = false;
      for (int idx : indices) assigned |= (idx == v);
      if (!assigned)
        CHECK(cb.ema_counts[v] == doctest::Approx(0.99 * counts_before[v]).epsilon(1e-15));
    }
  }
}

TEST_CASE("ema update rejects wrong mode and mismatched assignment") {
  auto cb = init_codebook(2, 2, 0.99, CodebookMode::kSgdVq, 1);
  std::vector<double> z = {0.0, 0.0};
  CHECK_THROWS_AS(ema_update(cb, z.data(), 1, {0}), std::runtime_error);
  auto cb2 = init_codebook(2, 2, 0.99, CodebookMode::kEma, 1);
  CHECK_THROWS_AS(ema_update(cb2, z.data(), 1, {0, 1}), std::invalid_argument);
}

TEST_CASE("codeword stats: degenerate, uniform, and mixed usage") {
  CHECK(codeword_stats({0, 0, 0}, 4).perplexity == doctest::Approx(1.0));
  CHECK(codeword_stats({0, 0, 0}, 4).dead == 3);

  std::vector<int> uniform;
  for (int v = 0; v < 8; ++v) uniform.push_back(v);
  CHECK(codeword_stats(uniform, 8).perplexity == doctest::Approx(8.0).epsilon(1e-12));

  // usage (2,1,1): entropy of (0.5,0.25,0.25) = 1.5 bits -> 2^1.5
  auto stats = codeword_stats({0, 0, 1, 2}, 3);
  CHECK(stats.perplexity == doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-12));
  CHECK(stats.histogram[0] == 2);
  CHECK(stats.dead == 0);
  CHECK_THROWS_AS(codeword_stats({}, 3), std::invalid_argument);
}
