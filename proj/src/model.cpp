#include "ddg/model.hpp"

#include <cmath>
#include <stdexcept>

#include "ddg/rng.hpp"

namespace ddg {

namespace {

TensorPtr random_matrix(int rows, int cols, Rng& rng, bool requires_grad) {
  std::vector<double> v(static_cast<std::size_t>(rows) * cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& x : v) x = scale * rng.normal();
  return make_tensor({rows, cols}, std::move(v), requires_grad);
}

}  // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed, bool requires_grad) {
  if (config.image_side % config.patch_size != 0)
    throw std::invalid_argument("init_model: image side not divisible by patch size");
  Rng rng(seed);
  ModelParams p;
  p.enc_w1 = random_matrix(config.hidden, config.patch_dim(), rng, requires_grad);
  p.enc_b1 = zeros({config.hidden}, requires_grad);
  p.enc_w2 = random_matrix(config.feature_dim, config.hidden, rng, requires_grad);
  p.enc_b2 = zeros({config.feature_dim}, requires_grad);
  p.cls_w = random_matrix(config.classes, config.feature_dim, rng, requires_grad);
  p.cls_b = zeros({config.classes}, requires_grad);
  return p;
}

ModelParams clone_params(const ModelParams& params, bool requires_grad) {
  ModelParams out;
  auto copy = [requires_grad](const TensorPtr& t) {
    return make_tensor(t->shape, t->values, requires_grad);
  };
  out.enc_w1 = copy(params.enc_w1);
  out.enc_b1 = copy(params.enc_b1);
  out.enc_w2 = copy(params.enc_w2);
  out.enc_b2 = copy(params.enc_b2);
  out.cls_w = copy(params.cls_w);
  out.cls_b = copy(params.cls_b);
  return out;
}

TeacherState init_teacher(const ModelParams& student, double decay) {
  if (decay < 0.0 || decay >= 1.0)
    throw std::invalid_argument("init_teacher: decay must lie in [0,1)");
  TeacherState t;
  t.params = clone_params(student, /*requires_grad=*/false);
  t.decay = decay;
  return t;
}

void teacher_ema_update(TeacherState& teacher, const ModelParams& student) {
  const auto t_params = teacher.params.all();
  const auto s_params = student.all();
  const double d = teacher.decay;
  for (std::size_t k = 0; k < t_params.size(); ++k) {
    if (t_params[k]->shape != s_params[k]->shape)
      throw std::invalid_argument("teacher_ema_update: shape mismatch");
    for (std::size_t i = 0; i < t_params[k]->values.size(); ++i)
      t_params[k]->values[i] =
          d * t_params[k]->values[i] + (1.0 - d) * s_params[k]->values[i];
  }
}

TensorPtr make_patch_batch(const ModelConfig& config,
                           const std::vector<const std::vector<double>*>& images) {
  const int s = config.image_side, p = config.patch_size, g = config.grid();
  const int pd = config.patch_dim();
  const int rows_per_image = g * g;
  std::vector<double> packed(static_cast<std::size_t>(images.size()) * rows_per_image * pd);
  std::size_t row = 0;
  for (const auto* image : images) {
    if (static_cast<int>(image->size()) != s * s)
      throw std::invalid_argument("make_patch_batch: image size mismatch");
    for (int pr = 0; pr < g; ++pr)
      for (int pc = 0; pc < g; ++pc) {
        double* dst = packed.data() + row * pd;
        for (int r = 0; r < p; ++r)
          for (int c = 0; c < p; ++c)
            dst[r * p + c] = (*image)[(pr * p + r) * s + (pc * p + c)];
        ++row;
      }
  }
  return make_tensor({static_cast<int>(images.size()) * rows_per_image, pd},
                     std::move(packed));
}

TensorPtr encode(const TensorPtr& patches, const ModelParams& params) {
  auto h = relu(linear(patches, params.enc_w1, params.enc_b1));
  return linear(h, params.enc_w2, params.enc_b2);
}

TensorPtr classify(const TensorPtr& features, const ModelParams& params, int grid_cells) {
  auto pooled = mean_pool_rows(features, grid_cells);
  return linear(pooled, params.cls_w, params.cls_b);
}

TensorPtr total_loss(const TensorPtr& student_logits, const TensorPtr& teacher_logits,
                     const std::vector<int>& labels, const TensorPtr& comm,
                     const LossWeights& weights) {
  if (weights.temperature <= 0.0)
    throw std::invalid_argument("total_loss: temperature must be positive");
  if (weights.alpha < 0.0 || weights.beta < 0.0)
    throw std::invalid_argument("total_loss: weights must be nonnegative");
  auto loss = cross_entropy_batch(student_logits, labels);
  if (weights.alpha != 0.0) {
    auto teacher_const =
        make_tensor(teacher_logits->shape, teacher_logits->values, false);
    auto con = kl_consistency_batch(student_logits, teacher_const, weights.temperature);
    loss = add(loss, scale(con, weights.alpha));
  }
  if (weights.beta != 0.0) {
    if (!comm) throw std::invalid_argument("total_loss: beta != 0 requires a commitment term");
    loss = add(loss, scale(comm, weights.beta));
  }
  return loss;
}

ForwardResult forward_pass(const ModelConfig& config,
                           const std::vector<const std::vector<double>*>& images,
                           const ModelParams& params, const Codebook* cb) {
  ForwardResult res;
  auto patches = make_patch_batch(config, images);
  res.features = encode(patches, params);
  if (cb) {
    res.quantized = quantize_st(res.features, *cb, &res.assignments);
  } else {
    res.quantized = res.features;
  }
  res.logits = classify(res.quantized, params, config.grid() * config.grid());
  return res;
}

}  // namespace ddg
