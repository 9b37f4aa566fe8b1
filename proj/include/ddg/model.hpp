#pragma once

#include <cstdint>
#include <vector>

#include "ddg/codebook.hpp"
#include "ddg/tensor.hpp"

namespace ddg {

struct ModelConfig {
  int image_side = 28;
  int patch_size = 4;
  int hidden = 32;
  int feature_dim = 16;  // must equal the codebook dim
  int classes = 5;

  int grid() const { return image_side / patch_size; }
  int patch_dim() const { return patch_size * patch_size; }
};

// Patch-wise two-layer MLP encoder (weights shared across patches) plus a
// linear classifier over the mean-pooled grid.
struct ModelParams {
  TensorPtr enc_w1, enc_b1;  // [hidden, patch_dim], [hidden]
  TensorPtr enc_w2, enc_b2;  // [feature_dim, hidden], [feature_dim]
  TensorPtr cls_w, cls_b;    // [classes, feature_dim], [classes]

  std::vector<TensorPtr> all() const {
    return {enc_w1, enc_b1, enc_w2, enc_b2, cls_w, cls_b};
  }
};

struct LossWeights {
  double alpha = 0.0;        // consistency
  double beta = 0.1;         // commitment
  double eta = 0.25;         // L_vq + eta*L_comm inside the SGD-VQ objective
  double temperature = 10.0;
};

struct TeacherState {
  ModelParams params;  // requires_grad = false throughout
  double decay = 0.999;
};

ModelParams init_model(const ModelConfig& config, std::uint64_t seed,
                       bool requires_grad = true);
ModelParams clone_params(const ModelParams& params, bool requires_grad);
TeacherState init_teacher(const ModelParams& student, double decay);

// teacher <- decay*teacher + (1-decay)*student, elementwise.
void teacher_ema_update(TeacherState& teacher, const ModelParams& student);

// Packs a batch of images into the [B*g*g, patch_dim] patch matrix.
TensorPtr make_patch_batch(const ModelConfig& config,
                           const std::vector<const std::vector<double>*>& images);

// Shared-weight patch MLP: [B*g*g, patch_dim] -> [B*g*g, feature_dim].
TensorPtr encode(const TensorPtr& patches, const ModelParams& params);

// Mean-pool each sample's grid, then affine to class logits: [B, classes].
TensorPtr classify(const TensorPtr& features, const ModelParams& params, int grid_cells);

// L_cla + alpha*L_con + beta*L_comm. `comm` may be null when beta is 0.
TensorPtr total_loss(const TensorPtr& student_logits, const TensorPtr& teacher_logits,
                     const std::vector<int>& labels, const TensorPtr& comm,
                     const LossWeights& weights);

struct ForwardResult {
  TensorPtr features;   // Z
  TensorPtr quantized;  // Z^q via straight-through, or Z when quantization off
  std::vector<int> assignments;
  TensorPtr logits;
};

// Full student (or teacher) pass. `cb` may be null to disable quantization
// (identity passthrough).
ForwardResult forward_pass(const ModelConfig& config,
                           const std::vector<const std::vector<double>*>& images,
                           const ModelParams& params, const Codebook* cb);

}  // namespace ddg
