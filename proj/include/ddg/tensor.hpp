#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ddg {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major tensor of 64-bit floats participating in a dynamically
// built reverse-mode tape. Interior nodes keep shared_ptrs to their parents,
// so the graph for one loss lives exactly as long as the loss tensor.
//
// Reduction order is fixed (plain sequential loops everywhere); identical
// inputs give bitwise identical outputs.
class Tensor {
 public:
  std::vector<int> shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until backward touches this node

  std::vector<TensorPtr> parents;
  // Reads this->grad and accumulates into parents' grad buffers.
  std::function<void(Tensor&)> backprop;
  bool backward_done = false;

  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
  bool is_scalar() const { return values.size() == 1; }
  bool needs_grad() const { return requires_grad || !parents.empty(); }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

TensorPtr make_tensor(std::vector<int> shape, std::vector<double> values,
                      bool requires_grad = false);
TensorPtr make_scalar(double value, bool requires_grad = false);
TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);

// Elementwise, matching shapes.
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& x, double c);
TensorPtr relu(const TensorPtr& x);

// [m,k] x [k,n] -> [m,n]
TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
// x:[B,in], w:[out,in], b:[out] -> [B,out]; rows are independent samples.
TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);

// Row-wise over the last dimension.
TensorPtr softmax(const TensorPtr& x);
TensorPtr log_softmax(const TensorPtr& x);

// Reductions to scalar.
TensorPtr sum(const TensorPtr& x);
TensorPtr mean(const TensorPtr& x);
TensorPtr mean_sq(const TensorPtr& x);  // mean of squared entries

// x:[B*group, d] -> [B, d], averaging each consecutive block of `group` rows.
TensorPtr mean_pool_rows(const TensorPtr& x, int group);
// x:[N,d], indices over [0,N) -> [K,d]; backward scatter-adds into x.
TensorPtr gather_rows(const TensorPtr& x, const std::vector<int>& indices);

// -log softmax(logits)[label]; gradient softmax(logits) - onehot(label).
TensorPtr cross_entropy(const TensorPtr& logits, int label);
// Mean cross-entropy over rows of [B,C].
TensorPtr cross_entropy_batch(const TensorPtr& logits, const std::vector<int>& labels);

// KL(softmax(s/T) || softmax(t/T)); the teacher side is a constant, gradient
// flows into `student` only. Batch form averages KL over rows.
TensorPtr kl_consistency(const TensorPtr& student, const TensorPtr& teacher, double temperature);
TensorPtr kl_consistency_batch(const TensorPtr& student, const TensorPtr& teacher,
                               double temperature);

// Identity forward onto precomputed values, gradient copied to z unchanged.
// This is the straight-through rule used by the codebook quantizer.
TensorPtr straight_through(const TensorPtr& z, std::vector<double> quantized_values);

// Reverse-mode sweep from a scalar loss. Populates grad for every tensor with
// needs_grad() reachable from the loss. A second backward on the same loss
// throws.
void backward(const TensorPtr& loss);

void clear_grad(const std::vector<TensorPtr>& tensors);

}  // namespace ddg
