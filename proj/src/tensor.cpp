#include "ddg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace ddg {

namespace {

std::int64_t shape_product(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

void check_finite(const Tensor& t, const char* op) {
  for (double v : t.values) {
    if (!std::isfinite(v))
      throw std::runtime_error(std::string("non-finite output in op ") + op);
  }
}

void check_same_shape(const TensorPtr& a, const TensorPtr& b, const char* op) {
  if (a->shape != b->shape)
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

TensorPtr node(std::vector<int> shape, std::vector<double> values,
               std::vector<TensorPtr> parents,
               std::function<void(Tensor&)> backprop, const char* op) {
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  t->parents = std::move(parents);
  t->backprop = std::move(backprop);
  check_finite(*t, op);
  return t;
}

int last_dim(const Tensor& t) {
  if (t.shape.empty()) throw std::invalid_argument("rank-0 tensor");
  return t.shape.back();
}

// Row-wise log-softmax into out; max-subtraction for stability, fixed
// left-to-right summation.
void log_softmax_rows(const std::vector<double>& x, int cols, std::vector<double>& out) {
  out.resize(x.size());
  const std::int64_t rows = static_cast<std::int64_t>(x.size()) / cols;
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* row = x.data() + r * cols;
    double mx = row[0];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, row[c]);
    double denom = 0.0;
    for (int c = 0; c < cols; ++c) denom += std::exp(row[c] - mx);
    const double log_denom = std::log(denom);
    for (int c = 0; c < cols; ++c) out[r * cols + c] = row[c] - mx - log_denom;
  }
}

}  // namespace

TensorPtr make_tensor(std::vector<int> shape, std::vector<double> values,
                      bool requires_grad) {
  if (shape_product(shape) != static_cast<std::int64_t>(values.size()))
    throw std::invalid_argument("make_tensor: values length does not match shape");
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  t->requires_grad = requires_grad;
  check_finite(*t, "make_tensor");
  return t;
}

TensorPtr make_scalar(double value, bool requires_grad) {
  return make_tensor({1}, {value}, requires_grad);
}

TensorPtr zeros(std::vector<int> shape, bool requires_grad) {
  std::vector<double> v(static_cast<std::size_t>(shape_product(shape)), 0.0);
  return make_tensor(std::move(shape), std::move(v), requires_grad);
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "add");
  std::vector<double> out(a->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->values[i] + b->values[i];
  return node(a->shape, std::move(out), {a, b},
              [](Tensor& t) {
                for (int p = 0; p < 2; ++p) {
                  Tensor& par = *t.parents[p];
                  if (!par.needs_grad()) continue;
                  par.ensure_grad();
                  for (std::size_t i = 0; i < t.grad.size(); ++i) par.grad[i] += t.grad[i];
                }
              },
              "add");
}

TensorPtr sub(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> out(a->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->values[i] - b->values[i];
  return node(a->shape, std::move(out), {a, b},
              [](Tensor& t) {
                Tensor& pa = *t.parents[0];
                Tensor& pb = *t.parents[1];
                if (pa.needs_grad()) {
                  pa.ensure_grad();
                  for (std::size_t i = 0; i < t.grad.size(); ++i) pa.grad[i] += t.grad[i];
                }
                if (pb.needs_grad()) {
                  pb.ensure_grad();
                  for (std::size_t i = 0; i < t.grad.size(); ++i) pb.grad[i] -= t.grad[i];
                }
              },
              "sub");
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> out(a->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->values[i] * b->values[i];
  return node(a->shape, std::move(out), {a, b},
              [](Tensor& t) {
                Tensor& pa = *t.parents[0];
                Tensor& pb = *t.parents[1];
                if (pa.needs_grad()) {
                  pa.ensure_grad();
                  for (std::size_t i = 0; i < t.grad.size(); ++i)
                    pa.grad[i] += t.grad[i] * pb.values[i];
                }
                if (pb.needs_grad()) {
                  pb.ensure_grad();
                  for (std::size_t i = 0; i < t.grad.size(); ++i)
                    pb.grad[i] += t.grad[i] * pa.values[i];
                }
              },
              "mul");
}

TensorPtr scale(const TensorPtr& x, double c) {
  std::vector<double> out(x->values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x->values[i];
  return node(x->shape, std::move(out), {x},
              [c](Tensor& t) {
                Tensor& p = *t.parents[0];
                if (!p.needs_grad()) return;
                p.ensure_grad();
                for (std::size_t i = 0; i < t.grad.size(); ++i) p.grad[i] += c * t.grad[i];
              },
              "scale");
}

TensorPtr relu(const TensorPtr& x) {
  std::vector<double> out(x->values.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = x->values[i] > 0.0 ? x->values[i] : 0.0;
  return node(x->shape, std::move(out), {x},
              [](Tensor& t) {
                Tensor& p = *t.parents[0];
                if (!p.needs_grad()) return;
                p.ensure_grad();
                // subgradient at 0 is taken as 0
                for (std::size_t i = 0; i < t.grad.size(); ++i)
                  if (p.values[i] > 0.0) p.grad[i] += t.grad[i];
              },
              "relu");
}

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
  if (a->shape.size() != 2 || b->shape.size() != 2 || a->shape[1] != b->shape[0])
    throw std::invalid_argument("matmul: shapes do not conform");
  const int m = a->shape[0], k = a->shape[1], n = b->shape[1];
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) acc += a->values[i * k + l] * b->values[l * n + j];
      out[i * n + j] = acc;
    }
  return node({m, n}, std::move(out), {a, b},
              [m, k, n](Tensor& t) {
                Tensor& pa = *t.parents[0];
                Tensor& pb = *t.parents[1];
                if (pa.needs_grad()) {
                  pa.ensure_grad();
                  for (int i = 0; i < m; ++i)
                    for (int l = 0; l < k; ++l) {
                      double acc = 0.0;
                      for (int j = 0; j < n; ++j)
                        acc += t.grad[i * n + j] * pb.values[l * n + j];
                      pa.grad[i * k + l] += acc;
                    }
                }
                if (pb.needs_grad()) {
                  pb.ensure_grad();
                  for (int l = 0; l < k; ++l)
                    for (int j = 0; j < n; ++j) {
                      double acc = 0.0;
                      for (int i = 0; i < m; ++i)
                        acc += pa.values[i * k + l] * t.grad[i * n + j];
                      pb.grad[l * n + j] += acc;
                    }
                }
              },
              "matmul");
}

TensorPtr linear(const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
  if (x->shape.size() != 2 || w->shape.size() != 2 || b->shape.size() != 1)
    throw std::invalid_argument("linear: expected x:[B,in], w:[out,in], b:[out]");
  const int rows = x->shape[0], in = x->shape[1], out_dim = w->shape[0];
  if (w->shape[1] != in || b->shape[0] != out_dim)
    throw std::invalid_argument("linear: shapes do not conform");
  std::vector<double> out(static_cast<std::size_t>(rows) * out_dim);
  for (int r = 0; r < rows; ++r)
    for (int o = 0; o < out_dim; ++o) {
      double acc = b->values[o];
      for (int i = 0; i < in; ++i) acc += w->values[o * in + i] * x->values[r * in + i];
      out[r * out_dim + o] = acc;
    }
  return node({rows, out_dim}, std::move(out), {x, w, b},
              [rows, in, out_dim](Tensor& t) {
                Tensor& px = *t.parents[0];
                Tensor& pw = *t.parents[1];
                Tensor& pb = *t.parents[2];
                if (px.needs_grad()) {
                  px.ensure_grad();
                  for (int r = 0; r < rows; ++r)
                    for (int i = 0; i < in; ++i) {
                      double acc = 0.0;
                      for (int o = 0; o < out_dim; ++o)
                        acc += t.grad[r * out_dim + o] * pw.values[o * in + i];
                      px.grad[r * in + i] += acc;
                    }
                }
                if (pw.needs_grad()) {
                  pw.ensure_grad();
                  for (int o = 0; o < out_dim; ++o)
                    for (int i = 0; i < in; ++i) {
                      double acc = 0.0;
                      for (int r = 0; r < rows; ++r)
                        acc += t.grad[r * out_dim + o] * px.values[r * in + i];
                      pw.grad[o * in + i] += acc;
                    }
                }
                if (pb.needs_grad()) {
                  pb.ensure_grad();
                  for (int o = 0; o < out_dim; ++o) {
                    double acc = 0.0;
                    for (int r = 0; r < rows; ++r) acc += t.grad[r * out_dim + o];
                    pb.grad[o] += acc;
                  }
                }
              },
              "linear");
}

TensorPtr softmax(const TensorPtr& x) {
  const int cols = last_dim(*x);
  std::vector<double> ls;
  log_softmax_rows(x->values, cols, ls);
  std::vector<double> out(ls.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(ls[i]);
  return node(x->shape, std::move(out), {x},
              [cols](Tensor& t) {
                Tensor& p = *t.parents[0];
                if (!p.needs_grad()) return;
                p.ensure_grad();
                const std::int64_t rows = t.size() / cols;
                for (std::int64_t r = 0; r < rows; ++r) {
                  const double* y = t.values.data() + r * cols;
                  const double* g = t.grad.data() + r * cols;
                  double dot = 0.0;
                  for (int c = 0; c < cols; ++c) dot += g[c] * y[c];
                  for (int c = 0; c < cols; ++c)
                    p.grad[r * cols + c] += y[c] * (g[c] - dot);
                }
              },
              "softmax");
}

TensorPtr log_softmax(const TensorPtr& x) {
  const int cols = last_dim(*x);
  std::vector<double> out;
  log_softmax_rows(x->values, cols, out);
  return node(x->shape, std::move(out), {x},
              [cols](Tensor& t) {
                Tensor& p = *t.parents[0];
                if (!p.needs_grad()) return;
                p.ensure_grad();
                const std::int64_t rows = t.size() / cols;
                for (std::int64_t r = 0; r < rows; ++r) {
                  const double* ls = t.values.data() + r * cols;
                  const double* g = t.grad.data() + r * cols;
                  double gsum = 0.0;
                  for (int c = 0; c < cols; ++c) gsum += g[c];
                  for (int c = 0; c < cols; ++c)
                    p.grad[r * cols + c] += g[c] - std::exp(ls[c]) * gsum;
                }
              },
              "log_softmax");
}

TensorPtr sum(const TensorPtr& x) {
  double acc = 0.0;
  for (double v : x->values) acc += v;
  return node({1}, {acc}, {x},
              [](Tensor& t) {
                Tensor& p = *t.parents[0];
                if (!p.needs_grad()) return;
                p.ensure_grad();
                for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += t.grad[0];
              },
              "sum");
}

TensorPtr mean(const TensorPtr& x) {
  double acc = 0.0;
  for (double v : x->values) acc += v;
  const double n = static_cast<double>(x->values.size());
  return node({1}, {acc / n}, {x},
              [n](Tensor& t) {
                Tensor& p = *t.parents[0];
                if (!p.needs_grad()) return;
                p.ensure_grad();
                const double g = t.grad[0] / n;
                for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += g;
              },
              "mean");
}

TensorPtr mean_sq(const TensorPtr& x) {
  double acc = 0.0;
  for (double v : x->values) acc += v * v;
  const double n = static_cast<double>(x->values.size());
  return node({1}, {acc / n}, {x},
              [n](Tensor& t) {
                Tensor& p = *t.parents[0];
                if (!p.needs_grad()) return;
                p.ensure_grad();
                const double g = 2.0 * t.grad[0] / n;
                for (std::size_t i = 0; i < p.grad.size(); ++i)
                  p.grad[i] += g * p.values[i];
              },
              "mean_sq");
}

TensorPtr mean_pool_rows(const TensorPtr& x, int group) {
  if (x->shape.size() != 2) throw std::invalid_argument("mean_pool_rows: expected matrix");
  const int rows = x->shape[0], d = x->shape[1];
  if (group <= 0 || rows % group != 0)
    throw std::invalid_argument("mean_pool_rows: row count not divisible by group");
  const int out_rows = rows / group;
  std::vector<double> out(static_cast<std::size_t>(out_rows) * d, 0.0);
  for (int b = 0; b < out_rows; ++b)
    for (int g = 0; g < group; ++g)
      for (int c = 0; c < d; ++c)
        out[b * d + c] += x->values[(b * group + g) * d + c];
  for (double& v : out) v /= group;
  return node({out_rows, d}, std::move(out), {x},
              [group, d](Tensor& t) {
                Tensor& p = *t.parents[0];
                if (!p.needs_grad()) return;
                p.ensure_grad();
                const int out_rows = t.shape[0];
                for (int b = 0; b < out_rows; ++b)
                  for (int g = 0; g < group; ++g)
                    for (int c = 0; c < d; ++c)
                      p.grad[(b * group + g) * d + c] += t.grad[b * d + c] / group;
              },
              "mean_pool_rows");
}

TensorPtr gather_rows(const TensorPtr& x, const std::vector<int>& indices) {
  if (x->shape.size() != 2) throw std::invalid_argument("gather_rows: expected matrix");
  const int n = x->shape[0], d = x->shape[1];
  std::vector<double> out(indices.size() * d);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const int idx = indices[k];
    if (idx < 0 || idx >= n) throw std::invalid_argument("gather_rows: index out of range");
    std::copy_n(x->values.data() + static_cast<std::size_t>(idx) * d, d,
                out.data() + k * d);
  }
  auto idx_copy = indices;
  return node({static_cast<int>(indices.size()), d}, std::move(out), {x},
              [idx = std::move(idx_copy), d](Tensor& t) {
                Tensor& p = *t.parents[0];
                if (!p.needs_grad()) return;
                p.ensure_grad();
                for (std::size_t k = 0; k < idx.size(); ++k)
                  for (int c = 0; c < d; ++c)
                    p.grad[static_cast<std::size_t>(idx[k]) * d + c] += t.grad[k * d + c];
              },
              "gather_rows");
}

TensorPtr cross_entropy(const TensorPtr& logits, int label) {
  if (logits->shape.size() != 1)
    throw std::invalid_argument("cross_entropy: logits must be a vector");
  const int c_count = logits->shape[0];
  if (label < 0 || label >= c_count)
    throw std::invalid_argument("cross_entropy: label out of range");
  std::vector<double> ls;
  log_softmax_rows(logits->values, c_count, ls);
  return node({1}, {-ls[label]}, {logits},
              [label, ls](Tensor& t) {
                Tensor& p = *t.parents[0];
                if (!p.needs_grad()) return;
                p.ensure_grad();
                for (std::size_t c = 0; c < ls.size(); ++c) {
                  double g = std::exp(ls[c]);
                  if (static_cast<int>(c) == label) g -= 1.0;
                  p.grad[c] += t.grad[0] * g;
                }
              },
              "cross_entropy");
}

TensorPtr cross_entropy_batch(const TensorPtr& logits, const std::vector<int>& labels) {
  if (logits->shape.size() != 2)
    throw std::invalid_argument("cross_entropy_batch: logits must be [B,C]");
  const int rows = logits->shape[0], cols = logits->shape[1];
  if (static_cast<int>(labels.size()) != rows)
    throw std::invalid_argument("cross_entropy_batch: label count mismatch");
  std::vector<double> ls;
  log_softmax_rows(logits->values, cols, ls);
  double acc = 0.0;
  for (int r = 0; r < rows; ++r) {
    if (labels[r] < 0 || labels[r] >= cols)
      throw std::invalid_argument("cross_entropy_batch: label out of range");
    acc -= ls[r * cols + labels[r]];
  }
  auto labels_copy = labels;
  return node({1}, {acc / rows}, {logits},
              [labels = std::move(labels_copy), ls, rows, cols](Tensor& t) {
                Tensor& p = *t.parents[0];
                if (!p.needs_grad()) return;
                p.ensure_grad();
                const double s = t.grad[0] / rows;
                for (int r = 0; r < rows; ++r)
                  for (int c = 0; c < cols; ++c) {
                    double g = std::exp(ls[r * cols + c]);
                    if (c == labels[r]) g -= 1.0;
                    p.grad[r * cols + c] += s * g;
                  }
              },
              "cross_entropy_batch");
}

namespace {

// Shared kernel for the consistency loss; rows of `student` and `teacher`
// are logit vectors, result is the mean row KL.
TensorPtr kl_rows(const TensorPtr& student, const TensorPtr& teacher, double temperature) {
  if (temperature <= 0.0)
    throw std::invalid_argument("kl_consistency: temperature must be positive");
  check_same_shape(student, teacher, "kl_consistency");
  const int cols = last_dim(*student);
  const std::int64_t rows = student->size() / cols;
  std::vector<double> a(student->values.size()), lp, lq;
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = student->values[i] / temperature;
  log_softmax_rows(a, cols, lp);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = teacher->values[i] / temperature;
  log_softmax_rows(a, cols, lq);
  double total = 0.0;
  std::vector<double> row_kl(rows, 0.0);
  for (std::int64_t r = 0; r < rows; ++r) {
    double kl = 0.0;
    for (int c = 0; c < cols; ++c)
      kl += std::exp(lp[r * cols + c]) * (lp[r * cols + c] - lq[r * cols + c]);
    row_kl[r] = kl;
    total += kl;
  }
  return node({1}, {total / rows}, {student},
              [lp = std::move(lp), lq = std::move(lq), row_kl = std::move(row_kl), rows,
               cols, temperature](Tensor& t) {
                Tensor& p = *t.parents[0];
                if (!p.needs_grad()) return;
                p.ensure_grad();
                const double s = t.grad[0] / (rows * temperature);
                for (std::int64_t r = 0; r < rows; ++r)
                  for (int c = 0; c < cols; ++c) {
                    const double pc = std::exp(lp[r * cols + c]);
                    p.grad[r * cols + c] +=
                        s * pc * ((lp[r * cols + c] - lq[r * cols + c]) - row_kl[r]);
                  }
              },
              "kl_consistency");
}

}  // namespace

TensorPtr kl_consistency(const TensorPtr& student, const TensorPtr& teacher,
                         double temperature) {
  if (student->shape.size() != 1)
    throw std::invalid_argument("kl_consistency: logits must be vectors");
  return kl_rows(student, teacher, temperature);
}

TensorPtr kl_consistency_batch(const TensorPtr& student, const TensorPtr& teacher,
                               double temperature) {
  if (student->shape.size() != 2)
    throw std::invalid_argument("kl_consistency_batch: logits must be [B,C]");
  return kl_rows(student, teacher, temperature);
}

TensorPtr straight_through(const TensorPtr& z, std::vector<double> quantized_values) {
  if (quantized_values.size() != z->values.size())
    throw std::invalid_argument("straight_through: value length mismatch");
  return node(z->shape, std::move(quantized_values), {z},
              [](Tensor& t) {
                Tensor& p = *t.parents[0];
                if (!p.needs_grad()) return;
                p.ensure_grad();
                for (std::size_t i = 0; i < t.grad.size(); ++i) p.grad[i] += t.grad[i];
              },
              "straight_through");
}

void backward(const TensorPtr& loss) {
  if (!loss->is_scalar()) throw std::invalid_argument("backward: loss must be scalar");
  if (loss->backward_done)
    throw std::runtime_error("backward: graph already consumed; rebuild the loss");
  loss->backward_done = true;

  // Iterative post-order DFS; topo holds children before parents.
  std::vector<Tensor*> topo;
  std::unordered_set<Tensor*> visited;
  std::vector<std::pair<Tensor*, std::size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    if (next < t->parents.size()) {
      Tensor* par = t->parents[next++].get();
      if (visited.insert(par).second) stack.emplace_back(par, 0);
    } else {
      topo.push_back(t);
      stack.pop_back();
    }
  }

  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Tensor* t = *it;
    if (t->backprop && !t->grad.empty()) t->backprop(*t);
  }
}

void clear_grad(const std::vector<TensorPtr>& tensors) {
  for (const auto& t : tensors) t->grad.clear();
}

}  // namespace ddg
