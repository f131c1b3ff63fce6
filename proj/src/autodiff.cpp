// Copyright 2026 The liptraj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "liptraj/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace liptraj::ad {
namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const Mat<T>>;

template <typename T>
ConstMapMat<T> View(const Node<T>& n) {
  return ConstMapMat<T>(n.value.data(), n.shape.rows, n.shape.cols);
}
template <typename T>
ConstMapMat<T> GradView(const Node<T>& n) {
  return ConstMapMat<T>(n.grad.data(), n.shape.rows, n.shape.cols);
}
template <typename T>
MapMat<T> AccumView(Node<T>& n) {
  n.EnsureGrad();
  return MapMat<T>(n.grad.data(), n.shape.rows, n.shape.cols);
}

template <typename T>
using BackwardFn = std::function<void(const Node<T>&)>;

template <typename T>
bool NeedsGrad(const Tape<T>& tape, std::initializer_list<const Tensor<T>*> inputs) {
  if (!tape.recording()) return false;
  for (const Tensor<T>* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
Tensor<T> Emit(Tape<T>& tape, Shape shape, std::vector<T> value, bool needs_grad,
               BackwardFn<T> fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->value = std::move(value);
  if (needs_grad) {
    node->requires_grad = true;
    node->backward = std::move(fn);
    tape.Record(node);
  }
  return Tensor<T>(std::move(node));
}

[[noreturn]] void ShapeError(const char* kind, const std::string& detail) {
  Fail(ErrorKind::kShape, std::string(kind) + ": " + detail);
}

void RequireSame(const char* kind, const Shape& a, const Shape& b) {
  if (!(a == b)) ShapeError(kind, ToString(a) + " vs " + ToString(b));
}

template <typename T>
T Sigm(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
Tensor<T> Elementwise(Tape<T>& tape, const Tensor<T>& x, T (*f)(T), T (*df_from_y)(T, T)) {
  std::vector<T> out(x.size());
  const auto xv = x.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  auto px = x.shared();
  return Emit<T>(tape, x.shape(), std::move(out), NeedsGrad(tape, {&x}),
                 [px, df_from_y](const Node<T>& self) {
                   px->EnsureGrad();
                   for (size_t i = 0; i < self.grad.size(); ++i) {
                     px->grad[i] += self.grad[i] * df_from_y(px->value[i], self.value[i]);
                   }
                 });
}

std::vector<uint8_t> AllRows(int n) { return std::vector<uint8_t>(static_cast<size_t>(n), 1); }

}  // namespace

std::string ToString(const Shape& s) {
  std::ostringstream os;
  os << '(' << s.rows << " x " << s.cols << ')';
  return os.str();
}

std::vector<uint8_t> SeqLayout::RowMask() const {
  std::vector<uint8_t> mask(static_cast<size_t>(rows()), 0);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < time; ++t) mask[static_cast<size_t>(Row(b, t))] = Valid(b, t) ? 1 : 0;
  }
  return mask;
}

// --- Tensor / Tape -------------------------------------------------------------

template <typename T>
Tensor<T> Tensor<T>::Constant(Shape shape, std::vector<T> values) {
  if (values.size() != shape.size()) {
    ShapeError("constant", ToString(shape) + " with " + std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->value = std::move(values);
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::Zeros(Shape shape) {
  return Constant(shape, std::vector<T>(shape.size(), T(0)));
}

template <typename T>
Tensor<T> Tensor<T>::Leaf(Shape shape, std::vector<T> values, bool requires_grad) {
  Tensor t = Constant(shape, std::move(values));
  t.node_->requires_grad = requires_grad;
  return t;
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) Fail(ErrorKind::kContract, "item() on non-scalar " + ToString(shape()));
  return node_->value[0];
}

template <typename T>
void Tape<T>::Record(const std::shared_ptr<Node<T>>& node) {
  node->tape_id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
}

template <typename T>
void Tape<T>::Backward(const Tensor<T>& loss) {
  if (!(loss.shape() == Shape{1, 1})) {
    Fail(ErrorKind::kContract, "backward needs a scalar loss, got " + ToString(loss.shape()));
  }
  if (!loss.requires_grad()) {
    nodes_.clear();
    return;
  }
  loss.node()->EnsureGrad();
  loss.node()->grad[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node<T>& n = **it;
    if (!n.grad.empty() && n.backward) n.backward(n);
  }
  for (auto& n : nodes_) {
    n->backward = nullptr;
    n->grad.clear();
  }
  nodes_.clear();
}

// --- primitives --------------------------------------------------------------

template <typename T>
Tensor<T> MatMul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) ShapeError("matmul", ToString(a.shape()) + " x " + ToString(b.shape()));
  const Shape shape{a.rows(), b.cols()};
  std::vector<T> out(shape.size());
  MapMat<T>(out.data(), shape.rows, shape.cols).noalias() = View(*a.node()) * View(*b.node());
  auto pa = a.shared(), pb = b.shared();
  return Emit<T>(tape, shape, std::move(out), NeedsGrad(tape, {&a, &b}), [pa, pb](const Node<T>& self) {
    if (pa->requires_grad) AccumView(*pa).noalias() += GradView(self) * View(*pb).transpose();
    if (pb->requires_grad) AccumView(*pb).noalias() += View(*pa).transpose() * GradView(self);
  });
}

template <typename T>
Tensor<T> Add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  RequireSame("add", a.shape(), b.shape());
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  auto pa = a.shared(), pb = b.shared();
  return Emit<T>(tape, a.shape(), std::move(out), NeedsGrad(tape, {&a, &b}), [pa, pb](const Node<T>& self) {
    for (auto* p : {pa.get(), pb.get()}) {
      if (!p->requires_grad) continue;
      p->EnsureGrad();
      for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> Mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  RequireSame("mul", a.shape(), b.shape());
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  auto pa = a.shared(), pb = b.shared();
  return Emit<T>(tape, a.shape(), std::move(out), NeedsGrad(tape, {&a, &b}), [pa, pb](const Node<T>& self) {
    if (pa->requires_grad) {
      pa->EnsureGrad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      pb->EnsureGrad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i] * pa->value[i];
    }
  });
}

template <typename T>
Tensor<T> Scale(Tape<T>& tape, const Tensor<T>& a, T s) {
  std::vector<T> out(a.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * s;
  auto pa = a.shared();
  return Emit<T>(tape, a.shape(), std::move(out), NeedsGrad(tape, {&a}), [pa, s](const Node<T>& self) {
    pa->EnsureGrad();
    for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * s;
  });
}

template <typename T>
Tensor<T> AddBias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    ShapeError("add_bias", ToString(x.shape()) + " + " + ToString(bias.shape()));
  }
  const int n = x.rows(), m = x.cols();
  std::vector<T> out(x.value().begin(), x.value().end());
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < m; ++c) out[static_cast<size_t>(r) * m + c] += bias.value()[c];
  }
  auto px = x.shared(), pb = bias.shared();
  return Emit<T>(tape, x.shape(), std::move(out), NeedsGrad(tape, {&x, &bias}),
                 [px, pb, n, m](const Node<T>& self) {
                   if (px->requires_grad) {
                     px->EnsureGrad();
                     for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
                   }
                   if (pb->requires_grad) {
                     pb->EnsureGrad();
                     for (int r = 0; r < n; ++r) {
                       for (int c = 0; c < m; ++c) pb->grad[c] += self.grad[static_cast<size_t>(r) * m + c];
                     }
                   }
                 });
}

template <typename T>
Tensor<T> AddGroupBroadcast(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y, int group_rows) {
  if (group_rows <= 0 || y.cols() != x.cols() || y.rows() * group_rows != x.rows()) {
    ShapeError("add_group_broadcast", ToString(x.shape()) + " + " + ToString(y.shape()) +
                                          " groups of " + std::to_string(group_rows));
  }
  const int n = x.rows(), m = x.cols();
  std::vector<T> out(x.value().begin(), x.value().end());
  for (int r = 0; r < n; ++r) {
    const size_t yr = static_cast<size_t>(r / group_rows) * m;
    for (int c = 0; c < m; ++c) out[static_cast<size_t>(r) * m + c] += y.value()[yr + c];
  }
  auto px = x.shared(), py = y.shared();
  return Emit<T>(tape, x.shape(), std::move(out), NeedsGrad(tape, {&x, &y}),
                 [px, py, n, m, group_rows](const Node<T>& self) {
                   if (px->requires_grad) {
                     px->EnsureGrad();
                     for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
                   }
                   if (py->requires_grad) {
                     py->EnsureGrad();
                     for (int r = 0; r < n; ++r) {
                       const size_t yr = static_cast<size_t>(r / group_rows) * m;
                       for (int c = 0; c < m; ++c) py->grad[yr + c] += self.grad[static_cast<size_t>(r) * m + c];
                     }
                   }
                 });
}

template <typename T>
Tensor<T> ConcatCols(Tape<T>& tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) ShapeError("concat_cols", "no inputs");
  const int n = parts.front().rows();
  int m = 0;
  bool needs = false;
  for (const auto& p : parts) {
    if (p.rows() != n) ShapeError("concat_cols", ToString(parts.front().shape()) + " vs " + ToString(p.shape()));
    m += p.cols();
    needs = needs || NeedsGrad(tape, {&p});
  }
  std::vector<T> out(static_cast<size_t>(n) * m);
  int offset = 0;
  std::vector<std::shared_ptr<Node<T>>> nodes;
  std::vector<int> offsets;
  for (const auto& p : parts) {
    const int pc = p.cols();
    for (int r = 0; r < n; ++r) {
      std::copy_n(p.value().data() + static_cast<size_t>(r) * pc, pc,
                  out.data() + static_cast<size_t>(r) * m + offset);
    }
    nodes.push_back(p.shared());
    offsets.push_back(offset);
    offset += pc;
  }
  return Emit<T>(tape, {n, m}, std::move(out), needs, [nodes, offsets, n, m](const Node<T>& self) {
    for (size_t k = 0; k < nodes.size(); ++k) {
      Node<T>& p = *nodes[k];
      if (!p.requires_grad) continue;
      p.EnsureGrad();
      const int pc = p.shape.cols;
      for (int r = 0; r < n; ++r) {
        const T* g = self.grad.data() + static_cast<size_t>(r) * m + offsets[k];
        T* d = p.grad.data() + static_cast<size_t>(r) * pc;
        for (int c = 0; c < pc; ++c) d[c] += g[c];
      }
    }
  });
}

template <typename T>
Tensor<T> ConcatRows(Tape<T>& tape, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) ShapeError("concat_rows", "no inputs");
  const int m = parts.front().cols();
  int n = 0;
  bool needs = false;
  for (const auto& p : parts) {
    if (p.cols() != m) ShapeError("concat_rows", ToString(parts.front().shape()) + " vs " + ToString(p.shape()));
    n += p.rows();
    needs = needs || NeedsGrad(tape, {&p});
  }
  std::vector<T> out;
  out.reserve(static_cast<size_t>(n) * m);
  std::vector<std::shared_ptr<Node<T>>> nodes;
  for (const auto& p : parts) {
    out.insert(out.end(), p.value().begin(), p.value().end());
    nodes.push_back(p.shared());
  }
  return Emit<T>(tape, {n, m}, std::move(out), needs, [nodes](const Node<T>& self) {
    size_t offset = 0;
    for (const auto& p : nodes) {
      const size_t sz = p->value.size();
      if (p->requires_grad) {
        p->EnsureGrad();
        for (size_t i = 0; i < sz; ++i) p->grad[i] += self.grad[offset + i];
      }
      offset += sz;
    }
  });
}

template <typename T>
Tensor<T> SliceCols(Tape<T>& tape, const Tensor<T>& x, int start, int len) {
  if (start < 0 || len < 0 || start + len > x.cols()) {
    ShapeError("slice_cols", ToString(x.shape()) + " [" + std::to_string(start) + ", +" + std::to_string(len) + ")");
  }
  const int n = x.rows(), m = x.cols();
  std::vector<T> out(static_cast<size_t>(n) * len);
  for (int r = 0; r < n; ++r) {
    std::copy_n(x.value().data() + static_cast<size_t>(r) * m + start, len,
                out.data() + static_cast<size_t>(r) * len);
  }
  auto px = x.shared();
  return Emit<T>(tape, {n, len}, std::move(out), NeedsGrad(tape, {&x}),
                 [px, n, m, start, len](const Node<T>& self) {
                   px->EnsureGrad();
                   for (int r = 0; r < n; ++r) {
                     for (int c = 0; c < len; ++c) {
                       px->grad[static_cast<size_t>(r) * m + start + c] += self.grad[static_cast<size_t>(r) * len + c];
                     }
                   }
                 });
}

template <typename T>
Tensor<T> SliceRows(Tape<T>& tape, const Tensor<T>& x, int start, int len) {
  if (start < 0 || len < 0 || start + len > x.rows()) {
    ShapeError("slice_rows", ToString(x.shape()) + " [" + std::to_string(start) + ", +" + std::to_string(len) + ")");
  }
  const int m = x.cols();
  const size_t begin = static_cast<size_t>(start) * m;
  std::vector<T> out(x.value().begin() + begin, x.value().begin() + begin + static_cast<size_t>(len) * m);
  auto px = x.shared();
  return Emit<T>(tape, {len, m}, std::move(out), NeedsGrad(tape, {&x}), [px, begin](const Node<T>& self) {
    px->EnsureGrad();
    for (size_t i = 0; i < self.grad.size(); ++i) px->grad[begin + i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> GatherRows(Tape<T>& tape, const Tensor<T>& x, std::span<const int> indices) {
  const int m = x.cols();
  const int n = static_cast<int>(indices.size());
  std::vector<T> out(static_cast<size_t>(n) * m, T(0));
  for (int i = 0; i < n; ++i) {
    const int src = indices[i];
    if (src >= x.rows()) {
      ShapeError("gather_rows", "index " + std::to_string(src) + " into " + ToString(x.shape()));
    }
    if (src < 0) continue;
    std::copy_n(x.value().data() + static_cast<size_t>(src) * m, m, out.data() + static_cast<size_t>(i) * m);
  }
  auto px = x.shared();
  std::vector<int> idx(indices.begin(), indices.end());
  return Emit<T>(tape, {n, m}, std::move(out), NeedsGrad(tape, {&x}), [px, idx, m](const Node<T>& self) {
    px->EnsureGrad();
    for (size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0) continue;
      T* d = px->grad.data() + static_cast<size_t>(idx[i]) * m;
      const T* g = self.grad.data() + i * m;
      for (int c = 0; c < m; ++c) d[c] += g[c];
    }
  });
}

template <typename T>
Tensor<T> Embedding(Tape<T>& tape, const Tensor<T>& table, std::span<const int> ids) {
  return GatherRows(tape, table, ids);
}

template <typename T>
Tensor<T> Reshape(Tape<T>& tape, const Tensor<T>& x, int rows, int cols) {
  const Shape shape{rows, cols};
  if (shape.size() != x.size()) ShapeError("reshape", ToString(x.shape()) + " -> " + ToString(shape));
  std::vector<T> out(x.value().begin(), x.value().end());
  auto px = x.shared();
  return Emit<T>(tape, shape, std::move(out), NeedsGrad(tape, {&x}), [px](const Node<T>& self) {
    px->EnsureGrad();
    for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> Conv1d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const SeqLayout& layout) {
  const int cin = x.cols();
  if (x.rows() != layout.rows()) {
    ShapeError("conv1d", "input " + ToString(x.shape()) + " vs layout rows " + std::to_string(layout.rows()));
  }
  if (cin == 0 || weight.rows() % cin != 0 || (weight.rows() / cin) % 2 == 0) {
    ShapeError("conv1d", "weight " + ToString(weight.shape()) + " for " + std::to_string(cin) +
                             " input channels (kernel must be odd)");
  }
  const int kernel = weight.rows() / cin;
  const int cout = weight.cols();
  if (bias.defined() && (bias.rows() != 1 || bias.cols() != cout)) {
    ShapeError("conv1d", "bias " + ToString(bias.shape()) + " for " + std::to_string(cout) + " outputs");
  }
  const int pad = (kernel - 1) / 2;
  const int n = layout.rows();
  const int kc = kernel * cin;
  const std::vector<uint8_t> valid = layout.RowMask();

  auto cols = std::make_shared<std::vector<T>>(static_cast<size_t>(n) * kc, T(0));
  for (int b = 0; b < layout.batch; ++b) {
    const int len = layout.lengths[static_cast<size_t>(b)];
    for (int t = 0; t < len; ++t) {
      T* dst = cols->data() + static_cast<size_t>(layout.Row(b, t)) * kc;
      for (int k = 0; k < kernel; ++k) {
        const int src = t + k - pad;
        if (src < 0 || src >= len) continue;
        std::copy_n(x.value().data() + static_cast<size_t>(layout.Row(b, src)) * cin, cin, dst + k * cin);
      }
    }
  }
  std::vector<T> out(static_cast<size_t>(n) * cout);
  MapMat<T> out_m(out.data(), n, cout);
  out_m.noalias() = ConstMapMat<T>(cols->data(), n, kc) * View(*weight.node());
  if (bias.defined()) {
    for (int r = 0; r < n; ++r) {
      if (!valid[r]) continue;
      for (int c = 0; c < cout; ++c) out[static_cast<size_t>(r) * cout + c] += bias.value()[c];
    }
  }
  auto px = x.shared(), pw = weight.shared();
  auto pb = bias.defined() ? bias.shared() : nullptr;
  const bool needs = NeedsGrad(tape, {&x, &weight, &bias});
  return Emit<T>(tape, {n, cout}, std::move(out), needs,
                 [px, pw, pb, cols, layout, valid, n, cin, cout, kernel, kc, pad](const Node<T>& self) {
                   Mat<T> g = GradView(self);
                   for (int r = 0; r < n; ++r) {
                     if (!valid[r]) g.row(r).setZero();
                   }
                   if (pw->requires_grad) {
                     AccumView(*pw).noalias() += ConstMapMat<T>(cols->data(), n, kc).transpose() * g;
                   }
                   if (pb && pb->requires_grad) {
                     pb->EnsureGrad();
                     for (int c = 0; c < cout; ++c) pb->grad[c] += g.col(c).sum();
                   }
                   if (px->requires_grad) {
                     const Mat<T> dcols = g * View(*pw).transpose();
                     px->EnsureGrad();
                     for (int b = 0; b < layout.batch; ++b) {
                       const int len = layout.lengths[static_cast<size_t>(b)];
                       for (int t = 0; t < len; ++t) {
                         const int row = layout.Row(b, t);
                         for (int k = 0; k < kernel; ++k) {
                           const int src = t + k - pad;
                           if (src < 0 || src >= len) continue;
                           T* d = px->grad.data() + static_cast<size_t>(layout.Row(b, src)) * cin;
                           for (int c = 0; c < cin; ++c) d[c] += dcols(row, k * cin + c);
                         }
                       }
                     }
                   }
                 });
}

template <typename T>
Tensor<T> BatchNorm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    Tensor<T>& running_mean, Tensor<T>& running_var, const SeqLayout& layout,
                    bool training, T momentum, T eps) {
  const int n = x.rows(), ch = x.cols();
  if (n != layout.rows()) ShapeError("batchnorm", "input " + ToString(x.shape()) + " vs layout");
  for (const Tensor<T>* p : {&gamma, &beta, static_cast<const Tensor<T>*>(&running_mean), static_cast<const Tensor<T>*>(&running_var)}) {
    if (p->rows() != 1 || p->cols() != ch) {
      ShapeError("batchnorm", "parameter " + ToString(p->shape()) + " for " + std::to_string(ch) + " channels");
    }
  }
  const std::vector<uint8_t> valid = layout.RowMask();
  int count = 0;
  for (const uint8_t v : valid) count += v;

  std::vector<T> mean(ch, T(0)), inv_std(ch, T(0));
  if (training) {
    if (count == 0) Fail(ErrorKind::kContract, "batchnorm: no valid rows in training mode");
    std::vector<T> var(ch, T(0));
    for (int r = 0; r < n; ++r) {
      if (!valid[r]) continue;
      for (int c = 0; c < ch; ++c) mean[c] += x.value()[static_cast<size_t>(r) * ch + c];
    }
    for (int c = 0; c < ch; ++c) mean[c] /= T(count);
    for (int r = 0; r < n; ++r) {
      if (!valid[r]) continue;
      for (int c = 0; c < ch; ++c) {
        const T d = x.value()[static_cast<size_t>(r) * ch + c] - mean[c];
        var[c] += d * d;
      }
    }
    auto rm = running_mean.mutable_value();
    auto rv = running_var.mutable_value();
    for (int c = 0; c < ch; ++c) {
      var[c] /= T(count);
      inv_std[c] = T(1) / std::sqrt(var[c] + eps);
      const T unbiased = count > 1 ? var[c] * T(count) / T(count - 1) : var[c];
      rm[c] = (T(1) - momentum) * rm[c] + momentum * mean[c];
      rv[c] = (T(1) - momentum) * rv[c] + momentum * unbiased;
    }
  } else {
    for (int c = 0; c < ch; ++c) {
      mean[c] = running_mean.value()[c];
      inv_std[c] = T(1) / std::sqrt(running_var.value()[c] + eps);
    }
  }

  auto xhat = std::make_shared<std::vector<T>>(static_cast<size_t>(n) * ch, T(0));
  std::vector<T> out(static_cast<size_t>(n) * ch, T(0));
  for (int r = 0; r < n; ++r) {
    if (!valid[r]) continue;
    for (int c = 0; c < ch; ++c) {
      const size_t i = static_cast<size_t>(r) * ch + c;
      (*xhat)[i] = (x.value()[i] - mean[c]) * inv_std[c];
      out[i] = gamma.value()[c] * (*xhat)[i] + beta.value()[c];
    }
  }
  auto px = x.shared(), pg = gamma.shared(), pb = beta.shared();
  return Emit<T>(tape, x.shape(), std::move(out), NeedsGrad(tape, {&x, &gamma, &beta}),
                 [px, pg, pb, xhat, inv_std, valid, n, ch, count, training](const Node<T>& self) {
                   std::vector<T> sum_g(ch, T(0)), sum_gx(ch, T(0));
                   for (int r = 0; r < n; ++r) {
                     if (!valid[r]) continue;
                     for (int c = 0; c < ch; ++c) {
                       const size_t i = static_cast<size_t>(r) * ch + c;
                       sum_g[c] += self.grad[i];
                       sum_gx[c] += self.grad[i] * (*xhat)[i];
                     }
                   }
                   if (pg->requires_grad) {
                     pg->EnsureGrad();
                     for (int c = 0; c < ch; ++c) pg->grad[c] += sum_gx[c];
                   }
                   if (pb->requires_grad) {
                     pb->EnsureGrad();
                     for (int c = 0; c < ch; ++c) pb->grad[c] += sum_g[c];
                   }
                   if (!px->requires_grad) return;
                   px->EnsureGrad();
                   for (int r = 0; r < n; ++r) {
                     if (!valid[r]) continue;
                     for (int c = 0; c < ch; ++c) {
                       const size_t i = static_cast<size_t>(r) * ch + c;
                       const T scale = pg->value[c] * inv_std[c];
                       if (training) {
                         px->grad[i] += scale / T(count) *
                                        (T(count) * self.grad[i] - sum_g[c] - (*xhat)[i] * sum_gx[c]);
                       } else {
                         px->grad[i] += scale * self.grad[i];
                       }
                     }
                   }
                 });
}

template <typename T>
Tensor<T> Tanh(Tape<T>& tape, const Tensor<T>& x) {
  return Elementwise<T>(
      tape, x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> Sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  return Elementwise<T>(
      tape, x, [](T v) { return Sigm(v); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> Relu(Tape<T>& tape, const Tensor<T>& x) {
  return Elementwise<T>(
      tape, x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> Softmax(Tape<T>& tape, const Tensor<T>& x, std::span<const int> lengths) {
  const int n = x.rows(), m = x.cols();
  if (!lengths.empty() && static_cast<int>(lengths.size()) != n) {
    ShapeError("softmax", std::to_string(lengths.size()) + " lengths for " + ToString(x.shape()));
  }
  std::vector<int> lens(static_cast<size_t>(n), m);
  for (int r = 0; r < n && !lengths.empty(); ++r) {
    if (lengths[r] < 1 || lengths[r] > m) {
      ShapeError("softmax", "row length " + std::to_string(lengths[r]) + " outside [1, " + std::to_string(m) + "]");
    }
    lens[r] = lengths[r];
  }
  std::vector<T> out(x.size(), T(0));
  for (int r = 0; r < n; ++r) {
    const T* xr = x.value().data() + static_cast<size_t>(r) * m;
    T* yr = out.data() + static_cast<size_t>(r) * m;
    T mx = xr[0];
    for (int c = 1; c < lens[r]; ++c) mx = std::max(mx, xr[c]);
    T sum = 0;
    for (int c = 0; c < lens[r]; ++c) {
      yr[c] = std::exp(xr[c] - mx);
      sum += yr[c];
    }
    for (int c = 0; c < lens[r]; ++c) yr[c] /= sum;
  }
  auto px = x.shared();
  return Emit<T>(tape, x.shape(), std::move(out), NeedsGrad(tape, {&x}), [px, lens, n, m](const Node<T>& self) {
    px->EnsureGrad();
    for (int r = 0; r < n; ++r) {
      const size_t base = static_cast<size_t>(r) * m;
      T dot = 0;
      for (int c = 0; c < lens[r]; ++c) dot += self.grad[base + c] * self.value[base + c];
      for (int c = 0; c < lens[r]; ++c) {
        px->grad[base + c] += self.value[base + c] * (self.grad[base + c] - dot);
      }
    }
  });
}

template <typename T>
Tensor<T> Dropout(Tape<T>& tape, const Tensor<T>& x, double p, Rng& rng, bool training) {
  if (!(p >= 0.0 && p < 1.0)) Fail(ErrorKind::kContract, "dropout probability must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  const T keep_scale = T(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<T>>(x.size());
  std::vector<T> out(x.size());
  for (size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = rng.Uniform() >= p ? keep_scale : T(0);
    out[i] = x.value()[i] * (*mask)[i];
  }
  auto px = x.shared();
  return Emit<T>(tape, x.shape(), std::move(out), NeedsGrad(tape, {&x}), [px, mask](const Node<T>& self) {
    px->EnsureGrad();
    for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i] * (*mask)[i];
  });
}

template <typename T>
LstmOutput<T> LstmCell(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& h, const Tensor<T>& c,
                       const Tensor<T>& weight, const Tensor<T>& bias, std::span<const uint8_t> row_mask) {
  const int batch = x.rows(), in = x.cols(), hid = h.cols();
  if (h.rows() != batch || !(c.shape() == h.shape()) || weight.rows() != in + hid ||
      weight.cols() != 4 * hid || bias.rows() != 1 || bias.cols() != 4 * hid) {
    ShapeError("lstm_cell", "x " + ToString(x.shape()) + ", h " + ToString(h.shape()) + ", c " +
                                ToString(c.shape()) + ", weight " + ToString(weight.shape()) + ", bias " +
                                ToString(bias.shape()));
  }
  if (!row_mask.empty() && static_cast<int>(row_mask.size()) != batch) {
    ShapeError("lstm_cell", "mask of " + std::to_string(row_mask.size()) + " rows for batch " + std::to_string(batch));
  }
  std::vector<uint8_t> mask = row_mask.empty() ? AllRows(batch) : std::vector<uint8_t>(row_mask.begin(), row_mask.end());
  const int xin = in + hid;
  auto xh = std::make_shared<Mat<T>>(batch, xin);
  xh->leftCols(in) = View(*x.node());
  xh->rightCols(hid) = View(*h.node());
  Mat<T> z = (*xh) * View(*weight.node());
  for (int r = 0; r < batch; ++r) z.row(r) += ConstMapMat<T>(bias.value().data(), 1, 4 * hid);

  auto gates = std::make_shared<Mat<T>>(batch, 4 * hid);
  auto tanh_c = std::make_shared<Mat<T>>(batch, hid);
  std::vector<T> out(static_cast<size_t>(batch) * 2 * hid);
  for (int r = 0; r < batch; ++r) {
    T* hr = out.data() + static_cast<size_t>(r) * 2 * hid;
    T* cr = hr + hid;
    const T* h_prev = h.value().data() + static_cast<size_t>(r) * hid;
    const T* c_prev = c.value().data() + static_cast<size_t>(r) * hid;
    if (!mask[r]) {
      std::copy_n(h_prev, hid, hr);
      std::copy_n(c_prev, hid, cr);
      gates->row(r).setZero();
      tanh_c->row(r).setZero();
      continue;
    }
    for (int j = 0; j < hid; ++j) {
      const T ig = Sigm(z(r, j));
      const T fg = Sigm(z(r, hid + j));
      const T gg = std::tanh(z(r, 2 * hid + j));
      const T og = Sigm(z(r, 3 * hid + j));
      (*gates)(r, j) = ig;
      (*gates)(r, hid + j) = fg;
      (*gates)(r, 2 * hid + j) = gg;
      (*gates)(r, 3 * hid + j) = og;
      cr[j] = fg * c_prev[j] + ig * gg;
      (*tanh_c)(r, j) = std::tanh(cr[j]);
      hr[j] = og * (*tanh_c)(r, j);
    }
  }
  auto px = x.shared(), ph = h.shared(), pc = c.shared(), pw = weight.shared(), pb = bias.shared();
  const bool needs = NeedsGrad(tape, {&x, &h, &c, &weight, &bias});
  Tensor<T> fused = Emit<T>(
      tape, {batch, 2 * hid}, std::move(out), needs,
      [px, ph, pc, pw, pb, xh, gates, tanh_c, mask, batch, in, hid](const Node<T>& self) {
        Mat<T> dz = Mat<T>::Zero(batch, 4 * hid);
        Mat<T> dh_prev = Mat<T>::Zero(batch, hid);
        Mat<T> dc_prev = Mat<T>::Zero(batch, hid);
        for (int r = 0; r < batch; ++r) {
          const T* g = self.grad.data() + static_cast<size_t>(r) * 2 * hid;
          if (!mask[r]) {
            for (int j = 0; j < hid; ++j) {
              dh_prev(r, j) += g[j];
              dc_prev(r, j) += g[hid + j];
            }
            continue;
          }
          const T* c_prev = pc->value.data() + static_cast<size_t>(r) * hid;
          for (int j = 0; j < hid; ++j) {
            const T ig = (*gates)(r, j), fg = (*gates)(r, hid + j);
            const T gg = (*gates)(r, 2 * hid + j), og = (*gates)(r, 3 * hid + j);
            const T tc = (*tanh_c)(r, j);
            const T dh = g[j];
            const T dct = g[hid + j] + dh * og * (T(1) - tc * tc);
            dz(r, j) = dct * gg * ig * (T(1) - ig);
            dz(r, hid + j) = dct * c_prev[j] * fg * (T(1) - fg);
            dz(r, 2 * hid + j) = dct * ig * (T(1) - gg * gg);
            dz(r, 3 * hid + j) = dh * tc * og * (T(1) - og);
            dc_prev(r, j) += dct * fg;
          }
        }
        if (pw->requires_grad) AccumView(*pw).noalias() += xh->transpose() * dz;
        if (pb->requires_grad) {
          pb->EnsureGrad();
          for (int j = 0; j < 4 * hid; ++j) pb->grad[j] += dz.col(j).sum();
        }
        if (px->requires_grad || ph->requires_grad) {
          const Mat<T> dxh = dz * View(*pw).transpose();
          if (px->requires_grad) AccumView(*px) += dxh.leftCols(in);
          if (ph->requires_grad) AccumView(*ph) += dxh.rightCols(hid) + dh_prev;
        }
        if (pc->requires_grad) AccumView(*pc) += dc_prev;
      });
  return {SliceCols(tape, fused, 0, hid), SliceCols(tape, fused, hid, hid)};
}

template <typename T>
Tensor<T> GroupMatVec(Tape<T>& tape, const Tensor<T>& weights, const Tensor<T>& mem) {
  const int groups = weights.rows(), steps = weights.cols(), e = mem.cols();
  if (mem.rows() != groups * steps) {
    ShapeError("group_matvec", "weights " + ToString(weights.shape()) + " vs memory " + ToString(mem.shape()));
  }
  std::vector<T> out(static_cast<size_t>(groups) * e, T(0));
  for (int g = 0; g < groups; ++g) {
    T* o = out.data() + static_cast<size_t>(g) * e;
    for (int t = 0; t < steps; ++t) {
      const T w = weights.value()[static_cast<size_t>(g) * steps + t];
      if (w == T(0)) continue;
      const T* mr = mem.value().data() + (static_cast<size_t>(g) * steps + t) * e;
      for (int c = 0; c < e; ++c) o[c] += w * mr[c];
    }
  }
  auto pw = weights.shared(), pm = mem.shared();
  return Emit<T>(tape, {groups, e}, std::move(out), NeedsGrad(tape, {&weights, &mem}),
                 [pw, pm, groups, steps, e](const Node<T>& self) {
                   if (pw->requires_grad) pw->EnsureGrad();
                   if (pm->requires_grad) pm->EnsureGrad();
                   for (int g = 0; g < groups; ++g) {
                     const T* go = self.grad.data() + static_cast<size_t>(g) * e;
                     for (int t = 0; t < steps; ++t) {
                       const size_t row = static_cast<size_t>(g) * steps + t;
                       const T* mr = pm->value.data() + row * e;
                       if (pw->requires_grad) {
                         T dot = 0;
                         for (int c = 0; c < e; ++c) dot += go[c] * mr[c];
                         pw->grad[row] += dot;
                       }
                       if (pm->requires_grad) {
                         const T w = pw->value[row];
                         T* dm = pm->grad.data() + row * e;
                         for (int c = 0; c < e; ++c) dm[c] += w * go[c];
                       }
                     }
                   }
                 });
}

template <typename T>
Tensor<T> Sum(Tape<T>& tape, const Tensor<T>& x) {
  T s = 0;
  for (const T v : x.value()) s += v;
  auto px = x.shared();
  return Emit<T>(tape, {1, 1}, {s}, NeedsGrad(tape, {&x}), [px](const Node<T>& self) {
    px->EnsureGrad();
    for (T& g : px->grad) g += self.grad[0];
  });
}

namespace {

template <typename T>
std::vector<uint8_t> LossMask(const char* kind, const Tensor<T>& pred, const Tensor<T>& target,
                              std::span<const uint8_t> row_mask, size_t* count) {
  RequireSame(kind, pred.shape(), target.shape());
  if (!row_mask.empty() && static_cast<int>(row_mask.size()) != pred.rows()) {
    ShapeError(kind, "mask of " + std::to_string(row_mask.size()) + " rows for " + ToString(pred.shape()));
  }
  std::vector<uint8_t> mask = row_mask.empty() ? AllRows(pred.rows())
                                               : std::vector<uint8_t>(row_mask.begin(), row_mask.end());
  size_t rows = 0;
  for (const uint8_t m : mask) rows += m ? 1 : 0;
  *count = rows * static_cast<size_t>(pred.cols());
  if (*count == 0) Fail(ErrorKind::kContract, std::string(kind) + ": mask selects no elements");
  return mask;
}

// Shared driver: value(d) and derivative(d) per element over selected rows.
template <typename T, typename ValueFn, typename GradFn>
Tensor<T> MaskedMeanLoss(Tape<T>& tape, const char* kind, const Tensor<T>& pred, const Tensor<T>& target,
                         std::span<const uint8_t> row_mask, ValueFn value_fn, GradFn grad_fn) {
  size_t count = 0;
  const std::vector<uint8_t> mask = LossMask(kind, pred, target, row_mask, &count);
  const int m = pred.cols();
  T total = 0;
  for (int r = 0; r < pred.rows(); ++r) {
    if (!mask[r]) continue;
    for (int c = 0; c < m; ++c) {
      const size_t i = static_cast<size_t>(r) * m + c;
      total += value_fn(pred.value()[i], target.value()[i]);
    }
  }
  auto pp = pred.shared(), pt = target.shared();
  const T inv = T(1) / T(count);
  return Emit<T>(tape, {1, 1}, {total * inv}, NeedsGrad(tape, {&pred}),
                 [pp, pt, mask, m, inv, grad_fn](const Node<T>& self) {
                   pp->EnsureGrad();
                   const T g = self.grad[0] * inv;
                   for (int r = 0; r < pp->shape.rows; ++r) {
                     if (!mask[r]) continue;
                     for (int c = 0; c < m; ++c) {
                       const size_t i = static_cast<size_t>(r) * m + c;
                       pp->grad[i] += g * grad_fn(pp->value[i], pt->value[i]);
                     }
                   }
                 });
}

}  // namespace

template <typename T>
Tensor<T> SmoothL1Loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target,
                       std::span<const uint8_t> row_mask, T beta) {
  if (!(beta > T(0))) Fail(ErrorKind::kContract, "smooth_l1: beta must be positive");
  return MaskedMeanLoss<T>(
      tape, "smooth_l1", pred, target, row_mask,
      [beta](T p, T t) {
        const T d = std::abs(p - t);
        return d < beta ? T(0.5) * d * d / beta : d - T(0.5) * beta;
      },
      [beta](T p, T t) {
        const T d = p - t;
        if (std::abs(d) < beta) return d / beta;
        return d > T(0) ? T(1) : T(-1);
      });
}

template <typename T>
Tensor<T> MseLoss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target,
                  std::span<const uint8_t> row_mask) {
  return MaskedMeanLoss<T>(
      tape, "mse", pred, target, row_mask, [](T p, T t) { return (p - t) * (p - t); },
      [](T p, T t) { return T(2) * (p - t); });
}

template <typename T>
Tensor<T> BceWithLogitsLoss(Tape<T>& tape, const Tensor<T>& logits, const Tensor<T>& target,
                            std::span<const uint8_t> row_mask) {
  return MaskedMeanLoss<T>(
      tape, "bce_with_logits", logits, target, row_mask,
      [](T x, T y) { return std::max(x, T(0)) - x * y + std::log1p(std::exp(-std::abs(x))); },
      [](T x, T y) { return Sigm(x) - y; });
}

// --- ParamStore --------------------------------------------------------------

template <typename T>
Tensor<T>& ParamStore<T>::Add(const std::string& name, Shape shape, std::vector<T> values, bool trainable) {
  if (entries_.count(name)) Fail(ErrorKind::kContract, "duplicate parameter name " + name);
  ParamEntry<T> entry;
  entry.tensor = Tensor<T>::Leaf(shape, std::move(values), trainable);
  entry.trainable = trainable;
  for (const auto& prefix : frozen_prefixes_) {
    if (name.rfind(prefix, 0) == 0) entry.frozen = true;
  }
  entry.tensor.node()->requires_grad = trainable && !entry.frozen;
  return entries_.emplace(name, std::move(entry)).first->second.tensor;
}

template <typename T>
Tensor<T>& ParamStore<T>::Get(const std::string& name) {
  const auto it = entries_.find(name);
  if (it == entries_.end()) Fail(ErrorKind::kContract, "unknown parameter " + name);
  return it->second.tensor;
}

template <typename T>
const Tensor<T>& ParamStore<T>::Get(const std::string& name) const {
  return Entry(name).tensor;
}

template <typename T>
const ParamEntry<T>& ParamStore<T>::Entry(const std::string& name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) Fail(ErrorKind::kContract, "unknown parameter " + name);
  return it->second;
}

template <typename T>
void ParamStore<T>::SetFrozen(const std::string& prefix, bool frozen) {
  auto pos = std::find(frozen_prefixes_.begin(), frozen_prefixes_.end(), prefix);
  if (frozen && pos == frozen_prefixes_.end()) frozen_prefixes_.push_back(prefix);
  if (!frozen && pos != frozen_prefixes_.end()) frozen_prefixes_.erase(pos);
  for (auto& [name, entry] : entries_) {
    if (name.rfind(prefix, 0) != 0) continue;
    entry.frozen = frozen;
    entry.tensor.node()->requires_grad = entry.trainable && !frozen;
  }
}

template <typename T>
bool ParamStore<T>::IsFrozen(const std::string& name) const {
  return Entry(name).frozen;
}

template <typename T>
bool ParamStore<T>::AnyFrozen(const std::string& prefix) const {
  for (const auto& [name, entry] : entries_) {
    if (name.rfind(prefix, 0) == 0 && entry.frozen) return true;
  }
  return false;
}

template <typename T>
void ParamStore<T>::ZeroGrad() {
  for (auto& [name, entry] : entries_) entry.tensor.node()->grad.clear();
}

template <typename T>
std::vector<std::string> ParamStore<T>::Names() const {
  std::vector<std::string> names;
  for (const auto& [name, entry] : entries_) names.push_back(name);
  return names;
}

template <typename T>
size_t ParamStore<T>::ParameterCount() const {
  size_t n = 0;
  for (const auto& [name, entry] : entries_) {
    if (entry.trainable) n += entry.tensor.size();
  }
  return n;
}

template <typename To, typename From>
ParamStore<To> CastParams(const ParamStore<From>& from) {
  ParamStore<To> to;
  for (const auto& [name, entry] : from.entries()) {
    const auto v = entry.tensor.value();
    to.Add(name, entry.tensor.shape(), std::vector<To>(v.begin(), v.end()), entry.trainable);
  }
  for (const auto& prefix : from.FrozenPrefixes()) to.SetFrozen(prefix, true);
  return to;
}

// --- gradient check ----------------------------------------------------------

GradCheckResult GradCheck(ParamStore<double>& params,
                          const std::function<Tensor<double>(Tape<double>&)>& loss_fn, double epsilon,
                          size_t max_coords_per_param, double floor) {
  params.ZeroGrad();
  {
    Tape<double> tape;
    const Tensor<double> loss = loss_fn(tape);
    tape.Backward(loss);
  }
  auto eval = [&]() {
    Tape<double> tape(false);
    return loss_fn(tape).item();
  };

  GradCheckResult result;
  for (const auto& name : params.Names()) {
    const ParamEntry<double>& entry = params.Entry(name);
    if (!entry.trainable || entry.frozen) continue;
    Tensor<double> tensor = entry.tensor;
    const std::vector<double> analytic =
        tensor.grad().empty() ? std::vector<double>(tensor.size(), 0.0)
                              : std::vector<double>(tensor.grad().begin(), tensor.grad().end());
    const size_t n = tensor.size();
    const size_t stride = (max_coords_per_param == 0 || n <= max_coords_per_param)
                              ? 1
                              : (n + max_coords_per_param - 1) / max_coords_per_param;
    auto values = tensor.mutable_value();
    for (size_t i = 0; i < n; i += stride) {
      const double saved = values[i];
      double f[4];
      const double offsets[4] = {2.0, 1.0, -1.0, -2.0};
      for (int k = 0; k < 4; ++k) {
        values[i] = saved + offsets[k] * epsilon;
        f[k] = eval();
      }
      values[i] = saved;
      const double numeric = (-f[0] + 8.0 * f[1] - 8.0 * f[2] + f[3]) / (12.0 * epsilon);
      const double a = analytic[i];
      const double rel = std::abs(a - numeric) / std::max(floor, std::abs(a) + std::abs(numeric));
      ++result.coordinates_checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = name;
        result.worst_index = i;
      }
    }
  }
  params.ZeroGrad();
  return result;
}

// --- instantiations ------------------------------------------------------------

#define LIPTRAJ_INSTANTIATE(T)                                                                     \
  template class Tensor<T>;                                                                        \
  template class Tape<T>;                                                                          \
  template class ParamStore<T>;                                                                    \
  template Tensor<T> MatMul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> Add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> Mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> Scale(Tape<T>&, const Tensor<T>&, T);                                         \
  template Tensor<T> AddBias(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> AddGroupBroadcast(Tape<T>&, const Tensor<T>&, const Tensor<T>&, int);         \
  template Tensor<T> ConcatCols(Tape<T>&, const std::vector<Tensor<T>>&);                          \
  template Tensor<T> ConcatRows(Tape<T>&, const std::vector<Tensor<T>>&);                          \
  template Tensor<T> SliceCols(Tape<T>&, const Tensor<T>&, int, int);                              \
  template Tensor<T> SliceRows(Tape<T>&, const Tensor<T>&, int, int);                              \
  template Tensor<T> GatherRows(Tape<T>&, const Tensor<T>&, std::span<const int>);                 \
  template Tensor<T> Embedding(Tape<T>&, const Tensor<T>&, std::span<const int>);                  \
  template Tensor<T> Reshape(Tape<T>&, const Tensor<T>&, int, int);                                \
  template Tensor<T> Conv1d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                            const SeqLayout&);                                                     \
  template Tensor<T> BatchNorm(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                               Tensor<T>&, Tensor<T>&, const SeqLayout&, bool, T, T);              \
  template Tensor<T> Tanh(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T> Sigmoid(Tape<T>&, const Tensor<T>&);                                          \
  template Tensor<T> Relu(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T> Softmax(Tape<T>&, const Tensor<T>&, std::span<const int>);                    \
  template Tensor<T> Dropout(Tape<T>&, const Tensor<T>&, double, Rng&, bool);                      \
  template LstmOutput<T> LstmCell(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
                                  const Tensor<T>&, const Tensor<T>&, std::span<const uint8_t>);   \
  template Tensor<T> GroupMatVec(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> Sum(Tape<T>&, const Tensor<T>&);                                              \
  template Tensor<T> SmoothL1Loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&,                    \
                                  std::span<const uint8_t>, T);                                    \
  template Tensor<T> MseLoss(Tape<T>&, const Tensor<T>&, const Tensor<T>&, std::span<const uint8_t>); \
  template Tensor<T> BceWithLogitsLoss(Tape<T>&, const Tensor<T>&, const Tensor<T>&,               \
                                       std::span<const uint8_t>);

LIPTRAJ_INSTANTIATE(float)
LIPTRAJ_INSTANTIATE(double)
#undef LIPTRAJ_INSTANTIATE

template ParamStore<float> CastParams<float, double>(const ParamStore<double>&);
template ParamStore<double> CastParams<double, float>(const ParamStore<float>&);
template ParamStore<float> CastParams<float, float>(const ParamStore<float>&);
template ParamStore<double> CastParams<double, double>(const ParamStore<double>&);

}  // namespace liptraj::ad
