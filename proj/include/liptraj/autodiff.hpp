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

#pragma once

// Reverse-mode differentiation over 2-D arrays. Sequence data is stored as
// (batch * time) x channels matrices described by a SeqLayout, so every
// primitive here is a matrix primitive.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "liptraj/error.hpp"
#include "liptraj/rng.hpp"

namespace liptraj::ad {

struct Shape {
  int rows = 0;
  int cols = 0;

  size_t size() const { return static_cast<size_t>(rows) * static_cast<size_t>(cols); }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string ToString(const Shape& s);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  int tape_id = -1;  // -1 for leaves
  std::function<void(const Node&)> backward;

  void EnsureGrad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

// Handle to a node; copies share storage.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor Constant(Shape shape, std::vector<T> values);
  static Tensor Zeros(Shape shape);
  static Tensor Leaf(Shape shape, std::vector<T> values, bool requires_grad);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rows() const { return node_->shape.rows; }
  int cols() const { return node_->shape.cols; }
  size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const T> value() const { return node_->value; }
  std::span<T> mutable_value() { return node_->value; }
  std::span<const T> grad() const { return node_->grad; }
  T at(int r, int c) const { return node_->value[static_cast<size_t>(r) * cols() + c]; }
  T item() const;

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Records primitive applications in creation (topological) order. A tape
// built with recording disabled evaluates forward only.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  size_t size() const { return nodes_.size(); }

  void Record(const std::shared_ptr<Node<T>>& node);

  // Accumulates d(loss)/d(leaf) into every leaf that requires grad, visiting
  // each recorded node once in reverse order, then clears the tape.
  void Backward(const Tensor<T>& loss);

 private:
  bool recording_;
  std::vector<std::shared_ptr<Node<T>>> nodes_;
};

// Describes how (batch, time) positions map onto matrix rows.
struct SeqLayout {
  int batch = 0;
  int time = 0;
  std::vector<int> lengths;  // valid steps per sequence
  bool time_major = false;

  int rows() const { return batch * time; }
  int Row(int b, int t) const { return time_major ? t * batch + b : b * time + t; }
  bool Valid(int b, int t) const { return t < lengths[static_cast<size_t>(b)]; }
  std::vector<uint8_t> RowMask() const;
};

template <typename T>
struct LstmOutput {
  Tensor<T> h;
  Tensor<T> c;
};

// --- primitives --------------------------------------------------------------

template <typename T> Tensor<T> MatMul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> Add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> Mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> Scale(Tape<T>& tape, const Tensor<T>& a, T s);
// x (n x m) plus a 1 x m row added to every row.
template <typename T> Tensor<T> AddBias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias);
// x has groups of group_rows consecutive rows; row r receives y.row(r / group_rows).
template <typename T>
Tensor<T> AddGroupBroadcast(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y, int group_rows);
template <typename T> Tensor<T> ConcatCols(Tape<T>& tape, const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> ConcatRows(Tape<T>& tape, const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> SliceCols(Tape<T>& tape, const Tensor<T>& x, int start, int len);
template <typename T> Tensor<T> SliceRows(Tape<T>& tape, const Tensor<T>& x, int start, int len);
// Row i of the result is x.row(indices[i]); a negative index yields zeros.
template <typename T>
Tensor<T> GatherRows(Tape<T>& tape, const Tensor<T>& x, std::span<const int> indices);
template <typename T>
Tensor<T> Embedding(Tape<T>& tape, const Tensor<T>& table, std::span<const int> ids);
template <typename T> Tensor<T> Reshape(Tape<T>& tape, const Tensor<T>& x, int rows, int cols);
// Stride 1, same padding, odd kernel. weight is (kernel * in_channels) x
// out_channels with row k * in_channels + c; bias (1 x out) may be undefined.
// Positions past a sequence's length read as zero and produce zero.
template <typename T>
Tensor<T> Conv1d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const SeqLayout& layout);
// Per-channel normalization over the valid rows. In training mode the batch
// statistics are used and the running buffers move with the given momentum.
template <typename T>
Tensor<T> BatchNorm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma,
                    const Tensor<T>& beta, Tensor<T>& running_mean, Tensor<T>& running_var,
                    const SeqLayout& layout, bool training, T momentum = T(0.1),
                    T eps = T(1e-5));
template <typename T> Tensor<T> Tanh(Tape<T>& tape, const Tensor<T>& x);
template <typename T> Tensor<T> Sigmoid(Tape<T>& tape, const Tensor<T>& x);
template <typename T> Tensor<T> Relu(Tape<T>& tape, const Tensor<T>& x);
// Row-wise softmax; entries at column >= lengths[row] are zero when lengths
// is non-empty.
template <typename T>
Tensor<T> Softmax(Tape<T>& tape, const Tensor<T>& x, std::span<const int> lengths = {});
template <typename T>
Tensor<T> Dropout(Tape<T>& tape, const Tensor<T>& x, double p, Rng& rng, bool training);
// Fused LSTM step, gate order i, f, g, o. weight is (in + hidden) x 4*hidden
// over concat(x, h). Rows with row_mask == 0 pass (h, c) through unchanged.
template <typename T>
LstmOutput<T> LstmCell(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& h, const Tensor<T>& c,
                       const Tensor<T>& weight, const Tensor<T>& bias,
                       std::span<const uint8_t> row_mask = {});
// out.row(g) = sum_t weights(g, t) * mem.row(g * T + t), T = weights.cols().
template <typename T>
Tensor<T> GroupMatVec(Tape<T>& tape, const Tensor<T>& weights, const Tensor<T>& mem);
template <typename T> Tensor<T> Sum(Tape<T>& tape, const Tensor<T>& x);

// Masked-mean losses; row_mask selects rows (all rows when empty).
template <typename T>
Tensor<T> SmoothL1Loss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target,
                       std::span<const uint8_t> row_mask, T beta);
template <typename T>
Tensor<T> MseLoss(Tape<T>& tape, const Tensor<T>& pred, const Tensor<T>& target,
                  std::span<const uint8_t> row_mask);
template <typename T>
Tensor<T> BceWithLogitsLoss(Tape<T>& tape, const Tensor<T>& logits, const Tensor<T>& target,
                            std::span<const uint8_t> row_mask);

// --- parameters --------------------------------------------------------------

template <typename T>
struct ParamEntry {
  Tensor<T> tensor;
  bool trainable = true;  // false for buffers such as batchnorm running stats
  bool frozen = false;
};

template <typename T>
class ParamStore {
 public:
  Tensor<T>& Add(const std::string& name, Shape shape, std::vector<T> values,
                 bool trainable = true);
  bool Contains(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor<T>& Get(const std::string& name);
  const Tensor<T>& Get(const std::string& name) const;
  const ParamEntry<T>& Entry(const std::string& name) const;

  // Frozen entries stop requiring grad and are skipped by optimizers.
  void SetFrozen(const std::string& prefix, bool frozen);
  bool IsFrozen(const std::string& name) const;
  bool AnyFrozen(const std::string& prefix) const;
  std::vector<std::string> FrozenPrefixes() const { return frozen_prefixes_; }

  void ZeroGrad();
  std::vector<std::string> Names() const;
  const std::map<std::string, ParamEntry<T>>& entries() const { return entries_; }
  size_t ParameterCount() const;

 private:
  std::map<std::string, ParamEntry<T>> entries_;
  std::vector<std::string> frozen_prefixes_;
};

// Converts every entry to another precision, keeping flags.
template <typename To, typename From>
ParamStore<To> CastParams(const ParamStore<From>& from);

// --- gradient checking ---------------------------------------------------------

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  size_t worst_index = 0;
  size_t coordinates_checked = 0;
};

// loss_fn builds a scalar loss on the given tape from the store's tensors and
// must be deterministic. Compares backward gradients with five-point central
// differences, error |a - n| / max(floor, |a| + |n|); the floor keeps
// gradients that are zero up to rounding from dominating. max_coords_per_param
// (0 = all) samples evenly spaced coordinates of large arrays.
GradCheckResult GradCheck(ParamStore<double>& params,
                          const std::function<Tensor<double>(Tape<double>&)>& loss_fn,
                          double epsilon = 1e-5, size_t max_coords_per_param = 0,
                          double floor = 1e-5);

}  // namespace liptraj::ad
