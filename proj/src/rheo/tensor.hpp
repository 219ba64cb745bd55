/*
 Copyright 2026 The rheo Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// Every differentiable operation takes the Tape it records onto. A tape that
// is not recording (inference) keeps nothing alive, so intermediate buffers
// are released as soon as the caller drops them.

#include <atomic>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace rheo::ad {

struct StorageStats {
  std::size_t live_bytes = 0;
  std::size_t peak_bytes = 0;
};

// Byte accounting over all tensor storage in the process.
StorageStats storage_stats() noexcept;
void reset_storage_peak() noexcept;

namespace detail {
void note_alloc(std::size_t bytes) noexcept;
void note_free(std::size_t bytes) noexcept;
}  // namespace detail

template <class T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <class U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    detail::note_alloc(n * sizeof(T));
    return std::allocator<T>{}.allocate(n);
  }
  void deallocate(T* p, std::size_t n) noexcept {
    detail::note_free(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }

  template <class U>
  bool operator==(const TrackingAllocator<U>&) const noexcept { return true; }
};

using Storage = std::vector<double, TrackingAllocator<double>>;
using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

struct TensorNode {
  Shape shape;
  Storage value;
  Storage grad;  // empty until something accumulates into it
  bool requires_grad = false;
};

class Tape;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::span<const double> values,
                     bool requires_grad = false);
  static Tensor from(Shape shape, std::initializer_list<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  // Rank-1 tensors read as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->value; }
  // Only leaves should be written through this (initializers, optimizers).
  std::span<double> mutable_data() { return node_->value; }
  double at(std::size_t i, std::size_t j) const {
    return node_->value[i * cols() + j];
  }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad();
  void zero_grad();

  // Same values, no history, no gradient.
  Tensor detached() const;

  TensorNode* node() const noexcept { return node_.get(); }
  const std::shared_ptr<TensorNode>& shared_node() const noexcept {
    return node_;
  }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;

  friend Tensor make_result(Shape shape, Storage values);
};

Tensor make_result(Shape shape, Storage values);

// Ordered record of primitive operations. Nodes are appended as results are
// produced, so the record is topologically sorted by construction.
class Tape {
 public:
  using Backward = std::function<void(std::span<const double> out_grad)>;

  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // True when `output` should carry history given its inputs.
  bool wants_grad(std::initializer_list<const Tensor*> inputs) const;
  void record(const Tensor& output, Backward backward);

  // Accumulates d(loss)/d(leaf) into every reachable requires_grad leaf.
  void backward(const Tensor& loss);
  void reset();

 private:
  struct Node {
    std::shared_ptr<TensorNode> output;
    Backward backward;
  };
  std::vector<Node> nodes_;
  bool recording_;
  bool consumed_ = false;
};

// Accumulation target for a node's gradient, allocated on first use.
Storage& grad_buffer(TensorNode& node);

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& a);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
// x[n×d] + row[d], broadcast over rows.
Tensor add_row(Tape& tape, const Tensor& x, const Tensor& row);
// x[n×d] ∘ row[d], broadcast over rows.
Tensor mul_row(Tape& tape, const Tensor& x, const Tensor& row);
Tensor gelu(Tape& tape, const Tensor& x);
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain,
                  const Tensor& bias, double eps = 1e-5);
Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts);
Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t begin,
                  std::size_t count);
Tensor sum(Tape& tape, const Tensor& x);

// Mean over columns of ||pred_c - truth_c|| / ||truth_c||. Columns whose truth
// norm is below `floor` contribute the absolute norm instead. `truth` never
// receives a gradient.
Tensor relative_l2_loss(Tape& tape, const Tensor& pred, const Tensor& truth,
                        double floor = 1e-12);

}  // namespace rheo::ad
