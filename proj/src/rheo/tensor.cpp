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

#include "rheo/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "rheo/error.hpp"

namespace rheo::ad {

namespace {

std::atomic<std::size_t> g_live_bytes{0};
std::atomic<std::size_t> g_peak_bytes{0};

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

std::size_t product(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

void check_shape(const Shape& shape) {
  if (shape.empty()) fail(ErrorCode::ShapeMismatch, "tensor shape must have rank >= 1");
  for (auto e : shape) {
    if (e == 0) fail(ErrorCode::ShapeMismatch, "tensor extents must be positive, got " + shape_string(shape));
  }
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    fail(ErrorCode::ShapeMismatch,
         std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::ShapeMismatch, std::string(op) + ": shapes " +
                                       shape_string(a.shape()) + " and " +
                                       shape_string(b.shape()) + " differ");
  }
}

void require_row_vector(const Tensor& x, const Tensor& row, const char* op) {
  require_rank2(x, op);
  if (row.size() != x.cols() || (row.rank() == 2 && row.rows() != 1)) {
    fail(ErrorCode::ShapeMismatch, std::string(op) + ": row parameter " +
                                       shape_string(row.shape()) +
                                       " does not match " +
                                       shape_string(x.shape()));
  }
}

Tensor finish(Tape& tape, Shape shape, Storage values, bool grad,
              Tape::Backward backward) {
  Tensor out = make_result(std::move(shape), std::move(values));
  if (grad) {
    out.node()->requires_grad = true;
    tape.record(out, std::move(backward));
  }
  return out;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

namespace detail {

void note_alloc(std::size_t bytes) noexcept {
  const std::size_t live = g_live_bytes.fetch_add(bytes) + bytes;
  std::size_t peak = g_peak_bytes.load();
  while (live > peak && !g_peak_bytes.compare_exchange_weak(peak, live)) {
  }
}

void note_free(std::size_t bytes) noexcept { g_live_bytes.fetch_sub(bytes); }

}  // namespace detail

StorageStats storage_stats() noexcept {
  return {g_live_bytes.load(), g_peak_bytes.load()};
}

void reset_storage_peak() noexcept { g_peak_bytes.store(g_live_bytes.load()); }

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor make_result(Shape shape, Storage values) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  Storage values(product(shape), value);
  Tensor t = make_result(std::move(shape), std::move(values));
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from(Shape shape, std::span<const double> values,
                    bool requires_grad) {
  check_shape(shape);
  if (product(shape) != values.size()) {
    fail(ErrorCode::ShapeMismatch,
         "shape " + shape_string(shape) + " does not hold " +
             std::to_string(values.size()) + " values");
  }
  Tensor t = make_result(std::move(shape), Storage(values.begin(), values.end()));
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from(Shape shape, std::initializer_list<double> values,
                    bool requires_grad) {
  return from(std::move(shape), std::span<const double>(values.begin(), values.size()),
              requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

std::size_t Tensor::rows() const {
  const auto& s = node_->shape;
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  fail(ErrorCode::ShapeMismatch, "rows() needs rank <= 2, got " + shape_string(s));
}

std::size_t Tensor::cols() const {
  const auto& s = node_->shape;
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  fail(ErrorCode::ShapeMismatch, "cols() needs rank <= 2, got " + shape_string(s));
}

double Tensor::item() const {
  if (size() != 1) {
    fail(ErrorCode::ShapeMismatch, "item() on non-scalar " + shape_string(shape()));
  }
  return node_->value[0];
}

std::span<double> Tensor::mutable_grad() { return grad_buffer(*node_); }

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detached() const {
  return make_result(node_->shape, node_->value);
}

Storage& grad_buffer(TensorNode& node) {
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

// ---------------------------------------------------------------------------
// Tape

bool Tape::wants_grad(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

void Tape::record(const Tensor& output, Backward backward) {
  if (consumed_) {
    fail(ErrorCode::State, "tape already ran backward; reset() before recording again");
  }
  nodes_.push_back({output.shared_node(), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (nodes_.empty()) fail(ErrorCode::State, "backward on an empty tape");
  if (consumed_) fail(ErrorCode::State, "backward called twice without reset");
  if (!loss.defined() || loss.size() != 1) {
    fail(ErrorCode::ShapeMismatch, "backward needs a scalar loss");
  }
  const bool reachable = std::any_of(
      nodes_.begin(), nodes_.end(),
      [&](const Node& n) { return n.output.get() == loss.node(); });
  if (!reachable) fail(ErrorCode::State, "loss was not produced on this tape");

  consumed_ = true;
  grad_buffer(*loss.node())[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not on a path to the loss
    it->backward(it->output->grad);
  }
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
}

// ---------------------------------------------------------------------------
// Primitives

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.cols() != b.rows()) {
    fail(ErrorCode::ShapeMismatch, "matmul: inner extents differ for " +
                                       shape_string(a.shape()) + " and " +
                                       shape_string(b.shape()));
  }
  const auto m = a.rows(), p = b.cols();
  Storage out(m * p);
  MutMap(out.data(), m, p).noalias() = as_matrix(a) * as_matrix(b);

  const bool grad = tape.wants_grad({&a, &b});
  auto an = a.shared_node(), bn = b.shared_node();
  const auto k = a.cols();
  return finish(tape, {m, p}, std::move(out), grad,
                [an, bn, m, k, p](std::span<const double> g) {
                  ConstMap G(g.data(), m, p);
                  if (an->requires_grad) {
                    MutMap(grad_buffer(*an).data(), m, k).noalias() +=
                        G * ConstMap(bn->value.data(), k, p).transpose();
                  }
                  if (bn->requires_grad) {
                    MutMap(grad_buffer(*bn).data(), k, p).noalias() +=
                        ConstMap(an->value.data(), m, k).transpose() * G;
                  }
                });
}

Tensor transpose(Tape& tape, const Tensor& a) {
  require_rank2(a, "transpose");
  const auto m = a.rows(), n = a.cols();
  Storage out(m * n);
  MutMap(out.data(), n, m) = as_matrix(a).transpose();
  auto an = a.shared_node();
  return finish(tape, {n, m}, std::move(out), tape.wants_grad({&a}),
                [an, m, n](std::span<const double> g) {
                  MutMap(grad_buffer(*an).data(), m, n) +=
                      ConstMap(g.data(), n, m).transpose();
                });
}

namespace {

template <class Fwd>
Tensor binary_elementwise(Tape& tape, const Tensor& a, const Tensor& b,
                          const char* name, Fwd fwd, double sign_b,
                          bool product) {
  require_same_shape(a, b, name);
  const auto n = a.size();
  Storage out(n);
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[i], bd[i]);
  auto an = a.shared_node(), bn = b.shared_node();
  return finish(tape, a.shape(), std::move(out), tape.wants_grad({&a, &b}),
                [an, bn, n, sign_b, product](std::span<const double> g) {
                  if (an->requires_grad) {
                    auto& ga = grad_buffer(*an);
                    if (product) {
                      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bn->value[i];
                    } else {
                      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
                    }
                  }
                  if (bn->requires_grad) {
                    auto& gb = grad_buffer(*bn);
                    if (product) {
                      for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * an->value[i];
                    } else {
                      for (std::size_t i = 0; i < n; ++i) gb[i] += sign_b * g[i];
                    }
                  }
                });
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_elementwise(tape, a, b, "add",
                            [](double x, double y) { return x + y; }, 1.0, false);
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_elementwise(tape, a, b, "sub",
                            [](double x, double y) { return x - y; }, -1.0, false);
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_elementwise(tape, a, b, "mul",
                            [](double x, double y) { return x * y; }, 0.0, true);
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  const auto n = a.size();
  Storage out(n);
  auto ad = a.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = factor * ad[i];
  auto an = a.shared_node();
  return finish(tape, a.shape(), std::move(out), tape.wants_grad({&a}),
                [an, n, factor](std::span<const double> g) {
                  auto& ga = grad_buffer(*an);
                  for (std::size_t i = 0; i < n; ++i) ga[i] += factor * g[i];
                });
}

Tensor add_row(Tape& tape, const Tensor& x, const Tensor& row) {
  require_row_vector(x, row, "add_row");
  const auto n = x.rows(), d = x.cols();
  Storage out(n * d);
  auto xd = x.data(), rd = row.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xd[i * d + j] + rd[j];
  auto xn = x.shared_node(), rn = row.shared_node();
  return finish(tape, x.shape(), std::move(out), tape.wants_grad({&x, &row}),
                [xn, rn, n, d](std::span<const double> g) {
                  if (xn->requires_grad) {
                    auto& gx = grad_buffer(*xn);
                    for (std::size_t i = 0; i < n * d; ++i) gx[i] += g[i];
                  }
                  if (rn->requires_grad) {
                    auto& gr = grad_buffer(*rn);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j = 0; j < d; ++j) gr[j] += g[i * d + j];
                  }
                });
}

Tensor mul_row(Tape& tape, const Tensor& x, const Tensor& row) {
  require_row_vector(x, row, "mul_row");
  const auto n = x.rows(), d = x.cols();
  Storage out(n * d);
  auto xd = x.data(), rd = row.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xd[i * d + j] * rd[j];
  auto xn = x.shared_node(), rn = row.shared_node();
  return finish(tape, x.shape(), std::move(out), tape.wants_grad({&x, &row}),
                [xn, rn, n, d](std::span<const double> g) {
                  if (xn->requires_grad) {
                    auto& gx = grad_buffer(*xn);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j = 0; j < d; ++j)
                        gx[i * d + j] += g[i * d + j] * rn->value[j];
                  }
                  if (rn->requires_grad) {
                    auto& gr = grad_buffer(*rn);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j = 0; j < d; ++j)
                        gr[j] += g[i * d + j] * xn->value[i * d + j];
                  }
                });
}

Tensor gelu(Tape& tape, const Tensor& x) {
  const auto n = x.size();
  Storage out(n);
  auto xd = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = 0.5 * xd[i] * (1.0 + std::erf(xd[i] * kInvSqrt2));
  }
  auto xn = x.shared_node();
  return finish(tape, x.shape(), std::move(out), tape.wants_grad({&x}),
                [xn, n](std::span<const double> g) {
                  auto& gx = grad_buffer(*xn);
                  for (std::size_t i = 0; i < n; ++i) {
                    const double v = xn->value[i];
                    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                    gx[i] += g[i] * (cdf + v * pdf);
                  }
                });
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain,
                  const Tensor& bias, double eps) {
  require_row_vector(x, gain, "layer_norm");
  require_row_vector(x, bias, "layer_norm");
  if (!(eps > 0.0)) fail(ErrorCode::InvalidArgument, "layer_norm: eps must be positive");
  const auto n = x.rows(), d = x.cols();
  Storage out(n * d);
  // Normalized rows and 1/std are kept for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(n * d);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  auto xd = x.data(), gd = gain.data(), bd = bias.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xd.data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mean) * is;
      (*xhat)[i * d + j] = h;
      out[i * d + j] = h * gd[j] + bd[j];
    }
  }
  auto xn = x.shared_node(), gn = gain.shared_node(), bn = bias.shared_node();
  return finish(
      tape, x.shape(), std::move(out), tape.wants_grad({&x, &gain, &bias}),
      [xn, gn, bn, xhat, inv_std, n, d](std::span<const double> g) {
        if (gn->requires_grad) {
          auto& gg = grad_buffer(*gn);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gg[j] += g[i * d + j] * (*xhat)[i * d + j];
        }
        if (bn->requires_grad) {
          auto& gb = grad_buffer(*bn);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
        }
        if (xn->requires_grad) {
          auto& gx = grad_buffer(*xn);
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t i = 0; i < n; ++i) {
            double mean_dh = 0.0, mean_dh_h = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = g[i * d + j] * gn->value[j];
              mean_dh += dh;
              mean_dh_h += dh * (*xhat)[i * d + j];
            }
            mean_dh *= inv_d;
            mean_dh_h *= inv_d;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = g[i * d + j] * gn->value[j];
              gx[i * d + j] += (*inv_std)[i] *
                               (dh - mean_dh - (*xhat)[i * d + j] * mean_dh_h);
            }
          }
        }
      });
}

Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) fail(ErrorCode::InvalidArgument, "concat_cols: no inputs");
  const auto n = parts.front().rows();
  std::size_t total = 0;
  bool grad = false;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.rows() != n) {
      fail(ErrorCode::ShapeMismatch, "concat_cols: row counts differ (" +
                                         shape_string(parts.front().shape()) +
                                         " vs " + shape_string(p.shape()) + ")");
    }
    total += p.cols();
    grad = grad || tape.wants_grad({&p});
  }
  Storage out(n * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto c = p.cols();
    auto pd = p.data();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(pd.data() + i * c, c, out.data() + i * total + offset);
    offset += c;
  }
  std::vector<std::shared_ptr<TensorNode>> nodes;
  for (const auto& p : parts) nodes.push_back(p.shared_node());
  return finish(tape, {n, total}, std::move(out), grad,
                [nodes, n, total](std::span<const double> g) {
                  std::size_t off = 0;
                  for (const auto& pn : nodes) {
                    const auto c = pn->shape[1];
                    if (pn->requires_grad) {
                      auto& gp = grad_buffer(*pn);
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < c; ++j)
                          gp[i * c + j] += g[i * total + off + j];
                    }
                    off += c;
                  }
                });
}

Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t begin,
                  std::size_t count) {
  require_rank2(x, "slice_cols");
  const auto n = x.rows(), d = x.cols();
  if (count == 0 || begin + count > d) {
    fail(ErrorCode::ShapeMismatch, "slice_cols: columns [" + std::to_string(begin) +
                                       ", " + std::to_string(begin + count) +
                                       ") out of range for " + shape_string(x.shape()));
  }
  Storage out(n * count);
  auto xd = x.data();
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(xd.data() + i * d + begin, count, out.data() + i * count);
  auto xn = x.shared_node();
  return finish(tape, {n, count}, std::move(out), tape.wants_grad({&x}),
                [xn, n, d, begin, count](std::span<const double> g) {
                  auto& gx = grad_buffer(*xn);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < count; ++j)
                      gx[i * d + begin + j] += g[i * count + j];
                });
}

Tensor sum(Tape& tape, const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  auto xn = x.shared_node();
  return finish(tape, {1}, Storage{s}, tape.wants_grad({&x}),
                [xn](std::span<const double> g) {
                  auto& gx = grad_buffer(*xn);
                  for (auto& v : gx) v += g[0];
                });
}

Tensor relative_l2_loss(Tape& tape, const Tensor& pred, const Tensor& truth,
                        double floor) {
  require_same_shape(pred, truth, "relative_l2_loss");
  const auto n = pred.rows(), c = pred.cols();
  std::vector<double> diff_norm(c, 0.0), truth_norm(c, 0.0);
  auto pd = pred.data(), td = truth.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double e = pd[i * c + j] - td[i * c + j];
      diff_norm[j] += e * e;
      truth_norm[j] += td[i * c + j] * td[i * c + j];
    }
  }
  // denominators[j] is the divisor applied to channel j's error norm.
  auto denominators = std::make_shared<std::vector<double>>(c);
  double loss = 0.0;
  for (std::size_t j = 0; j < c; ++j) {
    diff_norm[j] = std::sqrt(diff_norm[j]);
    truth_norm[j] = std::sqrt(truth_norm[j]);
    (*denominators)[j] = truth_norm[j] < floor ? 1.0 : truth_norm[j];
    loss += diff_norm[j] / (*denominators)[j];
  }
  loss /= static_cast<double>(c);
  auto pn = pred.shared_node(), tn = truth.shared_node();
  auto norms = std::make_shared<std::vector<double>>(std::move(diff_norm));
  return finish(tape, {1}, Storage{loss}, tape.wants_grad({&pred}),
                [pn, tn, denominators, norms, n, c](std::span<const double> g) {
                  auto& gp = grad_buffer(*pn);
                  const double inv_c = 1.0 / static_cast<double>(c);
                  for (std::size_t j = 0; j < c; ++j) {
                    const double dn = (*norms)[j];
                    if (dn == 0.0) continue;
                    const double f = g[0] * inv_c / (dn * (*denominators)[j]);
                    for (std::size_t i = 0; i < n; ++i) {
                      gp[i * c + j] += f * (pn->value[i * c + j] - tn->value[i * c + j]);
                    }
                  }
                });
}

}  // namespace rheo::ad
