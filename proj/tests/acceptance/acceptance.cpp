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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rheo/attention.hpp"
#include "rheo/constitutive.hpp"
#include "rheo/error.hpp"
#include "rheo/flow1d.hpp"
#include "rheo/io.hpp"
#include "rheo/model.hpp"
#include "rheo/signals.hpp"
#include "rheo/tensor.hpp"
#include "rheo/training.hpp"
#include "rheo/workflows.hpp"
#include "support/gradcheck.hpp"

using namespace rheo;
namespace fs = std::filesystem;
using nlohmann::json;
using rheo::ad::Tape;
using rheo::ad::Tensor;

namespace {

// ---- pinned tolerances and budgets ----------------------------------------

constexpr double kAttentionTol = 1e-12;
constexpr int kAttentionInstances = 100;
constexpr double kAttentionBudget = 5.0;

constexpr double kPrimitiveRelTol = 1e-5;
constexpr double kEndToEndRelTol = 1e-4;
constexpr double kGradAbsTol = 1e-8;
constexpr double kGradientBudget = 60.0;

constexpr double kTevpFixedPointTol = 1e-4;
constexpr int kTevpParameterSets = 50;
constexpr double kGiesekusOldroydTol = 1e-10;
constexpr double kNewtonianTol = 1e-8;
constexpr double kSteadyShearTol = 1e-4;
constexpr double kConstitutiveBudget = 30.0;

constexpr double kPoiseuilleTol = 5e-3;
constexpr double kMinSpatialOrder = 1.8;
constexpr double kFlowBudget = 60.0;

constexpr double kRheometricHeldOutTol = 0.10;
constexpr double kRheometricOscillatoryTol = 0.15;
constexpr double kRheometricBudget = 30.0 * 60.0;

constexpr double kFlowChannelTol = 0.15;
constexpr double kLocalCeilingFraction = 0.90;
constexpr double kSpatioTemporalBudget = 45.0 * 60.0;

constexpr double kInvarianceTol = 1e-10;
constexpr double kMemoryNoise = 0.01;  // relative slack on the peak-byte comparison

// ---- harness ----------------------------------------------------------------

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
  std::vector<double> out(x.size());
  const std::size_t c = x.cols();
  for (std::size_t r = 0; r < perm.size(); ++r) {
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = x.at(perm[r], j);
  }
  return Tensor::from(x.shape(), out);
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

Tensor unit_column(std::size_t n) {
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  return Tensor::from({n, 1}, c);
}

// ---- 1: attention equivalence -------------------------------------------------

void attention_equivalence(Outcome& out) {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> n_dist(1, 64), d_dist(1, 32);
  double worst = 0.0;
  for (int trial = 0; trial < kAttentionInstances; ++trial) {
    const std::size_t n = n_dist(rng), d = d_dist(rng);
    const auto q = testing::random_tensor(n, d, rng);
    const auto k = testing::random_tensor(n, d, rng);
    const auto v = testing::random_tensor(n, d, rng);
    // Per-element sums: z_ij = (1/n) sum_l (q_i . k_l) v_lj.
    std::vector<double> sums(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t l = 0; l < n; ++l) {
          double dot = 0.0;
          for (std::size_t c = 0; c < d; ++c) dot += q.at(i, c) * k.at(l, c);
          acc += dot * v.at(l, j);
        }
        sums[i * d + j] = acc / static_cast<double>(n);
      }
    }
    Tape tape(false);
    const auto factored = attention::galerkin_attention(tape, q, k, v);
    const auto naive = attention::fourier_attention(tape, q, k, v);
    worst = std::max({worst, max_abs_diff(factored.data(), naive.data()),
                      max_abs_diff(factored.data(), sums),
                      max_abs_diff(naive.data(), sums),
                      max_abs_diff(factored.data(), attention::quadratic_attention_reference(q, k, v, 16))});
  }
  out.detail << "max |diff| " << sci(worst) << " over " << kAttentionInstances << " instances";
  out.require(worst < kAttentionTol, "difference >= " + sci(kAttentionTol));
}

// ---- 2: gradients -----------------------------------------------------------

void gradient_correctness(Outcome& out) {
  using namespace rheo::ad;
  using testing::random_readout;
  std::mt19937_64 rng(202);
  auto a = testing::random_tensor(4, 3, rng, true);
  auto b = testing::random_tensor(4, 3, rng, true);
  auto c = testing::random_tensor(3, 5, rng, true);
  auto flat = [&](std::size_t n) {
    auto t = testing::random_tensor(1, n, rng);
    return Tensor::from({n}, t.data(), true);
  };
  auto row = flat(3), gain = flat(3), bias = flat(3);
  struct Case {
    const char* name;
    std::function<Tensor(Tape&)> f;
    std::vector<Tensor> leaves;
  };
  const std::vector<Case> cases = {
      {"matmul", [&](Tape& t) { return random_readout(t, matmul(t, a, c), 1); }, {a, c}},
      {"transpose", [&](Tape& t) { return random_readout(t, transpose(t, a), 2); }, {a}},
      {"add", [&](Tape& t) { return random_readout(t, add(t, a, b), 3); }, {a, b}},
      {"sub", [&](Tape& t) { return random_readout(t, sub(t, a, b), 4); }, {a, b}},
      {"mul", [&](Tape& t) { return random_readout(t, mul(t, a, b), 5); }, {a, b}},
      {"scale", [&](Tape& t) { return random_readout(t, scale(t, a, 0.7), 6); }, {a}},
      {"add_row", [&](Tape& t) { return random_readout(t, add_row(t, a, row), 7); }, {a, row}},
      {"mul_row", [&](Tape& t) { return random_readout(t, mul_row(t, a, row), 8); }, {a, row}},
      {"gelu", [&](Tape& t) { return random_readout(t, gelu(t, a), 9); }, {a}},
      {"layer_norm", [&](Tape& t) { return random_readout(t, layer_norm(t, a, gain, bias), 10); },
       {a, gain, bias}},
      {"concat_cols", [&](Tape& t) { return random_readout(t, concat_cols(t, {a, b}), 11); }, {a, b}},
      {"slice_cols", [&](Tape& t) { return random_readout(t, slice_cols(t, a, 1, 2), 12); }, {a}},
      {"sum", [&](Tape& t) { return sum(t, mul(t, a, b)); }, {a, b}},
      {"relative_l2_loss", [&](Tape& t) { return relative_l2_loss(t, a, b); }, {a}},
      {"galerkin_attention",
       [&](Tape& t) { return random_readout(t, attention::galerkin_attention(t, a, b, a), 13); }, {a, b}},
      {"fourier_attention",
       [&](Tape& t) { return random_readout(t, attention::fourier_attention(t, a, b, b), 14); }, {a, b}},
  };
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& cs : cases) {
    const auto g = testing::check_gradients(cs.f, cs.leaves);
    checked += g.checked;
    worst = std::max(worst, g.worst_relative);
    out.require(g.checked > 0 && g.passed(kPrimitiveRelTol, kGradAbsTol),
                std::string(cs.name) + " rel " + sci(g.worst_relative));
  }

  model::ModelConfig mc;
  mc.in_channels = 2;
  mc.out_channels = 2;
  mc.d_model = 4;
  mc.n_heads = 2;
  mc.n_encoder_layers = 1;
  mc.ffn_width = 6;
  mc.propagator_width = 6;
  mc.decoder_width = 4;
  mc.fourier_features = 3;
  model::OperatorTransformer m(mc, 203);
  const auto v = testing::random_tensor(4, 2, rng);
  const auto x = unit_column(4);
  const auto truth = testing::random_tensor(4, 2, rng);
  auto e2e = [&](Tape& tape) {
    Tensor loss;
    m.rollout_each(tape, v, x, x, 2, [&](const model::LatentState&, const Tensor& y) {
      const auto l = ad::relative_l2_loss(tape, y, truth);
      loss = loss.defined() ? ad::add(tape, loss, l) : l;
    });
    return loss;
  };
  const auto g = testing::check_gradients(e2e, m.parameters().trainable());
  out.require(g.checked > 0 && g.passed(kEndToEndRelTol, kGradAbsTol),
              "end-to-end rel " + sci(g.worst_relative));
  out.detail << cases.size() << " primitives, " << checked << " entries, worst rel " << sci(worst)
             << "; end-to-end " << g.checked << " entries, worst rel " << sci(g.worst_relative);
}

// ---- 3: constitutive oracles -------------------------------------------------

void constitutive_oracles(Outcome& out) {
  using namespace rheo::constitutive;
  // (a) long-horizon TEVP against the closed-form fixed point.
  std::mt19937_64 rng(301);
  std::uniform_real_distribution<double> u(0.2, 2.0), r(-2.0, 2.0);
  double worst_a = 0.0;
  for (int trial = 0; trial < kTevpParameterSets; ++trial) {
    TevpParams p{u(rng), u(rng), 0.1 * u(rng), u(rng), 0.5 * u(rng), 0.5 * u(rng)};
    const double rate = r(rng);
    const double lam = p.k_plus / (p.k_plus + p.k_minus * std::abs(rate));
    const double sig = p.sigma_y * lam + (p.eta_s + p.eta_p * lam) * rate;
    const double slowest =
        std::min(p.k_plus + p.k_minus * std::abs(rate), p.G / (p.eta_s + p.eta_p));
    const std::size_t n = 4001;
    const auto states = integrate_tevp(p, std::vector<double>(n, rate),
                                       40.0 / slowest / static_cast<double>(n - 1), {0.0, 1.0}, 1);
    worst_a = std::max({worst_a, std::abs(states.back().lambda - lam),
                        std::abs(states.back().sigma12 - sig)});
  }
  out.require(worst_a < kTevpFixedPointTol, "(a) TEVP fixed point " + sci(worst_a));

  // (b) Giesekus with zero mobility against Oldroyd-B under a random planar flow.
  const std::size_t n = 300;
  const auto shear = signals::GrfSampler(signals::GrfConfig::defaults(n, 15.0)).sample(302);
  const auto ext = signals::GrfSampler(signals::GrfConfig::defaults(n, 15.0)).sample(303);
  std::vector<VelocityGradient2> L(n);
  for (std::size_t i = 0; i < n; ++i) L[i] = {0.25 * ext[i], shear[i], 0.0, -0.25 * ext[i]};
  const SymTensor2 init{0.3, -0.2, 0.1};
  const auto g = integrate_giesekus({1.0, 0.3, 1.2, 0.0}, L, 0.05, init, 2);
  const auto o = integrate_oldroydb({1.0, 0.3, 1.2}, L, 0.05, init, 2);
  double worst_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    worst_b = std::max({worst_b, std::abs(g[i].xx - o[i].xx), std::abs(g[i].yy - o[i].yy),
                        std::abs(g[i].xy - o[i].xy)});
  }
  out.require(worst_b < kGiesekusOldroydTol, "(b) Giesekus/Oldroyd-B " + sci(worst_b));

  // (c) tau2 = tau1: stress follows G0 tau1 (L + L^T).
  const double tau = 0.7, G0 = 1.8;
  const auto grid = signals::time_grid(301, 12.0);
  std::vector<VelocityGradient2> Lc;
  for (double t : grid) Lc.push_back({0.3 * std::sin(0.5 * t), std::cos(0.9 * t), 0.0, -0.3 * std::sin(0.5 * t)});
  auto newtonian = [&](const VelocityGradient2& l) {
    return SymTensor2{G0 * tau * 2.0 * l.xx, G0 * tau * 2.0 * l.yy, G0 * tau * (l.xy + l.yx)};
  };
  const auto oc = integrate_oldroydb({tau, tau, G0}, Lc, grid[1] - grid[0], newtonian(Lc[0]), 4);
  double worst_c = 0.0;
  for (std::size_t i = 0; i < Lc.size(); ++i) {
    const auto w = newtonian(Lc[i]);
    worst_c = std::max({worst_c, std::abs(oc[i].xx - w.xx), std::abs(oc[i].yy - w.yy),
                        std::abs(oc[i].xy - w.xy)});
  }
  out.require(worst_c < kNewtonianTol, "(c) Newtonian identity " + sci(worst_c));

  // (d) steady simple shear.
  double worst_d = 0.0;
  for (double tau2 : {0.0, 0.1, 0.4}) {
    for (double rate : {0.3, 0.8}) {
      const double tau1 = 1.0, G = 1.5;
      const std::vector<VelocityGradient2> Ls(401, VelocityGradient2{0.0, rate, 0.0, 0.0});
      const auto s = integrate_oldroydb({tau1, tau2, G}, Ls, 0.1, {}, 4).back();
      worst_d = std::max({worst_d, std::abs(s.xy - G * tau1 * rate),
                          std::abs(s.xx - s.yy - 2 * G * tau1 * (tau1 - tau2) * rate * rate)});
    }
  }
  out.require(worst_d < kSteadyShearTol, "(d) steady shear " + sci(worst_d));
  out.detail << "(a) " << sci(worst_a) << " (b) " << sci(worst_b) << " (c) " << sci(worst_c)
             << " (d) " << sci(worst_d);
}

// ---- 4: flow1d oracle -------------------------------------------------------

void flow_oracle(Outcome& out) {
  const double dpdx[] = {-1, -2, -3, -4, -6, -8, -2.5, -5, -0.5, -7};
  const double tau1[] = {0.5, 1.0, 1.5, 0.8, 1.2, 0.6, 2.0, 1.0, 0.7, 0.9};
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    flow1d::ChannelConfig c;
    c.dpdx = dpdx[i];
    c.tau1 = tau1[i];
    c.t_end = 40.0 * std::max(1.0, c.tau1);
    c.snapshots = 2;
    flow1d::SolverState s;
    flow1d::solve_startup_channel(c, s);
    double num = 0.0, den = 0.0;
    const double h = c.H / static_cast<double>(c.ny + 1);
    for (std::size_t j = 0; j < s.u.size(); ++j) {
      const double y = h * static_cast<double>(j);
      const double ref = -c.dpdx / (2.0 * (c.eta_s + c.eta_p)) * y * (c.H - y);
      num += (s.u[j] - ref) * (s.u[j] - ref);
      den += ref * ref;
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  auto run = [](std::size_t intervals) {
    flow1d::ChannelConfig c;
    c.ny = intervals - 1;
    c.t_end = 0.5;
    c.snapshots = 2;
    c.dt = 1e-5;
    flow1d::SolverState s;
    flow1d::solve_startup_channel(c, s);
    return s.u;
  };
  const auto a = run(16), b = run(32), d = run(64);
  auto diff = [](const std::vector<double>& coarse, const std::vector<double>& fine) {
    double m = 0.0;
    for (std::size_t j = 0; j < coarse.size(); ++j) m = std::max(m, std::abs(coarse[j] - fine[2 * j]));
    return m;
  };
  const double order = std::log2(diff(a, b) / diff(b, d));
  out.detail << "worst Poiseuille rel L2 " << sci(worst) << " over 10 configs; spatial order "
             << sci(order);
  out.require(worst < kPoiseuilleTol, "Poiseuille");
  out.require(order >= kMinSpatialOrder, "spatial order");
}

// ---- 5: rheometric surrogate ---------------------------------------------------

const char* kRheometricJob = R"({
  "model": {"d_model": 32, "n_heads": 4, "n_encoder_layers": 3, "ffn_width": 64,
            "propagator_width": 64, "decoder_width": 32, "fourier_features": 16},
  "task": {"mode": "static", "input_channels": ["gamma_dot"], "output_channels": ["sigma_12"]},
  "train": {"epochs": 400, "batch_size": 4, "learning_rate": 1.5e-3, "lr_schedule": "cosine",
            "seed": 1},
  "split": {"validation_fraction": 0.1, "test_fraction": 0.0}
})";

void rheometric_surrogate(Outcome& out, const fs::path& dir) {
  workflows::RheometricOptions o;
  o.model = "tevp";
  o.protocol = "grf";
  o.n_samples = 256;
  o.seed = 1;
  const auto train = workflows::generate_rheometric(o);
  o.n_samples = 64;
  o.seed = 2;
  const auto held_out = workflows::generate_rheometric(o);
  o.protocol = "oscillatory";
  o.n_samples = 32;
  o.seed = 3;
  const auto oscillatory = workflows::generate_rheometric(o);

  auto job = workflows::TrainJob::from_json(json::parse(kRheometricJob));
  const auto result = workflows::train_surrogate(train, job);
  const auto grf = training::evaluate(*result.surrogate, held_out, 0);
  const auto osc = training::evaluate(*result.surrogate, oscillatory, 0);
  io::write_file_atomic((dir / "rheometric_grf.json").string(), grf.to_json().dump(2));
  io::write_file_atomic((dir / "rheometric_oscillatory.json").string(), osc.to_json().dump(2));
  out.detail << "held-out GRF rel L2 " << sci(grf.mean_rel_l2) << ", oscillatory rel L2 "
             << sci(osc.mean_rel_l2);
  out.require(grf.mean_rel_l2 < kRheometricHeldOutTol, "held-out GRF");
  out.require(osc.mean_rel_l2 < kRheometricOscillatoryTol, "oscillatory");
}

// ---- 6: spatio-temporal surrogate -------------------------------------------------

const char* kFlowJob = R"({
  "model": {"d_model": 32, "n_heads": 4, "n_encoder_layers": 2, "ffn_width": 64,
            "propagator_width": 64, "decoder_width": 32, "fourier_features": 16},
  "task": {"mode": "temporal", "condition_steps": 10, "condition_key": "dpdx"},
  "train": {"epochs": 200, "batch_size": 4, "learning_rate": 1.5e-3, "lr_schedule": "cosine",
            "normalization": "instance", "seed": 1},
  "split": {"validation_fraction": 0.1, "test_fraction": 0.0}
})";

void spatio_temporal_surrogate(Outcome& out, const fs::path& dir) {
  workflows::Flow1dOptions o;
  o.n_samples = 64;
  o.dpdx_min = -6.0;
  o.dpdx_max = -2.0;
  const auto train = workflows::generate_flow1d(o);
  o.dpdx_values = {-1.5, -2.5, -3.5, -4.5, -5.5, -7.0};
  const auto held_out = workflows::generate_flow1d(o);

  auto job = workflows::TrainJob::from_json(json::parse(kFlowJob));
  const auto result = workflows::train_surrogate(train, job);
  const auto report = training::evaluate(*result.surrogate, held_out, 10);
  const auto j = report.to_json();
  io::write_file_atomic((dir / "flow1d_report.json").string(), j.dump(2));

  for (const auto& [channel, value] : j.at("mean_relative_l2").items()) {
    out.detail << channel << " " << sci(value.get<double>()) << ", ";
    out.require(value.get<double>() < kFlowChannelTol, channel);
  }
  const double below = j.at("local_error").at("fraction_below_ceiling").get<double>();
  out.detail << "points below 25% local error " << sci(100.0 * below) << "%";
  out.require(below >= kLocalCeilingFraction, "local error fraction");
  const auto& regimes = j.at("by_regime");
  if (regimes.contains("extrapolation_over_interpolation")) {
    out.detail << "; extrapolation/interpolation "
               << sci(regimes.at("extrapolation_over_interpolation").get<double>())
               << " (informational)";
  }
  std::size_t unseen = 0;
  for (const auto& s : report.samples) unseen += s.condition_seen ? 0 : 1;
  out.require(unseen == held_out.n_samples(), "held-out conditions flagged as unseen");
}

// ---- 7: architecture invariants -----------------------------------------------

void architecture_invariants(Outcome& out) {
  model::ModelConfig c;
  c.in_channels = 2;
  c.out_channels = 2;
  c.d_model = 16;
  c.n_heads = 4;
  c.n_encoder_layers = 2;
  c.ffn_width = 24;
  c.propagator_width = 24;
  c.decoder_width = 16;
  c.fourier_features = 8;
  std::mt19937_64 rng(701);
  const std::size_t n = 37;
  const auto v = testing::random_tensor(n, 2, rng);
  const auto x = unit_column(n);
  const auto perm = shuffled(n, 702);
  const auto queries = Tensor::from({4, 1}, {0.1, 0.45, 0.8, 0.95});

  double worst_eq = 0.0, worst_inv = 0.0;
  for (auto kind : {attention::Kind::Galerkin, attention::Kind::Fourier}) {
    c.attention_kind = kind;
    const model::OperatorTransformer m(c, 703);
    Tape tape(false);
    const auto e = m.encode(tape, v, x);
    const auto ep = m.encode(tape, permute_rows(v, perm), permute_rows(x, perm));
    worst_eq = std::max(worst_eq, max_abs_diff(ep.data(), permute_rows(e, perm).data()));
    const auto z = m.make_initial_latent(tape, e, queries);
    const auto zp = m.make_initial_latent(tape, ep, queries);
    worst_inv = std::max(worst_inv, max_abs_diff(z.z.data(), zp.z.data()));
  }
  out.require(worst_eq < kInvarianceTol, "encoder equivariance");
  out.require(worst_inv < kInvarianceTol, "query invariance");

  model::OperatorTransformer m(c, 704);
  for (const char* name : {"propagator.ffn.1.weight", "propagator.ffn.1.bias"}) {
    for (auto& w : m.parameters().find(name)->mutable_data()) w = 0.0;
  }
  Tape tape(false);
  const model::LatentState s{testing::random_tensor(9, 16, rng), 0};
  auto next = s;
  for (int k = 0; k < 5; ++k) next = m.propagate(tape, next);
  const double identity_gap = max_abs_diff(next.z.data(), s.z.data());
  out.require(identity_gap == 0.0, "zero-weight propagator identity");

  const model::OperatorTransformer big(c, 705);
  const auto vb = testing::random_tensor(256, 2, rng);
  const auto xb = unit_column(256);
  auto peak = [&](std::size_t horizon) {
    const auto base = ad::storage_stats().live_bytes;
    ad::reset_storage_peak();
    Tape t(false);
    double acc = 0.0;
    big.rollout_each(t, vb, xb, xb, horizon,
                     [&](const model::LatentState&, const Tensor& y) { acc += y.data()[0]; });
    if (!std::isfinite(acc)) fail(ErrorCode::Numerical, "rollout produced non-finite output");
    return static_cast<double>(ad::storage_stats().peak_bytes - base);
  };
  const double p10 = peak(10), p100 = peak(100);
  out.require(std::abs(p100 - p10) <= kMemoryNoise * p10, "rollout memory grows with horizon");
  out.detail << "equivariance " << sci(worst_eq) << ", query invariance " << sci(worst_inv)
             << ", propagator identity gap " << sci(identity_gap) << ", peak bytes T=10 "
             << static_cast<long long>(p10) << " T=100 " << static_cast<long long>(p100);
}

// ---- 8: persistence ---------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(RHEO_CLI_PATH) + " " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

bool rejected(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error&) {
    return true;
  }
  return false;
}

void persistence(Outcome& out, const fs::path& dir) {
  // Dataset round trip through disk.
  workflows::Flow1dOptions fo;
  fo.n_samples = 5;
  fo.base.t_end = 2.0;
  fo.base.snapshots = 21;
  const auto flows = workflows::generate_flow1d(fo);
  const auto data_path = dir / "flows.rheo";
  io::write_dataset(data_path.string(), flows);
  const auto bytes = io::read_file(data_path.string());
  const auto back = io::read_dataset(data_path.string());
  bool values_equal = back.coords == flows.coords && back.n_samples() == flows.n_samples();
  for (std::size_t i = 0; values_equal && i < flows.n_samples(); ++i) {
    values_equal = back.samples[i].values == flows.samples[i].values &&
                   back.samples[i].metadata == flows.samples[i].metadata;
  }
  out.require(values_equal && io::encode_dataset(back) == bytes, "dataset round trip");

  // Checkpoint round trip with training state.
  training::TaskConfig task;
  task.condition_steps = 10;
  task.condition_key = "dpdx";
  model::ModelConfig mc;
  mc.d_model = 8;
  mc.n_heads = 2;
  mc.n_encoder_layers = 1;
  mc.ffn_width = 16;
  mc.propagator_width = 16;
  mc.decoder_width = 8;
  mc.fourier_features = 4;
  training::TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 2;
  auto s = training::Surrogate::create(flows, mc, task, "per_channel", 801);
  const auto state = training::fit(s, flows, nullptr, tc);
  const auto weights = s.model().parameters().snapshot();
  const auto ck1 = dir / "a.ckpt", ck2 = dir / "b.ckpt";
  io::save_checkpoint(ck1.string(), s, tc, &state, &weights);
  const auto loaded = io::load_checkpoint(ck1.string());
  io::save_checkpoint(ck2.string(), *loaded.surrogate, loaded.train, &*loaded.state,
                      &loaded.resume_weights);
  const auto ck_bytes = io::read_file(ck1.string());
  out.require(ck_bytes == io::read_file(ck2.string()), "checkpoint round trip");

  // Truncation anywhere is rejected.
  std::size_t cuts = 0, refused = 0;
  for (double frac : {0.0, 0.01, 0.25, 0.5, 0.9, 0.999}) {
    const auto cut_d = static_cast<std::size_t>(frac * static_cast<double>(bytes.size() - 1));
    const auto cut_c = static_cast<std::size_t>(frac * static_cast<double>(ck_bytes.size() - 1));
    cuts += 2;
    refused += rejected([&] { io::decode_dataset(bytes.substr(0, cut_d)); });
    refused += rejected([&] { io::decode_checkpoint(ck_bytes.substr(0, cut_c)); });
  }
  out.require(refused == cuts, "truncated file accepted");

  // Seeded CLI pipeline twice in separate directories.
  const auto cfg = dir / "train.json";
  io::write_file_atomic(cfg.string(), R"({
    "model": {"d_model": 8, "n_heads": 2, "n_encoder_layers": 1, "ffn_width": 16,
              "propagator_width": 16, "decoder_width": 8, "fourier_features": 4},
    "task": {"mode": "static"},
    "train": {"epochs": 3, "batch_size": 4},
    "split": {"validation_fraction": 0.2, "test_fraction": 0.2}})");
  const char* files[] = {"data.rheo", "model.ckpt", "model.history.csv", "pred.rheo",
                         "report.errors.rheo"};
  std::vector<std::string> outputs[2];
  json reports[2];
  bool cli_ok = true;
  for (int r = 0; r < 2; ++r) {
    const auto d = dir / ("run" + std::to_string(r));
    fs::create_directories(d);
    const auto log = d / "log.txt";
    cli_ok = cli_ok &&
             run_cli("gen-rheometric --model giesekus --n-samples 12 --n-points 32 --seed 808 --out " +
                         quoted(d / "data.rheo"), log) == 0 &&
             run_cli("train --data " + quoted(d / "data.rheo") + " --config " + quoted(cfg) +
                         " --seed 809 --log-every 0 --out " + quoted(d / "model.ckpt"), log) == 0 &&
             run_cli("predict --checkpoint " + quoted(d / "model.ckpt") + " --data " +
                         quoted(d / "data.rheo") + " --out " + quoted(d / "pred.rheo"), log) == 0 &&
             run_cli("eval --checkpoint " + quoted(d / "model.ckpt") + " --data " +
                         quoted(d / "data.rheo") + " --report " + quoted(d / "report.json"), log) == 0;
    if (!cli_ok) break;
    for (const char* f : files) outputs[r].push_back(io::read_file((d / f).string()));
    reports[r] = json::parse(io::read_file((d / "report.json").string()));
    reports[r].erase("wall_time_s");
  }
  out.require(cli_ok, "CLI pipeline exited nonzero");
  out.require(cli_ok && outputs[0] == outputs[1] && reports[0] == reports[1],
              "CLI outputs differ between seeded runs");
  out.detail << "dataset " << bytes.size() << " B and checkpoint " << ck_bytes.size()
             << " B round-trip exactly; " << refused << "/" << cuts
             << " truncations rejected; CLI pipeline reproduced " << std::size(files) + 1
             << " files";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rheo acceptance run"};
  std::string workdir = "acceptance_work";
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Scratch directory for generated files");
  app.add_option("--only", only, "Run just these criteria")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);
  const fs::path dir = fs::absolute(workdir);
  fs::create_directories(dir);

  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "attention equivalence", kAttentionBudget, attention_equivalence},
      {2, "gradient correctness", kGradientBudget, gradient_correctness},
      {3, "constitutive oracles", kConstitutiveBudget, constitutive_oracles},
      {4, "flow1d oracle", kFlowBudget, flow_oracle},
      {5, "rheometric surrogate", kRheometricBudget,
       [&](Outcome& o) { rheometric_surrogate(o, dir); }},
      {6, "spatio-temporal surrogate", kSpatioTemporalBudget,
       [&](Outcome& o) { spatio_temporal_surrogate(o, dir); }},
      {7, "architecture invariants", 0.0, architecture_invariants},
      {8, "persistence", 0.0, [&](Outcome& o) { persistence(o, dir); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [error: " << e.what() << "]";
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      o.pass = false;
      o.detail << " [over budget " << c.budget_s << " s]";
    }
    failures += o.pass ? 0 : 1;
    char timing[48];
    std::snprintf(timing, sizeof timing, " (%.1f s)", secs);
    std::cout << "criterion " << c.id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << c.name
              << ": " << o.detail.str() << timing << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
