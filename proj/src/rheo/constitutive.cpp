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

#include "rheo/constitutive.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rheo/error.hpp"

namespace rheo::constitutive {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    fail(ErrorCode::InvalidArgument, std::string(name) + " must be positive and finite");
  }
}

void require_non_negative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    fail(ErrorCode::InvalidArgument, std::string(name) + " must be non-negative and finite");
  }
}

void require_dt(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    fail(ErrorCode::InvalidArgument, "dt must be positive and finite");
  }
}

// Lagrange basis weight of node k (out of m nodes at 0..m-1) evaluated at u.
double lagrange(std::size_t k, std::size_t m, double u) {
  double w = 1.0;
  for (std::size_t j = 0; j < m; ++j) {
    if (j == k) continue;
    w *= (u - static_cast<double>(j)) /
         (static_cast<double>(k) - static_cast<double>(j));
  }
  return w;
}

double lagrange_derivative(std::size_t k, std::size_t m, double u) {
  double denom = 1.0;
  for (std::size_t j = 0; j < m; ++j) {
    if (j != k) denom *= static_cast<double>(k) - static_cast<double>(j);
  }
  double total = 0.0;
  for (std::size_t skip = 0; skip < m; ++skip) {
    if (skip == k) continue;
    double prod = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == k || j == skip) continue;
      prod *= u - static_cast<double>(j);
    }
    total += prod;
  }
  return total / denom;
}

// Classical RK4 over a sampled velocity-gradient history.
template <class Rhs>
std::vector<SymTensor2> integrate_tensor(std::span<const VelocityGradient2> L,
                                         double dt, const SymTensor2& init,
                                         std::size_t substeps, Rhs rhs) {
  require_dt(dt);
  if (L.empty()) return {};
  if (substeps == 0) fail(ErrorCode::InvalidArgument, "substeps must be >= 1");
  if (!init.finite()) fail(ErrorCode::InvalidArgument, "non-finite initial stress");

  std::vector<double> comp[4];
  for (auto& c : comp) c.reserve(L.size());
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (!L[i].finite()) {
      fail(ErrorCode::InvalidArgument,
           "non-finite velocity gradient at sample " + std::to_string(i));
    }
    comp[0].push_back(L[i].xx);
    comp[1].push_back(L[i].xy);
    comp[2].push_back(L[i].yx);
    comp[3].push_back(L[i].yy);
  }
  const SampledSeries sxx(comp[0], dt), sxy(comp[1], dt), syx(comp[2], dt),
      syy(comp[3], dt);
  auto grad_at = [&](std::size_t iv, double f) {
    return VelocityGradient2{sxx.value_in(iv, f), sxy.value_in(iv, f),
                             syx.value_in(iv, f), syy.value_in(iv, f)};
  };
  auto rate_at = [&](std::size_t iv, double f) {
    return VelocityGradient2{sxx.derivative_in(iv, f), sxy.derivative_in(iv, f),
                             syx.derivative_in(iv, f), syy.derivative_in(iv, f)};
  };

  std::vector<SymTensor2> out;
  out.reserve(L.size());
  out.push_back(init);
  SymTensor2 s = init;
  const double h = dt / static_cast<double>(substeps);
  const double df = 1.0 / static_cast<double>(substeps);
  for (std::size_t iv = 0; iv + 1 < L.size(); ++iv) {
    for (std::size_t sub = 0; sub < substeps; ++sub) {
      const double f0 = static_cast<double>(sub) * df;
      const double fm = f0 + 0.5 * df;
      const double f1 = f0 + df;
      const auto L0 = grad_at(iv, f0), Lm = grad_at(iv, fm), L1 = grad_at(iv, f1);
      const auto D0 = rate_at(iv, f0), Dm = rate_at(iv, fm), D1 = rate_at(iv, f1);
      const SymTensor2 k1 = rhs(s, L0, D0);
      const SymTensor2 k2 = rhs(s + (0.5 * h) * k1, Lm, Dm);
      const SymTensor2 k3 = rhs(s + (0.5 * h) * k2, Lm, Dm);
      const SymTensor2 k4 = rhs(s + h * k3, L1, D1);
      s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!s.finite()) {
      fail(ErrorCode::Divergence, "stress became non-finite at step " +
                                      std::to_string(iv + 1) + " (dt too large?)");
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

void TevpParams::validate() const {
  require_positive(G, "G");
  require_positive(eta_s, "eta_s");
  require_positive(eta_p, "eta_p");
  require_non_negative(k_plus, "k_plus");
  require_non_negative(k_minus, "k_minus");
  require_non_negative(sigma_y, "sigma_y");
}

void GiesekusParams::validate() const {
  require_positive(tau1, "tau1");
  require_positive(G0, "G0");
  if (!(tau2 >= 0.0 && tau2 <= tau1)) {
    fail(ErrorCode::InvalidArgument, "tau2 must lie in [0, tau1]");
  }
  if (!(alpha >= 0.0 && alpha <= 0.5)) {
    fail(ErrorCode::InvalidArgument, "alpha must lie in [0, 0.5]");
  }
}

void OldroydBParams::validate() const {
  GiesekusParams{tau1, tau2, G0, 0.0}.validate();
}

bool SymTensor2::finite() const {
  return std::isfinite(xx) && std::isfinite(yy) && std::isfinite(xy);
}

bool VelocityGradient2::finite() const {
  return std::isfinite(xx) && std::isfinite(xy) && std::isfinite(yx) &&
         std::isfinite(yy);
}

SymTensor2 convect(const VelocityGradient2& L, const SymTensor2& A) {
  // M = L.A; L.A + A.L^T = M + M^T.
  const double mxx = L.xx * A.xx + L.xy * A.xy;
  const double mxy = L.xx * A.xy + L.xy * A.yy;
  const double myx = L.yx * A.xx + L.yy * A.xy;
  const double myy = L.yx * A.xy + L.yy * A.yy;
  return {2.0 * mxx, 2.0 * myy, mxy + myx};
}

SymTensor2 square(const SymTensor2& A) {
  return {A.xx * A.xx + A.xy * A.xy, A.xy * A.xy + A.yy * A.yy,
          A.xy * (A.xx + A.yy)};
}

// ---------------------------------------------------------------------------
// TEVP

TevpRates tevp_rhs(const TevpParams& p, const TevpState& s, double gamma_dot) {
  const double eta = p.eta_s + p.eta_p;
  TevpRates r;
  r.dsigma_dt = p.G / eta *
                (-s.sigma12 + p.sigma_y * s.lambda +
                 (p.eta_s + p.eta_p * s.lambda) * gamma_dot);
  r.dlambda_dt = p.k_plus * (1.0 - s.lambda) -
                 p.k_minus * s.lambda * std::abs(gamma_dot);
  return r;
}

std::vector<TevpState> integrate_tevp(const TevpParams& p,
                                      std::span<const double> gamma_dot,
                                      double dt, const TevpState& init,
                                      std::size_t substeps) {
  p.validate();
  require_dt(dt);
  if (substeps == 0) fail(ErrorCode::InvalidArgument, "substeps must be >= 1");
  for (std::size_t i = 0; i < gamma_dot.size(); ++i) {
    if (!std::isfinite(gamma_dot[i])) {
      fail(ErrorCode::InvalidArgument,
           "non-finite shear rate at sample " + std::to_string(i));
    }
  }
  if (gamma_dot.empty()) return {};

  const SampledSeries rate(gamma_dot, dt);
  auto advance = [&](const TevpState& s, const TevpRates& k, double h) {
    return TevpState{s.sigma12 + h * k.dsigma_dt, s.lambda + h * k.dlambda_dt};
  };

  std::vector<TevpState> out;
  out.reserve(gamma_dot.size());
  TevpState s = init;
  s.lambda = std::clamp(s.lambda, 0.0, 1.0);
  out.push_back(s);
  const double h = dt / static_cast<double>(substeps);
  const double df = 1.0 / static_cast<double>(substeps);
  for (std::size_t iv = 0; iv + 1 < gamma_dot.size(); ++iv) {
    for (std::size_t sub = 0; sub < substeps; ++sub) {
      const double f0 = static_cast<double>(sub) * df;
      const double g0 = rate.value_in(iv, f0);
      const double gm = rate.value_in(iv, f0 + 0.5 * df);
      const double g1 = rate.value_in(iv, f0 + df);
      const TevpRates k1 = tevp_rhs(p, s, g0);
      const TevpRates k2 = tevp_rhs(p, advance(s, k1, 0.5 * h), gm);
      const TevpRates k3 = tevp_rhs(p, advance(s, k2, 0.5 * h), gm);
      const TevpRates k4 = tevp_rhs(p, advance(s, k3, h), g1);
      s.sigma12 += h / 6.0 *
                   (k1.dsigma_dt + 2.0 * k2.dsigma_dt + 2.0 * k3.dsigma_dt + k4.dsigma_dt);
      s.lambda += h / 6.0 *
                  (k1.dlambda_dt + 2.0 * k2.dlambda_dt + 2.0 * k3.dlambda_dt + k4.dlambda_dt);
      s.lambda = std::clamp(s.lambda, 0.0, 1.0);
    }
    if (!std::isfinite(s.sigma12) || !std::isfinite(s.lambda)) {
      fail(ErrorCode::Divergence, "TEVP state became non-finite at step " +
                                      std::to_string(iv + 1));
    }
    out.push_back(s);
  }
  return out;
}

TevpSteadyState tevp_steady_state(const TevpParams& p, double gamma_dot) {
  const double denom = p.k_plus + p.k_minus * std::abs(gamma_dot);
  if (!(denom > 0.0)) {
    fail(ErrorCode::InvalidArgument,
         "steady state undefined: k_plus + k_minus*|gamma_dot| is zero");
  }
  TevpSteadyState ss;
  ss.lambda = p.k_plus / denom;
  ss.sigma = p.sigma_y * ss.lambda + (p.eta_s + p.eta_p * ss.lambda) * gamma_dot;
  return ss;
}

// ---------------------------------------------------------------------------
// Tensorial models

SymTensor2 upper_convected_derivative_rhs(const SymTensor2& A,
                                          const SymTensor2& dA_dt,
                                          const VelocityGradient2& L) {
  return dA_dt - convect(L, A);
}

SymTensor2 giesekus_rhs(const GiesekusParams& p, const SymTensor2& sigma,
                        const VelocityGradient2& L,
                        const VelocityGradient2& dL_dt) {
  const SymTensor2 gd = L.rate_of_deformation();
  const SymTensor2 gd_ucd =
      upper_convected_derivative_rhs(gd, dL_dt.rate_of_deformation(), L);
  const SymTensor2 source = (p.G0 * p.tau1) * (gd + p.tau2 * gd_ucd) - sigma -
                            (p.alpha / p.G0) * square(sigma);
  return convect(L, sigma) + (1.0 / p.tau1) * source;
}

SymTensor2 oldroydb_rhs(const OldroydBParams& p, const SymTensor2& sigma,
                        const VelocityGradient2& L,
                        const VelocityGradient2& dL_dt) {
  const SymTensor2 gd = L.rate_of_deformation();
  const SymTensor2 gd_ucd =
      upper_convected_derivative_rhs(gd, dL_dt.rate_of_deformation(), L);
  const SymTensor2 source = (p.G0 * p.tau1) * (gd + p.tau2 * gd_ucd) - sigma;
  return convect(L, sigma) + (1.0 / p.tau1) * source;
}

std::vector<SymTensor2> integrate_giesekus(const GiesekusParams& p,
                                           std::span<const VelocityGradient2> L,
                                           double dt, const SymTensor2& init,
                                           std::size_t substeps) {
  p.validate();
  return integrate_tensor(L, dt, init, substeps,
                          [&p](const SymTensor2& s, const VelocityGradient2& g,
                               const VelocityGradient2& dg) {
                            return giesekus_rhs(p, s, g, dg);
                          });
}

std::vector<SymTensor2> integrate_oldroydb(const OldroydBParams& p,
                                           std::span<const VelocityGradient2> L,
                                           double dt, const SymTensor2& init,
                                           std::size_t substeps) {
  p.validate();
  return integrate_tensor(L, dt, init, substeps,
                          [&p](const SymTensor2& s, const VelocityGradient2& g,
                               const VelocityGradient2& dg) {
                            return oldroydb_rhs(p, s, g, dg);
                          });
}

// ---------------------------------------------------------------------------
// SampledSeries

SampledSeries::SampledSeries(std::span<const double> values, double dt)
    : values_(values.begin(), values.end()), dt_(dt) {
  require_dt(dt);
  if (values_.empty()) fail(ErrorCode::InvalidArgument, "empty series");
}

std::size_t SampledSeries::base_node(std::size_t interval) const {
  const std::size_t m = std::min<std::size_t>(4, values_.size());
  const std::size_t lo = interval > 0 ? interval - 1 : 0;
  return std::min(lo, values_.size() - m);
}

std::size_t SampledSeries::locate(double t, double& frac) const {
  if (values_.size() == 1) {
    frac = 0.0;
    return 0;
  }
  const double x = t / dt_;
  const auto last = static_cast<double>(values_.size() - 2);
  const double iv = std::clamp(std::floor(x), 0.0, last);
  frac = x - iv;
  return static_cast<std::size_t>(iv);
}

double SampledSeries::value_in(std::size_t interval, double frac) const {
  const std::size_t m = std::min<std::size_t>(4, values_.size());
  if (m == 1) return values_[0];
  const std::size_t base = base_node(interval);
  const double u = static_cast<double>(interval - base) + frac;
  double v = 0.0;
  for (std::size_t k = 0; k < m; ++k) v += values_[base + k] * lagrange(k, m, u);
  return v;
}

double SampledSeries::derivative_in(std::size_t interval, double frac) const {
  const std::size_t m = std::min<std::size_t>(4, values_.size());
  if (m == 1) return 0.0;
  const std::size_t base = base_node(interval);
  const double u = static_cast<double>(interval - base) + frac;
  double v = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    v += values_[base + k] * lagrange_derivative(k, m, u);
  }
  return v / dt_;
}

double SampledSeries::value(double t) const {
  double frac = 0.0;
  const auto iv = locate(t, frac);
  return value_in(iv, frac);
}

double SampledSeries::derivative(double t) const {
  double frac = 0.0;
  const auto iv = locate(t, frac);
  return derivative_in(iv, frac);
}

}  // namespace rheo::constitutive
