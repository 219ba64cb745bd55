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

// Constitutive models under homogeneous deformation: a thixotropic
// elasto-viscoplastic (TEVP) shear model and the tensorial Giesekus and
// Oldroyd-B models. All integrators are fixed-step classical RK4 over a
// uniformly sampled input history.

#include <cstddef>
#include <span>
#include <vector>

namespace rheo::constitutive {

struct TevpParams {
  double G = 1.0;        // elastic modulus, Pa
  double sigma_y = 1.0;  // yield stress, Pa
  double eta_s = 0.1;    // solvent viscosity, Pa s
  double eta_p = 1.0;    // plastic viscosity, Pa s
  double k_plus = 0.2;   // structure buildup rate, 1/s
  double k_minus = 0.5;  // structure breakdown rate, 1/s

  void validate() const;
};

struct TevpState {
  double sigma12 = 0.0;
  double lambda = 0.0;  // structure parameter, kept in [0, 1]
};

struct TevpRates {
  double dsigma_dt = 0.0;
  double dlambda_dt = 0.0;
};

struct GiesekusParams {
  double tau1 = 1.0;   // relaxation time, s
  double tau2 = 0.0;   // retardation time, s
  double G0 = 1.0;     // modulus, Pa
  double alpha = 0.0;  // mobility factor

  void validate() const;
};

struct OldroydBParams {
  double tau1 = 1.0;
  double tau2 = 0.0;
  double G0 = 1.0;

  void validate() const;
};

// Symmetric 2x2 tensor; yx is xy by construction.
struct SymTensor2 {
  double xx = 0.0;
  double yy = 0.0;
  double xy = 0.0;

  SymTensor2& operator+=(const SymTensor2& o) {
    xx += o.xx;
    yy += o.yy;
    xy += o.xy;
    return *this;
  }
  friend SymTensor2 operator+(SymTensor2 a, const SymTensor2& b) { return a += b; }
  friend SymTensor2 operator-(const SymTensor2& a, const SymTensor2& b) {
    return {a.xx - b.xx, a.yy - b.yy, a.xy - b.xy};
  }
  friend SymTensor2 operator*(double s, const SymTensor2& a) {
    return {s * a.xx, s * a.yy, s * a.xy};
  }
  bool finite() const;
  static SymTensor2 identity() { return {1.0, 1.0, 0.0}; }
};

// L_ij = du_i/dx_j.
struct VelocityGradient2 {
  double xx = 0.0;
  double xy = 0.0;
  double yx = 0.0;
  double yy = 0.0;

  // L + L^T
  SymTensor2 rate_of_deformation() const { return {2.0 * xx, 2.0 * yy, xy + yx}; }
  bool finite() const;
};

// L.A + A.L^T for symmetric A (the result is symmetric).
SymTensor2 convect(const VelocityGradient2& L, const SymTensor2& A);
// A.A
SymTensor2 square(const SymTensor2& A);

TevpRates tevp_rhs(const TevpParams& p, const TevpState& s, double gamma_dot);

// Output[i] is the state at t_i = i*dt; output[0] == init. Each sample
// interval is split into `substeps` RK4 steps, with the input evaluated by
// piecewise-cubic interpolation of the series.
std::vector<TevpState> integrate_tevp(const TevpParams& p,
                                      std::span<const double> gamma_dot,
                                      double dt, const TevpState& init,
                                      std::size_t substeps = 1);

struct TevpSteadyState {
  double lambda = 0.0;
  double sigma = 0.0;
};
TevpSteadyState tevp_steady_state(const TevpParams& p, double gamma_dot);

// dA/dt - L.A - A.L^T: the upper-convected derivative of A in a homogeneous
// flow, where the advective term vanishes.
SymTensor2 upper_convected_derivative_rhs(const SymTensor2& A,
                                          const SymTensor2& dA_dt,
                                          const VelocityGradient2& L);

// d(sigma)/dt from the Giesekus equation solved for the time derivative.
SymTensor2 giesekus_rhs(const GiesekusParams& p, const SymTensor2& sigma,
                        const VelocityGradient2& L,
                        const VelocityGradient2& dL_dt);
SymTensor2 oldroydb_rhs(const OldroydBParams& p, const SymTensor2& sigma,
                        const VelocityGradient2& L,
                        const VelocityGradient2& dL_dt);

std::vector<SymTensor2> integrate_giesekus(const GiesekusParams& p,
                                           std::span<const VelocityGradient2> L,
                                           double dt, const SymTensor2& init,
                                           std::size_t substeps = 1);
std::vector<SymTensor2> integrate_oldroydb(const OldroydBParams& p,
                                           std::span<const VelocityGradient2> L,
                                           double dt, const SymTensor2& init,
                                           std::size_t substeps = 1);

// Piecewise four-point Lagrange interpolant of a uniformly sampled series
// (lower order when fewer than four samples exist). The derivative is that of
// the interpolant itself, so integrating it reproduces the samples.
class SampledSeries {
 public:
  SampledSeries(std::span<const double> values, double dt);

  double value(double t) const;
  double derivative(double t) const;
  // Same, addressed as interval index plus fraction in [0, 1] of that
  // interval, which avoids re-deriving the interval from a rounded time.
  double value_in(std::size_t interval, double frac) const;
  double derivative_in(std::size_t interval, double frac) const;
  std::size_t size() const { return values_.size(); }

 private:
  std::size_t base_node(std::size_t interval) const;
  std::size_t locate(double t, double& frac) const;

  std::vector<double> values_;
  double dt_;
};

}  // namespace rheo::constitutive
