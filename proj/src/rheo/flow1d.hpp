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

// Start-up of pressure-driven Oldroyd-B flow between parallel plates.
//
// The total stress is split into a Newtonian solvent part eta_s * du/dy and a
// polymer extra stress tau. In terms of the tensorial Oldroyd-B parameters
// (G0, tau1, tau2) the split is
//     eta_s = G0 * tau2,    eta_p = G0 * (tau1 - tau2),
// so eta_s + eta_p = G0 * tau1 is the zero-shear viscosity.
//
// Unknowns live on nodes y_j = j*h, j = 0..ny+1, h = H/(ny+1); the walls are
// the first and last nodes (no slip). Space uses second-order central
// differences (one-sided second-order at the walls for du/dy) and time uses
// forward Euler.

#include <cstddef>
#include <span>
#include <vector>

#include "rheo/field.hpp"

namespace rheo::flow1d {

struct ChannelConfig {
  double H = 1.0;         // gap width, m
  std::size_t ny = 31;    // interior nodes
  double rho = 1.0;       // density, kg/m^3
  double eta_s = 0.2;     // solvent viscosity, Pa s
  double eta_p = 0.8;     // polymer viscosity, Pa s
  double tau1 = 1.0;      // relaxation time, s
  double dpdx = -4.0;     // pressure gradient, Pa/m
  double dt = 2e-4;       // upper bound on the time step, s
  double t_end = 5.0;     // horizon, s
  std::size_t snapshots = 26;  // recorded at uniform intervals incl. t=0

  double spacing() const { return H / static_cast<double>(ny + 1); }
  // rho h^2 / (2 (eta_s + eta_p))
  double stability_limit() const;
  // Throws Configuration when invalid or when dt exceeds the stability limit.
  void validate() const;
};

// Centerline velocity of the steady profile.
double poiseuille_centerline(const ChannelConfig& c);
// u(y) = -dpdx / (2 (eta_s + eta_p)) * y (H - y)
double poiseuille_velocity(const ChannelConfig& c, double y);
// tau1 * U_max / H
double weissenberg(const ChannelConfig& c);
// tau1 (eta_s + eta_p) / (rho H^2)
double elasticity_number(const ChannelConfig& c);

struct PolymerStress {
  double xy = 0.0;
  double xx = 0.0;
};

// Pointwise polymer stress law under a local shear rate; tau_yy stays zero
// from zero initial data.
PolymerStress polymer_stress_rhs(const PolymerStress& tau, double shear_rate,
                                 double eta_p, double tau1);

struct SolverState {
  std::vector<double> u;
  std::vector<double> tau_xy;
  std::vector<double> tau_xx;
};

// Channels: u_x, sigma_xy, sigma_xx (sigma = polymer extra stress).
// metadata carries dpdx, Wi and the elasticity number.
FieldSequence solve_startup_channel(const ChannelConfig& config);

// Same solve, also returning the terminal solver state.
FieldSequence solve_startup_channel(const ChannelConfig& config,
                                    SolverState& terminal);

// -dpdx + eta_s u_yy + d(tau_xy)/dy at interior nodes (discrete form used by
// the solver). Zero at a discrete steady state.
std::vector<double> momentum_residual(const ChannelConfig& config,
                                      const SolverState& state);

std::vector<FieldSequence> generate_flow_dataset(
    const ChannelConfig& base, std::span<const double> dpdx_values,
    std::size_t snapshots);

}  // namespace rheo::flow1d
