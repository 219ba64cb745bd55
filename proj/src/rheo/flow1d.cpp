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

#include "rheo/flow1d.hpp"

#include <cmath>
#include <string>

#include "rheo/error.hpp"

namespace rheo::flow1d {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    fail(ErrorCode::Configuration, std::string("channel ") + name + " must be positive");
  }
}

// du/dy at every node: central inside, one-sided second order at the walls.
void shear_rate(const std::vector<double>& u, double h, std::vector<double>& out) {
  const std::size_t n = u.size();
  const double inv2h = 0.5 / h;
  out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) * inv2h;
  out[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) * inv2h;
  for (std::size_t j = 1; j + 1 < n; ++j) out[j] = (u[j + 1] - u[j - 1]) * inv2h;
}

}  // namespace

double ChannelConfig::stability_limit() const {
  const double h = spacing();
  return rho * h * h / (2.0 * (eta_s + eta_p));
}

void ChannelConfig::validate() const {
  require_positive(H, "H");
  require_positive(rho, "rho");
  require_positive(eta_s, "eta_s");
  require_positive(eta_p, "eta_p");
  require_positive(tau1, "tau1");
  require_positive(dt, "dt");
  require_positive(t_end, "t_end");
  if (!std::isfinite(dpdx)) fail(ErrorCode::Configuration, "channel dpdx must be finite");
  if (ny < 8) fail(ErrorCode::Configuration, "channel ny must be >= 8");
  if (snapshots < 2) fail(ErrorCode::Configuration, "channel needs >= 2 snapshots");
  if (dt > stability_limit()) {
    fail(ErrorCode::Configuration,
         "time step " + std::to_string(dt) + " exceeds the stability limit " +
             std::to_string(stability_limit()));
  }
  // Forward Euler on the stress relaxation term.
  if (dt > 0.5 * tau1) {
    fail(ErrorCode::Configuration, "time step must not exceed tau1 / 2");
  }
}

double poiseuille_centerline(const ChannelConfig& c) {
  return poiseuille_velocity(c, 0.5 * c.H);
}

double poiseuille_velocity(const ChannelConfig& c, double y) {
  return -c.dpdx / (2.0 * (c.eta_s + c.eta_p)) * y * (c.H - y);
}

double weissenberg(const ChannelConfig& c) {
  return c.tau1 * std::abs(poiseuille_centerline(c)) / c.H;
}

double elasticity_number(const ChannelConfig& c) {
  return c.tau1 * (c.eta_s + c.eta_p) / (c.rho * c.H * c.H);
}

PolymerStress polymer_stress_rhs(const PolymerStress& tau, double shear_rate,
                                 double eta_p, double tau1) {
  return {(eta_p * shear_rate - tau.xy) / tau1,
          -tau.xx / tau1 + 2.0 * tau.xy * shear_rate};
}

std::vector<double> momentum_residual(const ChannelConfig& c,
                                      const SolverState& s) {
  const std::size_t n = s.u.size();
  const double h = c.spacing();
  std::vector<double> r(n, 0.0);
  for (std::size_t j = 1; j + 1 < n; ++j) {
    r[j] = -c.dpdx + c.eta_s * (s.u[j + 1] - 2.0 * s.u[j] + s.u[j - 1]) / (h * h) +
           (s.tau_xy[j + 1] - s.tau_xy[j - 1]) / (2.0 * h);
  }
  return r;
}

FieldSequence solve_startup_channel(const ChannelConfig& config) {
  SolverState terminal;
  return solve_startup_channel(config, terminal);
}

FieldSequence solve_startup_channel(const ChannelConfig& c, SolverState& state) {
  c.validate();
  const std::size_t n = c.ny + 2;
  const double h = c.spacing();
  const double interval = c.t_end / static_cast<double>(c.snapshots - 1);
  const auto steps_per_snapshot =
      static_cast<std::size_t>(std::ceil(interval / c.dt - 1e-9));
  const double dt = interval / static_cast<double>(steps_per_snapshot);

  FieldSequence seq;
  seq.coord_dim = 1;
  seq.n_points = n;
  seq.n_steps = c.snapshots;
  seq.dt = interval;
  seq.channels = {"u_x", "sigma_xy", "sigma_xx"};
  seq.units = {"m/s", "Pa", "Pa"};
  seq.coords.resize(n);
  for (std::size_t j = 0; j < n; ++j) seq.coords[j] = h * static_cast<double>(j);
  seq.values.assign(c.snapshots * n * 3, 0.0);
  seq.metadata = {{"dpdx", c.dpdx},
                  {"Wi", weissenberg(c)},
                  {"elasticity_number", elasticity_number(c)},
                  {"tau1", c.tau1}};

  state.u.assign(n, 0.0);
  state.tau_xy.assign(n, 0.0);
  state.tau_xx.assign(n, 0.0);
  std::vector<double> gdot(n), u_next(n);

  auto record = [&](std::size_t snap) {
    for (std::size_t j = 0; j < n; ++j) {
      seq.at(snap, j, 0) = state.u[j];
      seq.at(snap, j, 1) = state.tau_xy[j];
      seq.at(snap, j, 2) = state.tau_xx[j];
    }
  };
  record(0);

  const double inv_h2 = 1.0 / (h * h);
  const double inv_2h = 0.5 / h;
  std::size_t step = 0;
  for (std::size_t snap = 1; snap < c.snapshots; ++snap) {
    for (std::size_t k = 0; k < steps_per_snapshot; ++k, ++step) {
      shear_rate(state.u, h, gdot);
      u_next[0] = 0.0;
      u_next[n - 1] = 0.0;
      for (std::size_t j = 1; j + 1 < n; ++j) {
        const double accel =
            -c.dpdx +
            c.eta_s * (state.u[j + 1] - 2.0 * state.u[j] + state.u[j - 1]) * inv_h2 +
            (state.tau_xy[j + 1] - state.tau_xy[j - 1]) * inv_2h;
        u_next[j] = state.u[j] + dt / c.rho * accel;
      }
      for (std::size_t j = 0; j < n; ++j) {
        const auto r = polymer_stress_rhs({state.tau_xy[j], state.tau_xx[j]},
                                          gdot[j], c.eta_p, c.tau1);
        state.tau_xy[j] += dt * r.xy;
        state.tau_xx[j] += dt * r.xx;
      }
      state.u.swap(u_next);
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(state.u[j]) || !std::isfinite(state.tau_xy[j]) ||
          !std::isfinite(state.tau_xx[j])) {
        fail(ErrorCode::Divergence,
             "channel solver diverged by step " + std::to_string(step));
      }
    }
    record(snap);
  }
  return seq;
}

std::vector<FieldSequence> generate_flow_dataset(
    const ChannelConfig& base, std::span<const double> dpdx_values,
    std::size_t snapshots) {
  std::vector<FieldSequence> out;
  out.reserve(dpdx_values.size());
  for (double dpdx : dpdx_values) {
    ChannelConfig c = base;
    c.dpdx = dpdx;
    c.snapshots = snapshots;
    out.push_back(solve_startup_channel(c));
  }
  return out;
}

}  // namespace rheo::flow1d
