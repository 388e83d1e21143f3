/*
   Copyright 2026 The fedsim Authors

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

#include "fedsim/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "fedsim/error.hpp"

namespace fedsim {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::kInvalidSchedule, what);
}

bool positive(double x) { return x > 0.0 && std::isfinite(x); }

StepSizes from_alpha_beta(double alpha, double beta) {
  return {alpha, beta, alpha, 0.0, beta};
}

StepSizes from_mass(const MassParams& m) {
  return {m.eta1, m.gamma, m.eta1, m.eta2, m.gamma};
}

}  // namespace

double schedule_offset(double kappa, long local_steps) {
  return std::max(32.0 * kappa, static_cast<double>(local_steps));
}

double scvx_decay(double mu, double kappa, long local_steps, long t) {
  require(positive(mu), "scvx_decay: mu must be positive");
  require(kappa >= 1.0, "scvx_decay: kappa must be at least 1");
  require(local_steps >= 1, "scvx_decay: E must be at least 1");
  require(t >= 0, "scvx_decay: negative step");
  return 1.0 / (4.0 * mu * (schedule_offset(kappa, local_steps) + static_cast<double>(t)));
}

NesterovPair nesterov_scvx(double mu, double kappa, long local_steps, long t) {
  require(positive(mu), "nesterov_scvx: mu must be positive");
  require(kappa >= 1.0, "nesterov_scvx: kappa must be at least 1");
  require(local_steps >= 1, "nesterov_scvx: E must be at least 1");
  const double s = static_cast<double>(t) + schedule_offset(kappa, local_steps);
  require(s > 6.0, "nesterov_scvx: t + gamma must exceed 6");
  const double alpha = 6.0 / (mu * s);
  const double beta = 3.0 / (14.0 * s * (1.0 - 6.0 / s) * std::max(mu, 1.0));
  return {alpha, beta};
}

ConstStep const_sqrt(double scale, long total_steps, double prefactor, double smoothness) {
  require(positive(scale), "const_sqrt: scale must be positive");
  require(total_steps >= 1, "const_sqrt: T must be positive");
  require(static_cast<double>(total_steps) >= scale, "const_sqrt: T must be at least the scale");
  require(positive(prefactor), "const_sqrt: prefactor must be positive");
  double alpha = prefactor * std::sqrt(scale / static_cast<double>(total_steps));
  if (smoothness > 0.0) {
    const double cap = 1.0 / (4.0 * smoothness);
    if (alpha > cap) {
      std::cerr << "fedsim: const_sqrt step " << alpha << " exceeds 1/(4L); clamped to " << cap
                << '\n';
      return {cap, true};
    }
  }
  return {alpha, false};
}

double overparam_const(long local_steps, double devices, double l, double curvature,
                       double nu_max, double nu_min, double prefactor) {
  require(local_steps >= 1, "overparam_const: E must be at least 1");
  require(positive(devices) && positive(l) && positive(curvature) && positive(nu_max) &&
              positive(nu_min),
          "overparam_const: arguments must be positive");
  require(prefactor > 0.0 && prefactor <= 1.0, "overparam_const: prefactor must be in (0, 1]");
  return (prefactor / static_cast<double>(local_steps)) * devices /
         (l * nu_max + curvature * (devices - nu_min));
}

MassParams mass_const(long local_steps, double devices, double l, double mu, double nu_max,
                      double nu_min, double kappa1, double kappa_tilde, double prefactor) {
  require(kappa1 >= 1.0, "mass_const: kappa1 must be at least 1");
  require(kappa_tilde >= 1.0, "mass_const: kappa_tilde must be at least 1");
  const double eta1 = overparam_const(local_steps, devices, l, mu, nu_max, nu_min, prefactor);
  const double inv_root = 1.0 / std::sqrt(kappa1 * kappa_tilde);
  const double eta2 = eta1 * (1.0 - 1.0 / kappa_tilde) / (1.0 + inv_root);
  const double gamma = (1.0 - inv_root) / (1.0 + inv_root);
  return {eta1, eta2, gamma};
}

ThreeSequence mass_to_three_sequence(double eta1, double eta2, double gamma) {
  require(gamma >= 0.0 && gamma < 1.0, "mass_to_three_sequence: gamma must lie in [0, 1)");
  const double alpha = (1.0 - gamma) / (1.0 + gamma);
  const double delta = (eta1 - eta2 * (1.0 + alpha)) / alpha;
  return {alpha, delta, eta1};
}

MassParams three_sequence_to_mass(const ThreeSequence& seq) {
  require(positive(seq.alpha), "three_sequence_to_mass: alpha must be positive");
  return {seq.eta, (seq.eta - seq.alpha * seq.delta) / (1.0 + seq.alpha),
          (1.0 - seq.alpha) / (1.0 + seq.alpha)};
}

double experiment_decay(double eta0, double n, double c, long t) {
  require(positive(eta0) && positive(n) && positive(c), "experiment_decay: arguments must be positive");
  require(t >= 0, "experiment_decay: negative step");
  return std::min(eta0, n * c / (1.0 + static_cast<double>(t)));
}

// --- Schedule ------------------------------------------------------------------

Schedule::Schedule(Params p) : params_(std::move(p)) {
  std::visit(
      [this](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConstSqrtSchedule>) {
          const double a = const_sqrt(s.scale, s.total_steps, s.prefactor, s.smoothness).alpha;
          constant_ = from_alpha_beta(a, s.momentum_equals_step ? a : 0.0);
        } else if constexpr (std::is_same_v<T, OverparamConstSchedule>) {
          constant_ = from_alpha_beta(overparam_const(s.local_steps, s.devices, s.l, s.curvature,
                                                      s.nu_max, s.nu_min, s.prefactor),
                                      0.0);
        } else if constexpr (std::is_same_v<T, MassConstSchedule>) {
          constant_ = from_mass(mass_const(s.local_steps, s.devices, s.l, s.mu, s.nu_max,
                                           s.nu_min, s.kappa1, s.kappa_tilde, s.prefactor));
        } else if constexpr (std::is_same_v<T, FixedSchedule>) {
          constant_ = s.steps;
        } else if constexpr (std::is_same_v<T, ScvxDecaySchedule>) {
          scvx_decay(s.mu, s.kappa, s.local_steps, 0);
        } else if constexpr (std::is_same_v<T, NesterovScvxSchedule>) {
          nesterov_scvx(s.mu, s.kappa, s.local_steps, 1);
        } else if constexpr (std::is_same_v<T, ExperimentDecaySchedule>) {
          experiment_decay(s.eta0, s.n, s.c, 0);
          require(s.beta >= 0.0 && s.beta < 1.0, "experiment_decay: beta must lie in [0, 1)");
        }
      },
      params_);
}

StepSizes Schedule::at(long t) const {
  if (t < 0) fail(ErrorCode::kInvalidSchedule, "negative step index");
  return std::visit(
      [this, t](const auto& s) -> StepSizes {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ScvxDecaySchedule>) {
          return from_alpha_beta(scvx_decay(s.mu, s.kappa, s.local_steps, t), 0.0);
        } else if constexpr (std::is_same_v<T, NesterovScvxSchedule>) {
          // The update at step t uses beta_t, i.e. the pair's beta at t + 1.
          const double alpha = nesterov_scvx(s.mu, s.kappa, s.local_steps, t).alpha;
          const double beta = nesterov_scvx(s.mu, s.kappa, s.local_steps, t + 1).beta_prev;
          return from_alpha_beta(alpha, beta);
        } else if constexpr (std::is_same_v<T, ExperimentDecaySchedule>) {
          return from_alpha_beta(experiment_decay(s.eta0, s.n, s.c, t), s.beta);
        } else {
          return constant_;
        }
      },
      params_);
}

std::string Schedule::kind() const {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ScvxDecaySchedule>) return "scvx_decay";
        else if constexpr (std::is_same_v<T, NesterovScvxSchedule>) return "nesterov_scvx";
        else if constexpr (std::is_same_v<T, ConstSqrtSchedule>) return "const_sqrt";
        else if constexpr (std::is_same_v<T, OverparamConstSchedule>) return "overparam_const";
        else if constexpr (std::is_same_v<T, MassConstSchedule>) return "mass_const";
        else if constexpr (std::is_same_v<T, ExperimentDecaySchedule>) return "experiment_decay";
        else return "fixed";
      },
      params_);
}

Schedule Schedule::fixed(double alpha, double beta) {
  return Schedule(FixedSchedule{from_alpha_beta(alpha, beta)});
}

Schedule Schedule::fixed_mass(double eta1, double eta2, double gamma) {
  return Schedule(FixedSchedule{from_mass({eta1, eta2, gamma})});
}

}  // namespace fedsim
