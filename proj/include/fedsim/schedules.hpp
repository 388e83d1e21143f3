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

#pragma once

#include <string>
#include <utility>
#include <variant>

namespace fedsim {

/// Step sizes for one local iteration.
///
/// SGD reads `alpha`; Nesterov reads `alpha` and `beta`; MaSS reads `eta1`,
/// `eta2` and `mass_gamma`. Schedules that only define (alpha, beta) set
/// eta1 = alpha, mass_gamma = beta, eta2 = 0, and vice versa.
struct StepSizes {
  double alpha = 0.0;
  double beta = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;
  double mass_gamma = 0.0;
};

// --- closed-form step rules ----------------------------------------------------

/// alpha_t = 1 / (4 mu (max(32 kappa, E) + t)).
double scvx_decay(double mu, double kappa, long local_steps, long t);

/// Offset max(32 kappa, E) shared by the strongly convex decays.
double schedule_offset(double kappa, long local_steps);

struct NesterovPair {
  double alpha;      // alpha_t
  double beta_prev;  // beta_{t-1}
};

/// alpha_t = 6 / (mu (t + g)),
/// beta_{t-1} = 3 / (14 (t + g)(1 - 6/(t + g)) max(mu, 1)), g = max(32 kappa, E).
/// The max(mu, 1) factor is kept verbatim even though it makes beta scale
/// differently from alpha when mu != 1.
NesterovPair nesterov_scvx(double mu, double kappa, long local_steps, long t);

struct ConstStep {
  double alpha;
  bool clamped;
};

/// alpha = c sqrt(scale / T), clamped to 1/(4L) when L > 0 is given.
ConstStep const_sqrt(double scale, long total_steps, double prefactor, double smoothness = 0.0);

/// (c / E) N / (l nu_max + curvature (N - nu_min)); curvature is L for the
/// general overparameterized case and mu for least squares.
double overparam_const(long local_steps, double devices, double l, double curvature,
                       double nu_max, double nu_min, double prefactor);

struct MassParams {
  double eta1;
  double eta2;
  double gamma;
};

/// eta2 = eta1 (1 - 1/kt) / (1 + 1/sqrt(k1 kt)),
/// gamma = (1 - 1/sqrt(k1 kt)) / (1 + 1/sqrt(k1 kt)), eta1 from overparam_const.
MassParams mass_const(long local_steps, double devices, double l, double mu, double nu_max,
                      double nu_min, double kappa1, double kappa_tilde, double prefactor);

/// Three-sequence parameterisation (alpha, delta, eta) of a MaSS step.
struct ThreeSequence {
  double alpha;
  double delta;
  double eta;
};

/// (1-alpha)/(1+alpha) = gamma, eta = eta1, (eta - alpha delta)/(1 + alpha) = eta2.
ThreeSequence mass_to_three_sequence(double eta1, double eta2, double gamma);
MassParams three_sequence_to_mass(const ThreeSequence& seq);

/// eta_t = min(eta0, n c / (1 + t)).
double experiment_decay(double eta0, double n, double c, long t);

// --- schedule objects ----------------------------------------------------------

struct ScvxDecaySchedule {
  double mu;
  double kappa;
  long local_steps;
};
struct NesterovScvxSchedule {
  double mu;
  double kappa;
  long local_steps;
};
struct ConstSqrtSchedule {
  double scale;
  long total_steps;
  double prefactor = 1.0;
  double smoothness = 0.0;
  bool momentum_equals_step = false;
};
struct OverparamConstSchedule {
  long local_steps;
  double devices;
  double l;
  double curvature;
  double nu_max;
  double nu_min;
  double prefactor = 0.5;
};
struct MassConstSchedule {
  long local_steps;
  double devices;
  double l;
  double mu;
  double nu_max;
  double nu_min;
  double kappa1;
  double kappa_tilde;
  double prefactor = 0.25;
};
struct ExperimentDecaySchedule {
  double eta0;
  double n;
  double c;
  double beta = 0.0;
};
struct FixedSchedule {
  StepSizes steps;
};

/// A step-size sequence; `at(t)` is a pure function of the parameters and t.
class Schedule {
 public:
  using Params = std::variant<ScvxDecaySchedule, NesterovScvxSchedule, ConstSqrtSchedule,
                              OverparamConstSchedule, MassConstSchedule,
                              ExperimentDecaySchedule, FixedSchedule>;

  Schedule() : params_(FixedSchedule{}) {}
  explicit Schedule(Params p);

  StepSizes at(long t) const;
  const Params& params() const noexcept { return params_; }
  /// Kind string used in configuration files.
  std::string kind() const;

  static Schedule fixed(double alpha, double beta = 0.0);
  static Schedule fixed_mass(double eta1, double eta2, double gamma);

 private:
  Params params_;
  // Constant kinds are resolved once.
  StepSizes constant_{};
};

}  // namespace fedsim
