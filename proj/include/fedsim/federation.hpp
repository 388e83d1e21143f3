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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedsim/dataio.hpp"
#include "fedsim/objectives.hpp"
#include "fedsim/schedules.hpp"

namespace fedsim {

enum class UpdateRule { kSgd, kNesterov, kMass };
enum class Sampling { kFull, kWithReplacement, kWithoutReplacement };

UpdateRule parse_update_rule(const std::string& name);
Sampling parse_sampling(const std::string& name);
std::string to_string(UpdateRule rule);
std::string to_string(Sampling sampling);

struct FederationConfig {
  std::size_t devices = 1;        // N
  std::size_t participants = 1;   // K
  long local_steps = 1;           // E
  long total_steps = 1;           // T
  std::size_t batch_size = 1;
  UpdateRule rule = UpdateRule::kSgd;
  Sampling sampling = Sampling::kFull;
  Schedule schedule;
  std::uint64_t master_seed = 0;
  long eval_stride = 1;

  /// Use every sample of the shard at every step instead of random batches.
  bool full_batch = false;
  /// MaSS only: evaluate the stochastic gradient at w instead of u.
  bool mass_gradient_at_w = false;
  /// Keep the averaged iterate at every communication round.
  bool store_iterates = false;
  /// Stop once the recorded loss is at or below this value.
  std::optional<double> stop_loss;
  /// Abort when the loss exceeds this value or is not finite.
  double divergence_threshold = 1e12;
  /// Starting point; zero when empty.
  Vector initial;

  /// Throws kConfig on inconsistent fields.
  void validate() const;
};

/// Per-device iterates. Fields a rule does not use stay empty.
struct DeviceState {
  Vector w;
  Vector v_prev;  // Nesterov: previous v
  Vector u;       // MaSS: extrapolated iterate
  Vector w_prev;  // MaSS: previous w
};

struct TrajectoryPoint {
  long t = 0;
  double loss = 0.0;
  /// Dispersion of device iterates; at a communication step this is the
  /// spread of the models being averaged, before the broadcast.
  double drift = 0.0;
  double grad_norm = 0.0;
  /// Communication rounds completed by step t.
  long comm_round = 0;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  /// (t, averaged iterate) at communication rounds, when requested.
  std::vector<std::pair<long, Vector>> iterates;
  Vector final_average;

  void write_csv(std::ostream& out) const;
  static Trajectory read_csv(std::istream& in);
};

inline constexpr const char* kTrajectoryCsvHeader = "t,loss,drift,grad_norm,comm_round";

// --- local updates -----------------------------------------------------------

/// w <- w - alpha g.
void local_step_sgd(DeviceState& state, const Vector& g, double alpha);

/// v = w - alpha g; w = v + beta (v - v_prev); v_prev = v.
void local_step_nesterov(DeviceState& state, const Vector& g, double alpha, double beta);

/// First half of a MaSS step: w_prev = w, w = u - eta1 g.
void mass_descend(DeviceState& state, const Vector& g, double eta1);
/// Second half: u = w + gamma (w - w_prev) + eta2 g.
void mass_extrapolate(DeviceState& state, const Vector& g, double eta2, double gamma);
/// Both halves with no communication in between.
void local_step_mass(DeviceState& state, const Vector& g, double eta1, double eta2,
                     double gamma);

// --- communication -------------------------------------------------------------

/// Draws participants for a partial scheme. Scheme I returns K i.i.d. draws
/// proportional to `weights` (a sorted multiset); scheme II a uniform K-subset
/// in increasing order.
std::vector<std::size_t> sample_devices(Sampling scheme, std::size_t participants,
                                        std::span<const double> weights, std::uint64_t seed,
                                        std::uint64_t round);

/// Full: sum_k p_k v_k. Scheme I: (1/K) sum over the multiset. Scheme II:
/// (N/K) sum_{k in S} p_k v_k. Each is unbiased for sum_k p_k v_k.
Vector aggregate(Sampling scheme, std::span<const std::size_t> participants,
                 std::span<const Vector> iterates, std::span<const double> weights);

/// sum_k p_k ||w_k - wbar||^2 with wbar = sum_k p_k w_k.
double drift(std::span<const Vector> iterates, std::span<const double> weights);

/// Called after every broadcast with the step count and all device states.
using CommunicationObserver = std::function<void(long, std::span<const DeviceState>)>;

/// Runs T local iterations with communication every E steps.
///
/// Recording happens at t = 0, every eval_stride steps, at every
/// communication round and at t = T. Throws DivergenceError when the loss at
/// a recorded point is not finite or exceeds the divergence threshold.
Trajectory run(const FederationConfig& config, const Objective& objective,
               const CommunicationObserver& observer = {});

/// Indices of the batch drawn by device k at step t.
void draw_batch(std::span<const std::size_t> shard, std::size_t batch_size, std::uint64_t seed,
                std::size_t device, long step, std::vector<std::size_t>& out);

}  // namespace fedsim
