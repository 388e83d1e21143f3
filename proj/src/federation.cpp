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

#include "fedsim/federation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fedsim/error.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

UpdateRule parse_update_rule(const std::string& name) {
  if (name == "sgd") return UpdateRule::kSgd;
  if (name == "nesterov") return UpdateRule::kNesterov;
  if (name == "mass") return UpdateRule::kMass;
  fail(ErrorCode::kConfig, "unknown update rule '" + name + "'");
}

Sampling parse_sampling(const std::string& name) {
  if (name == "full") return Sampling::kFull;
  if (name == "with_replacement") return Sampling::kWithReplacement;
  if (name == "without_replacement") return Sampling::kWithoutReplacement;
  fail(ErrorCode::kConfig, "unknown sampling scheme '" + name + "'");
}

std::string to_string(UpdateRule rule) {
  switch (rule) {
    case UpdateRule::kSgd: return "sgd";
    case UpdateRule::kNesterov: return "nesterov";
    case UpdateRule::kMass: return "mass";
  }
  return "?";
}

std::string to_string(Sampling sampling) {
  switch (sampling) {
    case Sampling::kFull: return "full";
    case Sampling::kWithReplacement: return "with_replacement";
    case Sampling::kWithoutReplacement: return "without_replacement";
  }
  return "?";
}

void FederationConfig::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::kConfig, what); };
  if (devices < 1) bad("federation: N must be at least 1");
  if (participants < 1 || participants > devices) bad("federation: K must lie in [1, N]");
  if (local_steps < 1) bad("federation: E must be at least 1");
  if (total_steps < 1) bad("federation: T must be at least 1");
  if (batch_size < 1) bad("federation: batch_size must be at least 1");
  if (eval_stride < 1) bad("federation: eval_stride must be at least 1");
  if (sampling == Sampling::kFull && participants != devices)
    bad("federation: full participation requires K == N");
  if (!(divergence_threshold > 0.0)) bad("federation: divergence threshold must be positive");
}

// --- local updates -----------------------------------------------------------

void local_step_sgd(DeviceState& state, const Vector& g, double alpha) {
  state.w -= alpha * g;
}

void local_step_nesterov(DeviceState& state, const Vector& g, double alpha, double beta) {
  Vector v = state.w - alpha * g;
  state.w = v + beta * (v - state.v_prev);
  state.v_prev = std::move(v);
}

void mass_descend(DeviceState& state, const Vector& g, double eta1) {
  state.w_prev = state.w;
  state.w = state.u - eta1 * g;
}

void mass_extrapolate(DeviceState& state, const Vector& g, double eta2, double gamma) {
  state.u = state.w + gamma * (state.w - state.w_prev) + eta2 * g;
}

void local_step_mass(DeviceState& state, const Vector& g, double eta1, double eta2,
                     double gamma) {
  mass_descend(state, g, eta1);
  mass_extrapolate(state, g, eta2, gamma);
}

// --- communication -------------------------------------------------------------

std::vector<std::size_t> sample_devices(Sampling scheme, std::size_t participants,
                                        std::span<const double> weights, std::uint64_t seed,
                                        std::uint64_t round) {
  const std::size_t n = weights.size();
  if (scheme == Sampling::kFull)
    fail(ErrorCode::kInvalidInput, "sample_devices: full participation needs no sampling");
  if (participants == 0) fail(ErrorCode::kInvalidInput, "sample_devices: K must be positive");
  Stream draws(seed, StreamTag::kDeviceSampling, 0, round);
  std::vector<std::size_t> out;
  out.reserve(participants);
  if (scheme == Sampling::kWithReplacement) {
    std::vector<double> cumulative(n);
    std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
    const double total = cumulative.back();
    for (std::size_t i = 0; i < participants; ++i) {
      const double u = draws.uniform() * total;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      std::size_t k = static_cast<std::size_t>(it - cumulative.begin());
      if (k >= n) k = n - 1;
      // Skip zero-weight devices that share a cumulative value.
      while (weights[k] <= 0.0 && k + 1 < n) ++k;
      out.push_back(k);
    }
  } else {
    if (participants > n)
      fail(ErrorCode::kInvalidInput, "sample_devices: K exceeds N without replacement");
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < participants; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(draws.index(n - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Vector aggregate(Sampling scheme, std::span<const std::size_t> participants,
                 std::span<const Vector> iterates, std::span<const double> weights) {
  if (participants.empty()) fail(ErrorCode::kInvalidInput, "aggregate: no participants");
  if (iterates.size() != weights.size())
    fail(ErrorCode::kShape, "aggregate: iterate and weight counts differ");
  Vector out = Vector::Zero(iterates[participants.front()].size());
  const double n = static_cast<double>(weights.size());
  const double k = static_cast<double>(participants.size());
  for (auto dev : participants) {
    if (dev >= iterates.size()) fail(ErrorCode::kInvalidInput, "aggregate: device out of range");
    switch (scheme) {
      case Sampling::kFull: out += weights[dev] * iterates[dev]; break;
      case Sampling::kWithReplacement: out += iterates[dev] / k; break;
      case Sampling::kWithoutReplacement: out += (n / k) * weights[dev] * iterates[dev]; break;
    }
  }
  return out;
}

double drift(std::span<const Vector> iterates, std::span<const double> weights) {
  if (iterates.empty()) return 0.0;
  Vector mean = Vector::Zero(iterates.front().size());
  for (std::size_t k = 0; k < iterates.size(); ++k) mean += weights[k] * iterates[k];
  double total = 0.0;
  for (std::size_t k = 0; k < iterates.size(); ++k)
    total += weights[k] * (iterates[k] - mean).squaredNorm();
  return total;
}

void draw_batch(std::span<const std::size_t> shard, std::size_t batch_size, std::uint64_t seed,
                std::size_t device, long step, std::vector<std::size_t>& out) {
  out.resize(batch_size);
  for (std::size_t j = 0; j < batch_size; ++j) {
    const DrawAddress addr{seed, StreamTag::kBatch, static_cast<std::uint32_t>(device),
                           static_cast<std::uint64_t>(step), static_cast<std::uint32_t>(j)};
    out[j] = shard[uniform_index(addr, shard.size())];
  }
}

// --- simulation ------------------------------------------------------------------

namespace {

class Simulation {
 public:
  Simulation(const FederationConfig& cfg, const Objective& obj,
             const CommunicationObserver& observer)
      : cfg_(cfg), obj_(obj), observer_(observer), weights_(obj.weights()) {
    cfg_.validate();
    if (cfg_.devices != obj_.devices())
      fail(ErrorCode::kConfig, "federation: N = " + std::to_string(cfg_.devices) +
                                   " but the partition has " +
                                   std::to_string(obj_.devices()) + " devices");
    Vector start = cfg_.initial.size() ? cfg_.initial
                                       : Vector::Zero(static_cast<Eigen::Index>(obj_.dim()));
    if (static_cast<std::size_t>(start.size()) != obj_.dim())
      fail(ErrorCode::kShape, "federation: initial point has the wrong dimension");
    states_.resize(cfg_.devices);
    for (auto& s : states_) {
      s.w = start;
      if (cfg_.rule == UpdateRule::kNesterov) s.v_prev = start;
      if (cfg_.rule == UpdateRule::kMass) {
        s.u = start;
        s.w_prev = start;
      }
    }
    grads_.resize(cfg_.devices);
    shared_.resize(cfg_.devices);
  }

  Trajectory run() {
    record(0, 0.0, 0.0);
    long round = 0;
    for (long t = 0; t < cfg_.total_steps; ++t) {
      const StepSizes steps = cfg_.schedule.at(t);
      check_steps(steps, t);
      for (std::size_t k = 0; k < cfg_.devices; ++k) local_update(k, t, steps);

      const long next = t + 1;
      const bool communicate = next % cfg_.local_steps == 0;
      double spread = 0.0;
      if (communicate) {
        for (std::size_t k = 0; k < cfg_.devices; ++k) shared_[k] = states_[k].w;
        spread = drift(shared_, weights_);
        const auto participants = choose(round);
        const Vector global = aggregate(cfg_.sampling, participants, shared_, weights_);
        for (auto& s : states_) s.w = global;
        ++round;
      }
      if (cfg_.rule == UpdateRule::kMass)
        for (std::size_t k = 0; k < cfg_.devices; ++k)
          mass_extrapolate(states_[k], grads_[k], steps.eta2, steps.mass_gamma);
      if (communicate && observer_) observer_(next, states_);

      const bool due = communicate || next % cfg_.eval_stride == 0 || next == cfg_.total_steps;
      if (due) {
        if (!communicate) {
          for (std::size_t k = 0; k < cfg_.devices; ++k) shared_[k] = states_[k].w;
          spread = drift(shared_, weights_);
        }
        const double loss = record(next, spread, steps.alpha);
        if (communicate && cfg_.store_iterates) traj_.iterates.emplace_back(next, average());
        if (cfg_.stop_loss && loss <= *cfg_.stop_loss) break;
      }
    }
    traj_.final_average = average();
    return std::move(traj_);
  }

 private:
  void check_steps(const StepSizes& s, long t) const {
    auto finite_nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
    const double main = cfg_.rule == UpdateRule::kMass ? s.eta1 : s.alpha;
    if (!(main > 0.0) || !std::isfinite(main) || !finite_nonneg(s.beta) ||
        !std::isfinite(s.eta2) || !finite_nonneg(s.mass_gamma))
      fail(ErrorCode::kInvalidSchedule,
           "schedule emitted an invalid step size at t=" + std::to_string(t));
  }

  std::vector<std::size_t> choose(long round) const {
    if (cfg_.sampling == Sampling::kFull) {
      std::vector<std::size_t> all(cfg_.devices);
      std::iota(all.begin(), all.end(), 0);
      return all;
    }
    return sample_devices(cfg_.sampling, cfg_.participants, weights_, cfg_.master_seed,
                          static_cast<std::uint64_t>(round));
  }

  void local_update(std::size_t k, long t, const StepSizes& steps) {
    DeviceState& s = states_[k];
    const auto& shard = obj_.partition().shards[k];
    const bool at_u = cfg_.rule == UpdateRule::kMass && !cfg_.mass_gradient_at_w;
    const Vector& point = at_u ? s.u : s.w;
    if (cfg_.full_batch) {
      obj_.grad_stochastic_into(k, point, shard, grads_[k]);
    } else {
      draw_batch(shard, cfg_.batch_size, cfg_.master_seed, k, t, batch_);
      obj_.grad_stochastic_into(k, point, batch_, grads_[k]);
    }
    switch (cfg_.rule) {
      case UpdateRule::kSgd: local_step_sgd(s, grads_[k], steps.alpha); break;
      case UpdateRule::kNesterov: local_step_nesterov(s, grads_[k], steps.alpha, steps.beta); break;
      case UpdateRule::kMass: mass_descend(s, grads_[k], steps.eta1); break;
    }
  }

  Vector average() const {
    Vector mean = Vector::Zero(states_.front().w.size());
    for (std::size_t k = 0; k < cfg_.devices; ++k) mean += weights_[k] * states_[k].w;
    return mean;
  }

  double record(long t, double spread, double step_size) {
    const Vector mean = average();
    auto [loss, g] = obj_.value_and_grad(mean);
    if (!std::isfinite(loss) || loss > cfg_.divergence_threshold)
      throw DivergenceError(t, step_size, loss);
    traj_.points.push_back({t, loss, spread, g.norm(), t / cfg_.local_steps});
    return loss;
  }

  const FederationConfig& cfg_;
  const Objective& obj_;
  const CommunicationObserver& observer_;
  std::span<const double> weights_;
  std::vector<DeviceState> states_;
  std::vector<Vector> grads_;
  std::vector<Vector> shared_;
  std::vector<std::size_t> batch_;
  Trajectory traj_;
};

}  // namespace

Trajectory run(const FederationConfig& config, const Objective& objective,
               const CommunicationObserver& observer) {
  return Simulation(config, objective, observer).run();
}

// --- CSV -------------------------------------------------------------------------

void Trajectory::write_csv(std::ostream& out) const {
  out << kTrajectoryCsvHeader << '\n' << std::setprecision(17);
  for (const auto& p : points)
    out << p.t << ',' << p.loss << ',' << p.drift << ',' << p.grad_norm << ',' << p.comm_round
        << '\n';
}

Trajectory Trajectory::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryCsvHeader)
    fail(ErrorCode::kParse, "trajectory csv: missing header");
  Trajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    TrajectoryPoint p;
    char c1, c2, c3, c4;
    if (!(row >> p.t >> c1 >> p.loss >> c2 >> p.drift >> c3 >> p.grad_norm >> c4 >> p.comm_round))
      fail(ErrorCode::kParse, "trajectory csv: malformed row '" + line + "'");
    traj.points.push_back(p);
  }
  return traj;
}

}  // namespace fedsim
