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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/federation.hpp"

namespace fedsim {

struct FStarResult {
  double f_star = 0.0;
  double grad_norm = 0.0;
  double tol = 0.0;
  long iterations = 0;
  Vector w;
};

/// Full-batch gradient descent with step 1/L until ||grad F|| <= tol.
/// Throws kConvergenceFailure after `max_iterations`.
FStarResult solve_fstar(const Objective& objective, double tol, long max_iterations = 10'000'000);

/// F* cache file: {"f_star": x, "grad_norm": g, "tol": t}.
void write_fstar_cache(const FStarResult& result, const std::filesystem::path& path);
FStarResult read_fstar_cache(const std::filesystem::path& path);

/// Smallest recorded t with loss - F* <= eps.
std::optional<long> iterations_to_accuracy(const Trajectory& traj, double f_star, double eps);

/// One learning-rate cell: eta_t = min(eta0, n c / (1 + t)).
struct GridCell {
  double eta0 = 1.0;
  double c = 1.0;
};

/// {eta0} x {c0 2^i : i in [-2, 2]}.
std::vector<GridCell> make_grid(const std::vector<double>& eta0s, double c0);

struct CellOutcome {
  GridCell cell;
  std::uint64_t seed = 0;              // protocol seed (0, 1, 2, ...)
  std::optional<long> iterations;      // best over seeds
  bool diverged = false;               // every seed diverged
};

struct GridSearchResult {
  std::optional<GridCell> best;
  std::optional<long> best_iterations;
  std::uint64_t best_seed = 0;
  std::vector<CellOutcome> cells;
};

struct GridSearchOptions {
  std::vector<GridCell> grid;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  double f_star = 0.0;
  double epsilon = 0.0;
  /// n in the decay numerator; the training-set size by default.
  double decay_n = 0.0;
  /// Momentum for Nesterov cells.
  double beta = 0.0;
  std::size_t jobs = 1;
  /// One line per finished cell when set.
  std::function<void(const std::string&)> log;
};

/// Runs every (cell, seed) pair with an experiment_decay schedule and stops
/// each run once eps-accuracy is reached. The winner has the fewest
/// iterations; ties go to larger c, then larger eta0.
GridSearchResult grid_search(const FederationConfig& base, const Objective& objective,
                             const GridSearchOptions& options);

struct SweepRow {
  std::size_t n_devices = 0;
  std::size_t k_active = 0;
  long e_local = 1;
  UpdateRule rule = UpdateRule::kSgd;
  Sampling scheme = Sampling::kFull;
  double eta0 = 0.0;
  double c = 0.0;
  std::uint64_t seed = 0;
  std::optional<long> iters_to_eps;

  /// ceil(t / E) communication rounds for the reported iterations.
  std::optional<long> rounds() const;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double epsilon = 0.0;
  double f_star = 0.0;

  /// T(first row) / T(row); empty where either side was not reached.
  std::vector<std::optional<double>> speedups() const;
};

inline constexpr const char* kSweepCsvHeader =
    "n_devices,k_active,e_local,rule,scheme,eta0,c,seed,iters_to_eps";

struct SweepPoint {
  std::size_t devices;
  std::size_t participants;
};

struct SweepSpec {
  ObjectiveKind objective;
  std::vector<SweepPoint> points;   // ascending device (or participant) counts
  FederationConfig base;            // E, T, batch, rule, scheme, eval stride
  GridSearchOptions search;
};

/// Partitions the dataset evenly for each point and grid-searches it.
SweepResult speedup_sweep(std::shared_ptr<const Dataset> data, const SweepSpec& spec);

/// Device counts with K = ceil(fraction * N).
std::vector<SweepPoint> sweep_points(const std::vector<std::size_t>& device_counts,
                                     double participation_fraction);

void write_sweep_csv(const SweepResult& result, std::ostream& out);
void write_sweep_csv(const SweepResult& result, const std::filesystem::path& path);
SweepResult read_sweep_csv(std::istream& in);

/// Iterations-to-eps against device count.
std::string sweep_svg(const SweepResult& result);
void write_sweep_svg(const SweepResult& result, const std::filesystem::path& path);

/// Loss against t with a log-scaled y axis.
std::string trajectory_svg(const Trajectory& traj, double f_star = 0.0);
void write_trajectory_svg(const Trajectory& traj, const std::filesystem::path& path,
                          double f_star = 0.0);

/// Default evaluation cadence: 1 for n <= 1e4, 10 otherwise.
long default_eval_stride(std::size_t n);

}  // namespace fedsim
