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

#include "fedsim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "fedsim/error.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// --- F* ----------------------------------------------------------------------

FStarResult solve_fstar(const Objective& objective, double tol, long max_iterations) {
  if (!(tol > 0.0)) fail(ErrorCode::kInvalidInput, "solve_fstar: tol must be positive");
  const double smoothness = spectral_report(objective).L;
  if (!(smoothness > 0.0)) fail(ErrorCode::kDegenerateSpectrum, "solve_fstar: zero smoothness");
  const double step = 1.0 / smoothness;

  FStarResult out;
  out.tol = tol;
  out.w = Vector::Zero(static_cast<Eigen::Index>(objective.dim()));
  for (long it = 0;; ++it) {
    auto [value, g] = objective.value_and_grad(out.w);
    out.f_star = value;
    out.grad_norm = g.norm();
    out.iterations = it;
    if (out.grad_norm <= tol) return out;
    if (it >= max_iterations)
      fail(ErrorCode::kConvergenceFailure,
           "solve_fstar: iteration cap reached with gradient norm " +
               std::to_string(out.grad_norm));
    out.w -= step * g;
  }
}

void write_fstar_cache(const FStarResult& result, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["f_star"] = result.f_star;
  j["grad_norm"] = result.grad_norm;
  j["tol"] = result.tol;
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << std::setprecision(17) << j.dump(2) << '\n';
}

FStarResult read_fstar_cache(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    FStarResult r;
    r.f_star = j.at("f_star").get<double>();
    r.grad_norm = j.at("grad_norm").get<double>();
    r.tol = j.at("tol").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParse, "bad F* cache " + path.string() + ": " + e.what());
  }
}

std::optional<long> iterations_to_accuracy(const Trajectory& traj, double f_star, double eps) {
  for (const auto& p : traj.points)
    if (p.loss - f_star <= eps) return p.t;
  return std::nullopt;
}

// --- grid search ------------------------------------------------------------------

std::vector<GridCell> make_grid(const std::vector<double>& eta0s, double c0) {
  std::vector<GridCell> grid;
  for (double eta0 : eta0s)
    for (int i = -2; i <= 2; ++i) grid.push_back({eta0, std::ldexp(c0, i)});
  return grid;
}

namespace {

bool better(const CellOutcome& a, const CellOutcome& b) {
  if (!a.iterations) return false;
  if (!b.iterations) return true;
  if (*a.iterations != *b.iterations) return *a.iterations < *b.iterations;
  if (a.cell.c != b.cell.c) return a.cell.c > b.cell.c;
  return a.cell.eta0 > b.cell.eta0;
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

GridSearchResult grid_search(const FederationConfig& base, const Objective& objective,
                             const GridSearchOptions& options) {
  if (options.grid.empty()) fail(ErrorCode::kInvalidInput, "grid_search: empty grid");
  if (options.seeds.empty()) fail(ErrorCode::kInvalidInput, "grid_search: no seeds");
  const double decay_n = options.decay_n > 0.0 ? options.decay_n
                                               : static_cast<double>(objective.dataset().size());
  const std::size_t n_seeds = options.seeds.size();
  const std::size_t total = options.grid.size() * n_seeds;

  struct RunOutcome {
    std::optional<long> iterations;
    bool diverged = false;
  };
  std::vector<RunOutcome> runs(total);
  std::mutex log_mutex;

  parallel_for(total, options.jobs, [&](std::size_t index) {
    const std::size_t cell_index = index / n_seeds;
    const GridCell& cell = options.grid[cell_index];
    FederationConfig cfg = base;
    cfg.schedule = Schedule(ExperimentDecaySchedule{cell.eta0, decay_n, cell.c, options.beta});
    cfg.master_seed = derive_seed(options.seeds[index % n_seeds], cell_index);
    cfg.stop_loss = options.f_star + options.epsilon;
    cfg.store_iterates = false;
    RunOutcome outcome;
    try {
      const Trajectory traj = run(cfg, objective);
      outcome.iterations = iterations_to_accuracy(traj, options.f_star, options.epsilon);
    } catch (const DivergenceError&) {
      outcome.diverged = true;
    }
    runs[index] = outcome;
    if (options.log) {
      std::ostringstream line;
      line << "N=" << cfg.devices << " K=" << cfg.participants << " E=" << cfg.local_steps
           << " eta0=" << cell.eta0 << " c=" << cell.c << " seed=" << options.seeds[index % n_seeds]
           << " -> ";
      if (outcome.iterations) line << *outcome.iterations << " iterations";
      else line << (outcome.diverged ? "diverged" : "not reached");
      std::lock_guard lock(log_mutex);
      options.log(line.str());
    }
  });

  GridSearchResult result;
  for (std::size_t c = 0; c < options.grid.size(); ++c) {
    CellOutcome cell{options.grid[c], options.seeds.front(), std::nullopt, true};
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const auto& r = runs[c * n_seeds + s];
      cell.diverged = cell.diverged && r.diverged;
      if (r.iterations && (!cell.iterations || *r.iterations < *cell.iterations)) {
        cell.iterations = r.iterations;
        cell.seed = options.seeds[s];
      }
    }
    result.cells.push_back(cell);
  }
  const CellOutcome* winner = nullptr;
  for (const auto& cell : result.cells)
    if (!winner || better(cell, *winner)) winner = &cell;
  if (winner && winner->iterations) {
    result.best = winner->cell;
    result.best_iterations = winner->iterations;
    result.best_seed = winner->seed;
  }
  return result;
}

// --- sweeps -------------------------------------------------------------------------

std::optional<long> SweepRow::rounds() const {
  if (!iters_to_eps) return std::nullopt;
  return (*iters_to_eps + e_local - 1) / e_local;
}

std::vector<std::optional<double>> SweepResult::speedups() const {
  std::vector<std::optional<double>> out;
  for (const auto& row : rows) {
    if (rows.front().iters_to_eps && row.iters_to_eps && *row.iters_to_eps > 0)
      out.emplace_back(static_cast<double>(*rows.front().iters_to_eps) /
                       static_cast<double>(*row.iters_to_eps));
    else
      out.emplace_back(std::nullopt);
  }
  return out;
}

std::vector<SweepPoint> sweep_points(const std::vector<std::size_t>& device_counts,
                                     double participation_fraction) {
  if (!(participation_fraction > 0.0 && participation_fraction <= 1.0))
    fail(ErrorCode::kInvalidInput, "participation fraction must lie in (0, 1]");
  std::vector<SweepPoint> points;
  for (auto n : device_counts) {
    const auto k = static_cast<std::size_t>(std::ceil(participation_fraction * static_cast<double>(n) - 1e-9));
    points.push_back({n, std::max<std::size_t>(1, k)});
  }
  return points;
}

SweepResult speedup_sweep(std::shared_ptr<const Dataset> data, const SweepSpec& spec) {
  if (spec.points.empty()) fail(ErrorCode::kInvalidInput, "speedup_sweep: no device counts");
  for (std::size_t i = 1; i < spec.points.size(); ++i) {
    const auto& a = spec.points[i - 1];
    const auto& b = spec.points[i];
    if (b.devices < a.devices || (b.devices == a.devices && b.participants <= a.participants))
      fail(ErrorCode::kInvalidInput, "speedup_sweep: device counts must be ascending");
  }
  SweepResult result;
  result.epsilon = spec.search.epsilon;
  result.f_star = spec.search.f_star;
  for (const auto& point : spec.points) {
    auto part = std::make_shared<const DevicePartition>(partition_even(*data, point.devices));
    const Objective objective(data, part, spec.objective);
    FederationConfig cfg = spec.base;
    cfg.devices = point.devices;
    cfg.participants = point.participants;
    if (cfg.sampling == Sampling::kFull) cfg.participants = cfg.devices;
    const GridSearchResult search = grid_search(cfg, objective, spec.search);
    SweepRow row;
    row.n_devices = point.devices;
    row.k_active = point.participants;
    row.e_local = cfg.local_steps;
    row.rule = cfg.rule;
    row.scheme = cfg.sampling;
    if (search.best) {
      row.eta0 = search.best->eta0;
      row.c = search.best->c;
    }
    row.seed = search.best_seed;
    row.iters_to_eps = search.best_iterations;
    result.rows.push_back(row);
  }
  return result;
}

// --- CSV ----------------------------------------------------------------------------

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  if (result.rows.empty()) fail(ErrorCode::kInvalidInput, "sweep result has no rows");
  out << kSweepCsvHeader << '\n' << std::setprecision(17);
  for (const auto& r : result.rows) {
    out << r.n_devices << ',' << r.k_active << ',' << r.e_local << ',' << to_string(r.rule) << ','
        << to_string(r.scheme) << ',' << r.eta0 << ',' << r.c << ',' << r.seed << ',';
    if (r.iters_to_eps) out << *r.iters_to_eps;
    else out << "not reached";
    out << '\n';
  }
}

void write_sweep_csv(const SweepResult& result, const std::filesystem::path& path) {
  if (result.rows.empty()) fail(ErrorCode::kInvalidInput, "sweep result has no rows");
  std::ostringstream buffer;
  write_sweep_csv(result, buffer);
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << buffer.str();
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

SweepResult read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSweepCsvHeader)
    fail(ErrorCode::kParse, "sweep csv: missing header");
  SweepResult result;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 9) fail(ErrorCode::kParse, "sweep csv: expected 9 fields in '" + line + "'");
    try {
      SweepRow r;
      r.n_devices = std::stoul(f[0]);
      r.k_active = std::stoul(f[1]);
      r.e_local = std::stol(f[2]);
      r.rule = parse_update_rule(f[3]);
      r.scheme = parse_sampling(f[4]);
      r.eta0 = std::stod(f[5]);
      r.c = std::stod(f[6]);
      r.seed = std::stoull(f[7]);
      if (f[8] != "not reached") r.iters_to_eps = std::stol(f[8]);
      result.rows.push_back(r);
    } catch (const std::logic_error&) {
      fail(ErrorCode::kParse, "sweep csv: bad number in '" + line + "'");
    }
  }
  return result;
}

// --- SVG ----------------------------------------------------------------------------

namespace {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> xy;
};

/// Minimal line chart; both axes are plotted as given (callers pass logs).
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series) {
  constexpr double W = 640, H = 420, left = 70, right = 20, top = 40, bottom = 55;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (auto [x, y] : s.xy) {
      xmin = std::min(xmin, x); xmax = std::max(xmax, x);
      ymin = std::min(ymin, y); ymax = std::max(ymax, y);
    }
  if (!std::isfinite(xmin)) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
  if (xmax == xmin) { xmin -= 0.5; xmax += 0.5; }
  if (ymax == ymin) { ymin -= 0.5; ymax += 0.5; }
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (W - left - right); };
  auto py = [&](double y) { return H - bottom - (y - ymin) / (ymax - ymin) * (H - top - bottom); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream svg;
  svg << std::setprecision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  svg << "  <rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  svg << "  <text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n";
  svg << "  <line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right
      << "\" y2=\"" << H - bottom << "\" stroke=\"black\"/>\n";
  svg << "  <line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << H - bottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0, fy = ymin + (ymax - ymin) * i / 4.0;
    svg << "  <text x=\"" << px(fx) << "\" y=\"" << H - bottom + 16
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fx << "</text>\n";
    svg << "  <text x=\"" << left - 6 << "\" y=\"" << py(fy) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fy << "</text>\n";
  }
  svg << "  <text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
  svg << "  <text x=\"16\" y=\"" << (top + H - bottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (top + H - bottom) / 2 << ")\">" << y_label << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % 5];
    svg << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : series[s].xy) svg << px(x) << ',' << py(y) << ' ';
    svg << "\"/>\n";
    for (auto [x, y] : series[s].xy)
      if (series[s].xy.size() <= 64)
        svg << "  <circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color
            << "\"/>\n";
    svg << "  <text x=\"" << W - right - 4 << "\" y=\"" << top + 14 * (s + 1)
        << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << color << "\">" << series[s].label
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace

std::string sweep_svg(const SweepResult& result) {
  if (result.rows.empty()) fail(ErrorCode::kInvalidInput, "sweep result has no rows");
  Series s{"iterations to eps", {}};
  const bool vary_k = result.rows.size() > 1 && result.rows.front().n_devices == result.rows.back().n_devices;
  for (const auto& r : result.rows) {
    if (!r.iters_to_eps) continue;
    const double x = static_cast<double>(vary_k ? r.k_active : r.n_devices);
    s.xy.emplace_back(std::log2(x), std::log10(static_cast<double>(std::max(1L, *r.iters_to_eps))));
  }
  return line_chart("Iterations to accuracy", vary_k ? "log2 active devices" : "log2 devices",
                    "log10 iterations", {s});
}

void write_sweep_svg(const SweepResult& result, const std::filesystem::path& path) {
  write_text(sweep_svg(result), path);
}

std::string trajectory_svg(const Trajectory& traj, double f_star) {
  Series s{"F - F*", {}};
  for (const auto& p : traj.points) {
    const double gap = p.loss - f_star;
    s.xy.emplace_back(static_cast<double>(p.t), std::log10(std::max(gap, 1e-300)));
  }
  return line_chart("Loss", "t (local iterations)", "log10 (F - F*)", {s});
}

void write_trajectory_svg(const Trajectory& traj, const std::filesystem::path& path,
                          double f_star) {
  write_text(trajectory_svg(traj, f_star), path);
}

long default_eval_stride(std::size_t n) { return n <= 10'000 ? 1 : 10; }

}  // namespace fedsim
