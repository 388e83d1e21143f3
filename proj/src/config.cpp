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

#include "fedsim/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "fedsim/error.hpp"

namespace fedsim {

using nlohmann::json;

namespace {

[[noreturn]] void config_fail(const std::string& what) { fail(ErrorCode::kConfig, what); }

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) config_fail(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) config_fail("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    config_fail(std::string("bad value for '") + key + "'");
  }
}

template <typename T>
T require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) config_fail(std::string("missing '") + key + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    config_fail(std::string("bad value for '") + key + "' in " + where);
  }
}

std::vector<double> spectrum_from(const json& spec, std::size_t d) {
  if (spec.contains("spectrum")) return require<std::vector<double>>(spec, "spectrum", "dataset");
  if (spec.contains("spectrum_range")) {
    // Geometric spacing between [lo, hi].
    const auto range = require<std::vector<double>>(spec, "spectrum_range", "dataset");
    if (range.size() != 2) config_fail("spectrum_range needs [lo, hi]");
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double f = d == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(d - 1);
      out[i] = range[0] * std::pow(range[1] / range[0], f);
    }
    return out;
  }
  return std::vector<double>(d, 1.0);
}

void check_federation_keys(const json& f) {
  check_keys(f,
             {"devices", "participants", "local_steps", "total_steps", "batch_size", "rule",
              "sampling", "seed", "eval_stride", "full_batch", "mass_gradient_at_w",
              "store_iterates", "divergence_threshold"},
             "federation");
}

void check_experiment_keys(const json& e, const std::filesystem::path& base_dir) {
  check_keys(e,
             {"epsilon", "fstar", "fstar_path", "fstar_tol", "seeds", "grid", "device_counts",
              "participation", "participants", "beta", "decay_n"},
             "experiment");
  if (e.contains("grid")) check_keys(e.at("grid"), {"eta0", "c0"}, "experiment.grid");
  (void)base_dir;
}

void check_dataset_spec(const json& spec, const std::filesystem::path& base_dir) {
  if (!spec.is_object()) config_fail("dataset must be a JSON object");
  if (spec.contains("path")) {
    check_keys(spec, {"path", "bias"}, "dataset");
    const auto p = resolve_data_path(require<std::string>(spec, "path", "dataset"), base_dir);
    if (!std::filesystem::exists(p)) fail(ErrorCode::kIo, "dataset file not found: " + p.string());
    return;
  }
  const auto gen = require<std::string>(spec, "generator", "dataset");
  if (gen == "gaussian_quadratic") {
    check_keys(spec, {"generator", "n", "d", "spectrum", "spectrum_range", "seed"}, "dataset");
  } else if (gen == "logistic") {
    check_keys(spec, {"generator", "n", "d", "scale", "seed"}, "dataset");
  } else if (gen == "counterexample") {
    check_keys(spec, {"generator", "devices", "copies", "radius", "dim"}, "dataset");
  } else if (gen == "overparam_regression") {
    check_keys(spec, {"generator", "features", "seed"}, "dataset");
    check_dataset_spec(require<json>(spec, "features", "dataset"), base_dir);
  } else {
    config_fail("unknown dataset generator '" + gen + "'");
  }
}

}  // namespace

std::filesystem::path resolve_data_path(const std::string& path,
                                        const std::filesystem::path& base_dir) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  if (const char* dir = std::getenv("FEDSIM_DATA_DIR"); dir && *dir) return std::filesystem::path(dir) / p;
  return base_dir / p;
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    config_fail(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"dataset", "objective", "federation", "schedule", "experiment"}, "config");
  RunConfig cfg;
  cfg.base_dir = base_dir;
  cfg.dataset = require<json>(j, "dataset", "config");
  check_dataset_spec(cfg.dataset, base_dir);

  const json obj = get_or<json>(j, "objective", json{{"kind", "least_squares"}});
  check_keys(obj, {"kind", "lambda"}, "objective");
  try {
    cfg.objective = parse_objective_kind(require<std::string>(obj, "kind", "objective"),
                                         get_or<double>(obj, "lambda", 0.0));
  } catch (const Error& e) {
    config_fail(e.what());
  }

  cfg.federation = get_or<json>(j, "federation", json::object());
  check_federation_keys(cfg.federation);
  cfg.schedule = get_or<json>(j, "schedule", json{{"kind", "fixed"}, {"params", {{"alpha", 0.01}}}});
  check_keys(cfg.schedule, {"kind", "params"}, "schedule");
  cfg.experiment = get_or<json>(j, "experiment", json::object());
  check_experiment_keys(cfg.experiment, base_dir);
  if (cfg.experiment.contains("fstar_path") && !cfg.experiment.contains("fstar")) {
    // The cache may be created by the first run; its directory must exist.
    const auto p = resolve_data_path(cfg.experiment.at("fstar_path").get<std::string>(), base_dir);
    if (!p.parent_path().empty() && !std::filesystem::exists(p.parent_path()))
      fail(ErrorCode::kIo, "directory for fstar_path not found: " + p.parent_path().string());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), path.has_parent_path() ? path.parent_path() : ".");
}

LoadedData build_dataset(const json& spec, const std::filesystem::path& base_dir) {
  check_dataset_spec(spec, base_dir);
  auto share = [](Dataset ds) {
    return std::make_shared<const Dataset>(std::move(ds));
  };
  if (spec.contains("path")) {
    Dataset ds = load_libsvm(resolve_data_path(spec.at("path").get<std::string>(), base_dir));
    if (get_or<bool>(spec, "bias", false)) ds = ds.with_bias_column();
    return {share(std::move(ds)), nullptr};
  }
  const auto gen = spec.at("generator").get<std::string>();
  const auto seed = get_or<std::uint64_t>(spec, "seed", 0);
  if (gen == "gaussian_quadratic") {
    const auto n = require<std::size_t>(spec, "n", "dataset");
    const auto d = require<std::size_t>(spec, "d", "dataset");
    const auto spectrum = spectrum_from(spec, d);
    return {share(gen_gaussian_quadratic(n, d, spectrum, seed)), nullptr};
  }
  if (gen == "logistic") {
    return {share(gen_logistic(require<std::size_t>(spec, "n", "dataset"),
                               require<std::size_t>(spec, "d", "dataset"),
                               get_or<double>(spec, "scale", 1.0), seed)),
            nullptr};
  }
  if (gen == "counterexample") {
    auto [ds, part] = gen_counterexample(require<std::size_t>(spec, "devices", "dataset"),
                                         get_or<std::size_t>(spec, "copies", 1),
                                         get_or<double>(spec, "radius", 1.0),
                                         get_or<std::size_t>(spec, "dim", 1));
    return {share(std::move(ds)), std::make_shared<const DevicePartition>(std::move(part))};
  }
  // overparam_regression
  const LoadedData features = build_dataset(spec.at("features"), base_dir);
  return {share(gen_overparam_regression(*features.data, seed)), nullptr};
}

namespace {

FederationConfig federation_from(const json& f, std::size_t default_devices, std::size_t n) {
  check_federation_keys(f);
  FederationConfig cfg;
  cfg.devices = get_or<std::size_t>(f, "devices", default_devices);
  cfg.sampling = parse_sampling(get_or<std::string>(f, "sampling", "full"));
  cfg.participants = get_or<std::size_t>(f, "participants", cfg.devices);
  cfg.local_steps = get_or<long>(f, "local_steps", 1);
  cfg.total_steps = get_or<long>(f, "total_steps", 1000);
  cfg.batch_size = get_or<std::size_t>(f, "batch_size", 1);
  cfg.rule = parse_update_rule(get_or<std::string>(f, "rule", "sgd"));
  cfg.master_seed = get_or<std::uint64_t>(f, "seed", 0);
  cfg.eval_stride = get_or<long>(f, "eval_stride", default_eval_stride(n));
  cfg.full_batch = get_or<bool>(f, "full_batch", false);
  cfg.mass_gradient_at_w = get_or<bool>(f, "mass_gradient_at_w", false);
  cfg.store_iterates = get_or<bool>(f, "store_iterates", false);
  cfg.divergence_threshold = get_or<double>(f, "divergence_threshold", 1e12);
  return cfg;
}

}  // namespace

PreparedRun prepare_run(const RunConfig& config, std::optional<std::uint64_t> seed_override) {
  PreparedRun out;
  out.data = build_dataset(config.dataset, config.base_dir);
  const std::size_t default_devices = out.data.partition ? out.data.partition->devices() : 1;
  out.federation = federation_from(config.federation, default_devices, out.data.data->size());
  if (!out.data.partition)
    out.data.partition =
        std::make_shared<const DevicePartition>(partition_even(*out.data.data, out.federation.devices));
  out.objective = std::make_shared<const Objective>(out.data.data, out.data.partition, config.objective);
  if (seed_override) out.federation.master_seed = *seed_override;
  out.federation.schedule = build_schedule(config.schedule, *out.objective, out.federation);
  out.federation.validate();
  return out;
}

Schedule build_schedule(const json& spec, const Objective& objective,
                        const FederationConfig& federation) {
  check_keys(spec, {"kind", "params"}, "schedule");
  const auto kind = require<std::string>(spec, "kind", "schedule");
  const json p = get_or<json>(spec, "params", json::object());
  if (!p.is_object()) config_fail("schedule.params must be an object");

  std::optional<SpectralReport> report;
  auto spectral = [&]() -> const SpectralReport& {
    if (!report) report = spectral_report(objective);
    return *report;
  };
  auto need = [&](const char* key, const std::optional<double>& fallback) -> double {
    if (p.contains(key)) return require<double>(p, key, "schedule.params");
    if (!fallback)
      config_fail(std::string("schedule.params.") + key +
                  " is required for this objective (no spectral value available)");
    return *fallback;
  };
  const long E = get_or<long>(p, "local_steps", federation.local_steps);
  const double N = get_or<double>(p, "devices", static_cast<double>(federation.devices));

  try {
    if (kind == "scvx_decay" || kind == "nesterov_scvx") {
      check_keys(p, {"mu", "kappa", "local_steps"}, "schedule.params");
      const double mu = p.contains("mu") ? p.at("mu").get<double>() : need("mu", spectral().mu);
      const double kappa =
          p.contains("kappa") ? p.at("kappa").get<double>() : need("kappa", spectral().kappa);
      if (kind == "scvx_decay") return Schedule(ScvxDecaySchedule{mu, kappa, E});
      return Schedule(NesterovScvxSchedule{mu, kappa, E});
    }
    if (kind == "const_sqrt") {
      check_keys(p, {"scale", "total_steps", "prefactor", "smoothness", "momentum_equals_step"},
                 "schedule.params");
      double scale = static_cast<double>(federation.sampling == Sampling::kFull
                                             ? federation.devices
                                             : federation.participants);
      if (p.contains("scale")) scale = p.at("scale").get<double>();
      const double smoothness =
          p.contains("smoothness") ? p.at("smoothness").get<double>() : spectral().L;
      return Schedule(ConstSqrtSchedule{
          scale, get_or<long>(p, "total_steps", federation.total_steps),
          get_or<double>(p, "prefactor", 1.0), smoothness,
          get_or<bool>(p, "momentum_equals_step", federation.rule == UpdateRule::kNesterov)});
    }
    if (kind == "overparam_const" || kind == "mass_const") {
      const bool mass = kind == "mass_const";
      std::set<std::string> keys{"local_steps", "devices", "l", "l_variant", "nu_max", "nu_min",
                                 "prefactor"};
      if (mass) keys.insert({"mu", "kappa1", "kappa_tilde"});
      else keys.insert({"curvature"});
      check_keys(p, keys, "schedule.params");
      const bool loose = get_or<std::string>(p, "l_variant", "tight") == "loose";
      const double l = p.contains("l") ? p.at("l").get<double>()
                                       : need("l", loose ? spectral().l_loose : spectral().l);
      const double nu_max = p.contains("nu_max") ? p.at("nu_max").get<double>() : spectral().nu_max;
      const double nu_min = p.contains("nu_min") ? p.at("nu_min").get<double>() : spectral().nu_min;
      if (mass) {
        const double mu = p.contains("mu") ? p.at("mu").get<double>() : need("mu", spectral().mu);
        double k1 = p.contains("kappa1") ? p.at("kappa1").get<double>() : l / mu;
        double kt = p.contains("kappa_tilde") ? p.at("kappa_tilde").get<double>()
                                              : need("kappa_tilde", spectral().kappa_tilde);
        return Schedule(MassConstSchedule{E, N, l, mu, nu_max, nu_min, k1, kt,
                                          get_or<double>(p, "prefactor", 0.25)});
      }
      double curvature = 0.0;
      double default_prefactor = 0.25;
      const json c = get_or<json>(p, "curvature", json("mu"));
      if (c.is_number()) {
        curvature = c.get<double>();
      } else if (c == "mu") {
        curvature = need("mu", spectral().mu);
      } else if (c == "L") {
        curvature = spectral().L;
        default_prefactor = 0.5;
      } else {
        config_fail("schedule.params.curvature must be a number, \"mu\" or \"L\"");
      }
      return Schedule(OverparamConstSchedule{E, N, l, curvature, nu_max, nu_min,
                                             get_or<double>(p, "prefactor", default_prefactor)});
    }
    if (kind == "experiment_decay") {
      check_keys(p, {"eta0", "n", "c", "beta"}, "schedule.params");
      return Schedule(ExperimentDecaySchedule{
          require<double>(p, "eta0", "schedule.params"),
          get_or<double>(p, "n", static_cast<double>(objective.dataset().size())),
          require<double>(p, "c", "schedule.params"), get_or<double>(p, "beta", 0.0)});
    }
    if (kind == "fixed") {
      check_keys(p, {"alpha", "beta", "eta1", "eta2", "gamma"}, "schedule.params");
      if (p.contains("eta1"))
        return Schedule::fixed_mass(p.at("eta1").get<double>(), get_or<double>(p, "eta2", 0.0),
                                    get_or<double>(p, "gamma", 0.0));
      return Schedule::fixed(require<double>(p, "alpha", "schedule.params"),
                             get_or<double>(p, "beta", 0.0));
    }
  } catch (const json::exception& e) {
    config_fail(std::string("bad schedule parameter: ") + e.what());
  }
  config_fail("unknown schedule kind '" + kind + "'");
}

Trajectory run_config(const RunConfig& config, std::optional<std::uint64_t> seed_override) {
  const PreparedRun prepared = prepare_run(config, seed_override);
  return run(prepared.federation, *prepared.objective);
}

double resolve_fstar(const RunConfig& config, const Objective& objective) {
  const json& e = config.experiment;
  if (e.contains("fstar")) return require<double>(e, "fstar", "experiment");
  const double tol = get_or<double>(e, "fstar_tol", 1e-9);
  if (e.contains("fstar_path")) {
    const auto path = resolve_data_path(e.at("fstar_path").get<std::string>(), config.base_dir);
    if (std::filesystem::exists(path)) return read_fstar_cache(path).f_star;
    const FStarResult solved = solve_fstar(objective, tol);
    write_fstar_cache(solved, path);
    return solved.f_star;
  }
  return solve_fstar(objective, tol).f_star;
}

SweepResult sweep_config(const RunConfig& config, std::size_t jobs,
                         const std::function<void(const std::string&)>& log) {
  const json& e = config.experiment;
  const LoadedData data = build_dataset(config.dataset, config.base_dir);
  if (data.partition) config_fail("sweeps need a dataset without a fixed device split");
  FederationConfig base = federation_from(config.federation, 1, data.data->size());

  SweepSpec spec;
  spec.objective = config.objective;
  const auto counts = get_or<std::vector<std::size_t>>(e, "device_counts", {base.devices});
  if (e.contains("participants")) {
    if (counts.size() != 1) config_fail("experiment.participants needs a single device count");
    for (auto k : require<std::vector<std::size_t>>(e, "participants", "experiment"))
      spec.points.push_back({counts.front(), k});
  } else {
    spec.points = sweep_points(counts, get_or<double>(e, "participation", 1.0));
  }
  if (base.sampling == Sampling::kFull)
    for (const auto& pt : spec.points)
      if (pt.participants != pt.devices)
        config_fail("partial participation needs a sampling scheme other than full");
  spec.base = base;

  const auto full_part = std::make_shared<const DevicePartition>(partition_even(*data.data, 1));
  const Objective whole(data.data, full_part, config.objective);
  spec.search.f_star = resolve_fstar(config, whole);
  spec.search.epsilon = require<double>(e, "epsilon", "experiment");
  spec.search.seeds = get_or<std::vector<std::uint64_t>>(e, "seeds", {0, 1, 2});
  const json grid = get_or<json>(e, "grid", json::object());
  spec.search.grid = make_grid(get_or<std::vector<double>>(grid, "eta0", {1.0, 32.0}),
                               get_or<double>(grid, "c0", 0.125));
  spec.search.beta = get_or<double>(e, "beta", base.rule == UpdateRule::kNesterov ? 0.1 : 0.0);
  spec.search.decay_n = get_or<double>(e, "decay_n", 0.0);
  spec.search.jobs = jobs;
  spec.search.log = log;
  return speedup_sweep(data.data, spec);
}

}  // namespace fedsim
