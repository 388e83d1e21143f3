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

#include "fedsim/fedsim.h"

#include <cstring>
#include <new>
#include <sstream>
#include <string>

#include "fedsim/config.hpp"
#include "fedsim/error.hpp"

struct fedsim_dataset {
  fedsim::LoadedData data;
};

struct fedsim_trajectory {
  fedsim::Trajectory traj;
};

struct fedsim_sweep {
  fedsim::SweepResult result;
};

namespace {

thread_local std::string last_error;

fedsim_status set_error(fedsim_status status, const std::string& message) {
  last_error = message;
  return status;
}

/// Runs `fn`, translating exceptions into status codes.
template <typename Fn>
fedsim_status guarded(Fn&& fn) {
  last_error.clear();
  try {
    fn();
    return FEDSIM_OK;
  } catch (const fedsim::Error& e) {
    return set_error(static_cast<fedsim_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(FEDSIM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(FEDSIM_ERR_INTERNAL, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) fedsim::fail(fedsim::ErrorCode::kInvalidInput, what);
}

std::shared_ptr<const fedsim::DevicePartition> partition_for(const fedsim_dataset* ds,
                                                            std::size_t devices) {
  if (devices == 0 && ds->data.partition) return ds->data.partition;
  return std::make_shared<const fedsim::DevicePartition>(
      fedsim::partition_even(*ds->data.data, devices == 0 ? 1 : devices));
}

}  // namespace

extern "C" {

const char* fedsim_version(void) { return "1.0.0"; }

const char* fedsim_last_error(void) { return last_error.c_str(); }

void fedsim_string_free(char* s) { std::free(s); }

fedsim_status fedsim_dataset_load_libsvm(const char* path, fedsim_dataset** out) {
  return guarded([&] {
    require(path && out, "null argument");
    auto ds = std::make_unique<fedsim_dataset>();
    ds->data.data = std::make_shared<const fedsim::Dataset>(fedsim::load_libsvm(path));
    *out = ds.release();
  });
}

fedsim_status fedsim_dataset_parse_libsvm(const char* text, fedsim_dataset** out) {
  return guarded([&] {
    require(text && out, "null argument");
    auto ds = std::make_unique<fedsim_dataset>();
    ds->data.data = std::make_shared<const fedsim::Dataset>(fedsim::parse_libsvm(std::string(text)));
    *out = ds.release();
  });
}

fedsim_status fedsim_dataset_generate(const char* spec_json, fedsim_dataset** out) {
  return guarded([&] {
    require(spec_json && out, "null argument");
    nlohmann::json spec;
    try {
      spec = nlohmann::json::parse(spec_json);
    } catch (const nlohmann::json::parse_error& e) {
      fedsim::fail(fedsim::ErrorCode::kConfig, std::string("generator spec: ") + e.what());
    }
    auto ds = std::make_unique<fedsim_dataset>();
    ds->data = fedsim::build_dataset(spec, ".");
    *out = ds.release();
  });
}

fedsim_status fedsim_dataset_save_libsvm(const fedsim_dataset* ds, const char* path) {
  return guarded([&] {
    require(ds && path, "null argument");
    fedsim::save_libsvm(*ds->data.data, path);
  });
}

size_t fedsim_dataset_rows(const fedsim_dataset* ds) { return ds ? ds->data.data->size() : 0; }
size_t fedsim_dataset_cols(const fedsim_dataset* ds) { return ds ? ds->data.data->dim() : 0; }
size_t fedsim_dataset_devices(const fedsim_dataset* ds) {
  return ds && ds->data.partition ? ds->data.partition->devices() : 0;
}
void fedsim_dataset_free(fedsim_dataset* ds) { delete ds; }

fedsim_status fedsim_fstar(const fedsim_dataset* ds, const char* objective, double lambda,
                           double tol, fedsim_fstar_result* out) {
  return guarded([&] {
    require(ds && objective && out, "null argument");
    const fedsim::Objective obj(ds->data.data, partition_for(ds, 0),
                                fedsim::parse_objective_kind(objective, lambda));
    const auto r = fedsim::solve_fstar(obj, tol);
    *out = {r.f_star, r.grad_norm, r.tol, r.iterations};
  });
}

fedsim_status fedsim_fstar_write_cache(const fedsim_fstar_result* result, const char* path) {
  return guarded([&] {
    require(result && path, "null argument");
    fedsim::FStarResult r;
    r.f_star = result->f_star;
    r.grad_norm = result->grad_norm;
    r.tol = result->tol;
    fedsim::write_fstar_cache(r, path);
  });
}

fedsim_status fedsim_spectral_report_json(const fedsim_dataset* ds, const char* objective,
                                          double lambda, size_t devices, char** json_out) {
  return guarded([&] {
    require(ds && objective && json_out, "null argument");
    const fedsim::Objective obj(ds->data.data, partition_for(ds, devices),
                                fedsim::parse_objective_kind(objective, lambda));
    fedsim::SpectralReport rep = fedsim::spectral_report(obj);
    if (obj.kind().loss == fedsim::LossKind::kLeastSquares) {
      // Probe at the origin and, when known, the interpolating solution.
      std::vector<fedsim::Vector> probes{fedsim::Vector::Zero(static_cast<Eigen::Index>(obj.dim()))};
      if (obj.dataset().ground_truth()) probes.push_back(obj.dataset().ground_truth()->weights);
      const auto bounds = fedsim::measure_bounds(obj, 1000, probes, 0);
      rep.G_hat_sq = bounds.G_hat_sq;
      rep.sigma_hat_sq = bounds.sigma_hat_sq;
    }
    *json_out = copy_string(rep.to_json());
  });
}

fedsim_status fedsim_run_config(const char* config_json, const char* base_dir, int has_seed,
                                uint64_t seed_override, fedsim_trajectory** out) {
  return guarded([&] {
    require(config_json && out, "null argument");
    const auto cfg = fedsim::parse_run_config(config_json, base_dir ? base_dir : ".");
    std::optional<std::uint64_t> seed;
    if (has_seed) seed = seed_override;
    auto t = std::make_unique<fedsim_trajectory>();
    t->traj = fedsim::run_config(cfg, seed);
    *out = t.release();
  });
}

size_t fedsim_trajectory_size(const fedsim_trajectory* traj) {
  return traj ? traj->traj.points.size() : 0;
}

fedsim_status fedsim_trajectory_point(const fedsim_trajectory* traj, size_t index,
                                      fedsim_point* out) {
  return guarded([&] {
    require(traj && out, "null argument");
    require(index < traj->traj.points.size(), "trajectory index out of range");
    const auto& p = traj->traj.points[index];
    *out = {p.t, p.loss, p.drift, p.grad_norm, p.comm_round};
  });
}

fedsim_status fedsim_trajectory_csv(const fedsim_trajectory* traj, char** csv_out) {
  return guarded([&] {
    require(traj && csv_out, "null argument");
    std::ostringstream os;
    traj->traj.write_csv(os);
    *csv_out = copy_string(os.str());
  });
}

fedsim_status fedsim_trajectory_write_svg(const fedsim_trajectory* traj, const char* path,
                                          double f_star) {
  return guarded([&] {
    require(traj && path, "null argument");
    fedsim::write_trajectory_svg(traj->traj, path, f_star);
  });
}

void fedsim_trajectory_free(fedsim_trajectory* traj) { delete traj; }

fedsim_status fedsim_sweep_config(const char* config_json, const char* base_dir, size_t jobs,
                                  fedsim_log_fn log, void* user, fedsim_sweep** out) {
  return guarded([&] {
    require(config_json && out, "null argument");
    const auto cfg = fedsim::parse_run_config(config_json, base_dir ? base_dir : ".");
    std::function<void(const std::string&)> sink;
    if (log) sink = [log, user](const std::string& line) { log(line.c_str(), user); };
    auto s = std::make_unique<fedsim_sweep>();
    s->result = fedsim::sweep_config(cfg, jobs, sink);
    *out = s.release();
  });
}

size_t fedsim_sweep_rows(const fedsim_sweep* sweep) { return sweep ? sweep->result.rows.size() : 0; }

int64_t fedsim_sweep_iterations(const fedsim_sweep* sweep, size_t row) {
  if (!sweep || row >= sweep->result.rows.size()) return -1;
  const auto& it = sweep->result.rows[row].iters_to_eps;
  return it ? *it : -1;
}

fedsim_status fedsim_sweep_csv(const fedsim_sweep* sweep, char** csv_out) {
  return guarded([&] {
    require(sweep && csv_out, "null argument");
    std::ostringstream os;
    fedsim::write_sweep_csv(sweep->result, os);
    *csv_out = copy_string(os.str());
  });
}

fedsim_status fedsim_sweep_write_csv(const fedsim_sweep* sweep, const char* path) {
  return guarded([&] {
    require(sweep && path, "null argument");
    fedsim::write_sweep_csv(sweep->result, std::filesystem::path(path));
  });
}

fedsim_status fedsim_sweep_write_svg(const fedsim_sweep* sweep, const char* path) {
  return guarded([&] {
    require(sweep && path, "null argument");
    fedsim::write_sweep_svg(sweep->result, path);
  });
}

void fedsim_sweep_free(fedsim_sweep* sweep) { delete sweep; }

}  // extern "C"
