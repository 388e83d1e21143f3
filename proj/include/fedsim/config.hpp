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
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "fedsim/experiments.hpp"

namespace fedsim {

/// A parsed JSON run configuration.
///
/// Top-level keys: dataset, objective, federation, schedule, experiment.
/// Unknown keys are rejected at every level.
struct RunConfig {
  nlohmann::json dataset;
  ObjectiveKind objective;
  nlohmann::json federation;
  nlohmann::json schedule;
  nlohmann::json experiment;
  std::filesystem::path base_dir;
};

/// Parses and validates; referenced files must exist.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = ".");
RunConfig load_run_config(const std::filesystem::path& path);

/// Resolves a dataset path: absolute paths as given, relative ones against
/// $FEDSIM_DATA_DIR when set, else against the config directory.
std::filesystem::path resolve_data_path(const std::string& path,
                                        const std::filesystem::path& base_dir);

/// Dataset plus the partition it ships with (generators such as the
/// counterexample fix their own device split).
struct LoadedData {
  std::shared_ptr<const Dataset> data;
  std::shared_ptr<const DevicePartition> partition;
};

/// Loads a file or runs a generator from a dataset JSON object.
LoadedData build_dataset(const nlohmann::json& spec, const std::filesystem::path& base_dir);

/// Everything needed for federation::run.
struct PreparedRun {
  LoadedData data;
  std::shared_ptr<const Objective> objective;
  FederationConfig federation;
};

PreparedRun prepare_run(const RunConfig& config, std::optional<std::uint64_t> seed_override = {});

/// Builds a schedule from {"kind": ..., "params": {...}}. Curvature constants
/// missing from params are filled from the objective's spectral report.
Schedule build_schedule(const nlohmann::json& spec, const Objective& objective,
                        const FederationConfig& federation);

Trajectory run_config(const RunConfig& config, std::optional<std::uint64_t> seed_override = {});

SweepResult sweep_config(const RunConfig& config, std::size_t jobs,
                         const std::function<void(const std::string&)>& log = {});

/// F* for the config's experiment: read from experiment.fstar, the cache at
/// experiment.fstar_path, or solved (and cached when a path is given).
double resolve_fstar(const RunConfig& config, const Objective& objective);

}  // namespace fedsim
