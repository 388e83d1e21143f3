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

// fedsim command-line tool. Links only the C interface.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "fedsim/fedsim.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

int report(fedsim_status status) {
  std::cerr << "fedsim: " << fedsim_last_error() << "\n";
  if (status == FEDSIM_ERR_DIVERGENCE || status == FEDSIM_ERR_CONVERGENCE) return kExitFailed;
  return kExitUsage;
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { fedsim_string_free(p); }
};

struct Dataset {
  fedsim_dataset* p = nullptr;
  ~Dataset() { fedsim_dataset_free(p); }
};

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string parent_dir(const std::string& path) {
  const auto p = std::filesystem::path(path).parent_path();
  return p.empty() ? "." : p.string();
}

bool write_text(const std::string& path, const char* text) {
  if (path.empty() || path == "-") {
    std::fputs(text, stdout);
    return true;
  }
  std::ofstream out(path);
  if (!out) {
    std::cerr << "fedsim: cannot write " << path << "\n";
    return false;
  }
  out << text;
  return static_cast<bool>(out);
}

// Accepts a number or the literal "1/n".
std::optional<double> parse_lambda(const std::string& text, std::size_t n) {
  if (text == "1/n") return 1.0 / static_cast<double>(n);
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

struct DataArgs {
  std::string path;
  std::string generator;
  bool bias = false;
};

void add_data_options(CLI::App* cmd, DataArgs& args) {
  auto* path = cmd->add_option("--data", args.path, "libsvm dataset file");
  auto* gen = cmd->add_option("--generator", args.generator,
                              "dataset JSON spec, e.g. '{\"generator\":\"logistic\",\"n\":256,\"d\":8}'");
  path->excludes(gen);
  cmd->add_flag("--bias", args.bias, "append a constant bias feature to --data");
}

fedsim_status open_data(const DataArgs& args, Dataset& out) {
  if (!args.generator.empty()) return fedsim_dataset_generate(args.generator.c_str(), &out.p);
  std::string spec = "{\"path\":" + json_string(args.path) + ",\"bias\":" +
                     (args.bias ? "true" : "false") + "}";
  return fedsim_dataset_generate(spec.c_str(), &out.p);
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out_path, const std::string& svg_path, double svg_fstar) {
  const auto text = read_file(config_path);
  if (!text) {
    std::cerr << "fedsim: cannot open config file " << config_path << "\n";
    return kExitUsage;
  }
  fedsim_trajectory* traj = nullptr;
  const auto st = fedsim_run_config(text->c_str(), parent_dir(config_path).c_str(), seed ? 1 : 0,
                                    seed.value_or(0), &traj);
  if (st != FEDSIM_OK) return report(st);
  OwnedString csv;
  auto st2 = fedsim_trajectory_csv(traj, &csv.p);
  if (st2 == FEDSIM_OK && !svg_path.empty())
    st2 = fedsim_trajectory_write_svg(traj, svg_path.c_str(), svg_fstar);
  fedsim_trajectory_free(traj);
  if (st2 != FEDSIM_OK) return report(st2);
  return write_text(out_path, csv.p) ? kExitOk : kExitUsage;
}

void log_line(const char* line, void*) { std::cerr << line << "\n"; }

int cmd_sweep(const std::string& config_path, std::size_t jobs, const std::string& csv_path,
              const std::string& svg_path, bool quiet) {
  const auto text = read_file(config_path);
  if (!text) {
    std::cerr << "fedsim: cannot open config file " << config_path << "\n";
    return kExitUsage;
  }
  fedsim_sweep* sweep = nullptr;
  const auto st = fedsim_sweep_config(text->c_str(), parent_dir(config_path).c_str(), jobs,
                                      quiet ? nullptr : log_line, nullptr, &sweep);
  if (st != FEDSIM_OK) return report(st);
  OwnedString csv;
  auto st2 = fedsim_sweep_csv(sweep, &csv.p);
  if (st2 == FEDSIM_OK && !svg_path.empty()) st2 = fedsim_sweep_write_svg(sweep, svg_path.c_str());
  fedsim_sweep_free(sweep);
  if (st2 != FEDSIM_OK) return report(st2);
  return write_text(csv_path, csv.p) ? kExitOk : kExitUsage;
}

int cmd_fstar(const DataArgs& data, const std::string& objective, const std::string& lambda_text,
              double tol, const std::string& cache) {
  Dataset ds;
  if (const auto st = open_data(data, ds); st != FEDSIM_OK) return report(st);
  const auto lambda = parse_lambda(lambda_text, fedsim_dataset_rows(ds.p));
  if (!lambda) {
    std::cerr << "fedsim: --lambda must be a number or 1/n\n";
    return kExitUsage;
  }
  fedsim_fstar_result r{};
  if (const auto st = fedsim_fstar(ds.p, objective.c_str(), *lambda, tol, &r); st != FEDSIM_OK)
    return report(st);
  if (!cache.empty()) {
    if (const auto st = fedsim_fstar_write_cache(&r, cache.c_str()); st != FEDSIM_OK) return report(st);
  }
  std::printf("%.15g\n", r.f_star);
  std::fprintf(stderr, "grad_norm=%.3e iterations=%lld\n", r.grad_norm,
               static_cast<long long>(r.iterations));
  return kExitOk;
}

int cmd_spectral(const DataArgs& data, const std::string& objective,
                 const std::string& lambda_text, std::size_t devices, const std::string& out) {
  Dataset ds;
  if (const auto st = open_data(data, ds); st != FEDSIM_OK) return report(st);
  const auto lambda = parse_lambda(lambda_text, fedsim_dataset_rows(ds.p));
  if (!lambda) {
    std::cerr << "fedsim: --lambda must be a number or 1/n\n";
    return kExitUsage;
  }
  OwnedString json;
  const auto st =
      fedsim_spectral_report_json(ds.p, objective.c_str(), *lambda, devices, &json.p);
  if (st != FEDSIM_OK) return report(st);
  std::string text = std::string(json.p) + "\n";
  return write_text(out, text.c_str()) ? kExitOk : kExitUsage;
}

int cmd_gen_data(const std::string& spec, const std::string& out) {
  Dataset ds;
  if (const auto st = fedsim_dataset_generate(spec.c_str(), &ds.p); st != FEDSIM_OK) return report(st);
  if (const auto st = fedsim_dataset_save_libsvm(ds.p, out.c_str()); st != FEDSIM_OK) return report(st);
  std::fprintf(stderr, "wrote %zu rows x %zu features to %s\n", fedsim_dataset_rows(ds.p),
               fedsim_dataset_cols(ds.p), out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedsim: deterministic federated-optimization simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fedsim_version());

  int exit_code = kExitOk;

  // run
  auto* run = app.add_subcommand("run", "run one federated simulation; writes the trajectory CSV");
  std::string run_config;
  std::optional<std::uint64_t> run_seed;
  std::string run_out, run_svg;
  double run_fstar = 0.0;
  run->add_option("config", run_config, "run configuration JSON")->required();
  run->add_option("--seed", run_seed, "override federation.seed");
  run->add_option("--out", run_out, "CSV output path (default stdout)");
  run->add_option("--svg", run_svg, "also plot log10(F - F*) to this SVG");
  run->add_option("--fstar", run_fstar, "F* used by --svg");
  run->callback([&] { exit_code = cmd_run(run_config, run_seed, run_out, run_svg, run_fstar); });

  // sweep
  auto* sweep = app.add_subcommand("sweep", "grid-searched speedup sweep over device counts");
  std::string sweep_config, sweep_csv, sweep_svg;
  std::size_t jobs = 1;
  bool quiet = false;
  sweep->add_option("config", sweep_config, "sweep configuration JSON")->required();
  sweep->add_option("--jobs,-j", jobs, "parallel cells")->check(CLI::PositiveNumber);
  sweep->add_option("--out-csv", sweep_csv, "CSV output path (default stdout)");
  sweep->add_option("--out-svg", sweep_svg, "speedup plot output path");
  sweep->add_flag("--quiet,-q", quiet, "suppress per-cell log lines");
  sweep->callback([&] { exit_code = cmd_sweep(sweep_config, jobs, sweep_csv, sweep_svg, quiet); });

  // fstar
  auto* fstar = app.add_subcommand("fstar", "solve for the optimal objective value F*");
  DataArgs fstar_data;
  std::string fstar_objective = "reg_logistic", fstar_lambda = "1/n", fstar_cache;
  double fstar_tol = 1e-10;
  add_data_options(fstar, fstar_data);
  fstar->add_option("--objective", fstar_objective, "reg_logistic | logistic | least_squares")
      ->check(CLI::IsMember({"reg_logistic", "logistic", "least_squares"}));
  fstar->add_option("--lambda", fstar_lambda, "regularization (number or 1/n)");
  fstar->add_option("--tol", fstar_tol, "gradient-norm tolerance")->check(CLI::PositiveNumber);
  fstar->add_option("--cache", fstar_cache, "write the F* cache JSON here");
  fstar->callback([&] {
    if (fstar_data.path.empty() && fstar_data.generator.empty()) {
      std::cerr << "fedsim: fstar needs --data or --generator\n";
      exit_code = kExitUsage;
      return;
    }
    if (fstar_objective == "logistic") fstar_lambda = "0";
    exit_code = cmd_fstar(fstar_data, fstar_objective, fstar_lambda, fstar_tol, fstar_cache);
  });

  // spectral
  auto* spectral = app.add_subcommand("spectral", "print curvature and condition-number report as JSON");
  DataArgs spec_data;
  std::string spec_objective = "least_squares", spec_lambda = "0", spec_out;
  std::size_t spec_devices = 0;
  add_data_options(spectral, spec_data);
  spectral->add_option("--objective", spec_objective, "reg_logistic | logistic | least_squares")
      ->check(CLI::IsMember({"reg_logistic", "logistic", "least_squares"}));
  spectral->add_option("--lambda", spec_lambda, "regularization (number or 1/n)");
  spectral->add_option("--devices", spec_devices, "even split into this many devices (0: dataset default)");
  spectral->add_option("--out", spec_out, "JSON output path (default stdout)");
  spectral->callback([&] {
    if (spec_data.path.empty() && spec_data.generator.empty()) {
      std::cerr << "fedsim: spectral needs --data or --generator\n";
      exit_code = kExitUsage;
      return;
    }
    exit_code = cmd_spectral(spec_data, spec_objective, spec_lambda, spec_devices, spec_out);
  });

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset in libsvm format");
  gen->require_subcommand(1);
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "output libsvm path")->required();
  gen->add_option("--seed", gen_seed, "generator seed");

  auto* g_reg = gen->add_subcommand("regression", "relabel a feature file with a planted linear model");
  std::string features;
  g_reg->add_option("--features", features, "libsvm feature file")->required();

  auto* g_gauss = gen->add_subcommand("gaussian", "Gaussian features with a prescribed covariance spectrum");
  std::size_t gn = 512, gd = 64;
  double glo = 1.0, ghi = 1.0;
  g_gauss->add_option("-n", gn, "samples")->check(CLI::PositiveNumber);
  g_gauss->add_option("-d", gd, "dimension")->check(CLI::PositiveNumber);
  g_gauss->add_option("--spectrum-min", glo, "smallest covariance eigenvalue")->check(CLI::PositiveNumber);
  g_gauss->add_option("--spectrum-max", ghi, "largest covariance eigenvalue")->check(CLI::PositiveNumber);

  auto* g_logit = gen->add_subcommand("logistic", "binary classification data from a planted logistic model");
  std::size_t ln = 4096, ld = 30;
  double lscale = 1.0;
  g_logit->add_option("-n", ln, "samples")->check(CLI::PositiveNumber);
  g_logit->add_option("-d", ld, "dimension")->check(CLI::PositiveNumber);
  g_logit->add_option("--scale", lscale, "feature scale")->check(CLI::PositiveNumber);

  auto* g_cx = gen->add_subcommand("counterexample", "paired-device instance with zero global average");
  std::size_t cdev = 2, ccopies = 1, cdim = 1;
  double cradius = 1.0;
  g_cx->add_option("--devices", cdev, "device count (even)")->check(CLI::PositiveNumber);
  g_cx->add_option("--copies", ccopies, "samples per device")->check(CLI::PositiveNumber);
  g_cx->add_option("--radius", cradius, "distance of device optima from the origin")
      ->check(CLI::PositiveNumber);
  g_cx->add_option("--dim", cdim, "dimension")->check(CLI::PositiveNumber);

  gen->callback([&] {
    std::ostringstream spec;
    spec.precision(17);
    if (g_reg->parsed()) {
      spec << "{\"generator\":\"overparam_regression\",\"seed\":" << gen_seed
           << ",\"features\":{\"path\":" << json_string(features) << "}}";
    } else if (g_gauss->parsed()) {
      spec << "{\"generator\":\"gaussian_quadratic\",\"n\":" << gn << ",\"d\":" << gd
           << ",\"spectrum_range\":[" << glo << "," << ghi << "],\"seed\":" << gen_seed << "}";
    } else if (g_logit->parsed()) {
      spec << "{\"generator\":\"logistic\",\"n\":" << ln << ",\"d\":" << ld
           << ",\"scale\":" << lscale << ",\"seed\":" << gen_seed << "}";
    } else {
      spec << "{\"generator\":\"counterexample\",\"devices\":" << cdev << ",\"copies\":" << ccopies
           << ",\"radius\":" << cradius << ",\"dim\":" << cdim << "}";
    }
    exit_code = cmd_gen_data(spec.str(), gen_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }
  return exit_code;
}
