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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/dataio.hpp"

namespace fedsim {

enum class LossKind { kLogistic, kLeastSquares };

/// RegLogistic is kLogistic with lambda > 0; LeastSquares ignores lambda.
struct ObjectiveKind {
  LossKind loss = LossKind::kLeastSquares;
  double lambda = 0.0;

  static ObjectiveKind reg_logistic(double lambda) { return {LossKind::kLogistic, lambda}; }
  static ObjectiveKind logistic() { return {LossKind::kLogistic, 0.0}; }
  static ObjectiveKind least_squares() { return {LossKind::kLeastSquares, 0.0}; }
};

/// Parses "reg_logistic", "logistic" or "least_squares".
ObjectiveKind parse_objective_kind(const std::string& name, double lambda);
std::string objective_name(const ObjectiveKind& kind);

/// F(w) = sum_k p_k F_k(w), F_k the mean per-sample loss over shard k plus
/// (lambda/2)||w||^2.
///
/// Per-sample losses: logistic log(1 + exp(-y <w,x>)) and least squares
/// (1/2)(<w,x> - y)^2.
class Objective {
 public:
  Objective(std::shared_ptr<const Dataset> data,
            std::shared_ptr<const DevicePartition> partition, ObjectiveKind kind);

  const Dataset& dataset() const noexcept { return *data_; }
  const DevicePartition& partition() const noexcept { return *partition_; }
  std::shared_ptr<const Dataset> dataset_ptr() const noexcept { return data_; }
  std::shared_ptr<const DevicePartition> partition_ptr() const noexcept { return partition_; }
  const ObjectiveKind& kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return data_->dim(); }
  std::size_t devices() const noexcept { return partition_->devices(); }
  std::span<const double> weights() const noexcept { return partition_->weights; }

  double value(const Vector& w) const;
  double device_value(std::size_t k, const Vector& w) const;

  /// Exact gradient of F_k.
  Vector grad_full(std::size_t k, const Vector& w) const;
  /// Exact gradient of F.
  Vector grad(const Vector& w) const;
  /// F(w) and grad F(w) in one pass over the data.
  std::pair<double, Vector> value_and_grad(const Vector& w) const;

  /// Mean per-sample gradient over `batch` plus the regularizer gradient.
  /// Every index must belong to shard k.
  Vector grad_stochastic(std::size_t k, const Vector& w,
                         std::span<const std::size_t> batch) const;
  /// Same as grad_stochastic, written into `out` (resized as needed).
  void grad_stochastic_into(std::size_t k, const Vector& w,
                            std::span<const std::size_t> batch, Vector& out) const;

  /// Per-sample loss derivative with respect to the margin <w, x>.
  double margin_derivative(std::size_t sample, double margin) const noexcept;
  double sample_loss(std::size_t sample, double margin) const noexcept;

 private:
  void check_dim(const Vector& w) const;
  void check_device(std::size_t k) const;

  std::shared_ptr<const Dataset> data_;
  std::shared_ptr<const DevicePartition> partition_;
  ObjectiveKind kind_;
  std::vector<std::int64_t> owner_;
};

/// Curvature and noise constants for an objective.
///
/// Quadratic-only entries (l, kappa1, kappa_tilde, lambda_min_pos) are empty
/// for logistic objectives; mu and kappa are empty when the objective is not
/// strongly convex.
struct SpectralReport {
  double L = 0.0;
  std::optional<double> mu;
  std::optional<double> l;
  std::optional<double> l_loose;
  std::optional<double> lambda_min_pos;
  double lambda_max = 0.0;
  std::optional<double> kappa;
  std::optional<double> kappa1;
  std::optional<double> kappa_tilde;
  double nu_max = 0.0;
  double nu_min = 0.0;
  std::optional<double> G_hat_sq;
  std::optional<double> sigma_hat_sq;
  std::vector<std::string> warnings;

  /// Flat JSON object keyed by the field names; empty optionals become null.
  std::string to_json() const;
};

/// Matrices behind the least-squares spectral quantities.
struct QuadraticSpectra {
  std::vector<Matrix> local_hessians;     // H^k = (1/n_k) sum x x^T
  std::vector<Matrix> local_fourth;       // (1/n_k) sum ||x||^2 x x^T
  Matrix hessian;                         // H = sum_k p_k H^k
  Matrix statistical;                     // sum_k p_k (1/n_k) sum (x^T H^+ x) x x^T
  std::vector<double> l_per_device;
};

QuadraticSpectra quadratic_spectra(const Objective& obj);

/// Builds the report. Least-squares objectives use the exact Hessian path;
/// logistic objectives get L = lambda + lambda_max(max_k H^k)/4 and mu = lambda.
SpectralReport spectral_report(const Objective& obj);

/// Smallest eigenvalues of l H^k - A_k on range(H^k) (one per device) and of
/// kappa_tilde H - B on range(H). Nonnegative up to rounding when the report
/// constants are valid.
struct OrderingResiduals {
  std::vector<double> per_device_l;
  double kappa_tilde = 0.0;
};
OrderingResiduals ordering_residuals(const Objective& obj, const SpectralReport& report);

/// Relative eigenvalue floor below which a direction counts as null space.
inline constexpr double kNullSpaceTolerance = 1e-10;

/// Empirical gradient-norm and variance bounds at probe points.
struct GradientBounds {
  double G_hat_sq = 0.0;
  double sigma_hat_sq = 0.0;
};

/// For every probe and device draws `sample_count` stochastic gradients with
/// `batch_size` samples each (batch_size >= n_k uses the whole shard).
/// G_hat_sq is the max over probes and devices of the mean ||g||^2;
/// sigma_hat_sq is sum_k p_k max_probe mean ||g - grad F_k||^2.
GradientBounds measure_bounds(const Objective& obj, std::size_t sample_count,
                              std::span<const Vector> probes, std::uint64_t seed,
                              std::size_t batch_size = 1);

/// Largest eigenvalue of a symmetric matrix.
double max_eigenvalue(const Matrix& m);

}  // namespace fedsim
