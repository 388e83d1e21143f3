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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace fedsim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Interpolating parameters used to generate regression labels.
///
/// `weights` lives in the dataset's feature space (including an appended
/// constant column if one was added), so label_i == <weights, x_i>.
/// `bias` repeats the intercept coordinate for reporting.
struct GroundTruth {
  Vector weights;
  double bias = 0.0;
};

/// One sparse row: parallel index/value views.
struct SparseRow {
  std::span<const std::uint32_t> indices;
  std::span<const double> values;

  double dot(const Vector& w) const noexcept {
    double s = 0.0;
    for (std::size_t j = 0; j < indices.size(); ++j) s += values[j] * w[indices[j]];
    return s;
  }
  void axpy(double a, Vector& out) const noexcept {
    for (std::size_t j = 0; j < indices.size(); ++j) out[indices[j]] += a * values[j];
  }
  double squared_norm() const noexcept {
    double s = 0.0;
    for (double v : values) s += v * v;
    return s;
  }
};

/// Immutable sparse dataset in compressed-row form.
class Dataset {
 public:
  Dataset() = default;

  /// Takes ownership of CSR arrays. Validates every invariant.
  Dataset(std::vector<std::size_t> row_ptr, std::vector<std::uint32_t> indices,
          std::vector<double> values, std::vector<double> labels, std::size_t dim,
          std::optional<GroundTruth> truth = std::nullopt);

  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t nonzeros() const noexcept { return values_.size(); }

  SparseRow row(std::size_t i) const noexcept {
    const std::size_t b = row_ptr_[i], e = row_ptr_[i + 1];
    return {std::span(indices_).subspan(b, e - b), std::span(values_).subspan(b, e - b)};
  }
  double label(std::size_t i) const noexcept { return labels_[i]; }
  std::span<const double> labels() const noexcept { return labels_; }
  const std::optional<GroundTruth>& ground_truth() const noexcept { return truth_; }

  /// Copy with every row extended by a trailing constant-1 feature.
  Dataset with_bias_column() const;
  /// Copy with labels replaced.
  Dataset with_labels(std::vector<double> labels,
                      std::optional<GroundTruth> truth) const;

 private:
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
  std::vector<double> labels_;
  std::size_t dim_ = 0;
  std::optional<GroundTruth> truth_;
};

/// Assignment of samples to devices with aggregation weights p_k.
struct DevicePartition {
  std::vector<std::vector<std::size_t>> shards;
  std::vector<double> weights;

  std::size_t devices() const noexcept { return shards.size(); }

  /// Throws kInvalidPartition unless weights are a distribution and shards
  /// are disjoint subsets of [0, n).
  void validate(std::size_t n) const;
};

/// Parses libsvm/svmlight text. Indices are 1-based on disk, 0-based in
/// memory; the dimension is the largest index seen.
Dataset parse_libsvm(std::istream& in);
Dataset parse_libsvm(const std::string& text);
Dataset load_libsvm(const std::filesystem::path& path);

/// Writes labels and features with round-trip precision.
void write_libsvm(const Dataset& ds, std::ostream& out);
void save_libsvm(const Dataset& ds, const std::filesystem::path& path);

/// Contiguous split in index order; the first n mod N devices get one extra
/// sample and p_k = n_k / n.
DevicePartition partition_even(const Dataset& ds, std::size_t devices);

/// Appends a constant-1 column, draws [w*, b*] with i.i.d. standard normal
/// coordinates and sets y = <w*, x> + b*.
Dataset gen_overparam_regression(const Dataset& features, std::uint64_t seed);

/// Gaussian features with per-coordinate variances `spectrum` and labels
/// from a random interpolating w* (no intercept).
Dataset gen_gaussian_quadratic(std::size_t n, std::size_t d,
                               std::span<const double> spectrum, std::uint64_t seed);

/// Binary classification data: x ~ N(0, scale^2/d I), y ~ Bernoulli of
/// sigmoid(<w*, x>) mapped to +-1, w* ~ N(0, I).
Dataset gen_logistic(std::size_t n, std::size_t d, double scale, std::uint64_t seed);

/// Devices hold copies of centers arranged in antipodal pairs; device k's
/// local objective is ||w - c_k||^2 and the global minimizer is 0.
std::pair<Dataset, DevicePartition> gen_counterexample(std::size_t devices,
                                                       std::size_t copies_per_device,
                                                       double radius,
                                                       std::size_t dim = 1);

/// Centers used by gen_counterexample, one row per device.
std::vector<Vector> counterexample_centers(std::size_t devices, double radius,
                                           std::size_t dim);

}  // namespace fedsim
