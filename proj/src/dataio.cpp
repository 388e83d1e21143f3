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

#include "fedsim/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "fedsim/error.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

Dataset::Dataset(std::vector<std::size_t> row_ptr, std::vector<std::uint32_t> indices,
                 std::vector<double> values, std::vector<double> labels,
                 std::size_t dim, std::optional<GroundTruth> truth)
    : row_ptr_(std::move(row_ptr)),
      indices_(std::move(indices)),
      values_(std::move(values)),
      labels_(std::move(labels)),
      dim_(dim),
      truth_(std::move(truth)) {
  if (row_ptr_.empty() || row_ptr_.front() != 0 || row_ptr_.size() != labels_.size() + 1)
    fail(ErrorCode::kInvalidInput, "dataset: row pointer does not match label count");
  if (row_ptr_.back() != indices_.size() || indices_.size() != values_.size())
    fail(ErrorCode::kInvalidInput, "dataset: index/value arrays are inconsistent");
  if (!std::is_sorted(row_ptr_.begin(), row_ptr_.end()))
    fail(ErrorCode::kInvalidInput, "dataset: row pointer is not monotone");
  for (auto idx : indices_)
    if (idx >= dim_) fail(ErrorCode::kInvalidInput, "dataset: feature index out of range");
  if (truth_ && static_cast<std::size_t>(truth_->weights.size()) != dim_)
    fail(ErrorCode::kShape, "dataset: ground truth dimension mismatch");
}

Dataset Dataset::with_bias_column() const {
  std::vector<std::size_t> rp{0};
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  rp.reserve(row_ptr_.size());
  idx.reserve(indices_.size() + size());
  val.reserve(values_.size() + size());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto r = row(i);
    idx.insert(idx.end(), r.indices.begin(), r.indices.end());
    val.insert(val.end(), r.values.begin(), r.values.end());
    idx.push_back(static_cast<std::uint32_t>(dim_));
    val.push_back(1.0);
    rp.push_back(idx.size());
  }
  return Dataset(std::move(rp), std::move(idx), std::move(val), labels_, dim_ + 1);
}

Dataset Dataset::with_labels(std::vector<double> labels,
                             std::optional<GroundTruth> truth) const {
  return Dataset(row_ptr_, indices_, values_, std::move(labels), dim_, std::move(truth));
}

void DevicePartition::validate(std::size_t n) const {
  if (shards.size() != weights.size() || shards.empty())
    fail(ErrorCode::kInvalidPartition, "partition: shard and weight counts differ");
  double total = 0.0;
  for (double p : weights) {
    if (!(p >= 0.0) || !std::isfinite(p))
      fail(ErrorCode::kInvalidPartition, "partition: negative or non-finite weight");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12)
    fail(ErrorCode::kInvalidPartition, "partition: weights do not sum to one");
  std::vector<char> seen(n, 0);
  for (const auto& shard : shards) {
    for (auto i : shard) {
      if (i >= n) fail(ErrorCode::kInvalidPartition, "partition: index out of range");
      if (seen[i]) fail(ErrorCode::kInvalidPartition, "partition: shards overlap");
      seen[i] = 1;
    }
  }
}

// --- libsvm ----------------------------------------------------------------

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& why) {
  fail(ErrorCode::kParse, "libsvm line " + std::to_string(line) + ": " + why);
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

}  // namespace

Dataset parse_libsvm(std::istream& in) {
  std::vector<std::size_t> rp{0};
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  std::vector<double> labels;
  std::size_t dim = 0;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view rest(line);
    if (auto hash = rest.find('#'); hash != std::string_view::npos) rest = rest.substr(0, hash);

    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < rest.size()) {
      while (pos < rest.size() && is_space(rest[pos])) ++pos;
      std::size_t end = pos;
      while (end < rest.size() && !is_space(rest[end])) ++end;
      if (end > pos) tokens.push_back(rest.substr(pos, end - pos));
      pos = end;
    }
    if (tokens.empty()) continue;

    double label = 0.0;
    if (!parse_number(tokens[0], label)) parse_fail(lineno, "bad label '" + std::string(tokens[0]) + "'");

    long prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto tok = tokens[t];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) parse_fail(lineno, "expected idx:val, got '" + std::string(tok) + "'");
      long index = 0;
      double value = 0.0;
      if (!parse_number(tok.substr(0, colon), index) || index < 1)
        parse_fail(lineno, "bad feature index in '" + std::string(tok) + "'");
      if (!parse_number(tok.substr(colon + 1), value))
        parse_fail(lineno, "bad feature value in '" + std::string(tok) + "'");
      if (index <= prev) parse_fail(lineno, "feature indices are not strictly increasing");
      if (index > static_cast<long>(std::numeric_limits<std::uint32_t>::max()))
        parse_fail(lineno, "feature index too large");
      prev = index;
      idx.push_back(static_cast<std::uint32_t>(index - 1));
      val.push_back(value);
      dim = std::max<std::size_t>(dim, static_cast<std::size_t>(index));
    }
    labels.push_back(label);
    rp.push_back(idx.size());
  }
  return Dataset(std::move(rp), std::move(idx), std::move(val), std::move(labels), dim);
}

Dataset parse_libsvm(const std::string& text) {
  std::istringstream in(text);
  return parse_libsvm(in);
}

Dataset load_libsvm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open dataset file " + path.string());
  return parse_libsvm(in);
}

void write_libsvm(const Dataset& ds, std::ostream& out) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.label(i);
    const auto r = ds.row(i);
    for (std::size_t j = 0; j < r.indices.size(); ++j)
      out << ' ' << (r.indices[j] + 1) << ':' << r.values[j];
    out << '\n';
  }
}

void save_libsvm(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  write_libsvm(ds, out);
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

// --- partitioning ------------------------------------------------------------

DevicePartition partition_even(const Dataset& ds, std::size_t devices) {
  const std::size_t n = ds.size();
  if (devices == 0 || devices > n)
    fail(ErrorCode::kInvalidPartition, "cannot split " + std::to_string(n) +
                                           " samples over " + std::to_string(devices) +
                                           " devices");
  DevicePartition part;
  part.shards.resize(devices);
  part.weights.resize(devices);
  const std::size_t base = n / devices, extra = n % devices;
  std::size_t next = 0;
  for (std::size_t k = 0; k < devices; ++k) {
    const std::size_t count = base + (k < extra ? 1 : 0);
    auto& shard = part.shards[k];
    shard.resize(count);
    for (std::size_t j = 0; j < count; ++j) shard[j] = next++;
    part.weights[k] = static_cast<double>(count) / static_cast<double>(n);
  }
  return part;
}

// --- generators --------------------------------------------------------------

Dataset gen_overparam_regression(const Dataset& features, std::uint64_t seed) {
  if (features.size() == 0) fail(ErrorCode::kInvalidInput, "regression generator needs samples");
  Dataset augmented = features.with_bias_column();
  const std::size_t d = augmented.dim();
  Stream normals(seed, StreamTag::kGenerator, 0, 0);
  Vector truth(d);
  for (std::size_t i = 0; i < d; ++i) truth[i] = normals.normal();

  std::vector<double> labels(augmented.size());
  for (std::size_t i = 0; i < augmented.size(); ++i) labels[i] = augmented.row(i).dot(truth);
  GroundTruth gt{truth, truth[d - 1]};
  return augmented.with_labels(std::move(labels), std::move(gt));
}

Dataset gen_gaussian_quadratic(std::size_t n, std::size_t d,
                               std::span<const double> spectrum, std::uint64_t seed) {
  if (d == 0 || n < d) fail(ErrorCode::kInvalidInput, "gaussian quadratic needs n >= d >= 1");
  if (spectrum.size() != d) fail(ErrorCode::kInvalidInput, "spectrum length must equal d");
  for (double s : spectrum)
    if (!(s > 0.0) || !std::isfinite(s))
      fail(ErrorCode::kInvalidInput, "spectrum entries must be positive");

  std::vector<double> scale(d);
  for (std::size_t i = 0; i < d; ++i) scale[i] = std::sqrt(spectrum[i]);

  Stream truth_draws(seed, StreamTag::kGenerator, 0, 0);
  Vector truth(d);
  for (std::size_t i = 0; i < d; ++i) truth[i] = truth_draws.normal();

  std::vector<std::size_t> rp{0};
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  idx.reserve(n * d);
  val.reserve(n * d);
  for (std::size_t s = 0; s < n; ++s) {
    Stream row_draws(seed, StreamTag::kGenerator, 1, s);
    for (std::size_t i = 0; i < d; ++i) {
      idx.push_back(static_cast<std::uint32_t>(i));
      val.push_back(scale[i] * row_draws.normal());
    }
    rp.push_back(idx.size());
  }
  Dataset features(std::move(rp), std::move(idx), std::move(val),
                   std::vector<double>(n, 0.0), d);
  std::vector<double> labels(n);
  for (std::size_t s = 0; s < n; ++s) labels[s] = features.row(s).dot(truth);
  return features.with_labels(std::move(labels), GroundTruth{truth, 0.0});
}

Dataset gen_logistic(std::size_t n, std::size_t d, double scale, std::uint64_t seed) {
  if (n == 0 || d == 0) fail(ErrorCode::kInvalidInput, "logistic generator needs n, d >= 1");
  if (!(scale > 0.0)) fail(ErrorCode::kInvalidInput, "logistic generator needs positive scale");
  Stream truth_draws(seed, StreamTag::kGenerator, 0, 0);
  Vector truth(d);
  for (std::size_t i = 0; i < d; ++i) truth[i] = truth_draws.normal();

  const double feature_sd = scale / std::sqrt(static_cast<double>(d));
  std::vector<std::size_t> rp{0};
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  std::vector<double> labels(n);
  for (std::size_t s = 0; s < n; ++s) {
    Stream row_draws(seed, StreamTag::kGenerator, 1, s);
    double margin = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double x = feature_sd * row_draws.normal();
      idx.push_back(static_cast<std::uint32_t>(i));
      val.push_back(x);
      margin += x * truth[i];
    }
    rp.push_back(idx.size());
    const double prob = 1.0 / (1.0 + std::exp(-margin));
    labels[s] = row_draws.uniform() < prob ? 1.0 : -1.0;
  }
  return Dataset(std::move(rp), std::move(idx), std::move(val), std::move(labels), d);
}

std::vector<Vector> counterexample_centers(std::size_t devices, double radius,
                                           std::size_t dim) {
  std::vector<Vector> centers;
  centers.reserve(devices);
  for (std::size_t k = 0; k < devices; ++k) {
    Vector c = Vector::Zero(static_cast<Eigen::Index>(dim));
    c[static_cast<Eigen::Index>((k / 2) % dim)] = (k % 2 == 0) ? radius : -radius;
    centers.push_back(std::move(c));
  }
  return centers;
}

std::pair<Dataset, DevicePartition> gen_counterexample(std::size_t devices,
                                                       std::size_t copies_per_device,
                                                       double radius, std::size_t dim) {
  if (devices == 0 || devices % 2 != 0)
    fail(ErrorCode::kInvalidInput, "counterexample needs an even, positive device count");
  if (copies_per_device == 0 || dim == 0)
    fail(ErrorCode::kInvalidInput, "counterexample needs copies and dimension >= 1");
  if (!(radius > 0.0)) fail(ErrorCode::kInvalidInput, "counterexample radius must be positive");

  // Samples (s e_i, s c_k[i]) with s = sqrt(2 dim) make the half-mean squared
  // residual equal to ||w - c_k||^2.
  const double s = std::sqrt(2.0 * static_cast<double>(dim));
  const auto centers = counterexample_centers(devices, radius, dim);

  std::vector<std::size_t> rp{0};
  std::vector<std::uint32_t> idx;
  std::vector<double> val;
  std::vector<double> labels;
  DevicePartition part;
  part.shards.resize(devices);
  part.weights.assign(devices, 1.0 / static_cast<double>(devices));
  for (std::size_t k = 0; k < devices; ++k) {
    for (std::size_t copy = 0; copy < copies_per_device; ++copy) {
      for (std::size_t i = 0; i < dim; ++i) {
        part.shards[k].push_back(labels.size());
        idx.push_back(static_cast<std::uint32_t>(i));
        val.push_back(s);
        labels.push_back(s * centers[k][static_cast<Eigen::Index>(i)]);
        rp.push_back(idx.size());
      }
    }
  }
  Dataset ds(std::move(rp), std::move(idx), std::move(val), std::move(labels), dim);
  return {std::move(ds), std::move(part)};
}

}  // namespace fedsim
