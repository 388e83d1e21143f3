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

#include "fedsim/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fedsim/error.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

ObjectiveKind parse_objective_kind(const std::string& name, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    fail(ErrorCode::kInvalidInput, "lambda must be a nonnegative real");
  if (name == "reg_logistic") return ObjectiveKind::reg_logistic(lambda);
  if (name == "logistic") return ObjectiveKind::logistic();
  if (name == "least_squares") return ObjectiveKind::least_squares();
  fail(ErrorCode::kInvalidInput, "unknown objective kind '" + name + "'");
}

std::string objective_name(const ObjectiveKind& kind) {
  if (kind.loss == LossKind::kLeastSquares) return "least_squares";
  return kind.lambda > 0.0 ? "reg_logistic" : "logistic";
}

Objective::Objective(std::shared_ptr<const Dataset> data,
                     std::shared_ptr<const DevicePartition> partition, ObjectiveKind kind)
    : data_(std::move(data)), partition_(std::move(partition)), kind_(kind) {
  if (!data_ || !partition_) fail(ErrorCode::kInvalidInput, "objective needs data and a partition");
  if (kind_.loss == LossKind::kLeastSquares) kind_.lambda = 0.0;
  if (!(kind_.lambda >= 0.0)) fail(ErrorCode::kInvalidInput, "negative regularization");
  partition_->validate(data_->size());
  owner_.assign(data_->size(), -1);
  for (std::size_t k = 0; k < partition_->devices(); ++k) {
    if (partition_->shards[k].empty())
      fail(ErrorCode::kInvalidPartition, "device " + std::to_string(k) + " has no samples");
    for (auto i : partition_->shards[k]) owner_[i] = static_cast<std::int64_t>(k);
  }
}

void Objective::check_dim(const Vector& w) const {
  if (static_cast<std::size_t>(w.size()) != dim())
    fail(ErrorCode::kShape, "parameter has dimension " + std::to_string(w.size()) +
                                ", objective expects " + std::to_string(dim()));
}

void Objective::check_device(std::size_t k) const {
  if (k >= devices())
    fail(ErrorCode::kInvalidInput, "device index " + std::to_string(k) + " out of range");
}

double Objective::sample_loss(std::size_t sample, double margin) const noexcept {
  const double y = data_->label(sample);
  if (kind_.loss == LossKind::kLeastSquares) {
    const double r = margin - y;
    return 0.5 * r * r;
  }
  const double z = -y * margin;
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double Objective::margin_derivative(std::size_t sample, double margin) const noexcept {
  const double y = data_->label(sample);
  if (kind_.loss == LossKind::kLeastSquares) return margin - y;
  // -y * sigmoid(-y m), evaluated without overflow.
  const double z = y * margin;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return -y * e / (1.0 + e);
  }
  return -y / (1.0 + std::exp(z));
}

double Objective::device_value(std::size_t k, const Vector& w) const {
  check_dim(w);
  check_device(k);
  const auto& shard = partition_->shards[k];
  double sum = 0.0;
  for (auto i : shard) sum += sample_loss(i, data_->row(i).dot(w));
  double v = sum / static_cast<double>(shard.size());
  if (kind_.lambda > 0.0) v += 0.5 * kind_.lambda * w.squaredNorm();
  return v;
}

double Objective::value(const Vector& w) const {
  check_dim(w);
  double total = 0.0;
  for (std::size_t k = 0; k < devices(); ++k) total += partition_->weights[k] * device_value(k, w);
  return total;
}

void Objective::grad_stochastic_into(std::size_t k, const Vector& w,
                                     std::span<const std::size_t> batch, Vector& out) const {
  check_dim(w);
  check_device(k);
  if (batch.empty()) fail(ErrorCode::kInvalidBatch, "empty batch");
  out.setZero(static_cast<Eigen::Index>(dim()));
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (auto i : batch) {
    if (i >= owner_.size() || owner_[i] != static_cast<std::int64_t>(k))
      fail(ErrorCode::kInvalidBatch, "sample " + std::to_string(i) + " is not in shard " +
                                         std::to_string(k));
    const auto r = data_->row(i);
    r.axpy(scale * margin_derivative(i, r.dot(w)), out);
  }
  if (kind_.lambda > 0.0) out += kind_.lambda * w;
}

Vector Objective::grad_stochastic(std::size_t k, const Vector& w,
                                  std::span<const std::size_t> batch) const {
  Vector g;
  grad_stochastic_into(k, w, batch, g);
  return g;
}

Vector Objective::grad_full(std::size_t k, const Vector& w) const {
  check_device(k);
  return grad_stochastic(k, w, partition_->shards[k]);
}

Vector Objective::grad(const Vector& w) const {
  return value_and_grad(w).second;
}

std::pair<double, Vector> Objective::value_and_grad(const Vector& w) const {
  check_dim(w);
  const auto d = static_cast<Eigen::Index>(dim());
  Vector g = Vector::Zero(d);
  Vector local(d);
  double value = 0.0;
  // Per-device sums first, so symmetric devices cancel exactly.
  for (std::size_t k = 0; k < devices(); ++k) {
    const auto& shard = partition_->shards[k];
    const double scale = 1.0 / static_cast<double>(shard.size());
    local.setZero();
    double sum = 0.0;
    for (auto i : shard) {
      const auto r = data_->row(i);
      const double m = r.dot(w);
      sum += sample_loss(i, m);
      r.axpy(scale * margin_derivative(i, m), local);
    }
    value += partition_->weights[k] * (sum * scale);
    g += partition_->weights[k] * local;
  }
  if (kind_.lambda > 0.0) {
    value += 0.5 * kind_.lambda * w.squaredNorm();
    g += kind_.lambda * w;
  }
  return {value, std::move(g)};
}

// --- spectra -----------------------------------------------------------------

double max_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

namespace {

/// Orthonormal basis of the positive eigenspace of a PSD matrix, scaled by
/// lambda^{-1/2}, so W^T M W is the whitened form of M on range(S).
struct RangeWhitener {
  Matrix basis;       // U_r
  Vector eigenvalues; // Lambda_r
  Matrix whiten;      // U_r Lambda_r^{-1/2}
  Matrix pseudo_inverse;
};

RangeWhitener whitener(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  const Vector& ev = es.eigenvalues();
  const double top = ev.size() ? ev.maxCoeff() : 0.0;
  if (!(top > 0.0)) fail(ErrorCode::kDegenerateSpectrum, "Hessian is identically zero");
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i] > kNullSpaceTolerance * top) keep.push_back(i);
  RangeWhitener w;
  const auto r = static_cast<Eigen::Index>(keep.size());
  w.basis.resize(s.rows(), r);
  w.eigenvalues.resize(r);
  for (Eigen::Index j = 0; j < r; ++j) {
    w.basis.col(j) = es.eigenvectors().col(keep[static_cast<std::size_t>(j)]);
    w.eigenvalues[j] = ev[keep[static_cast<std::size_t>(j)]];
  }
  w.whiten = w.basis * w.eigenvalues.cwiseInverse().cwiseSqrt().asDiagonal();
  w.pseudo_inverse = w.basis * w.eigenvalues.cwiseInverse().asDiagonal() * w.basis.transpose();
  return w;
}

/// Smallest c with A <= c S on range(S).
double generalized_max(const Matrix& a, const RangeWhitener& s) {
  const Matrix m = s.whiten.transpose() * a * s.whiten;
  return max_eigenvalue(0.5 * (m + m.transpose()));
}

double min_on_range(const Matrix& m, const RangeWhitener& s) {
  const Matrix p = s.basis.transpose() * m * s.basis;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (p + p.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().size() ? es.eigenvalues().minCoeff() : 0.0;
}

void add_outer(const SparseRow& r, double scale, Matrix& m) {
  for (std::size_t a = 0; a < r.indices.size(); ++a)
    for (std::size_t b = 0; b < r.indices.size(); ++b)
      m(r.indices[a], r.indices[b]) += scale * r.values[a] * r.values[b];
}

/// Condition numbers within this relative distance of 1 are reported as 1.
constexpr double kUnitSnap = 1e-12;

double snap_condition(double value, const char* name, std::vector<std::string>& warnings) {
  if (value < 1.0 - kUnitSnap) {
    warnings.push_back(std::string(name) + " = " + std::to_string(value) +
                       " below 1 from rounding; clamped to 1");
    return 1.0;
  }
  if (value <= 1.0 + kUnitSnap) return 1.0;
  return value;
}

std::vector<Matrix> local_hessians(const Objective& obj) {
  const auto d = static_cast<Eigen::Index>(obj.dim());
  std::vector<Matrix> out;
  out.reserve(obj.devices());
  for (std::size_t k = 0; k < obj.devices(); ++k) {
    const auto& shard = obj.partition().shards[k];
    Matrix h = Matrix::Zero(d, d);
    const double scale = 1.0 / static_cast<double>(shard.size());
    for (auto i : shard) add_outer(obj.dataset().row(i), scale, h);
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace

QuadraticSpectra quadratic_spectra(const Objective& obj) {
  if (obj.dataset().size() == 0 || obj.dim() == 0)
    fail(ErrorCode::kDegenerateSpectrum, "empty dataset");
  const auto d = static_cast<Eigen::Index>(obj.dim());
  QuadraticSpectra q;
  q.local_hessians = local_hessians(obj);
  q.hessian = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < obj.devices(); ++k)
    q.hessian += obj.weights()[k] * q.local_hessians[k];

  const RangeWhitener global = whitener(q.hessian);
  q.statistical = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < obj.devices(); ++k) {
    const auto& shard = obj.partition().shards[k];
    const double scale = 1.0 / static_cast<double>(shard.size());
    Matrix fourth = Matrix::Zero(d, d);
    for (auto i : shard) {
      const auto r = obj.dataset().row(i);
      add_outer(r, scale * r.squared_norm(), fourth);
      double leverage = 0.0;
      for (std::size_t a = 0; a < r.indices.size(); ++a)
        for (std::size_t b = 0; b < r.indices.size(); ++b)
          leverage += r.values[a] * r.values[b] * global.pseudo_inverse(r.indices[a], r.indices[b]);
      add_outer(r, obj.weights()[k] * scale * leverage, q.statistical);
    }
    q.local_fourth.push_back(std::move(fourth));
    const RangeWhitener local = whitener(q.local_hessians[k]);
    q.l_per_device.push_back(generalized_max(q.local_fourth.back(), local));
  }
  return q;
}

SpectralReport spectral_report(const Objective& obj) {
  if (obj.dataset().size() == 0 || obj.dim() == 0)
    fail(ErrorCode::kDegenerateSpectrum, "empty dataset");
  SpectralReport rep;
  const auto& w = obj.weights();
  const double n_dev = static_cast<double>(obj.devices());
  rep.nu_max = n_dev * *std::max_element(w.begin(), w.end());
  rep.nu_min = n_dev * *std::min_element(w.begin(), w.end());

  if (obj.kind().loss == LossKind::kLogistic) {
    double top_local = 0.0;
    for (const auto& h : local_hessians(obj)) top_local = std::max(top_local, max_eigenvalue(h));
    const double lambda = obj.kind().lambda;
    rep.L = lambda + 0.25 * top_local;
    rep.lambda_max = rep.L;
    if (lambda > 0.0) {
      rep.mu = lambda;
      rep.kappa = rep.L / lambda;
    }
    return rep;
  }

  const QuadraticSpectra q = quadratic_spectra(obj);
  const RangeWhitener global = whitener(q.hessian);
  rep.lambda_max = global.eigenvalues.maxCoeff();
  rep.lambda_min_pos = global.eigenvalues.minCoeff();
  rep.mu = rep.lambda_min_pos;
  double top_local = 0.0;
  for (const auto& h : q.local_hessians) top_local = std::max(top_local, max_eigenvalue(h));
  rep.L = top_local;

  double loose = 0.0;
  for (std::size_t i = 0; i < obj.dataset().size(); ++i)
    loose = std::max(loose, obj.dataset().row(i).squared_norm());
  rep.l_loose = loose;
  rep.l = *std::max_element(q.l_per_device.begin(), q.l_per_device.end());

  rep.kappa = snap_condition(rep.L / *rep.mu, "kappa", rep.warnings);
  rep.kappa1 = snap_condition(*rep.l / *rep.mu, "kappa1", rep.warnings);
  rep.kappa_tilde = snap_condition(generalized_max(q.statistical, global), "kappa_tilde",
                                   rep.warnings);
  return rep;
}

OrderingResiduals ordering_residuals(const Objective& obj, const SpectralReport& report) {
  if (!report.l || !report.kappa_tilde)
    fail(ErrorCode::kInvalidInput, "ordering residuals need a least-squares report");
  const QuadraticSpectra q = quadratic_spectra(obj);
  OrderingResiduals res;
  for (std::size_t k = 0; k < obj.devices(); ++k) {
    const RangeWhitener local = whitener(q.local_hessians[k]);
    res.per_device_l.push_back(
        min_on_range(*report.l * q.local_hessians[k] - q.local_fourth[k], local));
  }
  const RangeWhitener global = whitener(q.hessian);
  res.kappa_tilde = min_on_range(*report.kappa_tilde * q.hessian - q.statistical, global);
  return res;
}

// --- measured bounds -----------------------------------------------------------

GradientBounds measure_bounds(const Objective& obj, std::size_t sample_count,
                              std::span<const Vector> probes, std::uint64_t seed,
                              std::size_t batch_size) {
  if (sample_count == 0) fail(ErrorCode::kInvalidInput, "sample_count must be positive");
  if (batch_size == 0) fail(ErrorCode::kInvalidInput, "batch_size must be positive");
  GradientBounds out;
  std::vector<double> device_var(obj.devices(), 0.0);
  std::vector<std::size_t> batch;
  Vector g;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    for (std::size_t k = 0; k < obj.devices(); ++k) {
      const auto& shard = obj.partition().shards[k];
      const Vector exact = obj.grad_full(k, probes[p]);
      double norm_sum = 0.0, var_sum = 0.0;
      for (std::size_t s = 0; s < sample_count; ++s) {
        if (batch_size >= shard.size()) {
          batch.assign(shard.begin(), shard.end());
        } else {
          Stream draws(derive_seed(seed, p), StreamTag::kProbe, static_cast<std::uint32_t>(k), s);
          batch.resize(batch_size);
          for (auto& b : batch) b = shard[draws.index(shard.size())];
        }
        obj.grad_stochastic_into(k, probes[p], batch, g);
        norm_sum += g.squaredNorm();
        var_sum += (g - exact).squaredNorm();
      }
      const double m = static_cast<double>(sample_count);
      out.G_hat_sq = std::max(out.G_hat_sq, norm_sum / m);
      device_var[k] = std::max(device_var[k], var_sum / m);
    }
  }
  for (std::size_t k = 0; k < obj.devices(); ++k)
    out.sigma_hat_sq += obj.weights()[k] * device_var[k];
  return out;
}

std::string SpectralReport::to_json() const {
  nlohmann::ordered_json j;
  auto opt = [&j](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
    else j[key] = nullptr;
  };
  j["L"] = L;
  opt("mu", mu);
  opt("l", l);
  opt("l_loose", l_loose);
  opt("lambda_min_pos", lambda_min_pos);
  j["lambda_max"] = lambda_max;
  opt("kappa", kappa);
  opt("kappa1", kappa1);
  opt("kappa_tilde", kappa_tilde);
  j["nu_max"] = nu_max;
  j["nu_min"] = nu_min;
  opt("G_hat_sq", G_hat_sq);
  opt("sigma_hat_sq", sigma_hat_sq);
  return j.dump(2);
}

}  // namespace fedsim
