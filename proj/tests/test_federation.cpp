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

#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "fedsim/error.hpp"
#include "fedsim/federation.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

std::shared_ptr<const Dataset> regression_data(std::size_t n, std::size_t d, std::uint64_t seed) {
  Stream s(seed, StreamTag::kProbe, 7);
  std::vector<std::size_t> rp{0};
  std::vector<std::uint32_t> idx;
  std::vector<double> val, lab;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      idx.push_back(static_cast<std::uint32_t>(j));
      val.push_back(s.normal());
    }
    rp.push_back(idx.size());
    lab.push_back(s.normal());
  }
  return std::make_shared<const Dataset>(
      Dataset(std::move(rp), std::move(idx), std::move(val), std::move(lab), d));
}

std::shared_ptr<const Objective> objective(std::shared_ptr<const Dataset> data, std::size_t devices,
                                           ObjectiveKind kind = ObjectiveKind::least_squares()) {
  auto part = std::make_shared<const DevicePartition>(partition_even(*data, devices));
  return std::make_shared<const Objective>(data, part, kind);
}

FederationConfig config(std::size_t devices, long E, long T, UpdateRule rule, Schedule schedule) {
  FederationConfig c;
  c.devices = devices;
  c.participants = devices;
  c.local_steps = E;
  c.total_steps = T;
  c.rule = rule;
  c.schedule = std::move(schedule);
  c.batch_size = 2;
  c.master_seed = 11;
  return c;
}

}  // namespace

TEST_CASE("local_step_sgd") {
  DeviceState s{vec({1.0, -2.0}), {}, {}, {}};
  local_step_sgd(s, Vector::Zero(2), 0.3);
  CHECK(s.w == vec({1.0, -2.0}));
  DeviceState z{Vector::Zero(2), {}, {}, {}};
  local_step_sgd(z, vec({1.0, 0.0}), 1.0);
  CHECK(z.w == vec({-1.0, 0.0}));
}

TEST_CASE("local_step_nesterov") {
  DeviceState s{Vector::Zero(2), Vector::Zero(2), {}, {}};
  local_step_nesterov(s, vec({1.0, 0.0}), 0.1, 0.5);
  CHECK(s.v_prev[0] == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(s.w[0] == doctest::Approx(-0.15).epsilon(1e-15));
  CHECK(s.w[1] == 0.0);

  DeviceState still{vec({0.5, 2.0}), vec({0.5, 2.0}), {}, {}};
  local_step_nesterov(still, Vector::Zero(2), 0.1, 0.7);
  CHECK(still.w == vec({0.5, 2.0}));
  CHECK(still.v_prev == vec({0.5, 2.0}));

  DeviceState a{vec({0.3, -0.2}), vec({1.0, 1.0}), {}, {}};
  DeviceState b{vec({0.3, -0.2}), {}, {}, {}};
  const Vector g = vec({0.7, 0.11});
  local_step_nesterov(a, g, 0.05, 0.0);
  local_step_sgd(b, g, 0.05);
  CHECK(a.w == b.w);
}

TEST_CASE("local_step_mass") {
  DeviceState s{Vector::Zero(1), {}, Vector::Zero(1), Vector::Zero(1)};
  local_step_mass(s, vec({1.0}), 0.1, 0.02, 0.5);
  CHECK(s.w[0] == doctest::Approx(-0.1).epsilon(1e-15));
  CHECK(s.u[0] == doctest::Approx(-0.13).epsilon(1e-15));
  CHECK(s.w_prev[0] == 0.0);

  DeviceState still{vec({0.4}), {}, vec({0.4}), vec({0.4})};
  local_step_mass(still, Vector::Zero(1), 0.1, 0.02, 0.5);
  CHECK(still.w[0] == 0.4);
  CHECK(still.u[0] == 0.4);
}

TEST_CASE("sample_devices: edge cases") {
  const std::vector<double> uniform(5, 0.2);
  for (std::uint64_t r = 0; r < 20; ++r) {
    const auto all = sample_devices(Sampling::kWithoutReplacement, 5, uniform, 3, r);
    CHECK(all == std::vector<std::size_t>{0, 1, 2, 3, 4});
  }
  const std::vector<double> point{1.0, 0.0, 0.0, 0.0};
  for (std::uint64_t r = 0; r < 20; ++r)
    CHECK(sample_devices(Sampling::kWithReplacement, 3, point, 3, r) ==
          std::vector<std::size_t>{0, 0, 0});
  CHECK(code_of([&] { sample_devices(Sampling::kWithoutReplacement, 6, uniform, 0, 0); }) ==
        ErrorCode::kInvalidInput);
  CHECK(code_of([&] { sample_devices(Sampling::kFull, 2, uniform, 0, 0); }) ==
        ErrorCode::kInvalidInput);
  const auto a = sample_devices(Sampling::kWithoutReplacement, 2, uniform, 3, 9);
  CHECK(a == sample_devices(Sampling::kWithoutReplacement, 2, uniform, 3, 9));
}

TEST_CASE("sample_devices: marginal inclusion frequencies") {
  const std::vector<double> p{0.4, 0.3, 0.2, 0.1};
  const int draws = 100000;
  const std::size_t K = 2;
  std::vector<int> with(4, 0), without(4, 0);
  for (int r = 0; r < draws; ++r) {
    auto s1 = sample_devices(Sampling::kWithReplacement, K, p, 5, static_cast<std::uint64_t>(r));
    s1.erase(std::unique(s1.begin(), s1.end()), s1.end());
    for (auto k : s1) ++with[k];
    for (auto k : sample_devices(Sampling::kWithoutReplacement, K, p, 5, static_cast<std::uint64_t>(r)))
      ++without[k];
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const double q1 = 1.0 - std::pow(1.0 - p[k], double(K));
    const double q2 = double(K) / 4.0;
    const double se1 = std::sqrt(q1 * (1 - q1) / draws);
    const double se2 = std::sqrt(q2 * (1 - q2) / draws);
    CHECK(std::abs(with[k] / double(draws) - q1) <= 4 * se1);
    CHECK(std::abs(without[k] / double(draws) - q2) <= 4 * se2);
  }
}

TEST_CASE("aggregate: deterministic cases") {
  const std::vector<double> p{0.25, 0.25, 0.25, 0.25};
  const std::vector<Vector> same(4, vec({1.5, -2.0}));
  const std::vector<std::size_t> all{0, 1, 2, 3};
  CHECK(aggregate(Sampling::kFull, all, same, p) == vec({1.5, -2.0}));

  const std::vector<double> q{0.1, 0.2, 0.3, 0.4};
  const std::vector<Vector> v{vec({1.0}), vec({2.0}), vec({-3.0}), vec({0.5})};
  CHECK(aggregate(Sampling::kWithoutReplacement, all, v, q) == aggregate(Sampling::kFull, all, v, q));
  const std::vector<std::size_t> multi{1, 1, 3};
  CHECK(aggregate(Sampling::kWithReplacement, multi, v, q)[0] ==
        doctest::Approx((2.0 + 2.0 + 0.5) / 3.0));
  const std::vector<std::size_t> none;
  CHECK(code_of([&] { aggregate(Sampling::kFull, none, v, q); }) == ErrorCode::kInvalidInput);
}

TEST_CASE("aggregate: unbiased under both partial schemes") {
  const std::vector<double> p{0.05, 0.15, 0.3, 0.2, 0.1, 0.2};
  std::vector<Vector> v;
  Stream s(2, StreamTag::kProbe);
  for (int k = 0; k < 6; ++k) v.push_back(vec({s.normal(), 3.0 * s.normal(), s.normal() - 1.0}));
  const std::vector<std::size_t> all{0, 1, 2, 3, 4, 5};
  const Vector vbar = aggregate(Sampling::kFull, all, v, p);
  for (Sampling scheme : {Sampling::kWithReplacement, Sampling::kWithoutReplacement}) {
    const int reps = 100000;
    Vector sum = Vector::Zero(3), sq = Vector::Zero(3);
    for (int r = 0; r < reps; ++r) {
      const auto S = sample_devices(scheme, 3, p, 17, static_cast<std::uint64_t>(r));
      const Vector a = aggregate(scheme, S, v, p);
      sum += a;
      sq += a.cwiseProduct(a);
    }
    const Vector mean = sum / reps;
    const Vector sd = (sq / reps - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index i = 0; i < 3; ++i)
      CHECK(std::abs(mean[i] - vbar[i]) <= 4.0 * sd[i] / std::sqrt(double(reps)));
  }
}

TEST_CASE("drift") {
  const std::vector<double> p{0.5, 0.5};
  const std::vector<Vector> same(2, vec({3.0, 1.0}));
  CHECK(drift(same, p) == 0.0);
  const std::vector<Vector> apart{vec({1.0}), vec({-1.0})};
  CHECK(drift(apart, p) == 1.0);
}

TEST_CASE("config validation") {
  FederationConfig c;
  c.devices = 4;
  c.participants = 2;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kConfig);
  c.sampling = Sampling::kWithoutReplacement;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kOk);
  c.participants = 5;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kConfig);
  c.participants = 2;
  c.local_steps = 0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kConfig);
  CHECK(parse_update_rule("mass") == UpdateRule::kMass);
  CHECK(parse_sampling("with_replacement") == Sampling::kWithReplacement);
  CHECK(to_string(Sampling::kWithoutReplacement) == "without_replacement");
  CHECK(code_of([] { parse_update_rule("adam"); }) == ErrorCode::kConfig);

  const auto obj = objective(regression_data(20, 3, 1), 2);
  auto wrong = config(3, 1, 5, UpdateRule::kSgd, Schedule::fixed(0.01));
  CHECK(code_of([&] { run(wrong, *obj); }) == ErrorCode::kConfig);
}

TEST_CASE("single device FedAvg equals a standalone minibatch SGD oracle bit-exactly") {
  const auto data = regression_data(50, 4, 3);
  const auto obj = objective(data, 1);
  auto cfg = config(1, 1, 1000, UpdateRule::kSgd, Schedule(ExperimentDecaySchedule{0.05, 50, 0.01, 0}));
  cfg.store_iterates = true;
  const Trajectory traj = run(cfg, *obj);

  // Oracle: same draw addresses, same per-sample arithmetic, no federation code.
  Vector w = Vector::Zero(4);
  REQUIRE(traj.iterates.size() == 1000);
  bool identical = true;
  for (long t = 0; t < 1000; ++t) {
    const double alpha = std::min(0.05, 50 * 0.01 / (1.0 + double(t)));
    Vector g = Vector::Zero(4);
    for (std::uint32_t j = 0; j < 2; ++j) {
      const std::size_t i = uniform_index({11, StreamTag::kBatch, 0, std::uint64_t(t), j}, 50);
      const auto r = data->row(i);
      double margin = 0.0;
      for (std::size_t a = 0; a < r.indices.size(); ++a) margin += r.values[a] * w[r.indices[a]];
      const double coef = 0.5 * (margin - data->label(i));
      for (std::size_t a = 0; a < r.indices.size(); ++a) g[r.indices[a]] += coef * r.values[a];
    }
    w -= alpha * g;
    identical &= (traj.iterates[static_cast<std::size_t>(t)].second.array() == w.array()).all();
  }
  CHECK(identical);
  CHECK((traj.final_average.array() == w.array()).all());
}

TEST_CASE("Nesterov with beta = 0 reproduces SGD bit-exactly") {
  const auto obj = objective(regression_data(60, 3, 4), 3);
  auto sgd = config(3, 4, 300, UpdateRule::kSgd, Schedule::fixed(0.02));
  auto nest = config(3, 4, 300, UpdateRule::kNesterov, Schedule::fixed(0.02, 0.0));
  sgd.store_iterates = nest.store_iterates = true;
  const auto a = run(sgd, *obj);
  const auto b = run(nest, *obj);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) CHECK(a.points[i].loss == b.points[i].loss);
  CHECK((a.final_average.array() == b.final_average.array()).all());
}

TEST_CASE("MaSS with eta2 = 0 under the three-sequence bijection tracks Nesterov") {
  const double alpha = 0.03, beta = 0.4;
  // Nesterov specialization: delta = eta / a, a = (1 - beta) / (1 + beta).
  ThreeSequence seq;
  seq.alpha = (1.0 - beta) / (1.0 + beta);
  seq.eta = alpha;
  seq.delta = seq.eta / seq.alpha;
  const MassParams m = three_sequence_to_mass(seq);
  CHECK(std::abs(m.eta2) <= 1e-17);

  struct Case {
    std::size_t devices;
    long E;
  };
  for (const Case c : {Case{1, 5}, Case{4, 1}}) {
    const auto obj = objective(regression_data(40, 3, 5), c.devices);
    std::vector<Vector> nest_w, mass_u;
    const auto nest_cfg = config(c.devices, c.E, 1000, UpdateRule::kNesterov, Schedule::fixed(alpha, beta));
    const auto mass_cfg =
        config(c.devices, c.E, 1000, UpdateRule::kMass, Schedule::fixed_mass(m.eta1, m.eta2, m.gamma));
    run(nest_cfg, *obj, [&](long, std::span<const DeviceState> s) {
      for (const auto& d : s) nest_w.push_back(d.w);
    });
    run(mass_cfg, *obj, [&](long, std::span<const DeviceState> s) {
      for (const auto& d : s) mass_u.push_back(d.u);
    });
    REQUIRE(nest_w.size() == mass_u.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < nest_w.size(); ++i)
      worst = std::max(worst, (nest_w[i] - mass_u[i]).cwiseAbs().maxCoeff());
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("broadcast invariant and determinism for every rule and scheme") {
  const auto obj = objective(regression_data(64, 3, 6), 8);
  for (UpdateRule rule : {UpdateRule::kSgd, UpdateRule::kNesterov, UpdateRule::kMass}) {
    for (Sampling scheme : {Sampling::kFull, Sampling::kWithReplacement, Sampling::kWithoutReplacement}) {
      auto cfg = config(8, 3, 60, rule, Schedule::fixed_mass(0.02, 0.005, 0.3));
      cfg.sampling = scheme;
      cfg.participants = scheme == Sampling::kFull ? 8 : 3;
      long rounds = 0;
      bool equal = true;
      const auto a = run(cfg, *obj, [&](long t, std::span<const DeviceState> s) {
        CHECK(t % 3 == 0);
        ++rounds;
        for (const auto& d : s) equal &= (d.w.array() == s[0].w.array()).all();
      });
      CHECK(rounds == 20);
      CHECK(equal);
      const auto b = run(cfg, *obj);
      REQUIRE(a.points.size() == b.points.size());
      for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i].loss == b.points[i].loss);
        CHECK(a.points[i].drift == b.points[i].drift);
      }
    }
  }
}

TEST_CASE("seed changes the trajectory") {
  const auto obj = objective(regression_data(40, 3, 7), 2);
  auto cfg = config(2, 2, 50, UpdateRule::kSgd, Schedule::fixed(0.01));
  const auto a = run(cfg, *obj);
  cfg.master_seed = 12;
  const auto b = run(cfg, *obj);
  CHECK(a.points.back().loss != b.points.back().loss);
}

TEST_CASE("recording cadence and final partial window") {
  const auto obj = objective(regression_data(30, 2, 8), 3);
  auto cfg = config(3, 4, 10, UpdateRule::kSgd, Schedule::fixed(0.01));
  cfg.eval_stride = 3;
  const auto traj = run(cfg, *obj);
  std::vector<long> ts;
  for (const auto& p : traj.points) ts.push_back(p.t);
  CHECK(ts == std::vector<long>{0, 3, 4, 6, 8, 9, 10});
  CHECK(traj.points.back().comm_round == 2);
  CHECK(traj.points[2].comm_round == 1);
  // No aggregation at T = 10: devices still disagree.
  CHECK(traj.points.back().drift > 0.0);
  for (std::size_t i = 1; i < traj.points.size(); ++i) CHECK(traj.points[i].t > traj.points[i - 1].t);
}

TEST_CASE("drift column at a communication step is the pre-broadcast spread") {
  const auto obj = objective(regression_data(30, 2, 9), 3);
  auto cfg = config(3, 2, 4, UpdateRule::kSgd, Schedule::fixed(0.05));
  cfg.eval_stride = 1;
  const auto traj = run(cfg, *obj);
  CHECK(traj.points[1].drift > 0.0);  // t = 1, local only
  CHECK(traj.points[2].drift > 0.0);  // t = 2, models being averaged
  CHECK(traj.points[0].drift == 0.0);
}

TEST_CASE("counterexample: averaged iterate stays exactly zero") {
  for (std::size_t devices : {2u, 4u, 8u}) {
    auto [ds, part] = gen_counterexample(devices, 2, 1.5, 2);
    auto obj = std::make_shared<const Objective>(std::make_shared<const Dataset>(std::move(ds)),
                                                 std::make_shared<const DevicePartition>(std::move(part)),
                                                 ObjectiveKind::least_squares());
    auto cfg = config(devices, 5, 200, UpdateRule::kSgd, Schedule::fixed(0.01));
    cfg.full_batch = true;
    cfg.store_iterates = true;
    const auto traj = run(cfg, *obj);
    REQUIRE(traj.iterates.size() == 40);
    for (const auto& [t, w] : traj.iterates) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& p : traj.points)
      if (p.t % 5 == 0) CHECK(p.loss == doctest::Approx(2.25));
  }
}

TEST_CASE("divergence raises with the step and step size") {
  const auto obj = objective(regression_data(30, 3, 10), 1);
  auto cfg = config(1, 1, 500, UpdateRule::kSgd, Schedule::fixed(50.0));
  try {
    run(cfg, *obj);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.code() == ErrorCode::kDivergence);
    CHECK(e.step() > 0);
    CHECK(e.step_size() == 50.0);
  }
}

TEST_CASE("stop_loss ends the run early") {
  const auto obj = objective(regression_data(30, 3, 11), 1);
  auto cfg = config(1, 1, 5000, UpdateRule::kSgd, Schedule::fixed(0.01));
  const double start = obj->value(Vector::Zero(3));
  const double end = run(cfg, *obj).points.back().loss;
  REQUIRE(end < start);
  const double target = 0.5 * (start + end);
  cfg.stop_loss = target;
  const auto traj = run(cfg, *obj);
  CHECK(traj.points.back().loss <= target);
  CHECK(traj.points[traj.points.size() - 2].loss > target);
  CHECK(traj.points.back().t < 5000);
}

TEST_CASE("trajectory CSV round trip") {
  const auto obj = objective(regression_data(20, 2, 12), 2);
  const auto traj = run(config(2, 2, 20, UpdateRule::kNesterov, Schedule::fixed(0.01, 0.1)), *obj);
  std::stringstream io;
  traj.write_csv(io);
  CHECK(io.str().rfind("t,loss,drift,grad_norm,comm_round\n", 0) == 0);
  const auto back = Trajectory::read_csv(io);
  REQUIRE(back.points.size() == traj.points.size());
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    CHECK(back.points[i].t == traj.points[i].t);
    CHECK(back.points[i].loss == traj.points[i].loss);
    CHECK(back.points[i].drift == traj.points[i].drift);
    CHECK(back.points[i].grad_norm == traj.points[i].grad_norm);
    CHECK(back.points[i].comm_round == traj.points[i].comm_round);
  }
  std::stringstream bad("t,loss\n");
  CHECK(code_of([&] { Trajectory::read_csv(bad); }) == ErrorCode::kParse);
}

TEST_CASE("draw_batch stays within the shard and ignores other devices") {
  const std::vector<std::size_t> shard{10, 11, 12, 13};
  std::vector<std::size_t> a, b;
  draw_batch(shard, 16, 3, 2, 7, a);
  for (auto i : a) CHECK((i >= 10 && i <= 13));
  draw_batch(shard, 16, 3, 2, 7, b);
  CHECK(a == b);
  draw_batch(shard, 16, 3, 1, 7, b);
  CHECK(a != b);
}
