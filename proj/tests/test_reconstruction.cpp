#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "secbf/reconstruction.hpp"
#include "vehicle.hpp"

using namespace secbf;

namespace {

NumericConfig<double> exact_cfg() {
  NumericConfig<double> cfg;
  cfg.residual_tol = 1e-12;
  return cfg;
}

// Noiseless record of t steps; sensors in `attacked` get arbitrary offsets.
DataWindow<double> record(const LtiSystem<double>& sys, VectorXd x, const MatrixXd& U,
                          const std::vector<int>& attacked, std::mt19937_64& rng) {
  std::normal_distribution<double> N(0, 1);
  DataWindow<double> w;
  w.inputs = U;
  w.outputs.resize(sys.p(), U.cols() + 1);
  for (Eigen::Index k = 0; k <= U.cols(); ++k) {
    w.outputs.col(k) = sys.C() * x;
    for (int i : attacked) w.outputs(i - 1, k) += 1 + N(rng);
    if (k < U.cols()) x = sys.A() * x + sys.B() * U.col(k);
  }
  return w;
}

// Vehicle sensors 1,3,5 report a phantom started at x_fake.
DataWindow<double> vehicle_record(const VectorXd& x_true, const VectorXd& x_fake,
                                  const MatrixXd& U) {
  const auto sys = test::vehicle();
  DataWindow<double> w;
  w.inputs = U;
  w.outputs.resize(8, U.cols() + 1);
  VectorXd x = x_true, f = x_fake;
  for (Eigen::Index k = 0; k <= U.cols(); ++k) {
    w.outputs.col(k) = sys.C() * x;
    for (int i : {0, 2, 4}) w.outputs(i, k) = (sys.C() * f)(i);
    if (k < U.cols()) {
      x = sys.A() * x + sys.B() * U.col(k);
      f = sys.A() * f + sys.B() * U.col(k);
    }
  }
  return w;
}

MatrixXd sinusoid_inputs(int t) {
  MatrixXd U(2, t);
  for (int k = 0; k < t; ++k) U.col(k) << std::sin(0.01 * k), std::cos(0.01 * k);
  return U;
}

}  // namespace

TEST_CASE("build_regression: single sample is C") {
  const auto sys = test::vehicle();
  DataWindow<double> w;
  w.inputs.resize(2, 0);
  w.outputs = VectorXd::LinSpaced(8, 1, 8);
  const auto r = build_regression(w, sys, SensorSubset({3}, 8));
  CHECK(r.O == sys.C().row(2));
  CHECK(r.Y(0) == 3.0);
}

TEST_CASE("build_regression: scalar example") {
  const LtiSystem<double> sys(MatrixXd::Constant(1, 1, 2), MatrixXd::Ones(1, 1),
                              MatrixXd::Ones(1, 1));
  DataWindow<double> w;
  w.inputs = MatrixXd::Constant(1, 1, 3);
  w.outputs.resize(1, 2);
  w.outputs << 1, 5;
  const auto r = build_regression(w, sys, SensorSubset({1}, 1));
  CHECK(r.O(0, 0) == 1);
  CHECK(r.O(1, 0) == 2);
  CHECK(r.Y(0) == 1);
  CHECK(r.Y(1) == 2);
  const auto sol = classify_solution(r.O, r.Y, NumericConfig<double>{});
  CHECK(sol.kind == SolutionKind::Point);
  CHECK(sol.base(0) == doctest::Approx(1).epsilon(1e-14));
}

TEST_CASE("build_regression matches the term-by-term oracle") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> N(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3, m = 2, p = 3, t = 1 + trial % 4;
    const LtiSystem<double> sys(MatrixXd::NullaryExpr(n, n, [&] { return N(rng); }),
                                MatrixXd::NullaryExpr(n, m, [&] { return N(rng); }),
                                MatrixXd::NullaryExpr(p, n, [&] { return N(rng); }));
    DataWindow<double> w;
    w.inputs = MatrixXd::NullaryExpr(m, t, [&] { return N(rng); });
    w.outputs = MatrixXd::NullaryExpr(p, t + 1, [&] { return N(rng); });
    const auto reg = build_regression(w, sys, SensorSubset({1, 3}, p));
    MatrixXd O1, O3;
    VectorXd Y1, Y3;
    oracle::sensor_stack(sys.A(), sys.B(), sys.C(), w.inputs, w.outputs, 0, O1, Y1);
    oracle::sensor_stack(sys.A(), sys.B(), sys.C(), w.inputs, w.outputs, 2, O3, Y3);
    CHECK((reg.O.topRows(t + 1) - O1).norm() < 1e-10);
    CHECK((reg.O.bottomRows(t + 1) - O3).norm() < 1e-10);
    CHECK((reg.Y.head(t + 1) - Y1).norm() < 1e-10);
    CHECK((reg.Y.tail(t + 1) - Y3).norm() < 1e-10);
  }
}

TEST_CASE("build_regression: true state has zero residual without attack") {
  const auto sys = test::vehicle();
  std::mt19937_64 rng(1);
  const VectorXd x0 = (VectorXd(4) << 1, -0.5, 2, 0.3).finished();
  const auto w = record(sys, x0, sinusoid_inputs(6), {}, rng);
  for (const auto& g : combinations(8, 5)) {
    const auto r = build_regression(w, sys, g);
    CHECK((r.O * x0 - r.Y).norm() < 1e-12);
  }
}

TEST_CASE("build_regression rejects inconsistent windows") {
  const auto sys = test::vehicle();
  DataWindow<double> w;
  w.inputs.resize(2, 2);
  w.outputs.resize(8, 2);
  CHECK_THROWS_AS(build_regression(w, sys, SensorSubset({1}, 8)), InvalidInput);
  w.outputs.resize(8, 0);
  w.inputs.resize(2, 0);
  CHECK_THROWS_AS(build_regression(w, sys, SensorSubset({1}, 8)), InvalidInput);
}

TEST_CASE("classify_solution examples") {
  const NumericConfig<double> cfg;
  {
    const auto s = classify_solution<double>(MatrixXd::Identity(2, 2), Eigen::Vector2d(3, 4), cfg);
    CHECK(s.kind == SolutionKind::Point);
    CHECK((s.base - Eigen::Vector2d(3, 4)).norm() < 1e-14);
    CHECK(s.kernel.dim() == 0);
  }
  {
    MatrixXd O(1, 2);
    O << 1, 0;
    const auto s = classify_solution<double>(O, VectorXd::Constant(1, 3), cfg);
    CHECK(s.kind == SolutionKind::Affine);
    CHECK((s.base - Eigen::Vector2d(3, 0)).norm() < 1e-14);
    REQUIRE(s.kernel.dim() == 1);
    CHECK(std::abs(std::abs(s.kernel.vectors(1, 0)) - 1) < 1e-14);
  }
  {
    const auto s = classify_solution<double>(MatrixXd::Ones(2, 1), Eigen::Vector2d(0, 1), cfg);
    CHECK(s.kind == SolutionKind::Empty);
  }
}

TEST_CASE("plausible_initial_states: s = 0 recovers the state") {
  const auto sys = test::vehicle();
  std::mt19937_64 rng(2);
  const VectorXd x0 = (VectorXd(4) << 0.3, 1, -1, 2).finished();
  const auto ps = plausible_initial_states(record(sys, x0, sinusoid_inputs(3), {}, rng),
                                           sys, 0, exact_cfg());
  REQUIRE(ps.entries.size() == 1);
  CHECK(ps.entries[0].solution.kind == SolutionKind::Point);
  CHECK((ps.entries[0].solution.base - x0).norm() < 1e-8);
  CHECK_THROWS_AS(plausible_initial_states(record(sys, x0, sinusoid_inputs(3), {}, rng),
                                           sys, 8, exact_cfg()),
                  InvalidInput);
}

TEST_CASE("plausible_initial_states: vehicle finds four states") {
  const auto sys = test::vehicle();
  const VectorXd xt = VectorXd::Ones(4);
  const VectorXd xf = (VectorXd(4) << 2, 2, 2, 1).finished();
  const auto w = vehicle_record(xt, xf, sinusoid_inputs(3));
  const auto ps = plausible_initial_states(w, sys, 3, exact_cfg());
  CHECK(ps.entries.size() == 56);
  CHECK(ps.count(SolutionKind::Affine) == 0);
  const auto pts = distinct_points(ps, 1e-6);
  const std::vector<VectorXd> expect{
      (VectorXd(4) << 1, 1, 1, 1).finished(), (VectorXd(4) << 1, 1, 2, 1).finished(),
      (VectorXd(4) << 2, 2, 1, 1).finished(), (VectorXd(4) << 2, 2, 2, 1).finished()};
  CHECK(pts.size() == 4);
  CHECK(oracle::same_point_set(pts, expect, 1e-6));
}

TEST_CASE("plausible_initial_states: identical scalar sensors give affine entries") {
  MatrixXd C(3, 2);
  C << 1, 0, 1, 0, 1, 0;
  const LtiSystem<double> sys(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2), C);
  std::mt19937_64 rng(4);
  const auto ps = plausible_initial_states(
      record(sys, Eigen::Vector2d(1, 2), MatrixXd::Zero(2, 2), {}, rng), sys, 2, exact_cfg());
  CHECK(ps.entries.size() == 3);
  CHECK(ps.count(SolutionKind::Affine) == 3);
  CHECK_FALSE(is_r_sparse_observable(sys, 2, 1e-8));
}

TEST_CASE("propagate_set examples") {
  const NumericConfig<double> cfg;
  {
    const LtiSystem<double> sys(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2),
                                MatrixXd::Identity(2, 2));
    PlausibleSet<double> ps;
    ps.entries.push_back({SensorSubset({1, 2}, 2),
                          {SolutionKind::Point, Eigen::Vector2d(1, 2), {MatrixXd(2, 0)}, 0},
                          {MatrixXd(2, 0)}});
    const auto same = propagate_set(ps, sys, MatrixXd(2, 0), cfg);
    CHECK(same.entries[0].solution.base == ps.entries[0].solution.base);
    CHECK(same.time_index == 0);
    const auto moved = propagate_set(ps, sys, MatrixXd(Eigen::Vector2d(0.5, -1)), cfg);
    CHECK((moved.entries[0].solution.base - Eigen::Vector2d(1.5, 1)).norm() < 1e-15);
    CHECK(moved.time_index == 1);
    CHECK(moved.elapsed() == 1);
  }
  {
    const LtiSystem<double> sys(MatrixXd::Constant(1, 1, 2), MatrixXd::Zero(1, 1),
                                MatrixXd::Ones(1, 1));
    PlausibleSet<double> ps;
    KernelBasis<double> k{MatrixXd::Ones(1, 1)};
    ps.entries.push_back({SensorSubset({1}, 1),
                          {SolutionKind::Affine, VectorXd::Ones(1), k, 0}, k});
    const auto out = propagate_set(ps, sys, MatrixXd(MatrixXd::Zero(1, 1)), cfg);
    CHECK(out.entries[0].solution.base(0) == 2);
    CHECK(std::abs(std::abs(out.entries[0].solution.kernel.vectors(0, 0)) - 1) < 1e-15);
    CHECK(out.entries[0].origin_kernel.vectors(0, 0) == 1);
  }
}

TEST_CASE("propagation commutes with concatenation") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> N(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    const auto sys = test::vehicle(0.05);
    MatrixXd O(1, 4);
    O << 0, 1, 0, 0;
    PlausibleSet<double> ps;
    const auto sol = classify_solution<double>(O, VectorXd::Constant(1, N(rng)), {});
    ps.entries.push_back({SensorSubset({3}, 8), sol, sol.kernel});
    const MatrixXd U = MatrixXd::NullaryExpr(2, 7, [&] { return N(rng); });
    const auto once = propagate_set(ps, sys, U, {});
    const auto twice = propagate_set(propagate_set(ps, sys, MatrixXd(U.leftCols(3)), {}),
                                     sys, MatrixXd(U.rightCols(4)), {});
    const auto& a = once.entries[0].solution;
    const auto& b = twice.entries[0].solution;
    CHECK((a.base - b.base).norm() < 1e-10);
    CHECK((a.kernel.vectors * a.kernel.vectors.transpose() -
           b.kernel.vectors * b.kernel.vectors.transpose()).norm() < 1e-10);
    CHECK(once.time_index == twice.time_index);
  }
}

TEST_CASE("union matches the per-sensor intersection oracle") {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> N(0, 1);
  std::uniform_int_distribution<int> pick_n(1, 3), pick_p(2, 4), pick_t(0, 4);
  for (int trial = 0; trial < 150; ++trial) {
    const int n = pick_n(rng), p = pick_p(rng), t = pick_t(rng), s = trial % 2;
    const LtiSystem<double> sys(MatrixXd::NullaryExpr(n, n, [&] { return N(rng); }),
                                MatrixXd::NullaryExpr(n, 1, [&] { return N(rng); }),
                                MatrixXd::NullaryExpr(p, n, [&] { return N(rng); }));
    const VectorXd x0 = VectorXd::NullaryExpr(n, [&] { return N(rng); });
    std::vector<int> attacked;
    if (s) attacked.push_back(1 + trial % p);
    const auto w = record(sys, x0, MatrixXd::NullaryExpr(1, t, [&] { return N(rng); }),
                          attacked, rng);
    const auto ps = plausible_initial_states(w, sys, s, exact_cfg());
    const auto ref = oracle::plausible_sets(sys.A(), sys.B(), sys.C(), w.inputs,
                                            w.outputs, s, 1e-9);
    REQUIRE(ref.size() == ps.entries.size());
    std::vector<VectorXd> ref_pts;
    for (std::size_t k = 0; k < ref.size(); ++k) {
      const auto& sol = ps.entries[k].solution;
      CHECK(sol.empty() == !ref[k].has_value());
      if (!ref[k] || sol.empty()) continue;
      CHECK(sol.kernel.dim() == ref[k]->N.cols());
      if (ref[k]->N.cols() == 0) ref_pts.push_back(ref[k]->x0);
      // Same affine set: base difference lies in the kernel.
      CHECK(sol.kernel.distance(sol.base - ref[k]->x0) < 1e-6);
    }
    CHECK(oracle::same_point_set(distinct_points(ps, 1e-9), oracle::dedup(ref_pts, 1e-9), 1e-6));
    CHECK(contains_state(ps, x0, 1e-6));
  }
}

TEST_CASE("true state stays plausible after propagation") {
  const auto sys = test::vehicle();
  const VectorXd xt = VectorXd::Ones(4);
  const VectorXd xf = (VectorXd(4) << 2, 2, 2, 1).finished();
  const MatrixXd U = sinusoid_inputs(10);
  const auto ps0 = plausible_initial_states(vehicle_record(xt, xf, U), sys, 3, exact_cfg());
  VectorXd x = xt, f = xf;
  for (int k = 0; k < 10; ++k) {
    x = sys.A() * x + sys.B() * U.col(k);
    f = sys.A() * f + sys.B() * U.col(k);
  }
  const auto ps = propagate_set(ps0, sys, U, {});
  CHECK(ps.time_index == 10);
  CHECK(contains_state(ps, x, 1e-8));
  CHECK(contains_state(ps, f, 1e-8));
}

TEST_CASE("deduplicate merges near points and keeps order") {
  const std::vector<VectorXd> pts{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0),
                                  Eigen::Vector2d(0.001, 0), Eigen::Vector2d(1, 0.5)};
  const auto d = deduplicate(pts, 0.01);
  REQUIRE(d.size() == 3);
  CHECK(d[0] == pts[0]);
  CHECK(d[2] == pts[3]);
}

TEST_CASE("worst_case_envelope examples") {
  const auto sys = test::vehicle();
  const auto env = worst_case_envelope(sys, 1, {});
  CHECK(env.kernels.size() == 28);
  CHECK(env.s_sparse_observable);
  const auto nt = env.nontrivial();
  REQUIRE(nt.size() == 2);
  CHECK(nt[0]->lambda.indices() == std::vector<int>{1, 2, 3, 4, 7, 8});
  CHECK(nt[1]->lambda.indices() == std::vector<int>{3, 4, 5, 6, 7, 8});
  CHECK(nt[0]->kernel.distance(VectorXd::Unit(4, 2)) < 1e-9);
  CHECK(nt[1]->kernel.distance(VectorXd::Unit(4, 0)) < 1e-9);
  CHECK_THROWS_AS(worst_case_envelope(sys, 4, {}), InvalidInput);

  // Three identical full-rank sensors blocks: nothing is ambiguous.
  MatrixXd C(3, 1);
  C << 1, 2, 3;
  const LtiSystem<double> scalar(MatrixXd::Constant(1, 1, 0.5), MatrixXd::Ones(1, 1), C);
  const auto e = worst_case_envelope(scalar, 1, {});
  CHECK(e.kernels.size() == 3);
  CHECK(e.nontrivial().empty());

  // 2s-sparse observable: all kernels trivial.
  CHECK(worst_case_envelope(sys, 0, {}).nontrivial().empty());
}

TEST_CASE("envelope warns without s-sparse observability") {
  MatrixXd C(3, 2);
  C << 1, 0, 1, 0, 0, 1;
  const LtiSystem<double> sys(MatrixXd::Identity(2, 2), MatrixXd::Ones(2, 1), C);
  const auto env = worst_case_envelope(sys, 1, {});
  CHECK_FALSE(env.s_sparse_observable);
  CHECK(env.warning.has_value());
}

TEST_CASE("reconstructed points lie in the envelope around the true state") {
  const auto sys = test::vehicle();
  std::mt19937_64 rng(12);
  const auto env = worst_case_envelope(sys, 1, {});
  for (int attacked = 1; attacked <= 8; ++attacked) {
    const VectorXd x0 = (VectorXd(4) << 1, 0.5, -1, 2).finished();
    const auto ps = plausible_initial_states(
        record(sys, x0, sinusoid_inputs(3), {attacked}, rng), sys, 1, exact_cfg());
    CHECK(ps.count(SolutionKind::Affine) == 0);
    for (const auto& x : distinct_points(ps, 1e-9)) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& e : env.kernels) best = std::min(best, e.kernel.distance(x - x0));
      CHECK(best < 1e-6);
    }
  }
}
