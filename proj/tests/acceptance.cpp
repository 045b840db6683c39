// One line per acceptance criterion; exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <string>

#include "oracles.hpp"
#include "secbf/io.hpp"
#include "secbf/qp.hpp"
#include "secbf/reconstruction.hpp"
#include "secbf/scenario.hpp"
#include "vehicle.hpp"

using namespace secbf;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ScenarioConfig bundled() { return load_config(std::string(SECBF_DATA_DIR) + "/vehicle.json"); }

ScenarioConfig noiseless() {
  auto c = bundled();
  c.attack.noise_std = 0;
  c.numeric.residual_tol = 1e-10;
  return c;
}

bool is_reconstruction(FilterStatus s) {
  return s == FilterStatus::Pass || s == FilterStatus::Active;
}

struct RunTiming {
  SimTrace trace;
  double seconds = 0;
};

RunTiming timed(const ScenarioConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  RunTiming r{simulate(c)};
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// Images of the four initial points carried along the true trajectory.
struct PointMatch {
  std::size_t steps = 0, matched = 0, recalled = 0;
};

PointMatch match_four_points(const ScenarioConfig& c, const SimTrace& trace, double tol) {
  const std::vector<VectorXd> x0s = {
      (VectorXd(4) << 1, 1, 1, 1).finished(), (VectorXd(4) << 1, 1, 2, 1).finished(),
      (VectorXd(4) << 2, 2, 1, 1).finished(), (VectorXd(4) << 2, 2, 2, 1).finished()};
  PointMatch m;
  MatrixXd Ak = MatrixXd::Identity(4, 4);
  for (const auto& st : trace.steps) {
    if (is_reconstruction(st.status)) {
      std::vector<VectorXd> expect;
      for (const auto& x0 : x0s) expect.push_back(st.x_true + Ak * (x0 - c.x_true0));
      ++m.steps;
      if (oracle::same_point_set(st.plausible, expect, tol)) ++m.matched;
      bool all = true;
      for (const auto& e : expect)
        all = all && std::any_of(st.plausible.begin(), st.plausible.end(), [&](const VectorXd& x) {
                return (x - e).cwiseAbs().maxCoeff() <= tol;
              });
      m.recalled += all;
    }
    Ak = c.plant.A() * Ak;
  }
  return m;
}

double min_margin(const SimTrace& t, bool fake) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& st : t.steps) m = std::min(m, fake ? st.min_margin_fake() : st.min_margin_true());
  return m;
}

// Largest violation of h(x+) >= (1 - gamma) h(x) over steps the filter solved.
double decrease_violation(const ScenarioConfig& c, const SimTrace& t, std::size_t* checked) {
  double worst = 0;
  *checked = 0;
  for (std::size_t k = 0; k + 1 < t.steps.size(); ++k) {
    if (!is_reconstruction(t.steps[k].status)) continue;
    ++*checked;
    const VectorXd lhs = t.steps[k + 1].margin_true;
    const VectorXd rhs = (1 - c.cbf.gamma) * t.steps[k].margin_true;
    worst = std::max(worst, (rhs - lhs).maxCoeff());
  }
  return worst;
}

// Initial plausible sets of every window the run reconstructed from.
double worst_x4_error(const ScenarioConfig& c, const SimTrace& t) {
  double worst = 0;
  const auto w = c.window;
  for (std::size_t tau = w - 1; tau < t.steps.size(); ++tau) {
    DataWindow<double> win;
    win.start_time = tau + 1 - w;
    win.outputs.resize(8, static_cast<Eigen::Index>(w));
    win.inputs.resize(2, static_cast<Eigen::Index>(w - 1));
    for (std::size_t k = 0; k < w; ++k) {
      const auto& st = t.steps[win.start_time + k];
      win.outputs.col(static_cast<Eigen::Index>(k)) = st.y;
      if (k + 1 < w) win.inputs.col(static_cast<Eigen::Index>(k)) = st.u;
    }
    const auto ps = plausible_initial_states(win, c.plant, c.s, c.numeric);
    const double x4 = t.steps[win.start_time].x_true(3);
    for (const auto& e : ps.entries) {
      if (e.solution.empty()) continue;
      // An affine entry free along x4 leaves the coordinate unpinned.
      if (e.solution.kernel.dim() > 0 && e.solution.kernel.vectors.row(3).norm() > 1e-9)
        return std::numeric_limits<double>::infinity();
      worst = std::max(worst, std::abs(e.solution.base(3) - x4));
    }
  }
  return worst;
}

Eigen::Index lu_rank(const MatrixXd& M) {
  Eigen::FullPivLU<MatrixXd> lu(M);
  lu.setThreshold(1e-10);
  return lu.rank();
}

void criterion_1_2_3_9() {
  const auto noisy = timed(bundled());
  const auto clean = timed(noiseless());
  const auto cn = bundled();
  const auto cc = noiseless();

  {
    const auto mn = match_four_points(cn, noisy.trace, 5e-2);
    const auto mc = match_four_points(cc, clean.trace, 1e-6);
    const bool ran_all = clean.trace.steps.size() == 3000;
    const double secs = std::max(noisy.seconds, clean.seconds);
    const bool ok = mn.steps > 0 && mn.matched == mn.steps && mc.steps > 0 &&
                    mc.matched == mc.steps && ran_all && secs < 10;
    report(1, ok,
           fmt("noisy: %zu/%zu steps match the four points exactly, %zu/%zu contain them "
               "(5e-2); noiseless: %zu/%zu match (1e-6); runtime %.2f s",
               mn.matched, mn.steps, mn.recalled, mn.steps, mc.matched, mc.steps, secs));
  }
  {
    const double mt = min_margin(noisy.trace, false), mf = min_margin(noisy.trace, true);
    const bool full = noisy.trace.steps.size() == cn.horizon;
    const bool ok = full && mt >= -1e-6 && mf >= -1e-6;
    report(2, ok,
           fmt("noisy run: %zu/%zu steps (%s), min margin true %.3g fake %.3g; "
               "noiseless run: %zu steps, true %.3g fake %.3g",
               noisy.trace.steps.size(), cn.horizon, to_string(noisy.trace.termination), mt, mf,
               clean.trace.steps.size(), min_margin(clean.trace, false),
               min_margin(clean.trace, true)));
  }
  {
    auto pn = cn;
    auto pc = cc;
    const VectorXd xf = (VectorXd(4) << 2, 2, 2, 2).finished();
    pn.attack.strategy = FakeState{xf};
    pc.attack.strategy = FakeState{xf};
    const double en = worst_x4_error(pn, simulate(pn));
    const double ec = worst_x4_error(pc, simulate(pc));
    report(3, en <= 5e-2 && ec <= 1e-6,
           fmt("worst |x4 - x4_true| over initial points: noisy %.3g (5e-2), noiseless %.3g "
               "(1e-6)",
               en, ec));
  }
  {
    std::size_t kn = 0, kc = 0;
    const double vn = decrease_violation(cn, noisy.trace, &kn);
    const double vc = decrease_violation(cc, clean.trace, &kc);
    report(9, vn <= 1e-9 && vc <= 1e-9,
           fmt("worst violation: noisy %.3g over %zu steps, noiseless %.3g over %zu steps",
               vn, kn, vc, kc));
  }
}

void criterion_4() {
  const auto sys = test::vehicle();
  const bool one = is_r_sparse_observable(sys, 1, 1e-8);
  const bool two = is_r_sparse_observable(sys, 2, 1e-8);
  const auto r = lu_rank(observability_matrix(sys, SensorSubset({3, 4, 5, 6, 7, 8}, 8), 4));
  report(4, one && !two && r < 4,
         fmt("1-sparse %s, 2-sparse %s, independent rank of O{3..8} = %ld", one ? "yes" : "no",
             two ? "yes" : "no", static_cast<long>(r)));
}

void criterion_5() {
  const auto env = worst_case_envelope(test::vehicle(), 1, NumericConfig<double>{});
  const auto nt = env.nontrivial();
  // Distinct kernels by projector.
  std::vector<MatrixXd> projectors;
  for (const auto* e : nt) {
    const MatrixXd P = e->kernel.vectors * e->kernel.vectors.transpose();
    bool seen = false;
    for (const auto& Q : projectors) seen = seen || (P - Q).norm() < 1e-9;
    if (!seen) projectors.push_back(P);
  }
  bool e1 = false, e3 = false, dims = true;
  for (const auto* e : nt) dims = dims && e->kernel.dim() == 1;
  for (const auto& P : projectors) {
    e1 = e1 || (P - VectorXd::Unit(4, 0) * VectorXd::Unit(4, 0).transpose()).norm() < 1e-9;
    e3 = e3 || (P - VectorXd::Unit(4, 2) * VectorXd::Unit(4, 2).transpose()).norm() < 1e-9;
  }
  report(5, projectors.size() == 2 && dims && e1 && e3,
         fmt("%zu nontrivial kernels, %zu distinct, all 1-dimensional: %s, along e1: %s, "
             "along e3: %s",
             nt.size(), projectors.size(), dims ? "yes" : "no", e1 ? "yes" : "no",
             e3 ? "yes" : "no"));
}

void criterion_6() {
  const auto sys = test::vehicle();
  const auto vel = check_offline_conditions(sys, 1, test::velocity_cbf(), {});
  const auto box = check_offline_conditions(sys, 1, test::box_cbf(), {});
  std::size_t vel_ok = 0, box_ok = 0;
  for (const auto& [l, ok] : vel.cond_i) vel_ok += ok;
  for (const auto& [l, ok] : box.cond_i) box_ok += ok;
  report(6, vel.cond_i.size() == 28 && vel.all_cond_i() && !box.all_cond_i(),
         fmt("velocity box: %zu/%zu combinations pass; position-velocity box: %zu/%zu", vel_ok,
             vel.cond_i.size(), box_ok, box.cond_i.size()));
}

void criterion_7() {
  std::mt19937_64 rng(707);
  std::normal_distribution<double> N(0, 1);
  std::uniform_int_distribution<int> pick_n(1, 3), pick_p(2, 4), pick_t(0, 4);
  NumericConfig<double> cfg;
  cfg.residual_tol = 1e-12;
  int agree = 0, member = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    const int n = pick_n(rng), p = pick_p(rng), t = pick_t(rng), s = trial % 2;
    const LtiSystem<double> sys(MatrixXd::NullaryExpr(n, n, [&] { return N(rng); }),
                                MatrixXd::NullaryExpr(n, 1, [&] { return N(rng); }),
                                MatrixXd::NullaryExpr(p, n, [&] { return N(rng); }));
    VectorXd x = VectorXd::NullaryExpr(n, [&] { return N(rng); });
    const VectorXd x0 = x;
    DataWindow<double> w;
    w.inputs = MatrixXd::NullaryExpr(1, t, [&] { return N(rng); });
    w.outputs.resize(p, t + 1);
    const int attacked = trial % p;
    for (int k = 0; k <= t; ++k) {
      w.outputs.col(k) = sys.C() * x;
      if (s) w.outputs(attacked, k) += 1 + N(rng);
      if (k < t) x = sys.A() * x + sys.B() * w.inputs.col(k);
    }
    const auto ps = plausible_initial_states(w, sys, s, cfg);
    const auto ref = oracle::plausible_sets(sys.A(), sys.B(), sys.C(), w.inputs, w.outputs, s,
                                            1e-9);
    std::vector<VectorXd> ref_pts;
    for (const auto& r : ref)
      if (r && r->N.cols() == 0) ref_pts.push_back(r->x0);
    agree += oracle::same_point_set(distinct_points(ps, 1e-9), oracle::dedup(ref_pts, 1e-9),
                                    1e-6);
    member += contains_state(ps, x0, 1e-6);
  }
  report(7, agree == trials && member == trials,
         fmt("%d/%d point sets agree with the brute-force solver, true state member in %d/%d",
             agree, trials, member, trials));
}

void criterion_8() {
  std::mt19937_64 rng(808);
  std::normal_distribution<double> N(0, 1);
  std::uniform_real_distribution<double> slack(0, 1);
  const int trials = 500;
  int agree = 0, unchanged = 0, feasible_nom = 0;
  double worst_kkt = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const int m = 1 + trial % 4, r = 1 + (trial / 4) % 8;
    QpProblem<double> p;
    p.u_nom = VectorXd::NullaryExpr(m, [&] { return 3 * N(rng); });
    p.G = MatrixXd::NullaryExpr(r, m, [&] { return N(rng); });
    const VectorXd v = VectorXd::NullaryExpr(m, [&] { return N(rng); });
    p.w = p.G * v - VectorXd::NullaryExpr(r, [&] { return slack(rng); });
    const auto s = solve_qp(p);
    const auto ref = oracle::qp_enumerate(p.u_nom, p.G, p.w);
    if (s.optimal() && ref.feasible &&
        (s.u - ref.u).norm() <= 1e-8 * std::max(1.0, ref.u.norm()))
      ++agree;
    if (s.optimal()) {
      VectorXd g = s.u - p.u_nom;
      double comp = 0;
      for (std::size_t k = 0; k < s.active_rows.size(); ++k) {
        const auto row = s.active_rows[k];
        const double lam = s.multipliers(static_cast<Eigen::Index>(k));
        g -= lam * p.G.row(row).transpose();
        comp = std::max(comp, std::abs(lam * (p.G.row(row).dot(s.u) - p.w(row))));
        if (lam < 0) comp = std::max(comp, -lam);
      }
      worst_kkt = std::max({worst_kkt, g.norm(), comp, (p.w - p.G * s.u).maxCoeff()});
    }
    if ((p.G * p.u_nom - p.w).minCoeff() >= 0) {
      ++feasible_nom;
      unchanged += s.optimal() && s.u == p.u_nom;
    }
  }
  report(8, agree == trials && unchanged == feasible_nom && worst_kkt <= 1e-8,
         fmt("%d/%d match enumeration, %d/%d feasible nominals unchanged, worst KKT %.3g", agree,
             trials, unchanged, feasible_nom, worst_kkt));
}

void criterion_10() {
  std::mt19937_64 rng(1010);
  std::normal_distribution<double> N(0, 1);
  const int trials = 100;
  int closure = 0, mono = 0;
  for (int trial = 0; trial < trials; ++trial) {
    const int n = 2 + trial % 3, p = 3;
    // Block-triangular A with sensors blind to the trailing block, so kernels
    // are nontrivial.
    const int hidden = 1 + trial % (n - 1);
    MatrixXd A = MatrixXd::NullaryExpr(n, n, [&] { return 0.5 * N(rng); });
    A.topRightCorner(n - hidden, hidden).setZero();
    MatrixXd C = MatrixXd::NullaryExpr(p, n, [&] { return N(rng); });
    C.rightCols(hidden).setZero();
    C.row(trial % p).setZero();
    const LtiSystem<double> sys(A, MatrixXd::Ones(n, 1), C);
    const auto all = SensorSubset::all(p);

    // A^n lies in span{I, ..., A^(n-1)}, so deeper stacks add no rows.
    const auto Kn = kernel_basis(observability_matrix(sys, all, n), 1e-8);
    bool ok = Kn.dim() >= hidden;
    for (int extra = 1; extra <= 3; ++extra) {
      const auto Kd = kernel_basis(observability_matrix(sys, all, n + extra), 1e-8);
      ok = ok && Kd.dim() == Kn.dim() &&
           (Kn.vectors * Kn.vectors.transpose() - Kd.vectors * Kd.vectors.transpose()).norm() <
               1e-8;
    }
    closure += ok;

    // Dropping sensors can only enlarge the kernel.
    bool m = true;
    for (int k = 1; k < p; ++k)
      for (const auto& sub : combinations(p, k)) {
        const MatrixXd Ofull = observability_matrix(sys, all, n);
        const MatrixXd Osub = observability_matrix(sys, sub, n);
        const auto Kf = kernel_basis(Ofull, 1e-8);
        m = m && kernel_included(Ofull, Osub, 1e-8) && (Osub * Kf.vectors).norm() < 1e-8 &&
            kernel_basis(Osub, 1e-8).dim() >= Kf.dim();
      }
    mono += m;
  }
  report(10, closure == trials && mono == trials,
         fmt("closure %d/%d, monotonicity %d/%d", closure, trials, mono, trials));
}

}  // namespace

int main() {
  try {
    criterion_1_2_3_9();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_10();
  } catch (const std::exception& e) {
    std::printf("acceptance aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
