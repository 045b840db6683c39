#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "secbf/errors.hpp"
#include "secbf/model.hpp"
#include "secbf/numeric_config.hpp"
#include "secbf/qp.hpp"
#include "secbf/reconstruction.hpp"

namespace secbf {

/// Linear barrier h(x) = H x + q with safe set {h >= 0} and decay rate gamma.
template <typename Scalar = double>
struct PolyhedralCbf {
  Matrix<Scalar> H;
  Vector<Scalar> q;
  Scalar gamma = Scalar(0.05);

  Eigen::Index l() const { return H.rows(); }

  void validate(Eigen::Index n) const {
    if (!(gamma > Scalar(0) && gamma < Scalar(1)))
      throw InvalidInput("PolyhedralCbf: gamma must lie in (0, 1)");
    if (H.rows() < 1 || H.cols() != n)
      throw InvalidInput("PolyhedralCbf: H must be l x n with l >= 1");
    if (q.size() != H.rows())
      throw InvalidInput("PolyhedralCbf: q must have l entries");
    if (!H.allFinite() || !q.allFinite())
      throw InvalidInput("PolyhedralCbf: non-finite entry");
  }
};

template <typename Scalar, typename Derived>
Vector<Scalar> cbf_margin(const PolyhedralCbf<Scalar>& cbf,
                          const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != cbf.H.cols())
    throw InvalidInput("cbf_margin: state dimension mismatch");
  return cbf.H * x + cbf.q;
}

/// Right-hand side of the one-step condition HB u >= w at state x:
/// w = (1 - gamma)(Hx + q) - H A x - q.
template <typename Scalar>
Vector<Scalar> cbf_rhs(const LtiSystem<Scalar>& sys,
                       const PolyhedralCbf<Scalar>& cbf,
                       const Vector<Scalar>& x) {
  return (Scalar(1) - cbf.gamma) * (cbf.H * x + cbf.q) - cbf.H * (sys.A() * x) -
         cbf.q;
}

/// [H; HA; ...; HA^{depth-1}]
template <typename Scalar>
Matrix<Scalar> barrier_stack(const LtiSystem<Scalar>& sys,
                             const PolyhedralCbf<Scalar>& cbf,
                             std::size_t depth) {
  const Eigen::Index l = cbf.l();
  Matrix<Scalar> S(l * static_cast<Eigen::Index>(depth), sys.n());
  Matrix<Scalar> HA = cbf.H;
  for (std::size_t k = 0; k < depth; ++k) {
    S.middleRows(static_cast<Eigen::Index>(k) * l, l) = HA;
    HA = HA * sys.A();
  }
  return S;
}

enum class FeasibilityKind { ProvedSufficient, FalsifiedAt, Unknown };

inline const char* to_string(FeasibilityKind k) {
  switch (k) {
    case FeasibilityKind::ProvedSufficient: return "proved_sufficient";
    case FeasibilityKind::FalsifiedAt: return "falsified";
    case FeasibilityKind::Unknown: return "unknown";
  }
  return "?";
}

template <typename Scalar = double>
struct FeasibilityVerdict {
  FeasibilityKind kind = FeasibilityKind::Unknown;
  std::optional<Vector<Scalar>> witness;  // FalsifiedAt
  std::size_t samples_checked = 0;
};

/// Existence of an input meeting the CBF condition at every state.
/// Full row rank of HB proves it; otherwise sampled states (a grid plus
/// uniform draws over a box) are searched for one where no input works.
template <typename Scalar>
FeasibilityVerdict<Scalar> check_cbf_feasibility(
    const LtiSystem<Scalar>& sys, const PolyhedralCbf<Scalar>& cbf,
    const NumericConfig<Scalar>& cfg) {
  cbf.validate(sys.n());
  FeasibilityVerdict<Scalar> v;
  const Matrix<Scalar> HB = cbf.H * sys.B();
  if (numerical_rank(HB, cfg.tol_rank) == cbf.l()) {
    v.kind = FeasibilityKind::ProvedSufficient;
    return v;
  }

  const Eigen::Index n = sys.n();
  const Scalar R = cfg.feasibility_radius;
  auto falsifies = [&](const Vector<Scalar>& x) {
    ++v.samples_checked;
    QpProblem<Scalar> prob{Vector<Scalar>::Zero(sys.m()), HB,
                           cbf_rhs(sys, cbf, x)};
    return solve_qp(prob, cfg).status == QpStatus::Infeasible;
  };

  const std::size_t g = cfg.feasibility_grid;
  if (g >= 2) {
    std::size_t total = 1;
    for (Eigen::Index i = 0; i < n && total <= 100000; ++i) total *= g;
    if (total <= 100000) {
      std::vector<std::size_t> digit(static_cast<std::size_t>(n), 0);
      for (std::size_t c = 0; c < total; ++c) {
        Vector<Scalar> x(n);
        for (Eigen::Index i = 0; i < n; ++i)
          x(i) = -R + Scalar(2) * R * Scalar(digit[static_cast<std::size_t>(i)]) /
                          Scalar(g - 1);
        if (falsifies(x)) {
          v.kind = FeasibilityKind::FalsifiedAt;
          v.witness = x;
          return v;
        }
        for (std::size_t i = 0; i < digit.size(); ++i) {
          if (++digit[i] < g) break;
          digit[i] = 0;
        }
      }
    }
  }

  std::mt19937_64 rng(cfg.feasibility_seed);
  std::uniform_real_distribution<double> unif(-double(R), double(R));
  for (std::size_t k = 0; k < cfg.feasibility_samples; ++k) {
    Vector<Scalar> x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = Scalar(unif(rng));
    if (falsifies(x)) {
      v.kind = FeasibilityKind::FalsifiedAt;
      v.witness = x;
      return v;
    }
  }
  v.kind = FeasibilityKind::Unknown;
  return v;
}

template <typename Scalar = double>
struct OfflineReport {
  bool sparse_obs_ok = false;
  bool p_gt_2s = false;
  std::vector<std::pair<SensorSubset, bool>> cond_i;
  FeasibilityVerdict<Scalar> cond_ii;
  bool verdict = false;

  bool all_cond_i() const {
    for (const auto& [lambda, ok] : cond_i)
      if (!ok) return false;
    return true;
  }
};

/// Worst-case admissibility of a safe set against any attack on s sensors:
/// every ambiguity direction ker(O_Lambda), Lambda in C_p^{p-2s}, must be
/// invisible to H, HA, ..., HA^{n-1}, and h must be a CBF.
template <typename Scalar>
OfflineReport<Scalar> check_offline_conditions(const LtiSystem<Scalar>& sys,
                                               int s,
                                               const PolyhedralCbf<Scalar>& cbf,
                                               const NumericConfig<Scalar>& cfg) {
  cbf.validate(sys.n());
  OfflineReport<Scalar> rep;
  rep.sparse_obs_ok =
      s >= 0 && s < sys.p() && is_r_sparse_observable(sys, Eigen::Index(s), cfg.tol_rank);
  rep.p_gt_2s = s >= 0 && sys.p() > 2 * s;
  const auto depth = static_cast<std::size_t>(sys.n());
  if (rep.p_gt_2s) {
    const Matrix<Scalar> stack = barrier_stack(sys, cbf, depth);
    for (auto& lambda : combinations(sys.p(), sys.p() - 2 * s)) {
      const bool ok = kernel_included(observability_matrix(sys, lambda, depth),
                                      stack, cfg.tol_rank);
      rep.cond_i.emplace_back(std::move(lambda), ok);
    }
  }
  rep.cond_ii = check_cbf_feasibility(sys, cbf, cfg);
  rep.verdict = rep.sparse_obs_ok && rep.p_gt_2s && rep.all_cond_i() &&
                rep.cond_ii.kind != FeasibilityKind::FalsifiedAt;
  return rep;
}

template <typename Scalar>
bool margins_nonnegative(const PolyhedralCbf<Scalar>& cbf,
                         const Vector<Scalar>& x,
                         const NumericConfig<Scalar>& cfg) {
  const Vector<Scalar> h = cbf_margin(cbf, x);
  const Scalar scale =
      (cbf.H.cwiseAbs() * x.cwiseAbs()).maxCoeff() + cbf.q.cwiseAbs().maxCoeff();
  return h.minCoeff() >= -cfg.margin_tol(scale);
}

/// Whether the whole plausible set lies in the safe set: each affine family
/// must be flat along H (ker(O_Gamma) ⊆ ker(H A^t)) and each base point safe.
template <typename Scalar>
bool containment_check(const PlausibleSet<Scalar>& ps,
                       const PolyhedralCbf<Scalar>& cbf,
                       const LtiSystem<Scalar>& sys,
                       const NumericConfig<Scalar>& cfg) {
  const Matrix<Scalar> HAt = cbf.H * matrix_power(sys.A(), ps.elapsed());
  for (const auto& e : ps.entries) {
    if (e.solution.empty()) continue;
    if (e.solution.kind == SolutionKind::Affine &&
        !kernel_included(e.origin_kernel.complement_projector(), HAt, cfg.tol_rank))
      return false;
    if (!margins_nonnegative(cbf, e.solution.base, cfg)) return false;
  }
  return true;
}

/// ker(O_Gamma) ⊆ ker(H A^{t+1} - (1 - gamma) H A^t) for all affine entries.
template <typename Scalar>
bool online_kernel_condition(const PlausibleSet<Scalar>& ps,
                             const LtiSystem<Scalar>& sys,
                             const PolyhedralCbf<Scalar>& cbf, std::size_t t,
                             const NumericConfig<Scalar>& cfg) {
  if (ps.count(SolutionKind::Affine) == 0) return true;
  const Matrix<Scalar> At = matrix_power(sys.A(), t);
  const Matrix<Scalar> M =
      cbf.H * sys.A() * At - (Scalar(1) - cbf.gamma) * cbf.H * At;
  for (const auto& e : ps.entries) {
    if (e.solution.kind != SolutionKind::Affine) continue;
    if (!kernel_included(e.origin_kernel.complement_projector(), M, cfg.tol_rank))
      return false;
  }
  return true;
}

/// Containment at n consecutive times starting from the reconstruction time
/// already implies the online kernel condition at every later time.
inline bool containment_history_implies_kernel_condition(
    const std::vector<bool>& contained, Eigen::Index n) {
  if (static_cast<Eigen::Index>(contained.size()) < n) return false;
  for (Eigen::Index k = 0; k < n; ++k)
    if (!contained[static_cast<std::size_t>(k)]) return false;
  return true;
}

/// Stacked CBF constraints G u >= w, one l-row block per distinct
/// representative state.
template <typename Scalar = double>
struct ConstraintSet {
  Matrix<Scalar> G;
  Vector<Scalar> w;
  std::vector<Vector<Scalar>> representatives;

  std::size_t blocks() const { return representatives.size(); }
};

template <typename Scalar>
ConstraintSet<Scalar> constraints_for(const std::vector<Vector<Scalar>>& reps,
                                      const LtiSystem<Scalar>& sys,
                                      const PolyhedralCbf<Scalar>& cbf) {
  const Eigen::Index l = cbf.l();
  const auto K = static_cast<Eigen::Index>(reps.size());
  const Matrix<Scalar> HB = cbf.H * sys.B();
  ConstraintSet<Scalar> cs;
  cs.G.resize(l * K, sys.m());
  cs.w.resize(l * K);
  for (Eigen::Index k = 0; k < K; ++k) {
    cs.G.middleRows(k * l, l) = HB;
    cs.w.segment(k * l, l) = cbf_rhs(sys, cbf, reps[static_cast<std::size_t>(k)]);
  }
  cs.representatives = reps;
  return cs;
}

template <typename Scalar>
ConstraintSet<Scalar> build_cbf_constraints(const PlausibleSet<Scalar>& ps,
                                            const LtiSystem<Scalar>& sys,
                                            const PolyhedralCbf<Scalar>& cbf) {
  if (ps.all_empty())
    throw AttackModelViolated(
        "no sensor combination is consistent with the data: more than s = " +
        std::to_string(ps.s) + " sensors corrupted, or tolerances too tight");
  std::vector<Vector<Scalar>> reps;
  for (const auto& e : ps.entries) {
    if (e.solution.empty()) continue;
    const auto& x = e.solution.base;
    bool dup = false;
    for (const auto& y : reps) {
      using std::max;
      if ((x - y).norm() <= Scalar(1e-12) * max(Scalar(1), x.norm())) {
        dup = true;
        break;
      }
    }
    if (!dup) reps.push_back(x);
  }
  return constraints_for(reps, sys, cbf);
}

template <typename Scalar = double>
struct FactorCheck {
  SensorSubset gamma;
  bool ok = false;
  Matrix<Scalar> M;  // H ≈ M C_Gamma
};

template <typename Scalar = double>
struct SufficientConditions {
  std::vector<FactorCheck<Scalar>> cond14;
  bool cond15 = false;
};

/// Easy-to-verify sufficient conditions: H factors through C_Gamma for each
/// affine combination, and HB (l x m) has full row rank.
template <typename Scalar>
SufficientConditions<Scalar> sufficient_conditions_check(
    const LtiSystem<Scalar>& sys, const PolyhedralCbf<Scalar>& cbf,
    const std::vector<SensorSubset>& subsets, const NumericConfig<Scalar>& cfg) {
  using std::max;
  SufficientConditions<Scalar> out;
  const Scalar hnorm = cbf.H.norm();
  for (const auto& gamma : subsets) {
    Matrix<Scalar> Cg(static_cast<Eigen::Index>(gamma.size()), sys.n());
    for (std::size_t k = 0; k < gamma.size(); ++k)
      Cg.row(static_cast<Eigen::Index>(k)) = sys.C().row(gamma.row(k));
    const Matrix<Scalar> Mt =
        Cg.transpose().completeOrthogonalDecomposition().solve(cbf.H.transpose());
    FactorCheck<Scalar> fc{gamma, false, Mt.transpose()};
    fc.ok = (fc.M * Cg - cbf.H).norm() <= cfg.tol_rank * max(Scalar(1), hnorm);
    out.cond14.push_back(std::move(fc));
  }
  out.cond15 = numerical_rank(Matrix<Scalar>(cbf.H * sys.B()), cfg.tol_rank) == cbf.l();
  return out;
}

/// Row-wise maximum of w over the constraint blocks: any u with HB u >= z
/// meets every block.
template <typename Scalar>
Vector<Scalar> certificate_rhs(const ConstraintSet<Scalar>& cs, Eigen::Index l) {
  Vector<Scalar> z = cs.w.head(l);
  for (std::size_t k = 1; k < cs.blocks(); ++k)
    z = z.cwiseMax(cs.w.segment(static_cast<Eigen::Index>(k) * l, l));
  return z;
}

/// Minimum-norm u with HB u = z, u = (HB)^T (HB (HB)^T)^{-1} z.
template <typename Scalar>
Vector<Scalar> closed_form_feasible_input(const LtiSystem<Scalar>& sys,
                                          const PolyhedralCbf<Scalar>& cbf,
                                          const Vector<Scalar>& z,
                                          const NumericConfig<Scalar>& cfg = {}) {
  const Matrix<Scalar> HB = cbf.H * sys.B();
  if (z.size() != HB.rows())
    throw InvalidInput("closed_form_feasible_input: z must have l entries");
  if (numerical_rank(HB, cfg.tol_rank) != HB.rows())
    throw PreconditionViolated(
        "closed_form_feasible_input: HB must have full row rank");
  const Matrix<Scalar> gram = HB * HB.transpose();
  return HB.transpose() * gram.llt().solve(z);
}

template <typename Scalar = double>
struct FilterResult {
  Vector<Scalar> u;
  bool modified = false;
  std::size_t blocks = 0;
  QpSolution<Scalar> qp;
};

/// Minimal modification of u_nom enforcing the CBF condition at every
/// plausible state.
template <typename Scalar>
FilterResult<Scalar> safe_control(const Vector<Scalar>& u_nom,
                                  const PlausibleSet<Scalar>& ps,
                                  const LtiSystem<Scalar>& sys,
                                  const PolyhedralCbf<Scalar>& cbf,
                                  const NumericConfig<Scalar>& cfg) {
  if (u_nom.size() != sys.m())
    throw InvalidInput("safe_control: u_nom must have m entries");
  if (!online_kernel_condition(ps, sys, cbf, ps.elapsed(), cfg))
    throw KernelConditionViolated(
        "an ambiguity direction of the plausible set is visible to the "
        "barrier; the CBF condition cannot hold for every plausible state");
  const auto cs = build_cbf_constraints(ps, sys, cbf);
  FilterResult<Scalar> res;
  res.blocks = cs.blocks();
  res.qp = solve_qp(QpProblem<Scalar>{u_nom, cs.G, cs.w}, cfg);
  if (!res.qp.optimal())
    throw Infeasible("CBF constraints over " + std::to_string(cs.blocks()) +
                     " plausible states admit no input");
  res.u = res.qp.u;
  res.modified = !res.qp.active_rows.empty();
  return res;
}

/// Feedback from a single plausible state (the first non-empty entry), valid
/// when the worst-case admissibility conditions hold.
template <typename Scalar>
Vector<Scalar> single_state_feedback(const PlausibleSet<Scalar>& ps,
                                     const LtiSystem<Scalar>& sys,
                                     const PolyhedralCbf<Scalar>& cbf,
                                     const NumericConfig<Scalar>& cfg,
                                     const Vector<Scalar>& u_nom) {
  for (const auto& e : ps.entries) {
    if (e.solution.empty()) continue;
    const auto cs = constraints_for(std::vector<Vector<Scalar>>{e.solution.base},
                                    sys, cbf);
    const auto sol = solve_qp(QpProblem<Scalar>{u_nom, cs.G, cs.w}, cfg);
    if (!sol.optimal()) throw Infeasible("single-state CBF constraint infeasible");
    return sol.u;
  }
  throw AttackModelViolated("no plausible state");
}

}  // namespace secbf
