#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "secbf/errors.hpp"
#include "secbf/model.hpp"
#include "secbf/numeric_config.hpp"

namespace secbf {

/// min ||u - u_nom||^2  s.t.  G u >= w.
template <typename Scalar = double>
struct QpProblem {
  Vector<Scalar> u_nom;
  Matrix<Scalar> G;
  Vector<Scalar> w;
};

enum class QpStatus { Optimal, Infeasible };

template <typename Scalar = double>
struct QpSolution {
  QpStatus status = QpStatus::Optimal;
  Vector<Scalar> u;
  /// Rows of the original G held with equality, with their multipliers
  /// (u - u_nom = G_active^T multipliers).
  std::vector<Eigen::Index> active_rows;
  Vector<Scalar> multipliers;
  /// Infeasible only: c >= 0 over the original rows with c^T G = 0 and
  /// c^T w > 0.
  std::optional<Vector<Scalar>> certificate;
  std::size_t iterations = 0;

  bool optimal() const { return status == QpStatus::Optimal; }
};

namespace detail {

template <typename Scalar>
struct NormalizedRows {
  Matrix<Scalar> N;                 // unit normals as rows
  Vector<Scalar> b;
  std::vector<Eigen::Index> origin; // row of the original G
  std::vector<Scalar> scale;        // ||G_origin||
};

}  // namespace detail

/// Dual active-set projection (Goldfarb-Idnani with identity Hessian). Starts
/// at u_nom and adds the most violated constraint until primal feasibility;
/// a constraint that can be neither reached nor traded against active ones
/// proves the feasible set empty.
template <typename Scalar>
QpSolution<Scalar> solve_qp(const QpProblem<Scalar>& prob,
                            const NumericConfig<Scalar>& cfg = {}) {
  using std::abs;
  using std::max;
  const Eigen::Index m = prob.u_nom.size();
  const Eigen::Index r = prob.G.rows();
  if (prob.w.size() != r || (r > 0 && prob.G.cols() != m))
    throw InvalidInput("solve_qp: inconsistent problem dimensions");
  if (!prob.u_nom.allFinite() || !prob.G.allFinite() || !prob.w.allFinite())
    throw InvalidInput("solve_qp: non-finite problem data");

  const Scalar tol = cfg.qp_tol;
  QpSolution<Scalar> sol;
  sol.u = prob.u_nom;
  sol.multipliers.resize(0);

  auto infeasible_from = [&](Vector<Scalar> cert) {
    sol.status = QpStatus::Infeasible;
    sol.certificate = std::move(cert);
    sol.active_rows.clear();
    sol.multipliers.resize(0);
    return sol;
  };

  // Normalize rows and merge parallel duplicates, keeping the tighter bound.
  detail::NormalizedRows<Scalar> rows;
  std::vector<Vector<Scalar>> normals;
  std::vector<Scalar> bounds;
  for (Eigen::Index k = 0; k < r; ++k) {
    const Scalar nrm = prob.G.row(k).norm();
    if (nrm <= std::numeric_limits<Scalar>::min() * Scalar(1e3)) {
      if (prob.w(k) > tol * max(Scalar(1), abs(prob.w(k)))) {
        Vector<Scalar> cert = Vector<Scalar>::Zero(r);
        cert(k) = Scalar(1);
        return infeasible_from(std::move(cert));
      }
      continue;
    }
    Vector<Scalar> nk = prob.G.row(k).transpose() / nrm;
    const Scalar bk = prob.w(k) / nrm;
    bool merged = false;
    for (std::size_t j = 0; j < normals.size(); ++j) {
      if ((normals[j] - nk).norm() <= Scalar(1e-13)) {
        if (bk > bounds[j]) {
          bounds[j] = bk;
          rows.origin[j] = k;
          rows.scale[j] = nrm;
        }
        merged = true;
        break;
      }
    }
    if (!merged) {
      normals.push_back(std::move(nk));
      bounds.push_back(bk);
      rows.origin.push_back(k);
      rows.scale.push_back(nrm);
    }
  }
  const auto q = static_cast<Eigen::Index>(normals.size());
  rows.N.resize(q, m);
  rows.b.resize(q);
  for (Eigen::Index k = 0; k < q; ++k) {
    rows.N.row(k) = normals[static_cast<std::size_t>(k)].transpose();
    rows.b(k) = bounds[static_cast<std::size_t>(k)];
  }

  auto violation_tol = [&](Eigen::Index k, const Vector<Scalar>& u) {
    return tol * max({Scalar(1), abs(rows.b(k)), u.norm()});
  };

  // Early exit keeps a feasible nominal input bit-for-bit.
  {
    bool feasible = true;
    for (Eigen::Index k = 0; k < q && feasible; ++k)
      feasible = rows.N.row(k).dot(prob.u_nom) - rows.b(k) >= -violation_tol(k, prob.u_nom);
    if (feasible) return sol;
  }

  const std::size_t max_iter =
      cfg.qp_max_iter ? cfg.qp_max_iter
                      : static_cast<std::size_t>(10 * (q + m) + 50);
  Vector<Scalar> u = prob.u_nom;
  std::vector<Eigen::Index> active;
  std::vector<Scalar> lambda;
  const Scalar eps_dir = Scalar(1e-12);

  auto active_normals = [&]() {
    Matrix<Scalar> Na(m, static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j)
      Na.col(static_cast<Eigen::Index>(j)) = rows.N.row(active[j]).transpose();
    return Na;
  };

  std::size_t iter = 0;
  while (true) {
    // Most violated inactive constraint.
    Eigen::Index p = -1;
    Scalar worst = Scalar(0);
    for (Eigen::Index k = 0; k < q; ++k) {
      if (std::find(active.begin(), active.end(), k) != active.end()) continue;
      const Scalar slack = rows.N.row(k).dot(u) - rows.b(k);
      if (slack < -violation_tol(k, u) && slack < worst) {
        worst = slack;
        p = k;
      }
    }
    if (p < 0) break;

    Scalar lambda_p = Scalar(0);
    const Vector<Scalar> np = rows.N.row(p).transpose();
    while (true) {
      if (++iter > max_iter)
        throw SolverFailure("solve_qp: iteration budget exhausted");
      const Matrix<Scalar> Na = active_normals();
      Vector<Scalar> coef = Vector<Scalar>::Zero(Na.cols());
      Vector<Scalar> z = np;
      if (Na.cols() > 0) {
        coef = Na.householderQr().solve(np);
        z = np - Na * coef;
      }
      // Dual step limit from active multipliers that would turn negative.
      Scalar t1 = std::numeric_limits<Scalar>::infinity();
      std::size_t drop = 0;
      for (std::size_t j = 0; j < active.size(); ++j) {
        const Scalar c = coef(static_cast<Eigen::Index>(j));
        if (c > eps_dir) {
          const Scalar t = lambda[j] / c;
          if (t < t1) { t1 = t; drop = j; }
        }
      }
      Scalar t2 = std::numeric_limits<Scalar>::infinity();
      const Scalar zz = z.squaredNorm();
      if (z.norm() > eps_dir) t2 = -(np.dot(u) - rows.b(p)) / zz;

      if (!std::isfinite(double(t1)) && !std::isfinite(double(t2))) {
        // n_p = Na coef with coef <= 0: 0 = n_p - sum coef_j n_j is a
        // nonnegative combination whose bounds sum to a positive value.
        Vector<Scalar> cert = Vector<Scalar>::Zero(r);
        cert(rows.origin[static_cast<std::size_t>(p)]) +=
            Scalar(1) / rows.scale[static_cast<std::size_t>(p)];
        for (std::size_t j = 0; j < active.size(); ++j) {
          const auto k = static_cast<std::size_t>(active[j]);
          cert(rows.origin[k]) +=
              max(Scalar(0), -coef(static_cast<Eigen::Index>(j))) / rows.scale[k];
        }
        sol.iterations = iter;
        return infeasible_from(std::move(cert));
      }

      const Scalar t = std::min(t1, t2);
      if (std::isfinite(double(t2))) u += t * z;
      for (std::size_t j = 0; j < active.size(); ++j)
        lambda[j] -= t * coef(static_cast<Eigen::Index>(j));
      lambda_p += t;

      if (t2 <= t1) {
        active.push_back(p);
        lambda.push_back(lambda_p);
        break;
      }
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
      lambda.erase(lambda.begin() + static_cast<std::ptrdiff_t>(drop));
    }
  }

  // Re-solve the equality-constrained projection on the final active set to
  // strip accumulated rounding from the step updates.
  if (!active.empty()) {
    const Matrix<Scalar> Na = active_normals();
    Vector<Scalar> rhs(Na.cols());
    for (std::size_t j = 0; j < active.size(); ++j)
      rhs(static_cast<Eigen::Index>(j)) = rows.b(active[j]);
    rhs -= Na.transpose() * prob.u_nom;
    const Matrix<Scalar> gram = Na.transpose() * Na;
    const Vector<Scalar> lam = gram.ldlt().solve(rhs);
    const Vector<Scalar> refined = prob.u_nom + Na * lam;
    bool ok = (lam.array() >= -tol).all();
    for (Eigen::Index k = 0; k < q && ok; ++k)
      ok = rows.N.row(k).dot(refined) - rows.b(k) >= -violation_tol(k, refined);
    if (ok) {
      u = refined;
      for (std::size_t j = 0; j < active.size(); ++j)
        lambda[j] = lam(static_cast<Eigen::Index>(j));
    }
  }

  sol.u = u;
  sol.iterations = iter;
  sol.active_rows.clear();
  sol.multipliers.resize(static_cast<Eigen::Index>(active.size()));
  for (std::size_t j = 0; j < active.size(); ++j) {
    const auto k = static_cast<std::size_t>(active[j]);
    sol.active_rows.push_back(rows.origin[k]);
    sol.multipliers(static_cast<Eigen::Index>(j)) = lambda[j] / rows.scale[k];
  }
  return sol;
}

}  // namespace secbf
