#pragma once

#include <cstddef>
#include <cstdint>

namespace secbf {

/// Every tolerance used by the library. Threaded explicitly through the
/// calls that need it; there is no global numeric state.
template <typename Scalar = double>
struct NumericConfig {
  /// Singular values below tol_rank * max(1, sigma_max) count as zero.
  Scalar tol_rank = Scalar(1e-8);
  /// Mean squared matching error ||O x - Y||^2 / rows accepted as consistent.
  Scalar residual_tol = Scalar(1e-3);
  /// Points closer than this (Euclidean) are the same plausible state.
  /// Defaults to 10 * residual_tol when non-positive.
  Scalar dedup_tol = Scalar(-1);

  Scalar tol_margin_abs = Scalar(1e-9);
  Scalar tol_margin_rel = Scalar(1e-9);

  /// Primal feasibility / KKT tolerance of the QP solver (relative).
  Scalar qp_tol = Scalar(1e-11);
  std::size_t qp_max_iter = 0;  // 0: automatic, 10 * (rows + vars) + 50

  /// Sampling budget of the CBF feasibility falsifier.
  std::size_t feasibility_grid = 3;
  std::size_t feasibility_samples = 200;
  Scalar feasibility_radius = Scalar(10);
  std::uint64_t feasibility_seed = 1;

  Scalar effective_dedup_tol() const {
    return dedup_tol > Scalar(0) ? dedup_tol : Scalar(10) * residual_tol;
  }

  Scalar margin_tol(Scalar scale) const {
    return tol_margin_abs + tol_margin_rel * scale;
  }

  bool operator==(const NumericConfig&) const = default;
};

}  // namespace secbf
