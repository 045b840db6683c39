#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "secbf/errors.hpp"
#include "secbf/model.hpp"
#include "secbf/numeric_config.hpp"

namespace secbf {

/// Input-output record: inputs u(0..t-1) as the columns of an m x t matrix,
/// outputs y(0..t) as the columns of a p x (t+1) matrix. start_time is the
/// absolute index of the first output.
template <typename Scalar = double>
struct DataWindow {
  Matrix<Scalar> inputs;
  Matrix<Scalar> outputs;
  std::size_t start_time = 0;

  /// t, the index of the last output relative to the window start.
  Eigen::Index horizon() const { return outputs.cols() - 1; }

  void validate(const LtiSystem<Scalar>& sys) const {
    if (outputs.cols() < 1) throw InvalidInput("DataWindow: empty window");
    if (outputs.rows() != sys.p())
      throw InvalidInput("DataWindow: outputs must have p rows");
    if (inputs.cols() != outputs.cols() - 1)
      throw InvalidInput("DataWindow: need exactly one input per transition");
    if (inputs.cols() > 0 && inputs.rows() != sys.m())
      throw InvalidInput("DataWindow: inputs must have m rows");
    if (!inputs.allFinite() || !outputs.allFinite())
      throw InvalidInput("DataWindow: non-finite sample");
  }
};

template <typename Scalar = double>
struct Regression {
  Matrix<Scalar> O;
  Vector<Scalar> Y;
};

/// Per-sensor blocks O_i (rows C_i A^k) and Y_i = y_i(k) - C_i z(k), where
/// z is the zero-initial-state response to the window inputs.
template <typename Scalar>
std::vector<Regression<Scalar>> sensor_regressions(
    const DataWindow<Scalar>& window, const LtiSystem<Scalar>& sys) {
  window.validate(sys);
  const Eigen::Index rows = window.outputs.cols();
  const Eigen::Index n = sys.n();

  // Cpow rows k: C A^k; forced response z(k).
  std::vector<Matrix<Scalar>> CA(static_cast<std::size_t>(rows));
  Matrix<Scalar> Z = Matrix<Scalar>::Zero(n, rows);
  CA[0] = sys.C();
  for (Eigen::Index k = 1; k < rows; ++k) {
    CA[static_cast<std::size_t>(k)] = CA[static_cast<std::size_t>(k - 1)] * sys.A();
    Z.col(k) = sys.A() * Z.col(k - 1) + sys.B() * window.inputs.col(k - 1);
  }
  const Matrix<Scalar> forced = sys.C() * Z;  // p x rows

  std::vector<Regression<Scalar>> out(static_cast<std::size_t>(sys.p()));
  for (Eigen::Index i = 0; i < sys.p(); ++i) {
    auto& r = out[static_cast<std::size_t>(i)];
    r.O.resize(rows, n);
    for (Eigen::Index k = 0; k < rows; ++k)
      r.O.row(k) = CA[static_cast<std::size_t>(k)].row(i);
    r.Y = (window.outputs.row(i) - forced.row(i)).transpose();
  }
  return out;
}

template <typename Scalar>
Regression<Scalar> stack_regression(
    const std::vector<Regression<Scalar>>& per_sensor,
    const SensorSubset& subset) {
  const Eigen::Index rows = per_sensor.front().O.rows();
  const Eigen::Index n = per_sensor.front().O.cols();
  const auto k = static_cast<Eigen::Index>(subset.size());
  Regression<Scalar> r{Matrix<Scalar>(k * rows, n), Vector<Scalar>(k * rows)};
  for (std::size_t j = 0; j < subset.size(); ++j) {
    const auto& block = per_sensor.at(static_cast<std::size_t>(subset.row(j)));
    r.O.middleRows(static_cast<Eigen::Index>(j) * rows, rows) = block.O;
    r.Y.segment(static_cast<Eigen::Index>(j) * rows, rows) = block.Y;
  }
  return r;
}

/// Stacked (O_Gamma, Y_Gamma) with O_Gamma x_start = Y_Gamma for every intact
/// noiseless sensor in the subset.
template <typename Scalar>
Regression<Scalar> build_regression(const DataWindow<Scalar>& window,
                                    const LtiSystem<Scalar>& sys,
                                    const SensorSubset& subset) {
  return stack_regression(sensor_regressions(window, sys), subset);
}

enum class SolutionKind { Empty, Point, Affine };

inline const char* to_string(SolutionKind k) {
  switch (k) {
    case SolutionKind::Empty: return "empty";
    case SolutionKind::Point: return "point";
    case SolutionKind::Affine: return "affine";
  }
  return "?";
}

template <typename Scalar = double>
struct SubspaceSolution {
  SolutionKind kind = SolutionKind::Empty;
  Vector<Scalar> base;          // Point / Affine
  KernelBasis<Scalar> kernel;   // Affine: dim >= 1; Point: dim 0
  Scalar matching_error = Scalar(0);

  bool empty() const { return kind == SolutionKind::Empty; }
};

/// Mean squared residual ||O x - Y||^2 / rows.
template <typename Scalar>
Scalar matching_error(const Matrix<Scalar>& O, const Vector<Scalar>& x,
                      const Vector<Scalar>& Y) {
  if (O.rows() == 0) return Scalar(0);
  return (O * x - Y).squaredNorm() / static_cast<Scalar>(O.rows());
}

template <typename Scalar>
SubspaceSolution<Scalar> classify_solution(const Matrix<Scalar>& O,
                                           const Vector<Scalar>& Y,
                                           const NumericConfig<Scalar>& cfg) {
  if (O.rows() != Y.size())
    throw InvalidInput("classify_solution: O and Y row counts differ");
  const Eigen::Index n = O.cols();
  Eigen::JacobiSVD<Matrix<Scalar>> svd(O, Eigen::ComputeThinU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Scalar thr = sv.size() ? rank_threshold(sv(0), cfg.tol_rank) : Scalar(0);
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > thr) ++r;

  // Minimum-norm least squares restricted to the numerical rank.
  Vector<Scalar> coeff = svd.matrixU().leftCols(r).transpose() * Y;
  coeff.array() /= sv.head(r).array();
  Vector<Scalar> x = svd.matrixV().leftCols(r) * coeff;

  SubspaceSolution<Scalar> sol;
  sol.matching_error = matching_error(O, x, Y);
  if (!(sol.matching_error <= cfg.residual_tol)) return sol;
  sol.base = std::move(x);
  if (r == n) {
    sol.kind = SolutionKind::Point;
    sol.kernel.vectors.resize(n, 0);
  } else {
    sol.kind = SolutionKind::Affine;
    sol.kernel.vectors = svd.matrixV().rightCols(n - r);
  }
  return sol;
}

template <typename Scalar = double>
struct PlausibleEntry {
  SensorSubset gamma;
  SubspaceSolution<Scalar> solution;
  /// ker(O_Gamma) at the reconstruction time; solution.kernel is its image
  /// under A^elapsed.
  KernelBasis<Scalar> origin_kernel;
};

/// Plausible states at time_index, reconstructed from data whose first sample
/// is origin_time. The represented set is the union of non-empty entries.
template <typename Scalar = double>
struct PlausibleSet {
  std::size_t time_index = 0;
  std::size_t origin_time = 0;
  int s = 0;
  std::vector<PlausibleEntry<Scalar>> entries;

  std::size_t elapsed() const { return time_index - origin_time; }

  std::size_t count(SolutionKind k) const {
    std::size_t c = 0;
    for (const auto& e : entries) c += e.solution.kind == k;
    return c;
  }
  bool all_empty() const { return count(SolutionKind::Empty) == entries.size(); }
};

/// One entry per Gamma in C_p^{p-s}, lexicographic.
template <typename Scalar>
PlausibleSet<Scalar> plausible_initial_states(const DataWindow<Scalar>& window,
                                              const LtiSystem<Scalar>& sys,
                                              int s,
                                              const NumericConfig<Scalar>& cfg) {
  if (s < 0 || s >= sys.p())
    throw InvalidInput("plausible_initial_states: need 0 <= s < p");
  const auto per_sensor = sensor_regressions(window, sys);
  PlausibleSet<Scalar> ps;
  ps.time_index = window.start_time;
  ps.origin_time = window.start_time;
  ps.s = s;
  for (auto& gamma : combinations(sys.p(), sys.p() - s)) {
    const auto reg = stack_regression(per_sensor, gamma);
    auto sol = classify_solution(reg.O, reg.Y, cfg);
    KernelBasis<Scalar> origin = sol.kernel;
    ps.entries.push_back({std::move(gamma), std::move(sol), std::move(origin)});
  }
  return ps;
}

/// Advances every entry by the given inputs (columns of an m x k matrix):
/// bases follow the dynamics, kernels are mapped by A^k and re-orthonormalized.
template <typename Scalar>
PlausibleSet<Scalar> propagate_set(const PlausibleSet<Scalar>& ps,
                                   const LtiSystem<Scalar>& sys,
                                   const Matrix<Scalar>& inputs,
                                   const NumericConfig<Scalar>& cfg = {}) {
  const Eigen::Index k = inputs.cols();
  if (k > 0 && inputs.rows() != sys.m())
    throw InvalidInput("propagate_set: inputs must have m rows");
  if (k == 0) return ps;
  Vector<Scalar> forced = Vector<Scalar>::Zero(sys.n());
  for (Eigen::Index j = 0; j < k; ++j)
    forced = sys.A() * forced + sys.B() * inputs.col(j);
  const Matrix<Scalar> Ak = matrix_power(sys.A(), static_cast<std::size_t>(k));

  PlausibleSet<Scalar> out = ps;
  out.time_index = ps.time_index + static_cast<std::size_t>(k);
  for (auto& e : out.entries) {
    auto& sol = e.solution;
    if (sol.empty()) continue;
    sol.base = Ak * sol.base + forced;
    if (sol.kind == SolutionKind::Affine)
      sol.kernel = orthonormal_range(Matrix<Scalar>(Ak * sol.kernel.vectors),
                                     cfg.tol_rank);
  }
  return out;
}

/// Greedy merge of vectors closer than tol, preserving first-seen order.
template <typename Scalar>
std::vector<Vector<Scalar>> deduplicate(const std::vector<Vector<Scalar>>& pts,
                                        Scalar tol) {
  std::vector<Vector<Scalar>> out;
  for (const auto& x : pts) {
    bool seen = false;
    for (const auto& y : out)
      if ((x - y).norm() <= tol) { seen = true; break; }
    if (!seen) out.push_back(x);
  }
  return out;
}

/// Distinct Point solutions (the finite part of the plausible set).
template <typename Scalar>
std::vector<Vector<Scalar>> distinct_points(const PlausibleSet<Scalar>& ps,
                                            Scalar tol) {
  std::vector<Vector<Scalar>> pts;
  for (const auto& e : ps.entries)
    if (e.solution.kind == SolutionKind::Point) pts.push_back(e.solution.base);
  return deduplicate(pts, tol);
}

/// Distinct base points of all non-empty entries.
template <typename Scalar>
std::vector<Vector<Scalar>> representatives(const PlausibleSet<Scalar>& ps,
                                            Scalar tol) {
  std::vector<Vector<Scalar>> pts;
  for (const auto& e : ps.entries)
    if (!e.solution.empty()) pts.push_back(e.solution.base);
  return deduplicate(pts, tol);
}

/// Membership of x in the represented union, up to tol in Euclidean distance.
template <typename Scalar>
bool contains_state(const PlausibleSet<Scalar>& ps, const Vector<Scalar>& x,
                    Scalar tol) {
  for (const auto& e : ps.entries) {
    if (e.solution.empty()) continue;
    if (e.solution.kernel.distance(x - e.solution.base) <= tol) return true;
  }
  return false;
}

template <typename Scalar = double>
struct EnvelopeEntry {
  SensorSubset lambda;
  KernelBasis<Scalar> kernel;
};

template <typename Scalar = double>
struct WorstCaseEnvelope {
  std::vector<EnvelopeEntry<Scalar>> kernels;
  /// Finiteness of the plausible set needs s-sparse observability; when false
  /// the envelope still holds but the set may be infinite.
  bool s_sparse_observable = false;
  std::optional<std::string> warning;

  std::vector<const EnvelopeEntry<Scalar>*> nontrivial() const {
    std::vector<const EnvelopeEntry<Scalar>*> out;
    for (const auto& e : kernels)
      if (e.kernel.dim() > 0) out.push_back(&e);
    return out;
  }
};

/// ker(O_Lambda) for each Lambda in C_p^{p-2s}; plausible initial states lie
/// in x_true + the union of these kernels.
template <typename Scalar>
WorstCaseEnvelope<Scalar> worst_case_envelope(const LtiSystem<Scalar>& sys,
                                              int s,
                                              const NumericConfig<Scalar>& cfg) {
  if (s < 0 || sys.p() <= 2 * s)
    throw InvalidInput(
        "worst_case_envelope: requires p > 2s (at least one sensor common to "
        "any two admissible intact sets)");
  WorstCaseEnvelope<Scalar> env;
  env.s_sparse_observable = is_r_sparse_observable(sys, s, cfg.tol_rank);
  if (!env.s_sparse_observable)
    env.warning = "system is not " + std::to_string(s) +
                  "-sparse observable; the plausible set may be infinite";
  const auto depth = static_cast<std::size_t>(sys.n());
  for (auto& lambda : combinations(sys.p(), sys.p() - 2 * s)) {
    auto K = kernel_basis(observability_matrix(sys, lambda, depth), cfg.tol_rank);
    env.kernels.push_back({std::move(lambda), std::move(K)});
  }
  return env;
}

}  // namespace secbf
