#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "secbf/model.hpp"
#include "secbf/numeric_config.hpp"
#include "secbf/safety.hpp"

namespace secbf {

struct NoAttack {
  bool operator==(const NoAttack&) const = default;
};

/// Attacked sensors report a phantom trajectory started at x_fake and driven
/// by the applied inputs.
struct FakeState {
  VectorXd x_fake;
  bool operator==(const FakeState&) const = default;
};

/// Attack vectors e(tau) in R^p, one per step; entries of intact sensors
/// must be zero.
struct ScriptedAttack {
  std::vector<VectorXd> e;
  bool operator==(const ScriptedAttack&) const = default;
};

using AttackStrategy = std::variant<NoAttack, FakeState, ScriptedAttack>;

struct AttackConfig {
  SensorSubset attacked;  // may be empty
  AttackStrategy strategy = NoAttack{};
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  /// Rejects more than s attacked sensors and malformed strategies.
  void validate(const LtiSystem<double>& sys, int s) const;
  bool operator==(const AttackConfig&) const = default;
};

using Rng = std::mt19937_64;

VectorXd step_plant(const LtiSystem<double>& sys, const VectorXd& x,
                    const VectorXd& u);

/// Sensor readings at one step. Intact sensors see C_i x_true, attacked ones
/// C_i x_fake (FakeState) or C_i x_true + e_i (script); every sensor gets
/// independent N(0, noise_std^2) noise.
VectorXd measure(const LtiSystem<double>& sys, const VectorXd& x_true,
                 const VectorXd* x_fake, const AttackConfig& cfg, Rng& rng,
                 std::size_t step);

enum class FilterStatus {
  Warmup,
  Pass,
  Active,
  HoldZero,
  Infeasible,
  AttackModelViolated,
  KernelConditionViolated,
};

const char* to_string(FilterStatus s);

struct SimStep {
  std::size_t step = 0;
  VectorXd x_true;
  VectorXd x_fake;  // empty without a fake-state attack
  VectorXd u_nom;
  VectorXd u;
  VectorXd y;
  std::vector<VectorXd> plausible;  // distinct representatives at this step
  VectorXd margin_true;
  VectorXd margin_fake;
  FilterStatus status = FilterStatus::Warmup;

  double min_margin_true() const;
  double min_margin_fake() const;  // NaN without a fake trajectory
};

enum class Termination { Completed, Infeasible, AttackModelViolated, KernelConditionViolated };

const char* to_string(Termination t);

struct SimTrace {
  std::vector<SimStep> steps;
  double dt = 1.0;
  Eigen::Index n = 0, m = 0, p = 0;
  bool premise_checked = false;
  bool premise_ok = false;
  Termination termination = Termination::Completed;
  std::string message;
};

using NominalInput = std::function<VectorXd(std::size_t)>;

struct ScenarioOptions {
  std::size_t horizon = 0;
  std::size_t window = 0;
  int s = 0;
  bool halt_on_infeasible = true;
  bool warmup_nominal = true;  // false: zero input during warm-up
  double dt = 1.0;             // only labels the time column
};

/// Closed loop: warm-up with w-1 open-loop steps, then sliding-window
/// reconstruction, propagation to the current step, and the QP safety filter.
SimTrace run_scenario(const LtiSystem<double>& sys,
                      const PolyhedralCbf<double>& cbf, const VectorXd& x_true0,
                      const AttackConfig& attack, const NominalInput& nominal,
                      const ScenarioOptions& opts,
                      const NumericConfig<double>& cfg);

/// Columns: step, time_s, x1..xn, fake_x1..xn, u_nom_1..m, u_1..m, y_1..p,
/// n_plausible, min_margin_true, min_margin_fake, filter_status.
void write_trace_csv(const SimTrace& trace, std::ostream& os);

}  // namespace secbf
