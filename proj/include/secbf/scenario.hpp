#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "secbf/attack.hpp"
#include "secbf/model.hpp"
#include "secbf/numeric_config.hpp"
#include "secbf/safety.hpp"

namespace secbf {

/// Plant as written in the config: either discrete (A, B) or continuous
/// (Ac, Bc) sampled by zero-order hold at dt.
struct SystemSpec {
  bool continuous = false;
  MatrixXd A;  // Ac when continuous
  MatrixXd B;  // Bc when continuous
  MatrixXd C;
  double dt = 1.0;
  bool operator==(const SystemSpec&) const = default;
};

struct NominalSpec {
  enum class Kind { Zero, Sinusoid, List } kind = Kind::Zero;
  double amp = 1.0;
  double freq = 0.0;
  std::vector<VectorXd> values;
  bool operator==(const NominalSpec&) const = default;
};

struct ScenarioConfig {
  SystemSpec system;
  LtiSystem<double> plant;  // discrete plant derived from `system`
  PolyhedralCbf<double> cbf;
  int s = 0;
  AttackConfig attack;
  VectorXd x_true0;
  std::size_t horizon = 1000;
  std::size_t window = 0;
  NominalSpec nominal;
  NumericConfig<double> numeric;
  bool halt_on_infeasible = true;
  bool warmup_nominal = true;
  /// Fields filled from defaults at load (not part of the canonical form).
  std::vector<std::string> defaults_applied;

  bool operator==(const ScenarioConfig& o) const {
    return system == o.system && plant == o.plant && cbf.H == o.cbf.H &&
           cbf.q == o.cbf.q && cbf.gamma == o.cbf.gamma && s == o.s &&
           attack == o.attack && x_true0 == o.x_true0 && horizon == o.horizon &&
           window == o.window && nominal == o.nominal && numeric == o.numeric &&
           halt_on_infeasible == o.halt_on_infeasible &&
           warmup_nominal == o.warmup_nominal;
  }
};

/// Validates and fills defaults (gamma 0.05, window n, residual_tol 1e-3).
/// Throws ConfigError naming the offending field.
ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);

/// Canonical JSON form; parse_config(config_to_json(c)) == c.
nlohmann::json config_to_json(const ScenarioConfig& c);

NominalInput make_nominal(const NominalSpec& spec, Eigen::Index m);

ScenarioOptions scenario_options(const ScenarioConfig& c);

SimTrace simulate(const ScenarioConfig& c);

}  // namespace secbf
