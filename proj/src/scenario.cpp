#include "secbf/scenario.hpp"

#include <cmath>
#include <numbers>

#include "secbf/io.hpp"

namespace secbf {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw ConfigError(field + ": " + why);
}

const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) fail(path + key, "missing required field");
  return j.at(key);
}

MatrixXd matrix_field(const json& j, const char* key, const std::string& path) {
  try {
    return io::matrix_from_json(require(j, key, path), path + key);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

VectorXd vector_field(const json& v, const std::string& field) {
  try {
    return io::vector_from_json(v, field);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

double number_field(const json& v, const std::string& field) {
  if (!v.is_number()) fail(field, "expected a number");
  return v.get<double>();
}

std::size_t count_field(const json& v, const std::string& field) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    fail(field, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

SystemSpec parse_system(const json& j) {
  SystemSpec spec;
  const bool has_d = j.contains("A") || j.contains("B");
  const bool has_c = j.contains("Ac") || j.contains("Bc");
  if (has_d == has_c)
    fail("system", "give exactly one of discrete (A, B) or continuous (Ac, Bc, dt)");
  spec.continuous = has_c;
  spec.A = matrix_field(j, has_c ? "Ac" : "A", "system.");
  spec.B = matrix_field(j, has_c ? "Bc" : "B", "system.");
  spec.C = matrix_field(j, "C", "system.");
  if (has_c)
    spec.dt = number_field(require(j, "dt", "system."), "system.dt");
  else if (j.contains("dt"))
    spec.dt = number_field(j["dt"], "system.dt");
  if (!(spec.dt > 0)) fail("system.dt", "must be > 0");
  const auto n = spec.A.rows();
  const std::string a = has_c ? "system.Ac" : "system.A";
  const std::string b = has_c ? "system.Bc" : "system.B";
  if (n < 1 || spec.A.cols() != n) fail(a, "must be square with n >= 1");
  if (spec.B.rows() != n || spec.B.cols() < 1)
    fail(b, "expected " + std::to_string(n) + " rows and at least one column");
  if (spec.C.cols() != n || spec.C.rows() < 1)
    fail("system.C", "expected " + std::to_string(n) + " columns and at least one row");
  return spec;
}

LtiSystem<double> build_plant(const SystemSpec& spec) {
  if (!spec.continuous) return {spec.A, spec.B, spec.C};
  auto d = zoh_discretize<double>(spec.A, spec.B, spec.dt);
  return {d.A, d.B, spec.C};
}

NominalSpec parse_nominal(const json& j, Eigen::Index m) {
  NominalSpec ns;
  if (j.is_string()) {
    if (j.get<std::string>() != "zero") fail("nominal", "unknown nominal input");
    return ns;
  }
  const auto type = require(j, "type", "nominal.");
  if (!type.is_string()) fail("nominal.type", "expected a string");
  const auto t = type.get<std::string>();
  if (t == "zero") return ns;
  if (t == "sinusoid") {
    ns.kind = NominalSpec::Kind::Sinusoid;
    ns.amp = j.contains("amp") ? number_field(j["amp"], "nominal.amp") : 1.0;
    ns.freq = number_field(require(j, "freq", "nominal."), "nominal.freq");
    return ns;
  }
  if (t == "list") {
    ns.kind = NominalSpec::Kind::List;
    const auto& vals = require(j, "values", "nominal.");
    if (!vals.is_array()) fail("nominal.values", "expected an array of inputs");
    for (std::size_t k = 0; k < vals.size(); ++k) {
      const std::string f = "nominal.values[" + std::to_string(k) + "]";
      auto v = vector_field(vals[k], f);
      if (v.size() != m) fail(f, "expected " + std::to_string(m) + " entries");
      ns.values.push_back(std::move(v));
    }
    return ns;
  }
  fail("nominal.type", "expected zero, sinusoid or list");
}

AttackConfig parse_attack(const json& j, const LtiSystem<double>& sys) {
  AttackConfig a;
  if (j.contains("attacked")) {
    const auto& idx = j["attacked"];
    if (!idx.is_array()) fail("attack.attacked", "expected an array of sensor indices");
    std::vector<int> v;
    for (const auto& i : idx) {
      if (!i.is_number_integer()) fail("attack.attacked", "expected integers");
      v.push_back(i.get<int>());
    }
    if (!v.empty()) {
      try {
        a.attacked = SensorSubset(std::move(v), sys.p());
      } catch (const Error& e) {
        fail("attack.attacked", e.what());
      }
    }
  }
  const std::string strategy = j.value("strategy", std::string("none"));
  if (strategy == "none") {
    a.strategy = NoAttack{};
  } else if (strategy == "fake_state") {
    auto xf = vector_field(require(j, "x_fake", "attack."), "attack.x_fake");
    if (xf.size() != sys.n())
      fail("attack.x_fake", "expected " + std::to_string(sys.n()) + " entries");
    a.strategy = FakeState{std::move(xf)};
  } else if (strategy == "script") {
    const auto& sc = require(j, "script", "attack.");
    if (!sc.is_array()) fail("attack.script", "expected an array of e vectors");
    ScriptedAttack s;
    for (std::size_t k = 0; k < sc.size(); ++k) {
      const std::string f = "attack.script[" + std::to_string(k) + "]";
      auto e = vector_field(sc[k], f);
      if (e.size() != sys.p()) fail(f, "expected " + std::to_string(sys.p()) + " entries");
      s.e.push_back(std::move(e));
    }
    a.strategy = std::move(s);
  } else {
    fail("attack.strategy", "expected none, fake_state or script");
  }
  if (j.contains("noise_std")) a.noise_std = number_field(j["noise_std"], "attack.noise_std");
  if (j.contains("seed")) a.seed = count_field(j["seed"], "attack.seed");
  return a;
}

NumericConfig<double> parse_numeric(const json& j) {
  NumericConfig<double> c;
  if (j.is_null()) return c;
  if (!j.is_object()) fail("numeric", "expected an object");
  auto num = [&](const char* k, double& dst) {
    if (j.contains(k)) dst = number_field(j[k], std::string("numeric.") + k);
  };
  auto cnt = [&](const char* k, std::size_t& dst) {
    if (j.contains(k)) dst = count_field(j[k], std::string("numeric.") + k);
  };
  num("tol_rank", c.tol_rank);
  num("residual_tol", c.residual_tol);
  num("dedup_tol", c.dedup_tol);
  num("tol_margin_abs", c.tol_margin_abs);
  num("tol_margin_rel", c.tol_margin_rel);
  num("qp_tol", c.qp_tol);
  cnt("qp_max_iter", c.qp_max_iter);
  cnt("feasibility_grid", c.feasibility_grid);
  cnt("feasibility_samples", c.feasibility_samples);
  num("feasibility_radius", c.feasibility_radius);
  if (j.contains("feasibility_seed"))
    c.feasibility_seed = count_field(j["feasibility_seed"], "numeric.feasibility_seed");
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const char* known[] = {"tol_rank", "residual_tol", "dedup_tol",
                                  "tol_margin_abs", "tol_margin_rel", "qp_tol",
                                  "qp_max_iter", "feasibility_grid",
                                  "feasibility_samples", "feasibility_radius",
                                  "feasibility_seed"};
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) fail("numeric." + it.key(), "unknown tolerance");
  }
  if (!(c.tol_rank > 0)) fail("numeric.tol_rank", "must be > 0");
  if (!(c.residual_tol > 0)) fail("numeric.residual_tol", "must be > 0");
  return c;
}

}  // namespace

ScenarioConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  ScenarioConfig c;
  c.system = parse_system(require(j, "system", ""));
  try {
    c.plant = build_plant(c.system);
  } catch (const Error& e) {
    fail("system", e.what());
  }
  const auto n = c.plant.n();

  const auto& safe = require(j, "safe_set", "");
  c.cbf.H = matrix_field(safe, "H", "safe_set.");
  if (c.cbf.H.cols() != n)
    fail("safe_set.H", "expected " + std::to_string(n) + " columns, got " +
                           std::to_string(c.cbf.H.cols()));
  if (c.cbf.H.rows() < 1) fail("safe_set.H", "needs at least one row");
  c.cbf.q = vector_field(require(safe, "q", "safe_set."), "safe_set.q");
  if (c.cbf.q.size() != c.cbf.H.rows())
    fail("safe_set.q", "expected " + std::to_string(c.cbf.H.rows()) + " entries");

  if (j.contains("gamma")) {
    c.cbf.gamma = number_field(j["gamma"], "gamma");
  } else {
    c.cbf.gamma = 0.05;
    c.defaults_applied.emplace_back("gamma");
  }
  if (!(c.cbf.gamma > 0 && c.cbf.gamma < 1)) fail("gamma", "must lie in (0, 1)");

  if (j.contains("s")) {
    if (!j["s"].is_number_integer()) fail("s", "expected an integer");
    c.s = j["s"].get<int>();
  } else {
    c.defaults_applied.emplace_back("s");
  }
  if (c.s < 0 || c.s >= c.plant.p()) fail("s", "need 0 <= s < p");

  c.attack = parse_attack(j.value("attack", json::object()), c.plant);
  if (static_cast<int>(c.attack.attacked.size()) > c.s)
    fail("attack.attacked", "more attacked sensors than the budget s");
  try {
    c.attack.validate(c.plant, c.s);
  } catch (const Error& e) {
    fail("attack", e.what());
  }

  if (j.contains("x_true0")) {
    c.x_true0 = vector_field(j["x_true0"], "x_true0");
    if (c.x_true0.size() != n) fail("x_true0", "expected " + std::to_string(n) + " entries");
  } else {
    c.x_true0 = VectorXd::Zero(n);
    c.defaults_applied.emplace_back("x_true0");
  }

  if (j.contains("horizon")) c.horizon = count_field(j["horizon"], "horizon");
  else c.defaults_applied.emplace_back("horizon");
  if (j.contains("window")) {
    c.window = count_field(j["window"], "window");
  } else {
    c.window = static_cast<std::size_t>(n);
    c.defaults_applied.emplace_back("window");
  }
  if (c.window < 1) fail("window", "must be >= 1");
  if (c.horizon < c.window) fail("horizon", "must be >= window");

  c.nominal = j.contains("nominal") ? parse_nominal(j["nominal"], c.plant.m()) : NominalSpec{};
  c.numeric = parse_numeric(j.value("numeric", json()));
  if (j.contains("halt_on_infeasible")) {
    if (!j["halt_on_infeasible"].is_boolean()) fail("halt_on_infeasible", "expected a boolean");
    c.halt_on_infeasible = j["halt_on_infeasible"].get<bool>();
  }
  if (j.contains("warmup")) {
    const auto& w = j["warmup"];
    if (!w.is_string() || (w != "nominal" && w != "zero"))
      fail("warmup", "expected \"nominal\" or \"zero\"");
    c.warmup_nominal = w == "nominal";
  }
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  json j;
  try {
    j = io::read_json_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(j);
}

json config_to_json(const ScenarioConfig& c) {
  json sys;
  if (c.system.continuous) {
    sys = {{"Ac", io::matrix_to_json(c.system.A)},
           {"Bc", io::matrix_to_json(c.system.B)},
           {"C", io::matrix_to_json(c.system.C)},
           {"dt", c.system.dt}};
  } else {
    sys = {{"A", io::matrix_to_json(c.system.A)},
           {"B", io::matrix_to_json(c.system.B)},
           {"C", io::matrix_to_json(c.system.C)},
           {"dt", c.system.dt}};
  }
  json attack{{"attacked", c.attack.attacked.indices()},
              {"noise_std", c.attack.noise_std},
              {"seed", c.attack.seed}};
  if (const auto* f = std::get_if<FakeState>(&c.attack.strategy)) {
    attack["strategy"] = "fake_state";
    attack["x_fake"] = io::vector_to_json(f->x_fake);
  } else if (const auto* s = std::get_if<ScriptedAttack>(&c.attack.strategy)) {
    attack["strategy"] = "script";
    json sc = json::array();
    for (const auto& e : s->e) sc.push_back(io::vector_to_json(e));
    attack["script"] = sc;
  } else {
    attack["strategy"] = "none";
  }
  json nominal;
  switch (c.nominal.kind) {
    case NominalSpec::Kind::Zero: nominal = {{"type", "zero"}}; break;
    case NominalSpec::Kind::Sinusoid:
      nominal = {{"type", "sinusoid"}, {"amp", c.nominal.amp}, {"freq", c.nominal.freq}};
      break;
    case NominalSpec::Kind::List: {
      json vals = json::array();
      for (const auto& v : c.nominal.values) vals.push_back(io::vector_to_json(v));
      nominal = {{"type", "list"}, {"values", vals}};
      break;
    }
  }
  const auto& nc = c.numeric;
  json numeric{{"tol_rank", nc.tol_rank},
               {"residual_tol", nc.residual_tol},
               {"dedup_tol", nc.dedup_tol},
               {"tol_margin_abs", nc.tol_margin_abs},
               {"tol_margin_rel", nc.tol_margin_rel},
               {"qp_tol", nc.qp_tol},
               {"qp_max_iter", nc.qp_max_iter},
               {"feasibility_grid", nc.feasibility_grid},
               {"feasibility_samples", nc.feasibility_samples},
               {"feasibility_radius", nc.feasibility_radius},
               {"feasibility_seed", nc.feasibility_seed}};
  return {{"system", sys},
          {"safe_set", {{"H", io::matrix_to_json(c.cbf.H)}, {"q", io::vector_to_json(c.cbf.q)}}},
          {"gamma", c.cbf.gamma},
          {"s", c.s},
          {"attack", attack},
          {"x_true0", io::vector_to_json(c.x_true0)},
          {"horizon", c.horizon},
          {"window", c.window},
          {"nominal", nominal},
          {"numeric", numeric},
          {"halt_on_infeasible", c.halt_on_infeasible},
          {"warmup", c.warmup_nominal ? "nominal" : "zero"}};
}

NominalInput make_nominal(const NominalSpec& spec, Eigen::Index m) {
  switch (spec.kind) {
    case NominalSpec::Kind::Zero:
      return [m](std::size_t) { return VectorXd::Zero(m); };
    case NominalSpec::Kind::Sinusoid:
      // Component j is amp * sin(freq * tau + j * pi / 2): (sin, cos, -sin, ...).
      return [m, spec](std::size_t tau) {
        VectorXd u(m);
        for (Eigen::Index j = 0; j < m; ++j)
          u(j) = spec.amp * std::sin(spec.freq * static_cast<double>(tau) +
                                     static_cast<double>(j) * std::numbers::pi / 2);
        return u;
      };
    case NominalSpec::Kind::List:
      return [m, spec](std::size_t tau) {
        return tau < spec.values.size() ? spec.values[tau] : VectorXd(VectorXd::Zero(m));
      };
  }
  return [m](std::size_t) { return VectorXd::Zero(m); };
}

ScenarioOptions scenario_options(const ScenarioConfig& c) {
  ScenarioOptions o;
  o.horizon = c.horizon;
  o.window = c.window;
  o.s = c.s;
  o.halt_on_infeasible = c.halt_on_infeasible;
  o.warmup_nominal = c.warmup_nominal;
  o.dt = c.system.dt;
  return o;
}

SimTrace simulate(const ScenarioConfig& c) {
  return run_scenario(c.plant, c.cbf, c.x_true0, c.attack,
                      make_nominal(c.nominal, c.plant.m()), scenario_options(c),
                      c.numeric);
}

}  // namespace secbf
