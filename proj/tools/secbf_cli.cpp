// Command-line front end: check-observability, offline-check, reconstruct,
// simulate. Exit codes: 0 ok, 2 config error, 3 safety cannot be certified,
// 4 attack model violated, 5 internal numeric failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "secbf/attack.hpp"
#include "secbf/io.hpp"
#include "secbf/reconstruction.hpp"
#include "secbf/safety.hpp"
#include "secbf/scenario.hpp"

namespace fs = std::filesystem;
using namespace secbf;

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::string data;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> window;
  std::optional<std::size_t> horizon;
  std::optional<bool> halt_on_infeasible;
  std::optional<int> s;
};

enum Exit { kOk = 0, kConfig = 2, kUnsafe = 3, kAttackModel = 4, kNumeric = 5 };

std::string vec_str(const VectorXd& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%.6g", i ? ", " : "", v(i));
    s += buf;
  }
  return s + ")";
}

ScenarioConfig load(const Options& o) {
  auto c = load_config(o.config);
  if (o.seed) c.attack.seed = *o.seed;
  if (o.window) c.window = *o.window;
  if (o.horizon) c.horizon = *o.horizon;
  if (o.halt_on_infeasible) c.halt_on_infeasible = *o.halt_on_infeasible;
  if (o.s) c.s = *o.s;
  // Re-validate the overridden fields through the canonical form.
  c = parse_config(config_to_json(c));
  for (const auto& f : c.defaults_applied)
    std::cout << "note: default applied for " << f << "\n";
  fs::create_directories(o.out);
  io::write_json_file((fs::path(o.out) / "config_echo.json").string(), config_to_json(c));
  return c;
}

int cmd_check_observability(const Options& o) {
  const auto c = load(o);
  nlohmann::json report = nlohmann::json::object();
  std::string line;
  for (Eigen::Index r = 0; r < c.plant.p(); ++r) {
    const bool ok = is_r_sparse_observable(c.plant, r, c.numeric.tol_rank);
    report[std::to_string(r)] = ok;
    if (r) line += "; ";
    line += std::to_string(r) + "-sparse observable: " + (ok ? "yes" : "no");
  }
  std::cout << line << "\n";
  io::write_json_file((fs::path(o.out) / "observability.json").string(),
                      {{"sparse_observable", report}});
  return kOk;
}

int cmd_offline_check(const Options& o) {
  const auto c = load(o);
  const auto rep = check_offline_conditions(c.plant, c.s, c.cbf, c.numeric);
  auto j = io::offline_report_to_json(rep);
  std::cout << "s = " << c.s << "\n"
            << "s-sparse observable: " << (rep.sparse_obs_ok ? "yes" : "no") << "\n"
            << "p > 2s: " << (rep.p_gt_2s ? "yes" : "no") << "\n";
  std::size_t failed = 0;
  for (const auto& [lambda, ok] : rep.cond_i)
    if (!ok) {
      ++failed;
      std::cout << "  kernel inclusion fails for Lambda = " << lambda.to_string() << "\n";
    }
  std::cout << "kernel inclusion: " << rep.cond_i.size() - failed << "/"
            << rep.cond_i.size() << " combinations pass\n"
            << "CBF feasibility: " << to_string(rep.cond_ii.kind);
  if (rep.cond_ii.witness) std::cout << " at x = " << vec_str(*rep.cond_ii.witness);
  std::cout << "\nverdict: " << (rep.verdict ? "admissible" : "not certified") << "\n";
  if (rep.p_gt_2s) {
    const auto env = worst_case_envelope(c.plant, c.s, c.numeric);
    nlohmann::json ej = nlohmann::json::array();
    for (const auto* e : env.nontrivial()) {
      nlohmann::json K = nlohmann::json::array();
      for (Eigen::Index k = 0; k < e->kernel.dim(); ++k)
        K.push_back(io::vector_to_json(e->kernel.vectors.col(k)));
      ej.push_back({{"lambda", e->lambda.indices()}, {"kernel", K}});
      std::cout << "  ambiguity: ker O" << e->lambda.to_string() << " has dimension "
                << e->kernel.dim() << "\n";
    }
    j["envelope"] = ej;
    if (env.warning) std::cout << "warning: " << *env.warning << "\n";
  }
  io::write_json_file((fs::path(o.out) / "offline_report.json").string(), j);
  return kOk;
}

int cmd_reconstruct(const Options& o) {
  const auto c = load(o);
  if (o.data.empty()) throw ConfigError("--data: required for reconstruct");
  DataWindow<double> win;
  try {
    win = io::window_from_json(io::read_json_file(o.data), c.plant.m(), c.plant.p());
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  if (win.horizon() + 1 < c.plant.n())
    std::cout << "warning: window shorter than n samples; states may be "
                 "plausible only for lack of data\n";
  const auto ps0 = plausible_initial_states(win, c.plant, c.s, c.numeric);
  const auto ps = propagate_set(ps0, c.plant, win.inputs, c.numeric);
  if (ps.all_empty())
    throw AttackModelViolated("no sensor combination is consistent with the data");
  const double tol = c.numeric.effective_dedup_tol();
  std::cout << "combinations: " << ps0.entries.size() << " (empty "
            << ps0.count(SolutionKind::Empty) << ", point "
            << ps0.count(SolutionKind::Point) << ", affine "
            << ps0.count(SolutionKind::Affine) << ")\n";
  const auto pts = distinct_points(ps0, tol);
  std::cout << "distinct plausible initial points: " << pts.size() << "\n";
  for (const auto& x : pts) std::cout << "  " << vec_str(x) << "\n";
  for (const auto& e : ps0.entries)
    if (e.solution.kind == SolutionKind::Affine)
      std::cout << "  affine " << e.gamma.to_string() << ": " << vec_str(e.solution.base)
                << " + span of " << e.solution.kernel.dim() << " direction(s)\n";
  io::write_json_file((fs::path(o.out) / "plausible_initial.json").string(),
                      io::plausible_set_to_json(ps0));
  io::write_json_file((fs::path(o.out) / "plausible_current.json").string(),
                      io::plausible_set_to_json(ps));
  return kOk;
}

int cmd_simulate(const Options& o) {
  const auto c = load(o);
  const auto t0 = std::chrono::steady_clock::now();
  const auto trace = simulate(c);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    std::ofstream csv(fs::path(o.out) / "trace.csv");
    write_trace_csv(trace, csv);
  }
  io::write_json_file((fs::path(o.out) / "trace.json").string(), io::trace_to_json(trace));

  double min_true = std::numeric_limits<double>::infinity();
  double min_fake = std::numeric_limits<double>::infinity();
  std::size_t active = 0;
  for (const auto& st : trace.steps) {
    if (st.step + 1 >= c.window) {
      min_true = std::min(min_true, st.min_margin_true());
      if (st.margin_fake.size()) min_fake = std::min(min_fake, st.min_margin_fake());
    }
    active += st.status == FilterStatus::Active;
  }
  std::cout << "steps: " << trace.steps.size() << " (" << secs << " s)\n"
            << "premise (first " << c.window << " plausible sets inside the safe set): "
            << (trace.premise_ok ? "holds" : "fails") << "\n"
            << "filter active on " << active << " steps\n"
            << "min margin after warm-up, true trajectory: " << min_true << "\n";
  if (std::isfinite(min_fake))
    std::cout << "min margin after warm-up, fake trajectory: " << min_fake << "\n";
  if (!trace.steps.empty() && trace.steps.size() > c.window - 1) {
    const auto& first = trace.steps[c.window - 1];
    std::cout << "plausible states at first reconstruction: " << first.plausible.size() << "\n";
  }
  std::cout << "termination: " << to_string(trace.termination) << "\n";
  switch (trace.termination) {
    case Termination::Completed: return kOk;
    case Termination::AttackModelViolated:
      std::cerr << "AttackModelViolated: " << trace.message << "\n";
      return kAttackModel;
    case Termination::Infeasible:
      std::cerr << "Infeasible: " << trace.message << "\n";
      return kUnsafe;
    case Termination::KernelConditionViolated:
      std::cerr << "KernelConditionViolated: " << trace.message << "\n";
      return kUnsafe;
  }
  return kOk;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidInput*>(&e))
    return kConfig;
  if (dynamic_cast<const Infeasible*>(&e) || dynamic_cast<const KernelConditionViolated*>(&e))
    return kUnsafe;
  if (dynamic_cast<const AttackModelViolated*>(&e)) return kAttackModel;
  return kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Secure state reconstruction and CBF safety filtering under sensor attacks"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "Scenario JSON")->required()->check(CLI::ExistingFile);
  app.add_option("--out", o.out, "Output directory for artifacts");
  app.add_option("--seed", o.seed, "Override attack.seed");
  app.add_option("--window", o.window, "Override the reconstruction window");
  app.add_option("--horizon", o.horizon, "Override the number of simulated steps");
  app.add_option("--halt-on-infeasible", o.halt_on_infeasible,
                 "Stop at the first uncertifiable step (false: hold zero input)");
  app.add_option("--s", o.s, "Override the attack budget s");

  auto* obs = app.add_subcommand("check-observability", "r-sparse observability for every r < p");
  auto* off = app.add_subcommand("offline-check", "Worst-case admissibility of the safe set");
  auto* rec = app.add_subcommand("reconstruct", "Plausible states from an input-output record");
  rec->add_option("--data", o.data, "Input-output JSON")->required()->check(CLI::ExistingFile);
  auto* sim = app.add_subcommand("simulate", "Closed-loop run with the safety filter");

  CLI11_PARSE(app, argc, argv);

  try {
    if (obs->parsed()) return cmd_check_observability(o);
    if (off->parsed()) return cmd_offline_check(o);
    if (rec->parsed()) return cmd_reconstruct(o);
    if (sim->parsed()) return cmd_simulate(o);
  } catch (const Error& e) {
    std::cerr << e.kind() << ": " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kNumeric;
  }
  return kOk;
}
