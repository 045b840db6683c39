#include "secbf/attack.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "secbf/reconstruction.hpp"

namespace secbf {

void AttackConfig::validate(const LtiSystem<double>& sys, int s) const {
  if (static_cast<int>(attacked.size()) > s)
    throw InvalidInput("attack: " + std::to_string(attacked.size()) +
                       " attacked sensors exceed the budget s = " +
                       std::to_string(s));
  for (int i : attacked)
    if (i < 1 || i > sys.p()) throw InvalidInput("attack: sensor index out of range");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw InvalidInput("attack: noise_std must be finite and >= 0");
  if (const auto* f = std::get_if<FakeState>(&strategy)) {
    if (f->x_fake.size() != sys.n())
      throw InvalidInput("attack: x_fake must have n entries");
  } else if (const auto* sc = std::get_if<ScriptedAttack>(&strategy)) {
    for (const auto& e : sc->e) {
      if (e.size() != sys.p())
        throw InvalidInput("attack: scripted e(tau) must have p entries");
      for (Eigen::Index i = 0; i < e.size(); ++i)
        if (e(i) != 0.0 && !attacked.contains(static_cast<int>(i) + 1))
          throw InvalidInput("attack: script corrupts a sensor outside the attacked set");
    }
  }
}

VectorXd step_plant(const LtiSystem<double>& sys, const VectorXd& x,
                    const VectorXd& u) {
  if (x.size() != sys.n() || u.size() != sys.m())
    throw InvalidInput("step_plant: dimension mismatch");
  return sys.A() * x + sys.B() * u;
}

VectorXd measure(const LtiSystem<double>& sys, const VectorXd& x_true,
                 const VectorXd* x_fake, const AttackConfig& cfg, Rng& rng,
                 std::size_t step) {
  VectorXd y = sys.C() * x_true;
  if (std::holds_alternative<FakeState>(cfg.strategy)) {
    if (!x_fake) throw InvalidInput("measure: fake-state attack needs the fake state");
    const VectorXd yf = sys.C() * *x_fake;
    for (int i : cfg.attacked) y(i - 1) = yf(i - 1);
  } else if (const auto* sc = std::get_if<ScriptedAttack>(&cfg.strategy)) {
    if (step >= sc->e.size())
      throw InvalidInput("measure: attack script exhausted at step " +
                         std::to_string(step));
    for (int i : cfg.attacked) y(i - 1) += sc->e[step](i - 1);
  }
  if (cfg.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, cfg.noise_std);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += noise(rng);
  }
  return y;
}

const char* to_string(FilterStatus s) {
  switch (s) {
    case FilterStatus::Warmup: return "warmup";
    case FilterStatus::Pass: return "pass";
    case FilterStatus::Active: return "active";
    case FilterStatus::HoldZero: return "hold_zero";
    case FilterStatus::Infeasible: return "infeasible";
    case FilterStatus::AttackModelViolated: return "attack_model_violated";
    case FilterStatus::KernelConditionViolated: return "kernel_condition_violated";
  }
  return "?";
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::Infeasible: return "infeasible";
    case Termination::AttackModelViolated: return "attack_model_violated";
    case Termination::KernelConditionViolated: return "kernel_condition_violated";
  }
  return "?";
}

double SimStep::min_margin_true() const { return margin_true.minCoeff(); }

double SimStep::min_margin_fake() const {
  return margin_fake.size() ? margin_fake.minCoeff()
                            : std::numeric_limits<double>::quiet_NaN();
}

namespace {

// Keeps the first failure; later ones only show in the per-step status.
void record_failure(SimTrace& trace, Termination t, const char* what) {
  if (trace.termination != Termination::Completed) return;
  trace.termination = t;
  trace.message = what;
}

}  // namespace

SimTrace run_scenario(const LtiSystem<double>& sys,
                      const PolyhedralCbf<double>& cbf, const VectorXd& x_true0,
                      const AttackConfig& attack, const NominalInput& nominal,
                      const ScenarioOptions& opts,
                      const NumericConfig<double>& cfg) {
  cbf.validate(sys.n());
  attack.validate(sys, opts.s);
  if (x_true0.size() != sys.n()) throw InvalidInput("run_scenario: x_true0 must have n entries");
  if (opts.window < 1 || opts.horizon < opts.window)
    throw InvalidInput("run_scenario: need horizon >= window >= 1");
  if (opts.s < 0 || opts.s >= sys.p()) throw InvalidInput("run_scenario: need 0 <= s < p");

  SimTrace trace;
  trace.dt = opts.dt;
  trace.n = sys.n();
  trace.m = sys.m();
  trace.p = sys.p();

  Rng rng(attack.seed);
  VectorXd x = x_true0;
  const auto* fake = std::get_if<FakeState>(&attack.strategy);
  VectorXd xf = fake ? fake->x_fake : VectorXd();
  const auto w = opts.window;

  MatrixXd inputs(sys.m(), static_cast<Eigen::Index>(opts.horizon));
  MatrixXd outputs(sys.p(), static_cast<Eigen::Index>(opts.horizon));
  const double dedup = cfg.effective_dedup_tol();

  for (std::size_t tau = 0; tau < opts.horizon; ++tau) {
    SimStep st;
    st.step = tau;
    st.x_true = x;
    st.x_fake = xf;
    st.margin_true = cbf_margin(cbf, x);
    if (fake) st.margin_fake = cbf_margin(cbf, xf);
    st.y = measure(sys, x, fake ? &xf : nullptr, attack, rng, tau);
    outputs.col(static_cast<Eigen::Index>(tau)) = st.y;
    st.u_nom = nominal(tau);
    if (st.u_nom.size() != sys.m())
      throw InvalidInput("run_scenario: nominal input must have m entries");

    bool halt = false;
    if (tau + 1 < w) {
      st.u = opts.warmup_nominal ? st.u_nom : VectorXd::Zero(sys.m());
      st.status = FilterStatus::Warmup;
    } else {
      const std::size_t start = tau + 1 - w;
      DataWindow<double> win;
      win.start_time = start;
      win.outputs = outputs.middleCols(static_cast<Eigen::Index>(start),
                                       static_cast<Eigen::Index>(w));
      win.inputs = inputs.middleCols(static_cast<Eigen::Index>(start),
                                     static_cast<Eigen::Index>(w - 1));
      const auto ps0 = plausible_initial_states(win, sys, opts.s, cfg);

      if (!trace.premise_checked) {
        // Plausible sets at the first w steps must all lie in the safe set.
        trace.premise_checked = true;
        trace.premise_ok = true;
        for (std::size_t k = 0; k < w && trace.premise_ok; ++k) {
          const auto psk = propagate_set(
              ps0, sys, MatrixXd(win.inputs.leftCols(static_cast<Eigen::Index>(k))), cfg);
          trace.premise_ok = containment_check(psk, cbf, sys, cfg);
        }
      }

      const auto ps = propagate_set(ps0, sys, win.inputs, cfg);
      st.plausible = representatives(ps, dedup);
      try {
        const auto res = safe_control(st.u_nom, ps, sys, cbf, cfg);
        st.u = res.u;
        st.status = res.modified ? FilterStatus::Active : FilterStatus::Pass;
      } catch (const Infeasible& e) {
        st.status = FilterStatus::Infeasible;
        record_failure(trace, Termination::Infeasible, e.what());
        halt = opts.halt_on_infeasible;
      } catch (const AttackModelViolated& e) {
        st.status = FilterStatus::AttackModelViolated;
        record_failure(trace, Termination::AttackModelViolated, e.what());
        halt = opts.halt_on_infeasible;
      } catch (const KernelConditionViolated& e) {
        st.status = FilterStatus::KernelConditionViolated;
        record_failure(trace, Termination::KernelConditionViolated, e.what());
        halt = opts.halt_on_infeasible;
      }
      if (st.u.size() == 0) {
        st.u = VectorXd::Zero(sys.m());
        if (!halt) st.status = FilterStatus::HoldZero;
      }
    }

    inputs.col(static_cast<Eigen::Index>(tau)) = st.u;
    trace.steps.push_back(std::move(st));
    if (halt) break;
    const VectorXd& u = trace.steps.back().u;
    x = step_plant(sys, x, u);
    if (fake) xf = step_plant(sys, xf, u);
  }
  return trace;
}

namespace {

void put(std::ostream& os, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  os << ',' << buf;
}

}  // namespace

void write_trace_csv(const SimTrace& trace, std::ostream& os) {
  os << "step,time_s";
  for (Eigen::Index i = 1; i <= trace.n; ++i) os << ",x" << i;
  for (Eigen::Index i = 1; i <= trace.n; ++i) os << ",fake_x" << i;
  for (Eigen::Index i = 1; i <= trace.m; ++i) os << ",u_nom_" << i;
  for (Eigen::Index i = 1; i <= trace.m; ++i) os << ",u_" << i;
  for (Eigen::Index i = 1; i <= trace.p; ++i) os << ",y_" << i;
  os << ",n_plausible,min_margin_true,min_margin_fake,filter_status\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& st : trace.steps) {
    os << st.step;
    put(os, static_cast<double>(st.step) * trace.dt);
    for (Eigen::Index i = 0; i < trace.n; ++i) put(os, st.x_true(i));
    for (Eigen::Index i = 0; i < trace.n; ++i)
      put(os, st.x_fake.size() ? st.x_fake(i) : nan);
    for (Eigen::Index i = 0; i < trace.m; ++i) put(os, st.u_nom(i));
    for (Eigen::Index i = 0; i < trace.m; ++i) put(os, st.u(i));
    for (Eigen::Index i = 0; i < trace.p; ++i) put(os, st.y(i));
    os << ',' << st.plausible.size();
    put(os, st.min_margin_true());
    put(os, st.min_margin_fake());
    os << ',' << to_string(st.status) << '\n';
  }
}

}  // namespace secbf
