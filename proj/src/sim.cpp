#include "persistify/sim.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace persistify {

namespace {
constexpr double kEnergyFloor = 1e-4;

double clamp_energy(double E) {
  return std::min(std::max(E, kEnergyFloor), 1.0 - kEnergyFloor);
}
}  // namespace

const char* to_string(SimEventKind k) {
  switch (k) {
    case SimEventKind::DegenerateRowDropped: return "degenerate-row-dropped";
    case SimEventKind::CbfInfeasible: return "cbf-infeasible";
    case SimEventKind::QpInfeasible: return "qp-infeasible";
    case SimEventKind::EnergyClamped: return "energy-clamped";
  }
  return "?";
}

/// Produces nominal inputs and the task metric for one scenario.
class TaskController {
 public:
  virtual ~TaskController() = default;
  virtual void reset(const std::vector<AugmentedState>& states) = 0;
  virtual std::vector<Vec2> nominal(const std::vector<AugmentedState>& states, double t) = 0;
  virtual void post_step(const std::vector<Vec2>& x_old, const std::vector<Vec2>& x_new,
                         double dt) = 0;
  virtual double metric(const std::vector<AugmentedState>& states, double t) = 0;
  virtual const char* metric_name() const = 0;
};

namespace {

class ExploreController final : public TaskController {
 public:
  ExploreController(const SimConfig& cfg)
      : state_(make_ergodic_state(cfg.workspace, cfg.task.K, cfg.density, cfg.sim.n_robots)),
        u_max_(cfg.task.u_max) {}

  void reset(const std::vector<AugmentedState>& states) override {
    std::vector<Vec2> pos;
    pos.reserve(states.size());
    for (const auto& s : states) pos.push_back(s.x);
    ergodic_reset(state_, pos);
  }

  std::vector<Vec2> nominal(const std::vector<AugmentedState>& states, double) override {
    std::vector<Vec2> u(states.size());
    for (size_t i = 0; i < states.size(); ++i) {
      u[i] = ergodic_nominal_input(state_, states[i].x, u_max_);
    }
    return u;
  }

  void post_step(const std::vector<Vec2>& x_old, const std::vector<Vec2>& x_new,
                 double dt) override {
    ergodic_accumulate(state_, x_old, x_new, dt);
  }

  double metric(const std::vector<AugmentedState>&, double) override {
    return ergodic_metric_from(state_, state_.coefficients());
  }

  const char* metric_name() const override { return "ergodic_eps"; }

  const ErgodicState& state() const { return state_; }

 private:
  ErgodicState state_;
  double u_max_;
};

class CoverageController final : public TaskController {
 public:
  CoverageController(const SimConfig& cfg)
      : state_(make_coverage_state(cfg.workspace, cfg.task.grid, cfg.task.kp, cfg.density)) {}

  void reset(const std::vector<AugmentedState>&) override { cached_t_ = -1.0; }

  std::vector<Vec2> nominal(const std::vector<AugmentedState>& states, double t) override {
    solve_at(states, t);
    std::vector<Vec2> u(states.size());
    for (size_t i = 0; i < states.size(); ++i) {
      u[i] = state_.kp * (cached_.centroid[i] - states[i].x);
    }
    return u;
  }

  void post_step(const std::vector<Vec2>&, const std::vector<Vec2>&, double) override {}

  double metric(const std::vector<AugmentedState>& states, double t) override {
    solve_at(states, t);
    return cached_.cost;
  }

  const char* metric_name() const override { return "loc_cost"; }

 private:
  // nominal() and metric() run at the same instant each step; share the pass
  void solve_at(const std::vector<AugmentedState>& states, double t) {
    if (t == cached_t_) return;
    std::vector<Vec2> pos;
    pos.reserve(states.size());
    for (const auto& s : states) pos.push_back(s.x);
    cached_ = solve_coverage(state_, pos);
    cached_t_ = t;
  }

  CoverageState state_;
  CoverageSolution cached_;
  double cached_t_ = -1.0;
};

class NullController final : public TaskController {
 public:
  void reset(const std::vector<AugmentedState>&) override {}
  std::vector<Vec2> nominal(const std::vector<AugmentedState>& states, double) override {
    return std::vector<Vec2>(states.size(), Vec2::Zero());
  }
  void post_step(const std::vector<Vec2>&, const std::vector<Vec2>&, double) override {}
  double metric(const std::vector<AugmentedState>&, double) override { return 0.0; }
  const char* metric_name() const override { return "metric"; }
};

std::unique_ptr<TaskController> make_task(const SimConfig& cfg) {
  switch (cfg.task.kind) {
    case TaskKind::Explore: return std::make_unique<ExploreController>(cfg);
    case TaskKind::Coverage: return std::make_unique<CoverageController>(cfg);
    case TaskKind::None: return std::make_unique<NullController>();
  }
  throw std::invalid_argument("sim: unknown task kind");
}

std::vector<AugmentedState> sample_initial_states(const SimConfig& cfg) {
  if (!cfg.sim.initial_states.empty()) return cfg.sim.initial_states;
  std::mt19937_64 rng(cfg.sim.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double e_lo = cfg.energy.e_min + 0.1;
  const double e_hi = cfg.energy.e_chg - 0.1;
  std::vector<AugmentedState> out(static_cast<size_t>(cfg.sim.n_robots));
  for (auto& s : out) {
    s.x.x() = cfg.workspace.lower.x() + unit(rng) * cfg.workspace.extent().x();
    s.x.y() = cfg.workspace.lower.y() + unit(rng) * cfg.workspace.extent().y();
    s.E = e_lo + unit(rng) * (e_hi - e_lo);
  }
  return out;
}

}  // namespace

struct Simulator::Controls {
  std::vector<Vec2> u_hat;
  std::vector<Vec2> u;
  std::vector<double> delta;
  std::vector<double> h1, h2;
  std::vector<QpStatus> status;
  std::vector<std::vector<int>> active;
  double dev_rate = 0.0;  // sum_i |u_i - u_hat_i|^2
};

Simulator::Simulator(const SimConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  if (!cfg_.sim.initial_states.empty()) {
    for (const auto& s : cfg_.sim.initial_states) {
      if (!(s.E > 0.0 && s.E < 1.0)) {
        throw std::invalid_argument("sim: initial energies must lie in (0,1)");
      }
    }
  }
  states_ = sample_initial_states(cfg_);
  latches_.assign(states_.size(), ChargeLatch{});
  task_ = make_task(cfg_);
  task_->reset(states_);
  metric_name_ = task_->metric_name();
}

Simulator::~Simulator() = default;

Simulator::Controls Simulator::compute_controls() {
  Controls c;
  c.u_hat = task_->nominal(states_, t_);
  const int n = static_cast<int>(states_.size());
  c.u.resize(static_cast<size_t>(n));
  c.delta.assign(static_cast<size_t>(n), 0.0);
  c.h1.resize(static_cast<size_t>(n));
  c.h2.resize(static_cast<size_t>(n));
  c.status.assign(static_cast<size_t>(n), QpStatus::Optimal);
  c.active.resize(static_cast<size_t>(n));

  const auto& pp = cfg_.persistence;
  std::vector<QpProblem> problems(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const AugmentedState& z = states_[static_cast<size_t>(i)];
    c.h1[static_cast<size_t>(i)] = cbf_h1(z.E, cfg_.energy);
    const CbfTerms terms = cbf_terms(z, cfg_.field, cfg_.energy, pp.cbf_gains.gamma1, t_);
    c.h2[static_cast<size_t>(i)] = terms.h2;

    QpProblem& qp = problems[static_cast<size_t>(i)];
    qp.u_hat = c.u_hat[static_cast<size_t>(i)];
    qp.u_max = cfg_.sim.u_max;
    const bool clf_active =
        pp.enabled && pp.clf_enabled &&
        (z.E < pp.e_activation(cfg_.energy) || latches_[static_cast<size_t>(i)].engaged);
    qp.kappa = kappa(z.E, latches_[static_cast<size_t>(i)].branch(), pp.kappa_max);
    if (qp.kappa <= 0.0) qp.kappa = 1e-9;  // branch endpoints reach zero exactly

    if (pp.enabled) {
      ConstraintRow cbf = build_cbf_row(z, cfg_.field, cfg_.energy, pp.cbf_gains, t_, i, pp.eps_row);
      if (cbf.degenerate) {
        if (cbf.b < -pp.eps_vacuous) {
          events_.push_back({step_, t_, i, SimEventKind::CbfInfeasible});
        }
        // vacuous or unactionable either way; the QP proceeds without it
      } else {
        qp.rows.push_back(std::move(cbf));
      }
      if (clf_active) {
        ConstraintRow clf = build_clf_row(z, cfg_.field, cfg_.energy, pp.clf_gamma, t_, i, pp.eps_row);
        if (clf.degenerate) {
          events_.push_back({step_, t_, i, SimEventKind::DegenerateRowDropped});
        } else {
          qp.rows.push_back(std::move(clf));
        }
      }
    }
  }

  const std::vector<QpSolution> sols = solve_joint_qp(problems);
  for (int i = 0; i < n; ++i) {
    const QpSolution& s = sols[static_cast<size_t>(i)];
    c.u[static_cast<size_t>(i)] = s.u;
    c.delta[static_cast<size_t>(i)] = s.delta;
    c.status[static_cast<size_t>(i)] = s.status;
    c.active[static_cast<size_t>(i)] = s.active_set;
    if (s.status == QpStatus::Infeasible) {
      events_.push_back({step_, t_, i, SimEventKind::QpInfeasible});
    }
    c.dev_rate += (s.u - c.u_hat[static_cast<size_t>(i)]).squaredNorm();
  }
  return c;
}

StepRecord Simulator::record_from(const Controls& c) {
  StepRecord rec;
  rec.t = t_;
  rec.metric = task_->metric(states_, t_);
  if (have_prev_dev_) {
    cum_dev_ += 0.5 * cfg_.sim.dt * (prev_dev_rate_ + c.dev_rate);
  }
  prev_dev_rate_ = c.dev_rate;
  have_prev_dev_ = true;
  rec.C = cum_dev_;
  rec.robots.resize(states_.size());
  for (size_t i = 0; i < states_.size(); ++i) {
    RobotRecord& r = rec.robots[i];
    r.x = states_[i].x;
    r.E = states_[i].E;
    r.u_hat = c.u_hat[i];
    r.u = c.u[i];
    r.delta = c.delta[i];
    r.h1 = c.h1[i];
    r.h2 = c.h2[i];
    r.qp_status = c.status[i];
    r.active_rows = c.active[i];
  }
  return rec;
}

void Simulator::apply(const Controls& c) {
  const double dt = cfg_.sim.dt;
  std::vector<Vec2> x_old(states_.size());
  std::vector<Vec2> x_new(states_.size());

  for (size_t i = 0; i < states_.size(); ++i) {
    AugmentedState& z = states_[i];
    x_old[i] = z.x;
    const Vec2 u = c.u[i];

    const auto rate = [&](const Vec2& x, double E, double time) {
      const double I = eval_field(cfg_.field, x, time);
      return eval_F<double>(cfg_.energy, clamp_energy(E), I);
    };

    double e_next;
    if (cfg_.sim.integrator == IntegratorKind::Euler) {
      e_next = z.E + dt * rate(z.x, z.E, t_);
    } else {
      const double k1 = rate(z.x, z.E, t_);
      const double k2 = rate(z.x + 0.5 * dt * u, z.E + 0.5 * dt * k1, t_ + 0.5 * dt);
      const double k3 = rate(z.x + 0.5 * dt * u, z.E + 0.5 * dt * k2, t_ + 0.5 * dt);
      const double k4 = rate(z.x + dt * u, z.E + dt * k3, t_ + dt);
      e_next = z.E + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }

    const Vec2 x_next = z.x + dt * u;
    const double e_clamped = clamp_energy(e_next);
    if (e_clamped != e_next) {
      events_.push_back({step_, t_, static_cast<int>(i), SimEventKind::EnergyClamped});
    }
    if (!std::isfinite(x_next.x()) || !std::isfinite(x_next.y()) || !std::isfinite(e_next)) {
      std::ostringstream oss;
      oss << "sim: non-finite state at step " << step_ << " t=" << t_ << " robot " << i
          << " x=(" << z.x.x() << "," << z.x.y() << ") E=" << z.E << " u=(" << u.x() << ","
          << u.y() << ")";
      throw SimFatalError(oss.str());
    }

    const double delta_E = e_clamped - z.E;
    const bool clf_active =
        cfg_.persistence.enabled && cfg_.persistence.clf_enabled &&
        (z.E < cfg_.persistence.e_activation(cfg_.energy) || latches_[i].engaged);
    z.x = x_next;
    z.E = e_clamped;
    x_new[i] = x_next;
    latches_[i].update(delta_E, z.E, clf_active, cfg_.energy,
                       cfg_.persistence.latch_release_steps);
  }

  task_->post_step(x_old, x_new, dt);
  ++step_;
  t_ = static_cast<double>(step_) * dt;  // avoids accumulation drift
}

StepRecord Simulator::step() {
  const Controls c = compute_controls();
  StepRecord rec = record_from(c);
  apply(c);
  return rec;
}

StepRecord Simulator::snapshot() {
  const Controls c = compute_controls();
  return record_from(c);
}

SimTrace run(const SimConfig& cfg) {
  Simulator sim(cfg);
  SimTrace trace;
  trace.metric_name = sim.metric_name();
  const long n_steps = static_cast<long>(std::ceil(cfg.sim.T / cfg.sim.dt - 1e-9));
  trace.records.reserve(static_cast<size_t>(std::max(0L, n_steps)) + 1);
  for (long j = 0; j < n_steps; ++j) {
    trace.records.push_back(sim.step());
  }
  trace.records.push_back(sim.snapshot());
  trace.events = sim.events();
  return trace;
}

std::vector<double> cumulative_deviation(const SimTrace& trace) {
  std::vector<double> out(trace.records.size(), 0.0);
  double acc = 0.0;
  double prev_rate = 0.0;
  for (size_t j = 0; j < trace.records.size(); ++j) {
    double rate = 0.0;
    for (const auto& r : trace.records[j].robots) {
      rate += (r.u - r.u_hat).squaredNorm();
    }
    if (j > 0) {
      const double dt = trace.records[j].t - trace.records[j - 1].t;
      acc += 0.5 * dt * (prev_rate + rate);
    }
    prev_rate = rate;
    out[j] = acc;
  }
  return out;
}

ClfComparison compare_clf(const SimConfig& cfg) {
  ClfComparison out;
  SimConfig with = cfg;
  with.persistence.clf_enabled = true;
  SimConfig without = cfg;
  without.persistence.clf_enabled = false;
  out.with_clf = run(with);
  out.without_clf = run(without);
  out.c_with = out.with_clf.records.back().C;
  out.c_without = out.without_clf.records.back().C;
  if (out.c_without > 0.0) {
    out.ratio = out.c_with / out.c_without;
  } else {
    out.ratio = out.c_with == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace persistify
