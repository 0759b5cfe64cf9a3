#pragma once

#include "persistify/coverage.hpp"
#include "persistify/energy.hpp"
#include "persistify/environment.hpp"
#include "persistify/ergodic.hpp"
#include "persistify/persistence.hpp"
#include "persistify/qp.hpp"
#include "persistify/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace persistify {

enum class IntegratorKind { Euler, Rk4 };
enum class TaskKind { Explore, Coverage, None };

struct TaskParams {
  TaskKind kind = TaskKind::Explore;
  int K = 10;           // explore: modes per axis
  double u_max = 0.3;   // explore: nominal speed
  double kp = 1.0;      // coverage: Lloyd gain
  Eigen::Vector2i grid{120, 90};

  void validate() const {
    if (K < 1) throw std::invalid_argument("task: K must be >= 1");
    if (!(u_max > 0.0)) throw std::invalid_argument("task: u_max must be positive");
    if (!(kp > 0.0)) throw std::invalid_argument("task: kp must be positive");
    if (grid.x() < 2 || grid.y() < 2) throw std::invalid_argument("task: grid too coarse");
  }
};

struct SimParams {
  int n_robots = 1;
  double dt = 0.02;
  double T = 100.0;
  IntegratorKind integrator = IntegratorKind::Euler;
  std::uint64_t seed = 1;
  std::vector<AugmentedState> initial_states;  // empty: sampled from the seed
  std::optional<double> u_max;                 // post-QP speed saturation

  void validate() const {
    if (n_robots < 1) throw std::invalid_argument("sim: n_robots must be >= 1");
    if (!(dt > 0.0)) throw std::invalid_argument("sim: dt must be positive");
    if (!(T >= 0.0)) throw std::invalid_argument("sim: T must be nonnegative");
    if (!initial_states.empty() &&
        static_cast<int>(initial_states.size()) != n_robots) {
      throw std::invalid_argument("sim: initial state count must match n_robots");
    }
    if (u_max && !(*u_max > 0.0)) throw std::invalid_argument("sim: u_max must be positive");
  }
};

struct SimConfig {
  Workspace workspace;
  FieldSpec field = FieldSpec::constant(0.5);
  InfoDensity density = InfoDensity::constant(1.0);
  EnergyParams energy;
  PersistenceParams persistence;
  TaskParams task;
  SimParams sim;

  void validate() const {
    workspace.validate();
    field.validate();
    density.validate();
    energy.validate();
    persistence.validate();
    task.validate();
    sim.validate();
  }
};

enum class SimEventKind { DegenerateRowDropped, CbfInfeasible, QpInfeasible, EnergyClamped };

const char* to_string(SimEventKind k);

struct SimEvent {
  long step = 0;
  double t = 0.0;
  int robot = 0;
  SimEventKind kind = SimEventKind::DegenerateRowDropped;
};

struct RobotRecord {
  Vec2 x{0, 0};
  double E = 0.0;
  Vec2 u_hat{0, 0};
  Vec2 u{0, 0};
  double delta = 0.0;
  double h1 = 0.0;
  double h2 = 0.0;
  QpStatus qp_status = QpStatus::Optimal;
  std::vector<int> active_rows;
};

struct StepRecord {
  double t = 0.0;
  std::vector<RobotRecord> robots;
  double metric = 0.0;
  double C = 0.0;  // cumulative squared deviation from the nominal input
};

struct SimTrace {
  std::string metric_name;  // "ergodic_eps" or "loc_cost"
  std::vector<StepRecord> records;
  std::vector<SimEvent> events;

  int n_robots() const {
    return records.empty() ? 0 : static_cast<int>(records.front().robots.size());
  }
};

/// Raised when a step produces a non-finite state.
struct SimFatalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class TaskController;

/// Steps the compound robot+energy dynamics under the persistified loop:
/// nominal input, constraint rows, per-robot QPs, integration, bookkeeping.
class Simulator {
 public:
  explicit Simulator(const SimConfig& cfg);
  ~Simulator();

  const std::vector<AugmentedState>& states() const { return states_; }
  double time() const { return t_; }
  long step_index() const { return step_; }
  const std::vector<SimEvent>& events() const { return events_; }
  const std::string& metric_name() const { return metric_name_; }

  /// Record the current instant (controls evaluated, not applied) and advance
  /// one dt. Returns the record for the instant that was left.
  StepRecord step();

  /// Record the current instant without advancing (used for the final row).
  StepRecord snapshot();

 private:
  struct Controls;
  Controls compute_controls();
  StepRecord record_from(const Controls& c);
  void apply(const Controls& c);

  SimConfig cfg_;
  std::vector<AugmentedState> states_;
  std::vector<ChargeLatch> latches_;
  double t_ = 0.0;
  long step_ = 0;
  double cum_dev_ = 0.0;
  double prev_dev_rate_ = 0.0;
  bool have_prev_dev_ = false;
  std::vector<SimEvent> events_;
  std::string metric_name_;
  std::unique_ptr<TaskController> task_;
};

/// Runs the configured horizon; the trace has ceil(T/dt) + 1 records and is a
/// deterministic function of the config (including the seed).
SimTrace run(const SimConfig& cfg);

/// C(t) = integral of |u - u_hat|^2, trapezoidal over the trace records.
std::vector<double> cumulative_deviation(const SimTrace& trace);

struct ClfComparison {
  double c_with = 0.0;
  double c_without = 0.0;
  double ratio = 0.0;
  SimTrace with_clf;
  SimTrace without_clf;
};

/// Same scenario and seed, recharge row on vs. off.
ClfComparison compare_clf(const SimConfig& cfg);

}  // namespace persistify
