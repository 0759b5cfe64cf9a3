#pragma once

#include "persistify/energy.hpp"
#include "persistify/environment.hpp"
#include "persistify/types.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace persistify {

enum class RowKind { CbfHard, ClfRelaxable };

/// One affine inequality a.dot(u) <= b on a robot's control input.
/// CLF rows additionally carry the implicit -delta on the left-hand side.
struct ConstraintRow {
  Eigen::VectorXd a;
  double b = 0.0;
  RowKind kind = RowKind::CbfHard;
  int robot = 0;
  bool degenerate = false;  // |a| below the row epsilon
};

struct CascadeGains {
  double gamma1 = 1.0;
  double gamma2 = 1.0;

  void validate() const {
    if (!(gamma1 > 0.0 && gamma2 > 0.0)) {
      throw std::invalid_argument("persistence: cascade gains must be positive");
    }
  }
};

/// Band barrier h1(E) = (e_chg - E)(E - e_min) >= 0 on [e_min, e_chg].
inline double cbf_h1(double E, const EnergyParams& p) {
  return (p.e_chg - E) * (E - p.e_min);
}

/// Recharge Lyapunov function V(E) = (e_chg - E)^2.
inline double clf_V(double E, const EnergyParams& p) {
  const double d = p.e_chg - E;
  return d * d;
}

/// First cascade level of the band barrier, h2 = Lf h1 + gamma1 h1.
inline double cbf_h2(double E, double Edot, double gamma1, const EnergyParams& p) {
  const double c1 = p.e_chg + p.e_min - 2.0 * E;
  return c1 * Edot + gamma1 * cbf_h1(E, p);
}

/// All analytic ingredients of the band-barrier row (single integrator,
/// input on position only).
struct CbfTerms {
  double h1 = 0.0;
  double lf_h1 = 0.0;        // (e_chg + e_min - 2E) F
  double h2 = 0.0;           // lf_h1 + gamma1 h1
  double dh2_dt = 0.0;       // (e_chg + e_min - 2E) k dw/dI dI/dt
  double lf2_h1 = 0.0;       // (-2F + (e_chg + e_min - 2E) dF/dE) F
  Vec2 lg_lf_h1{0.0, 0.0};   // (e_chg + e_min - 2E) k dw/dI dI/dx
};

inline CbfTerms cbf_terms(const AugmentedState& z, const FieldSpec& field,
                          const EnergyParams& e, double gamma1, double t) {
  const double I = eval_field(field, z.x, t);
  const FieldGradients g = field_gradients(field, z.x, t);
  const EnergySample es = sample_energy(e, z.E, I);
  const double c1 = e.e_chg + e.e_min - 2.0 * z.E;
  CbfTerms out;
  out.h1 = cbf_h1(z.E, e);
  out.lf_h1 = c1 * es.Edot;
  out.h2 = out.lf_h1 + gamma1 * out.h1;
  out.dh2_dt = c1 * es.dF_dw_dw_dI * g.dI_dt;
  out.lf2_h1 = (-2.0 * es.Edot + c1 * es.dF_dE) * es.Edot;
  out.lg_lf_h1 = c1 * es.dF_dw_dw_dI * g.dI_dx;
  return out;
}

/// Hard row keeping E inside [e_min, e_chg]:
///   -LgLf h1 . u <= dh2/dt + Lf^2 h1 + gamma1 Lf h1 + gamma2 h2.
inline ConstraintRow build_cbf_row(const AugmentedState& z, const FieldSpec& field,
                                   const EnergyParams& e, const CascadeGains& gains,
                                   double t, int robot = 0, double eps_row = 1e-10) {
  const CbfTerms terms = cbf_terms(z, field, e, gains.gamma1, t);
  ConstraintRow row;
  row.kind = RowKind::CbfHard;
  row.robot = robot;
  row.a = -terms.lg_lf_h1;
  row.b = terms.dh2_dt + terms.lf2_h1 + gains.gamma1 * terms.lf_h1 + gains.gamma2 * terms.h2;
  row.degenerate = row.a.norm() < eps_row;
  return row;
}

/// Analytic ingredients of the recharge row. The cascade base is
/// h = -Lf V = 2 (e_chg - E) F, the set where V is nonincreasing.
struct ClfTerms {
  double V = 0.0;
  double h = 0.0;            // -Lf V
  double dh_dt = 0.0;        // 2 (e_chg - E) k dw/dI dI/dt
  double lf2_V = 0.0;        // (2F - 2 (e_chg - E) dF/dE) F
  Vec2 lg_lf_V{0.0, 0.0};    // -2 (e_chg - E) k dw/dI dI/dx
};

inline ClfTerms clf_terms(const AugmentedState& z, const FieldSpec& field,
                          const EnergyParams& e, double t) {
  const double I = eval_field(field, z.x, t);
  const FieldGradients g = field_gradients(field, z.x, t);
  const EnergySample es = sample_energy(e, z.E, I);
  const double c2 = e.e_chg - z.E;
  ClfTerms out;
  out.V = c2 * c2;
  out.h = 2.0 * c2 * es.Edot;
  out.dh_dt = 2.0 * c2 * es.dF_dw_dw_dI * g.dI_dt;
  out.lf2_V = (2.0 * es.Edot - 2.0 * c2 * es.dF_dE) * es.Edot;
  out.lg_lf_V = -2.0 * c2 * es.dF_dw_dw_dI * g.dI_dx;
  return out;
}

/// Relaxable row driving E to e_chg:
///   LgLf V . u - delta <= dh/dt - Lf^2 V + gamma2 h,  h = -Lf V.
inline ConstraintRow build_clf_row(const AugmentedState& z, const FieldSpec& field,
                                   const EnergyParams& e, double gamma2, double t,
                                   int robot = 0, double eps_row = 1e-10) {
  const ClfTerms terms = clf_terms(z, field, e, t);
  ConstraintRow row;
  row.kind = RowKind::ClfRelaxable;
  row.robot = robot;
  row.a = terms.lg_lf_V;
  row.b = terms.dh_dt - terms.lf2_V + gamma2 * terms.h;
  row.degenerate = row.a.norm() < eps_row;
  return row;
}

enum class ChargeBranch { Charging, Discharging };

/// Relaxation weight schedule: the charging branch kappa_max*sqrt(1-E^2)
/// dominates the discharging branch kappa_max*(1-sqrt(1-(E-1)^2)) pointwise,
/// so a robot that has started charging keeps its recharge row expensive to
/// relax until the battery is full.
inline double kappa(double E, ChargeBranch branch, double kappa_max) {
  const double e = std::min(std::max(E, 0.0), 1.0);
  if (branch == ChargeBranch::Charging) {
    return kappa_max * std::sqrt(1.0 - e * e);
  }
  const double d = e - 1.0;
  return kappa_max * (1.0 - std::sqrt(1.0 - d * d));
}

/// Per-robot hysteresis for the kappa branch and the recharge-row activation.
/// The latch engages when a charging episode is underway (recharge row
/// active) and the battery has risen over a full step; it releases when the
/// battery is full or has been draining for release_steps consecutive steps.
struct ChargeLatch {
  bool engaged = false;
  int discharge_streak = 0;

  void update(double delta_E, double E_new, bool clf_active, const EnergyParams& p,
              int release_steps) {
    constexpr double kTiny = 1e-14;
    if (E_new >= p.e_chg - 1e-3) {
      engaged = false;
      discharge_streak = 0;
      return;
    }
    if (delta_E > kTiny) {
      discharge_streak = 0;
      if (clf_active) engaged = true;
    } else if (delta_E < -kTiny) {
      ++discharge_streak;
      if (discharge_streak >= release_steps) {
        engaged = false;
      }
    }
  }

  ChargeBranch branch() const {
    return engaged ? ChargeBranch::Charging : ChargeBranch::Discharging;
  }
};

/// Persistence-layer configuration shared by the simulator and the CLI.
struct PersistenceParams {
  bool enabled = true;
  CascadeGains cbf_gains{};
  double clf_gamma = 1.0;
  bool clf_enabled = true;
  double kappa_max = 100.0;
  double e_activation_fraction = 0.1;  // recharge row arms below e_min + frac*(e_chg - e_min)
  double eps_row = 1e-10;
  double eps_vacuous = 1e-8;
  int latch_release_steps = 5;

  void validate() const {
    cbf_gains.validate();
    if (!(clf_gamma > 0.0)) throw std::invalid_argument("persistence: clf_gamma must be positive");
    if (!(kappa_max > 0.0)) throw std::invalid_argument("persistence: kappa_max must be positive");
    if (!(e_activation_fraction > 0.0 && e_activation_fraction < 1.0)) {
      throw std::invalid_argument("persistence: e_activation_fraction must be in (0,1)");
    }
    if (latch_release_steps < 1) {
      throw std::invalid_argument("persistence: latch_release_steps must be >= 1");
    }
  }

  double e_activation(const EnergyParams& e) const {
    return e.e_min + e_activation_fraction * (e.e_chg - e.e_min);
  }
};

}  // namespace persistify
