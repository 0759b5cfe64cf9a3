#pragma once

#include "persistify/dual.hpp"

#include <cmath>
#include <stdexcept>

namespace persistify {

/// Battery model parameters. Energy is dimensionless in (0,1).
struct EnergyParams {
  double k = 0.05;      // charge/discharge rate (1/time)
  double lambda = 3.0;  // sigmoid sharpness
  double i_c = 0.85;    // field threshold separating charge from discharge
  double e_min = 0.2;   // lower band edge
  double e_chg = 0.9;   // upper band edge (full-charge target)

  void validate() const {
    if (!(k > 0.0)) throw std::invalid_argument("energy: k must be positive");
    if (!(lambda > 0.0)) throw std::invalid_argument("energy: lambda must be positive");
    if (!(i_c > 0.0 && i_c < 1.0)) throw std::invalid_argument("energy: i_c must be in (0,1)");
    if (!(e_min > 0.0 && e_min < e_chg && e_chg <= 1.0)) {
      throw std::invalid_argument("energy: need 0 < e_min < e_chg <= 1");
    }
  }
};

namespace detail {
inline void check_energy_domain(double E) {
  if (!(E > 0.0 && E < 1.0)) {
    throw std::domain_error("energy: E must lie strictly inside (0,1)");
  }
}
}  // namespace detail

/// Sigmoid mixing term w(E,I) = 1 / (1 + ((1-E)/E) e^{-lambda (I - I_c)}).
/// Evaluated as E / (E + (1-E) e^{-lambda (I - I_c)}), the same expression in
/// a form that stays finite as E -> 0. w = E exactly when I = I_c.
template <class S>
S eval_w(const EnergyParams& p, S E, S I) {
  using std::exp;
  detail::check_energy_domain(scalar_value(E));
  const S r = exp(-p.lambda * (I - p.i_c));
  return E / (E + (1.0 - E) * r);
}

/// Battery rate Edot = F(E,I) = k (w - E). sign(F) = sign(I - I_c).
template <class S>
S eval_F(const EnergyParams& p, S E, S I) {
  return p.k * (eval_w(p, E, I) - E);
}

struct EnergyPartials {
  double dw_dI = 0.0;  // w^2 ((1-E)/E) lambda e^{-lambda(I-I_c)}
  double dF_dE = 0.0;  // k (dw/dE - 1), dw/dE = w^2 e^{-lambda(I-I_c)} / E^2
};

inline EnergyPartials energy_partials(const EnergyParams& p, double E, double I) {
  detail::check_energy_domain(E);
  const double r = std::exp(-p.lambda * (I - p.i_c));
  const double w = E / (E + (1.0 - E) * r);
  EnergyPartials out;
  out.dw_dI = w * w * ((1.0 - E) / E) * p.lambda * r;
  out.dF_dE = p.k * (w * w * r / (E * E) - 1.0);
  return out;
}

/// Everything the constraint builder consumes at one (E, I) point.
struct EnergySample {
  double E = 0.0;
  double I = 0.0;
  double w = 0.0;
  double Edot = 0.0;        // F(E, I)
  double dF_dE = 0.0;
  double dF_dw_dw_dI = 0.0;  // k * dw/dI
};

inline EnergySample sample_energy(const EnergyParams& p, double E, double I) {
  EnergySample s;
  s.E = E;
  s.I = I;
  s.w = eval_w<double>(p, E, I);
  s.Edot = p.k * (s.w - E);
  const EnergyPartials partials = energy_partials(p, E, I);
  s.dF_dE = partials.dF_dE;
  s.dF_dw_dw_dI = p.k * partials.dw_dI;
  return s;
}

}  // namespace persistify
