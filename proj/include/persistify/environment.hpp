#pragma once

#include "persistify/types.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace persistify {

/// One entry of a time-modulation matrix: offset + amp*sin(omega*t + phase).
struct SinusoidEntry {
  double offset = 0.0;
  double amp = 0.0;
  double omega = 0.0;
  double phase = 0.0;

  template <class S>
  S value(S t) const {
    using std::sin;
    if (amp == 0.0) return S(offset);
    return offset + amp * sin(omega * t + phase);
  }

  double rate(double t) const {
    return amp * omega * std::cos(omega * t + phase);
  }
};

using ModulationMatrix = std::array<std::array<SinusoidEntry, 2>, 2>;

inline ModulationMatrix identity_modulation() {
  ModulationMatrix m{};
  m[0][0].offset = 1.0;
  m[1][1].offset = 1.0;
  return m;
}

/// One lobe of a (possibly moving) Gaussian mixture: exp(-|x - M(t)*c|^2 / width).
struct GaussianComponent {
  Vec2 center{0.0, 0.0};
  double width = 1.0;  // denominator of the squared distance
  ModulationMatrix modulation = identity_modulation();

  template <class S>
  Vec2T<S> center_at(S t) const {
    Vec2T<S> c;
    c(0) = modulation[0][0].value(t) * center.x() + modulation[0][1].value(t) * center.y();
    c(1) = modulation[1][0].value(t) * center.x() + modulation[1][1].value(t) * center.y();
    return c;
  }

  Vec2 center_rate(double t) const {
    return {modulation[0][0].rate(t) * center.x() + modulation[0][1].rate(t) * center.y(),
            modulation[1][0].rate(t) * center.x() + modulation[1][1].rate(t) * center.y()};
  }
};

enum class FieldKind { GaussianMixture, BumpStations, Constant };

/// Charging field I(x,t) over the workspace, values clamped to [0,1].
struct FieldSpec {
  FieldKind kind = FieldKind::Constant;

  // gaussian-mixture-time-varying
  std::vector<GaussianComponent> components;

  // bump-stations
  std::vector<Vec2> stations;
  double radius = 0.25;
  double plateau = 1.0;
  double plateau_fraction = 0.6;  // flat top extends to plateau_fraction*radius

  // constant
  double constant_value = 0.5;

  void validate() const;

  /// The two-lobe moving mixture used by the exploration scenario.
  static FieldSpec paper_exploration();
  static FieldSpec constant(double value);
  static FieldSpec single_gaussian(const Vec2& center, double width = 1.0);
};

inline void FieldSpec::validate() const {
  switch (kind) {
    case FieldKind::GaussianMixture:
      if (components.empty()) throw std::invalid_argument("field: mixture needs at least one component");
      for (const auto& c : components) {
        if (!(c.width > 0.0)) throw std::invalid_argument("field: component width must be positive");
      }
      break;
    case FieldKind::BumpStations:
      if (stations.empty()) throw std::invalid_argument("field: bump-stations needs at least one station");
      if (!(radius > 0.0)) throw std::invalid_argument("field: station radius must be positive");
      if (!(plateau > 0.0 && plateau <= 1.0)) throw std::invalid_argument("field: plateau must be in (0,1]");
      if (!(plateau_fraction > 0.0 && plateau_fraction < 1.0)) {
        throw std::invalid_argument("field: plateau_fraction must be in (0,1)");
      }
      break;
    case FieldKind::Constant:
      if (!(constant_value >= 0.0 && constant_value <= 1.0)) {
        throw std::invalid_argument("field: constant value must be in [0,1]");
      }
      break;
  }
}

inline FieldSpec FieldSpec::paper_exploration() {
  FieldSpec f;
  f.kind = FieldKind::GaussianMixture;
  GaussianComponent c1;
  c1.center = Vec2(1.0, 1.0);
  c1.modulation = ModulationMatrix{};
  c1.modulation[0][0] = SinusoidEntry{-1.0, 0.0, 0.0, 0.0};
  c1.modulation[1][1] = SinusoidEntry{0.0, 1.0, 2.0, 0.0};
  GaussianComponent c2;
  c2.center = Vec2(1.0, 1.0);
  c2.modulation = ModulationMatrix{};
  c2.modulation[0][0] = SinusoidEntry{0.0, 1.0, 2.0, 0.0};
  c2.modulation[1][1] = SinusoidEntry{1.0, 0.0, 0.0, 0.0};
  f.components = {c1, c2};
  return f;
}

inline FieldSpec FieldSpec::constant(double value) {
  FieldSpec f;
  f.kind = FieldKind::Constant;
  f.constant_value = value;
  return f;
}

inline FieldSpec FieldSpec::single_gaussian(const Vec2& center, double width) {
  FieldSpec f;
  f.kind = FieldKind::GaussianMixture;
  GaussianComponent c;
  c.center = center;
  c.width = width;
  f.components = {c};
  return f;
}

namespace detail {

// Smooth compact-support bump: plateau for r <= r0, exp(1 - 1/(1-s^2)) taper
// on r0 < r < R with s = (r-r0)/(R-r0), zero for r >= R.
template <class S>
S bump_profile(S r, double r0, double radius, double plateau) {
  using std::exp;
  if (r <= r0) return S(plateau);
  if (r >= radius) return S(0.0);
  const S s = (r - r0) / (radius - r0);
  const S one_minus_s2 = 1.0 - s * s;
  return plateau * exp(1.0 - 1.0 / one_minus_s2);
}

template <class S>
S raw_field(const FieldSpec& f, const Vec2T<S>& x, S t) {
  using std::exp;
  using std::sqrt;
  switch (f.kind) {
    case FieldKind::Constant:
      return S(f.constant_value);
    case FieldKind::GaussianMixture: {
      S total(0.0);
      for (const auto& comp : f.components) {
        const Vec2T<S> c = comp.center_at(t);
        const S dx = x(0) - c(0);
        const S dy = x(1) - c(1);
        total += exp(-(dx * dx + dy * dy) / comp.width);
      }
      return total;
    }
    case FieldKind::BumpStations: {
      const double r0 = f.plateau_fraction * f.radius;
      S total(0.0);
      for (const auto& st : f.stations) {
        const S dx = x(0) - st.x();
        const S dy = x(1) - st.y();
        const S r2 = dx * dx + dy * dy;
        if (r2 >= f.radius * f.radius) continue;
        total += bump_profile(sqrt(r2), r0, f.radius, f.plateau);
      }
      return total;
    }
  }
  return S(0.0);
}

}  // namespace detail

/// I(x,t), clamped into [0,1]. Total in (x,t); out-of-workspace points
/// evaluate the same formula.
template <class S>
S eval_field(const FieldSpec& f, const Vec2T<S>& x, S t) {
  const S raw = detail::raw_field(f, x, t);
  if (raw >= 1.0) return S(1.0);
  if (raw <= 0.0) return S(0.0);
  return raw;
}

inline double eval_field(const FieldSpec& f, const Vec2& x, double t) {
  return eval_field<double>(f, x, t);
}

struct FieldGradients {
  Vec2 dI_dx{0.0, 0.0};
  double dI_dt = 0.0;
};

/// Analytic partial derivatives of the clamped field; zero wherever the
/// clamp is engaged.
inline FieldGradients field_gradients(const FieldSpec& f, const Vec2& x, double t) {
  FieldGradients g;
  switch (f.kind) {
    case FieldKind::Constant:
      return g;
    case FieldKind::GaussianMixture: {
      double raw = 0.0;
      Vec2 dx_total = Vec2::Zero();
      double dt_total = 0.0;
      for (const auto& comp : f.components) {
        const Vec2 c = comp.center_at<double>(t);
        const Vec2 cdot = comp.center_rate(t);
        const Vec2 d = x - c;
        const double val = std::exp(-d.squaredNorm() / comp.width);
        raw += val;
        dx_total += val * (-2.0 / comp.width) * d;
        dt_total += val * (2.0 / comp.width) * d.dot(cdot);
      }
      if (raw >= 1.0 || raw <= 0.0) return g;
      g.dI_dx = dx_total;
      g.dI_dt = dt_total;
      return g;
    }
    case FieldKind::BumpStations: {
      const double r0 = f.plateau_fraction * f.radius;
      double raw = 0.0;
      Vec2 dx_total = Vec2::Zero();
      for (const auto& st : f.stations) {
        const Vec2 d = x - st;
        const double r = d.norm();
        if (r >= f.radius) continue;
        raw += detail::bump_profile(r, r0, f.radius, f.plateau);
        if (r <= r0 || r == 0.0) continue;
        const double s = (r - r0) / (f.radius - r0);
        const double one_minus_s2 = 1.0 - s * s;
        const double val = f.plateau * std::exp(1.0 - 1.0 / one_minus_s2);
        const double db_ds = val * (-2.0 * s / (one_minus_s2 * one_minus_s2));
        dx_total += (db_ds / (f.radius - r0)) * (d / r);
      }
      if (raw >= 1.0 || raw <= 0.0) return g;
      g.dI_dx = dx_total;
      return g;
    }
  }
  return g;
}

enum class DensityKind { Gaussian, Constant };

/// Static information density phi(x) > 0 over the workspace (unnormalized).
struct InfoDensity {
  DensityKind kind = DensityKind::Constant;
  Vec2 center{0.0, 0.0};
  double sigma2 = 0.1;
  double value = 1.0;

  void validate() const {
    if (kind == DensityKind::Gaussian && !(sigma2 > 0.0)) {
      throw std::invalid_argument("density: sigma2 must be positive");
    }
    if (kind == DensityKind::Constant && !(value > 0.0)) {
      throw std::invalid_argument("density: constant value must be positive");
    }
  }

  static InfoDensity gaussian(const Vec2& center, double sigma2) {
    InfoDensity d;
    d.kind = DensityKind::Gaussian;
    d.center = center;
    d.sigma2 = sigma2;
    return d;
  }

  static InfoDensity constant(double value) {
    InfoDensity d;
    d.kind = DensityKind::Constant;
    d.value = value;
    return d;
  }
};

inline double eval_density(const InfoDensity& d, const Vec2& x) {
  if (d.kind == DensityKind::Constant) return d.value;
  return std::exp(-(x - d.center).squaredNorm() / d.sigma2);
}

}  // namespace persistify
