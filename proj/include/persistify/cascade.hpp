#pragma once

#include "persistify/dual.hpp"
#include "persistify/persistence.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace persistify {

/// High-relative-degree cascade over a user-supplied control-affine system.
///
/// The callables are generic in the scalar type so the builder can push
/// nested forward-mode duals through them; no analytic derivatives are
/// required:
///   f    : (Vector<S>, S)      -> Vector<S>   drift
///   g    : (VectorXd, double)  -> MatrixXd    input matrix (queried at the
///                                             evaluation point only)
///   base : (Vector<S>, S)      -> S           barrier h1, or Lyapunov V
///
/// With `lyapunov` set, the cascade runs on h1 = -(dV/dt + LfV) and the
/// declared relative degree is that of V; the resulting row stabilizes the
/// system to the minimum of V.
template <class F, class G, class H>
struct GenericCascadeSystem {
  F f;
  G g;
  H base;
  int relative_degree = 2;
  std::vector<double> gains;  // one linear class-K slope per cascade level
  bool lyapunov = false;
  double zero_tol = 1e-7;  // |Lg h_n| threshold for the degree check
};

template <class F, class G, class H>
GenericCascadeSystem<F, G, H> make_cascade_system(F f, G g, H base, int relative_degree,
                                                  std::vector<double> gains,
                                                  bool lyapunov = false) {
  return GenericCascadeSystem<F, G, H>{std::move(f), std::move(g), std::move(base),
                                       relative_degree, std::move(gains), lyapunov};
}

namespace detail {

constexpr int kMaxCascadeDepth = 8;

template <class S>
using VecS = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// h_1 at a generic point; in Lyapunov mode this spends one dual level on
// -(dV/dt + grad(V).f).
template <class S, int Budget, class Sys>
S cascade_base(const Sys& sys, const VecS<S>& x, S t) {
  if constexpr (Budget <= 0) {
    throw std::logic_error("cascade: depth budget exhausted");
  } else {
    if (!sys.lyapunov) return sys.base(x, t);
    using D = Dual<S>;
    const VecS<S> fx = sys.f(x, t);
    VecS<D> xd(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) xd(i) = D(x(i), fx(i));
    const D val = sys.base(xd, D(t, S(1.0)));
    return -val.d;
  }
}

// h_n by the recursion h_{n+1} = hdot_n + gamma_n h_n, where hdot_n is taken
// along the drift plus explicit time (valid below the relative degree).
template <class S, int Budget, class Sys>
S cascade_h(const Sys& sys, int n, const VecS<S>& x, S t) {
  if (n <= 1) return cascade_base<S, Budget>(sys, x, t);
  if constexpr (Budget <= 0) {
    throw std::logic_error("cascade: depth budget exhausted");
  } else {
    using D = Dual<S>;
    const VecS<S> fx = sys.f(x, t);
    VecS<D> xd(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) xd(i) = D(x(i), fx(i));
    const D val = cascade_h<D, Budget - 1>(sys, n - 1, xd, D(t, S(1.0)));
    return val.d + sys.gains[static_cast<size_t>(n - 2)] * val.v;
  }
}

// Derivative of h_n along an arbitrary state direction (and optional time
// rate), evaluated at a plain double point.
template <class Sys>
double cascade_directional(const Sys& sys, int n, const Eigen::VectorXd& x, double t,
                           const Eigen::VectorXd& dir, double t_rate) {
  using D = Dual<double>;
  VecS<D> xd(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) xd(i) = D(x(i), dir(i));
  return cascade_h<D, kMaxCascadeDepth>(sys, n, xd, D(t, t_rate)).d;
}

}  // namespace detail

/// Builds the affine row realizing the cascade condition
///   hdot_rho + gamma_rho h_rho >= 0
/// as a.dot(u) <= b, after verifying numerically that the input does not
/// appear before the declared relative degree.
template <class Sys>
ConstraintRow generic_cascade(const Sys& sys, const Eigen::VectorXd& x, double t) {
  const int rho = sys.lyapunov ? sys.relative_degree - 1 : sys.relative_degree;
  if (rho < 1 || rho > detail::kMaxCascadeDepth - 1) {
    throw std::invalid_argument("cascade: relative degree out of range");
  }
  if (sys.gains.size() != static_cast<size_t>(rho)) {
    throw std::invalid_argument("cascade: need one gain per cascade level");
  }
  for (double gamma : sys.gains) {
    if (!(gamma > 0.0)) throw std::invalid_argument("cascade: gains must be positive");
  }

  const Eigen::MatrixXd gx = sys.g(x, t);
  if (gx.rows() != x.size()) {
    throw std::invalid_argument("cascade: g(x) row count must match the state dimension");
  }
  const Eigen::Index m = gx.cols();

  // The input must stay invisible until the last level.
  for (int n = 1; n < rho; ++n) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const double lg = detail::cascade_directional(sys, n, x, t, gx.col(j), 0.0);
      if (std::abs(lg) > sys.zero_tol) {
        throw std::runtime_error("relative degree mismatch");
      }
    }
  }

  ConstraintRow row;
  row.a.resize(m);
  double max_lg = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double lg = detail::cascade_directional(sys, rho, x, t, gx.col(j), 0.0);
    row.a(j) = -lg;
    max_lg = std::max(max_lg, std::abs(lg));
  }
  if (max_lg <= sys.zero_tol) {
    throw std::runtime_error("relative degree mismatch");
  }

  const double h_rho = detail::cascade_h<double, detail::kMaxCascadeDepth>(
      sys, rho, Eigen::VectorXd(x), t);
  const double drift = detail::cascade_directional(sys, rho, x, t, sys.f(x, t), 1.0);
  row.b = drift + sys.gains.back() * h_rho;
  row.kind = sys.lyapunov ? RowKind::ClfRelaxable : RowKind::CbfHard;
  return row;
}

}  // namespace persistify
