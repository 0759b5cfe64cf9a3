#include <doctest.h>

#include "persistify/cascade.hpp"
#include "persistify/energy.hpp"
#include "persistify/environment.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace persistify;

namespace {

// chain of integrators: xdot_i = x_{i+1}, xdot_n = u
template <class S>
Eigen::Matrix<S, Eigen::Dynamic, 1> chain_drift(const Eigen::Matrix<S, Eigen::Dynamic, 1>& x) {
  Eigen::Matrix<S, Eigen::Dynamic, 1> f(x.size());
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) f(i) = x(i + 1);
  f(x.size() - 1) = S(0.0);
  return f;
}

Eigen::MatrixXd chain_input(Eigen::Index n) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, 1);
  g(n - 1, 0) = 1.0;
  return g;
}

// elementary symmetric polynomials e_0..e_m of the gains
std::vector<double> elementary_symmetric(const std::vector<double>& g) {
  std::vector<double> e(g.size() + 1, 0.0);
  e[0] = 1.0;
  for (double gamma : g) {
    for (size_t i = e.size() - 1; i >= 1; --i) e[i] += gamma * e[i - 1];
  }
  return e;
}

struct HandDerivatives {
  // h and its first four derivatives, all functions of x1 alone
  double h, d1, d2, d3, d4;
};

// exact Lie derivatives of h(x1) along the chain drift, up to order 4
// (missing states beyond the chain length enter with coefficient zero)
std::vector<double> lie_powers(const HandDerivatives& d, const Eigen::VectorXd& x, int rho) {
  const auto st = [&](int i) { return i < x.size() ? x(i) : 0.0; };
  const double x2 = st(1), x3 = st(2), x4 = st(3), x5 = st(4);
  std::vector<double> lf(static_cast<size_t>(rho) + 1, 0.0);
  lf[0] = d.h;
  if (rho >= 1) lf[1] = d.d1 * x2;
  if (rho >= 2) lf[2] = d.d2 * x2 * x2 + d.d1 * x3;
  if (rho >= 3) lf[3] = d.d3 * x2 * x2 * x2 + 3.0 * d.d2 * x2 * x3 + d.d1 * x4;
  if (rho >= 4) {
    lf[4] = d.d4 * x2 * x2 * x2 * x2 + 6.0 * d.d3 * x2 * x2 * x3 + 3.0 * d.d2 * x3 * x3 +
            4.0 * d.d2 * x2 * x4 + d.d1 * x5;
  }
  return lf;
}

// closed-form combination-sum row for a chain of length rho:
//   a = -h'(x1),  b = Lf^rho h + sum_i e_i(gains_1..rho-1) Lf^{rho-i} h
//                     + gamma_rho * sum_j e_{rho-1-j} Lf^j h
struct ClosedFormRow {
  double a, b;
};

ClosedFormRow closed_form_row(const HandDerivatives& d, const Eigen::VectorXd& x,
                              const std::vector<double>& gains) {
  const int rho = static_cast<int>(gains.size());
  const std::vector<double> lf = lie_powers(d, x, rho);
  std::vector<double> lower(gains.begin(), gains.end() - 1);
  const std::vector<double> e = elementary_symmetric(lower);
  double b = lf[static_cast<size_t>(rho)];
  for (int i = 1; i <= rho - 1; ++i) {
    b += e[static_cast<size_t>(i)] * lf[static_cast<size_t>(rho - i)];
  }
  double h_rho = 0.0;
  for (int j = 0; j <= rho - 1; ++j) {
    h_rho += e[static_cast<size_t>(rho - 1 - j)] * lf[static_cast<size_t>(j)];
  }
  b += gains.back() * h_rho;
  return {-d.d1, b};
}

HandDerivatives poly_h(const Eigen::VectorXd& x) {
  // h(x1) = 1 - x1^2
  const double x1 = x(0);
  return {1.0 - x1 * x1, -2.0 * x1, -2.0, 0.0, 0.0};
}

HandDerivatives trig_h(const Eigen::VectorXd& x) {
  // h(x1) = sin(x1) + 0.5 x1
  const double x1 = x(0);
  return {std::sin(x1) + 0.5 * x1, std::cos(x1) + 0.5, -std::sin(x1), -std::cos(x1),
          std::sin(x1)};
}

}  // namespace

TEST_CASE("double integrator row matches the hand expansion") {
  const auto sys = make_cascade_system(
      [](const auto& x, auto) { return chain_drift(x); },
      [](const Eigen::VectorXd& x, double) { return chain_input(x.size()); },
      [](const auto& x, auto) { return 1.0 - x(0) * x(0); }, 2, {1.0, 1.0});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x(2);
    x << u(rng), u(rng);
    if (std::abs(x(0)) < 0.05) continue;  // the row normal vanishes at x1 = 0
    const ConstraintRow row = generic_cascade(sys, x, 0.0);
    // hand expansion: a = 2 x1, b = -2 x2^2 + gamma1 (-2 x1 x2) + gamma2 h2
    const double h2 = -2.0 * x(0) * x(1) + (1.0 - x(0) * x(0));
    const double b = -2.0 * x(1) * x(1) - 2.0 * x(0) * x(1) + h2;
    CHECK(row.a(0) == doctest::Approx(2.0 * x(0)).epsilon(1e-10));
    CHECK(row.b == doctest::Approx(b).epsilon(1e-10));
  }
}

TEST_CASE("relative degree one reduces to the plain barrier row") {
  // single integrator, h = 1 - |x|^2: a = -grad h, b = gamma h
  const auto sys = make_cascade_system(
      [](const auto& x, auto) {
        Eigen::Matrix<std::decay_t<decltype(x(0))>, Eigen::Dynamic, 1> f(x.size());
        f.setZero();
        return f;
      },
      [](const Eigen::VectorXd&, double) { return Eigen::MatrixXd::Identity(2, 2); },
      [](const auto& x, auto) { return 1.0 - x(0) * x(0) - x(1) * x(1); }, 1, {0.7});
  Eigen::VectorXd x(2);
  x << 0.3, -0.4;
  const ConstraintRow row = generic_cascade(sys, x, 0.0);
  CHECK(row.a(0) == doctest::Approx(2.0 * x(0)).epsilon(1e-12));
  CHECK(row.a(1) == doctest::Approx(2.0 * x(1)).epsilon(1e-12));
  CHECK(row.b == doctest::Approx(0.7 * (1.0 - x.squaredNorm())).epsilon(1e-12));
}

TEST_CASE("recursion equals the closed-form combination sum on chains, rho = 2..4") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.5, 1.5), ug(0.3, 2.5);
  for (int rho = 2; rho <= 4; ++rho) {
    for (int trial = 0; trial < 40; ++trial) {
      Eigen::VectorXd x(rho);
      for (int i = 0; i < rho; ++i) x(i) = u(rng);
      if (std::abs(x(0)) < 0.05) x(0) = 0.5;
      std::vector<double> gains;
      for (int i = 0; i < rho; ++i) gains.push_back(ug(rng));

      for (int which = 0; which < 2; ++which) {
        const auto hand = which == 0 ? poly_h(x) : trig_h(x);
        ConstraintRow row;
        if (which == 0) {
          const auto sys = make_cascade_system(
              [](const auto& xs, auto) { return chain_drift(xs); },
              [](const Eigen::VectorXd& xs, double) { return chain_input(xs.size()); },
              [](const auto& xs, auto) { return 1.0 - xs(0) * xs(0); }, rho, gains);
          row = generic_cascade(sys, x, 0.0);
        } else {
          const auto sys = make_cascade_system(
              [](const auto& xs, auto) { return chain_drift(xs); },
              [](const Eigen::VectorXd& xs, double) { return chain_input(xs.size()); },
              [](const auto& xs, auto) {
                using std::sin;
                return sin(xs(0)) + 0.5 * xs(0);
              },
              rho, gains);
          row = generic_cascade(sys, x, 0.0);
        }
        const ClosedFormRow cf = closed_form_row(hand, x, gains);
        CHECK(std::abs(row.a(0) - cf.a) / (1.0 + std::abs(cf.a)) < 1e-6);
        CHECK(std::abs(row.b - cf.b) / (1.0 + std::abs(cf.b)) < 1e-6);
      }
    }
  }
}

TEST_CASE("declared relative degree must match the system") {
  Eigen::VectorXd x(2);
  x << 0.4, 0.7;
  // too high: the input shows up before the last level
  const auto too_high = make_cascade_system(
      [](const auto& xs, auto) { return chain_drift(xs); },
      [](const Eigen::VectorXd& xs, double) { return chain_input(xs.size()); },
      [](const auto& xs, auto) { return 1.0 - xs(0) * xs(0); }, 3, {1.0, 1.0, 1.0});
  CHECK_THROWS_WITH_AS(generic_cascade(too_high, x, 0.0), "relative degree mismatch",
                       std::runtime_error);
  // too low: the final level never sees the input
  const auto too_low = make_cascade_system(
      [](const auto& xs, auto) { return chain_drift(xs); },
      [](const Eigen::VectorXd& xs, double) { return chain_input(xs.size()); },
      [](const auto& xs, auto) { return 1.0 - xs(0) * xs(0); }, 1, {1.0});
  CHECK_THROWS_WITH_AS(generic_cascade(too_low, x, 0.0), "relative degree mismatch",
                       std::runtime_error);
}

TEST_CASE("lyapunov mode on a double integrator matches the hand expansion") {
  // V = x1^2, rho(V) = 2: row is the barrier condition on h = -LfV = -2 x1 x2
  const double gamma = 1.3;
  const auto sys = make_cascade_system(
      [](const auto& x, auto) { return chain_drift(x); },
      [](const Eigen::VectorXd& x, double) { return chain_input(x.size()); },
      [](const auto& x, auto) { return x(0) * x(0); }, 2, {gamma}, /*lyapunov=*/true);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd x(2);
    x << u(rng), u(rng);
    if (std::abs(x(0)) < 0.05) continue;
    const ConstraintRow row = generic_cascade(sys, x, 0.0);
    // -Lf^2 V - LgLfV u + gamma h >= 0 with LfV = 2 x1 x2:
    // Lf^2 V = 2 x2^2 (drift), LgLfV = 2 x1
    CHECK(row.kind == RowKind::ClfRelaxable);
    CHECK(row.a(0) == doctest::Approx(2.0 * x(0)).epsilon(1e-10));
    CHECK(row.b == doctest::Approx(-2.0 * x(1) * x(1) + gamma * (-2.0 * x(0) * x(1)))
                       .epsilon(1e-9));
  }
}

TEST_CASE("cascade on the energy system reproduces the analytic rows") {
  // independent route to the closed-form row ingredients: push duals through
  // the actual field and battery models
  EnergyParams e;
  e.k = 0.05;
  const FieldSpec field = FieldSpec::paper_exploration();
  const CascadeGains gains{0.9, 1.1};

  const auto drift = [&](const auto& z, auto t) {
    using S = std::decay_t<decltype(z(0))>;
    Eigen::Matrix<S, Eigen::Dynamic, 1> f(3);
    f(0) = S(0.0);
    f(1) = S(0.0);
    Vec2T<S> x;
    x << z(0), z(1);
    f(2) = eval_F<S>(e, z(2), eval_field<S>(field, x, t));
    return f;
  };
  const auto input = [](const Eigen::VectorXd&, double) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 2);
    g(0, 0) = 1.0;
    g(1, 1) = 1.0;
    return g;
  };

  const auto barrier_sys = make_cascade_system(
      drift, input,
      [&](const auto& z, auto) { return (e.e_chg - z(2)) * (z(2) - e.e_min); }, 2,
      {gains.gamma1, gains.gamma2});

  const auto clf_sys = make_cascade_system(
      drift, input,
      [&](const auto& z, auto) { return (e.e_chg - z(2)) * (e.e_chg - z(2)); }, 2, {1.2},
      /*lyapunov=*/true);

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> ux(-1.3, 1.3), uy(-0.9, 0.9), ue(0.3, 0.8),
      ut(0.0, 6.0);
  int checked = 0;
  for (int i = 0; i < 200; ++i) {
    const AugmentedState z{Vec2(ux(rng), uy(rng)), ue(rng)};
    const double t = ut(rng);
    const ConstraintRow ref = build_cbf_row(z, field, e, gains, t);
    if (ref.a.norm() < 1e-6) continue;  // keep clear of the degree-check threshold
    Eigen::VectorXd zs(3);
    zs << z.x.x(), z.x.y(), z.E;
    const ConstraintRow got = generic_cascade(barrier_sys, zs, t);
    CHECK(std::abs(got.a(0) - ref.a(0)) < 1e-9 * (1.0 + std::abs(ref.a(0))));
    CHECK(std::abs(got.a(1) - ref.a(1)) < 1e-9 * (1.0 + std::abs(ref.a(1))));
    CHECK(std::abs(got.b - ref.b) < 1e-9 * (1.0 + std::abs(ref.b)));

    const ConstraintRow clf_ref = build_clf_row(z, field, e, 1.2, t);
    if (clf_ref.a.norm() >= 1e-6) {
      const ConstraintRow clf_got = generic_cascade(clf_sys, zs, t);
      CHECK(std::abs(clf_got.a(0) - clf_ref.a(0)) < 1e-9 * (1.0 + std::abs(clf_ref.a(0))));
      CHECK(std::abs(clf_got.a(1) - clf_ref.a(1)) < 1e-9 * (1.0 + std::abs(clf_ref.a(1))));
      CHECK(std::abs(clf_got.b - clf_ref.b) < 1e-9 * (1.0 + std::abs(clf_ref.b)));
    }
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("cascade rejects malformed setups") {
  const auto sys = make_cascade_system(
      [](const auto& x, auto) { return chain_drift(x); },
      [](const Eigen::VectorXd& x, double) { return chain_input(x.size()); },
      [](const auto& x, auto) { return 1.0 - x(0) * x(0); }, 2, {1.0});  // gain count wrong
  Eigen::VectorXd x(2);
  x << 0.4, 0.2;
  CHECK_THROWS_AS(generic_cascade(sys, x, 0.0), std::invalid_argument);
}
