#include "persistify/ergodic.hpp"

#include <cmath>
#include <stdexcept>

namespace persistify {

namespace {

constexpr double kPi = 3.14159265358979323846;

double basis_norm(const Eigen::Vector2i& k, const Workspace& ws) {
  const Vec2 L = ws.extent();
  const double n1 = (k.x() == 0) ? L.x() : 0.5 * L.x();
  const double n2 = (k.y() == 0) ? L.y() : 0.5 * L.y();
  return std::sqrt(n1 * n2);
}

}  // namespace

double fourier_basis(const Eigen::Vector2i& k, const Vec2& x, const Workspace& ws) {
  const Vec2 L = ws.extent();
  const double a1 = k.x() * kPi * (x.x() - ws.lower.x()) / L.x();
  const double a2 = k.y() * kPi * (x.y() - ws.lower.y()) / L.y();
  return std::cos(a1) * std::cos(a2) / basis_norm(k, ws);
}

Vec2 fourier_basis_grad(const Eigen::Vector2i& k, const Vec2& x, const Workspace& ws) {
  const Vec2 L = ws.extent();
  const double w1 = k.x() * kPi / L.x();
  const double w2 = k.y() * kPi / L.y();
  const double a1 = w1 * (x.x() - ws.lower.x());
  const double a2 = w2 * (x.y() - ws.lower.y());
  const double hk = basis_norm(k, ws);
  return {-w1 * std::sin(a1) * std::cos(a2) / hk, -w2 * std::cos(a1) * std::sin(a2) / hk};
}

ErgodicState make_ergodic_state(const Workspace& ws, int K, const InfoDensity& density,
                                int n_robots, const Eigen::Vector2i& quad) {
  if (K < 1) throw std::invalid_argument("ergodic: K must be >= 1");
  if (n_robots < 1) throw std::invalid_argument("ergodic: need at least one robot");
  ErgodicState s;
  s.ws = ws;
  s.K = K;
  s.n_robots = n_robots;
  const int n = K * K;
  s.lambda.resize(n);
  s.phi_k = Eigen::VectorXd::Zero(n);
  s.fk_integral = Eigen::VectorXd::Zero(n);

  for (int idx = 0; idx < n; ++idx) {
    const Eigen::Vector2i k = s.mode(idx);
    const double xi2 = static_cast<double>(k.x() * k.x() + k.y() * k.y());
    s.lambda(idx) = 1.0 / std::pow(1.0 + xi2, 1.5);
  }

  // Midpoint quadrature of the density against each mode; the density is then
  // rescaled so its DC coefficient matches the trajectory DC mode exactly.
  const Vec2 L = ws.extent();
  const double dx = L.x() / quad.x();
  const double dy = L.y() / quad.y();
  double phi_total = 0.0;
  for (int i = 0; i < quad.x(); ++i) {
    for (int j = 0; j < quad.y(); ++j) {
      const Vec2 xc(ws.lower.x() + (i + 0.5) * dx, ws.lower.y() + (j + 0.5) * dy);
      const double phi = eval_density(density, xc) * dx * dy;
      phi_total += phi;
      for (int idx = 0; idx < n; ++idx) {
        s.phi_k(idx) += phi * fourier_basis(s.mode(idx), xc, ws);
      }
    }
  }
  if (!(phi_total > 0.0)) throw std::invalid_argument("ergodic: density integrates to zero");
  s.phi_k /= phi_total;
  return s;
}

void ergodic_reset(ErgodicState& s, const std::vector<Vec2>& positions) {
  if (static_cast<int>(positions.size()) != s.n_robots) {
    throw std::invalid_argument("ergodic: position count mismatch");
  }
  s.fk_integral.setZero();
  s.elapsed = 0.0;
  s.initial_positions = positions;
}

void ergodic_accumulate(ErgodicState& s, const std::vector<Vec2>& x_old,
                        const std::vector<Vec2>& x_new, double dt) {
  const int n = s.K * s.K;
  for (int idx = 0; idx < n; ++idx) {
    const Eigen::Vector2i k = s.mode(idx);
    double acc = 0.0;
    for (size_t i = 0; i < x_old.size(); ++i) {
      acc += 0.5 * (fourier_basis(k, x_old[i], s.ws) + fourier_basis(k, x_new[i], s.ws));
    }
    s.fk_integral(idx) += dt * acc;
  }
  s.elapsed += dt;
}

Eigen::VectorXd ErgodicState::coefficients() const {
  const int n = K * K;
  Eigen::VectorXd c(n);
  if (elapsed <= 0.0) {
    if (initial_positions.empty()) {
      throw std::logic_error("ergodic: state not reset");
    }
    c.setZero();
    for (int idx = 0; idx < n; ++idx) {
      for (const Vec2& x : initial_positions) c(idx) += fourier_basis(mode(idx), x, ws);
    }
    c /= static_cast<double>(n_robots);
    return c;
  }
  return fk_integral / (static_cast<double>(n_robots) * elapsed);
}

double ergodic_metric_from(const ErgodicState& s, const Eigen::VectorXd& c) {
  return (s.lambda.array() * (c - s.phi_k).array().square()).sum();
}

double ergodic_metric(const ErgodicState& s) {
  if (!(s.elapsed > 0.0)) {
    throw std::domain_error("ergodic: metric undefined at zero elapsed time");
  }
  return ergodic_metric_from(s, s.coefficients());
}

Vec2 ergodic_nominal_input(const ErgodicState& s, const Vec2& x, double u_max) {
  const Eigen::VectorXd c = s.coefficients();
  Vec2 B = Vec2::Zero();
  const int n = s.K * s.K;
  for (int idx = 0; idx < n; ++idx) {
    B += s.lambda(idx) * (c(idx) - s.phi_k(idx)) * fourier_basis_grad(s.mode(idx), x, s.ws);
  }
  const double norm = B.norm();
  if (norm < 1e-9) return Vec2::Zero();
  return -(u_max / norm) * B;
}

}  // namespace persistify
