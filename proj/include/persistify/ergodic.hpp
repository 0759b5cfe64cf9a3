#pragma once

#include "persistify/environment.hpp"
#include "persistify/types.hpp"

#include <Eigen/Dense>

#include <vector>

namespace persistify {

/// Cosine basis element f_k, orthonormal in L2 over the workspace:
/// f_k(x) = (1/h_k) cos(k1 pi (x1-l1)/L1) cos(k2 pi (x2-l2)/L2).
double fourier_basis(const Eigen::Vector2i& k, const Vec2& x, const Workspace& ws);
Vec2 fourier_basis_grad(const Eigen::Vector2i& k, const Vec2& x, const Workspace& ws);

/// Spectral bookkeeping for the exploration task: target coefficients of the
/// information density, weights Lambda_k = (1 + |k|^2)^{-3/2}, and running
/// integrals of the basis along all robot trajectories.
struct ErgodicState {
  Workspace ws;
  int K = 10;          // modes per axis, K^2 total
  int n_robots = 1;
  Eigen::VectorXd lambda;       // K^2 weights
  Eigen::VectorXd phi_k;        // K^2 target coefficients (DC-matched)
  Eigen::VectorXd fk_integral;  // sum_i integral of f_k(x_i(tau)) dtau
  double elapsed = 0.0;
  std::vector<Vec2> initial_positions;

  Eigen::Vector2i mode(int idx) const { return {idx / K, idx % K}; }

  /// Time-averaged coefficients c_k = fk_integral / (N t); the t -> 0 limit
  /// is the basis evaluated at the initial positions.
  Eigen::VectorXd coefficients() const;
};

ErgodicState make_ergodic_state(const Workspace& ws, int K, const InfoDensity& density,
                                int n_robots, const Eigen::Vector2i& quad = {200, 200});

/// Rearms the trajectory averages at the given start positions.
void ergodic_reset(ErgodicState& s, const std::vector<Vec2>& positions);

/// Trapezoidal update of the basis integrals over one step.
void ergodic_accumulate(ErgodicState& s, const std::vector<Vec2>& x_old,
                        const std::vector<Vec2>& x_new, double dt);

/// eps = sum_k Lambda_k (c_k - phi_k)^2. Undefined at elapsed == 0.
double ergodic_metric(const ErgodicState& s);

double ergodic_metric_from(const ErgodicState& s, const Eigen::VectorXd& c);

/// Normalized spectral descent input: u = -u_max B/|B| with
/// B = sum_k Lambda_k (c_k - phi_k) grad f_k(x); zero when |B| vanishes.
Vec2 ergodic_nominal_input(const ErgodicState& s, const Vec2& x, double u_max);

}  // namespace persistify
