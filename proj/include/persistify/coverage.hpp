#pragma once

#include "persistify/environment.hpp"
#include "persistify/types.hpp"

#include <Eigen/Dense>

#include <vector>

namespace persistify {

/// Grid-quadrature Voronoi coverage: cells are workspace grid cells assigned
/// to the nearest robot (ties to the lowest index); masses, centroids and the
/// locational cost all use the same midpoint quadrature.
struct CoverageState {
  Workspace ws;
  Eigen::Vector2i grid{120, 90};
  double kp = 1.0;
  // precomputed quadrature nodes and phi-weighted cell measures
  std::vector<Vec2> cell_center;
  std::vector<double> cell_phi_dA;
};

CoverageState make_coverage_state(const Workspace& ws, const Eigen::Vector2i& grid,
                                  double kp, const InfoDensity& density);

struct CoverageSolution {
  std::vector<Vec2> centroid;  // phi-weighted centroid of each robot's cell
  std::vector<double> mass;
  double cost = 0.0;           // sum_i integral over V_i of |x - x_i|^2 phi
};

/// One fused pass over the grid: membership, masses, centroids, cost.
/// Throws if any robot's cell carries zero mass.
CoverageSolution solve_coverage(const CoverageState& cs, const std::vector<Vec2>& positions);

/// Lloyd step inputs u_i = kp (C_{V_i} - x_i).
std::vector<Vec2> coverage_nominal_input(const CoverageState& cs,
                                         const std::vector<Vec2>& positions);

double locational_cost(const CoverageState& cs, const std::vector<Vec2>& positions);

}  // namespace persistify
