#include "persistify/coverage.hpp"

#include <limits>
#include <stdexcept>

namespace persistify {

CoverageState make_coverage_state(const Workspace& ws, const Eigen::Vector2i& grid,
                                  double kp, const InfoDensity& density) {
  if (grid.x() < 2 || grid.y() < 2) throw std::invalid_argument("coverage: grid too coarse");
  if (!(kp > 0.0)) throw std::invalid_argument("coverage: kp must be positive");
  CoverageState cs;
  cs.ws = ws;
  cs.grid = grid;
  cs.kp = kp;
  const Vec2 L = ws.extent();
  const double dx = L.x() / grid.x();
  const double dy = L.y() / grid.y();
  const double dA = dx * dy;
  cs.cell_center.reserve(static_cast<size_t>(grid.x()) * grid.y());
  cs.cell_phi_dA.reserve(cs.cell_center.capacity());
  for (int i = 0; i < grid.x(); ++i) {
    for (int j = 0; j < grid.y(); ++j) {
      const Vec2 xc(ws.lower.x() + (i + 0.5) * dx, ws.lower.y() + (j + 0.5) * dy);
      cs.cell_center.push_back(xc);
      cs.cell_phi_dA.push_back(eval_density(density, xc) * dA);
    }
  }
  return cs;
}

CoverageSolution solve_coverage(const CoverageState& cs, const std::vector<Vec2>& positions) {
  const int n = static_cast<int>(positions.size());
  if (n < 1) throw std::invalid_argument("coverage: need at least one robot");

  CoverageSolution out;
  out.mass.assign(static_cast<size_t>(n), 0.0);
  std::vector<Vec2> moment(static_cast<size_t>(n), Vec2::Zero());

  const size_t cells = cs.cell_center.size();
  for (size_t c = 0; c < cells; ++c) {
    const Vec2& xc = cs.cell_center[c];
    int owner = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double dx = xc.x() - positions[static_cast<size_t>(i)].x();
      const double dy = xc.y() - positions[static_cast<size_t>(i)].y();
      const double d2 = dx * dx + dy * dy;
      if (d2 < best) {  // strict: ties go to the lowest index
        best = d2;
        owner = i;
      }
    }
    const double w = cs.cell_phi_dA[c];
    out.mass[static_cast<size_t>(owner)] += w;
    moment[static_cast<size_t>(owner)] += w * xc;
    out.cost += best * w;
  }

  out.centroid.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (!(out.mass[static_cast<size_t>(i)] > 0.0)) {
      throw std::runtime_error("coverage: robot " + std::to_string(i) +
                               " owns a zero-mass cell");
    }
    out.centroid[static_cast<size_t>(i)] = moment[static_cast<size_t>(i)] / out.mass[static_cast<size_t>(i)];
  }
  return out;
}

std::vector<Vec2> coverage_nominal_input(const CoverageState& cs,
                                         const std::vector<Vec2>& positions) {
  const CoverageSolution sol = solve_coverage(cs, positions);
  std::vector<Vec2> u(positions.size());
  for (size_t i = 0; i < positions.size(); ++i) {
    u[i] = cs.kp * (sol.centroid[i] - positions[i]);
  }
  return u;
}

double locational_cost(const CoverageState& cs, const std::vector<Vec2>& positions) {
  return solve_coverage(cs, positions).cost;
}

}  // namespace persistify
