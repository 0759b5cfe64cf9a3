#include <doctest.h>

#include "persistify/qp.hpp"

#include <cmath>
#include <random>

using namespace persistify;

namespace {

ConstraintRow cbf(std::initializer_list<double> a, double b) {
  ConstraintRow r;
  r.a = Eigen::VectorXd(static_cast<Eigen::Index>(a.size()));
  Eigen::Index i = 0;
  for (double v : a) r.a(i++) = v;
  r.b = b;
  r.kind = RowKind::CbfHard;
  return r;
}

ConstraintRow clf(std::initializer_list<double> a, double b) {
  ConstraintRow r = cbf(a, b);
  r.kind = RowKind::ClfRelaxable;
  return r;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

QpProblem random_problem(std::mt19937_64& rng, int max_rows) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::uniform_int_distribution<int> dim(2, 3), rows(0, max_rows), coin(0, 1);
  std::uniform_real_distribution<double> uk(0.05, 40.0);
  QpProblem p;
  const int m = dim(rng);
  p.u_hat = Eigen::VectorXd::NullaryExpr(m, [&](Eigen::Index) { return u(rng); });
  p.kappa = uk(rng);
  const int n = rows(rng);
  for (int i = 0; i < n; ++i) {
    ConstraintRow r;
    r.a = Eigen::VectorXd::NullaryExpr(m, [&](Eigen::Index) { return u(rng); });
    r.b = u(rng);
    r.kind = coin(rng) ? RowKind::ClfRelaxable : RowKind::CbfHard;
    p.rows.push_back(r);
  }
  return p;
}

void expect_match(const QpSolution& got, const QpSolution& oracle, double tol = 1e-8) {
  REQUIRE(got.status == oracle.status);
  if (got.status == QpStatus::Infeasible) return;
  REQUIRE(got.u.size() == oracle.u.size());
  CHECK((got.u - oracle.u).lpNorm<Eigen::Infinity>() <= tol);
  CHECK(std::abs(got.delta - oracle.delta) <= tol);
  CHECK(std::abs(got.objective - oracle.objective) <= tol);
}

}  // namespace

TEST_CASE("no rows: the nominal input is returned untouched") {
  QpProblem p;
  p.u_hat = vec({1.0, 0.0});
  const QpSolution s = solve_robot_qp(p);
  CHECK(s.status == QpStatus::Optimal);
  CHECK(s.u(0) == 1.0);
  CHECK(s.u(1) == 0.0);
  CHECK(s.delta == 0.0);
  CHECK(s.objective == 0.0);
  CHECK(s.active_set.empty());
  CHECK(s.kkt_residual <= 1e-12);
  expect_match(brute_force_qp(p), s);
}

TEST_CASE("one active hard row is a halfspace projection") {
  QpProblem p;
  p.u_hat = vec({1.0, 1.0});
  p.rows = {cbf({1.0, 1.0}, 0.0)};
  const QpSolution s = solve_robot_qp(p);
  CHECK(s.u(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.u(1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(s.delta == 0.0);
  CHECK(s.active_set == std::vector<int>{0});
  expect_match(brute_force_qp(p), s);
}

TEST_CASE("clf relaxation splits the correction between u and delta") {
  QpProblem p;
  p.u_hat = vec({0.0, 0.0});
  p.kappa = 1.0;
  p.rows = {clf({1.0, 0.0}, -1.0)};
  const QpSolution s = solve_robot_qp(p);
  CHECK(s.u(0) == doctest::Approx(-0.5).epsilon(1e-10));
  CHECK(s.u(1) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(s.delta == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(s.objective == doctest::Approx(0.5).epsilon(1e-10));
  expect_match(brute_force_qp(p), s);
}

TEST_CASE("a large kappa forces the constraint into u") {
  QpProblem p;
  p.u_hat = vec({0.0, 0.0});
  p.kappa = 1e6;
  p.rows = {clf({1.0, 0.0}, -1.0)};
  const QpSolution s = solve_robot_qp(p);
  CHECK(s.u(0) == doctest::Approx(-1.0).epsilon(1e-4));
  CHECK(std::abs(s.delta) < 1e-4);
  expect_match(brute_force_qp(p), s);
}

TEST_CASE("inactive rows do not move the solution") {
  QpProblem p;
  p.u_hat = vec({0.3, -0.2});
  p.rows = {cbf({1.0, 0.0}, 100.0), clf({0.0, 1.0}, 50.0)};
  const QpSolution s = solve_robot_qp(p);
  CHECK(s.u(0) == doctest::Approx(0.3));
  CHECK(s.u(1) == doctest::Approx(-0.2));
  CHECK(s.delta == doctest::Approx(0.0));
  CHECK(s.active_set.empty());
  expect_match(brute_force_qp(p), s);
}

TEST_CASE("degenerate zero rows are dropped or declared impossible") {
  QpProblem p;
  p.u_hat = vec({0.5, 0.5});
  p.rows = {cbf({0.0, 0.0}, 0.1)};
  const QpSolution s = solve_robot_qp(p);
  CHECK(s.status == QpStatus::DegenerateRowDropped);
  CHECK(s.u(0) == doctest::Approx(0.5));

  QpProblem q;
  q.u_hat = vec({0.5, 0.5});
  q.rows = {cbf({0.0, 0.0}, -0.5)};
  CHECK(solve_robot_qp(q).status == QpStatus::Infeasible);
  CHECK(brute_force_qp(q).status == QpStatus::Infeasible);
}

TEST_CASE("jointly infeasible hard rows: flagged, deterministic fallback") {
  QpProblem p;
  p.u_hat = vec({0.0, 0.0});
  p.rows = {cbf({1.0, 0.0}, -1.0), cbf({-1.0, 0.0}, -1.0)};  // u1 <= -1 and u1 >= 1
  const QpSolution a = solve_robot_qp(p);
  const QpSolution b = solve_robot_qp(p);
  CHECK(a.status == QpStatus::Infeasible);
  CHECK(brute_force_qp(p).status == QpStatus::Infeasible);
  CHECK(a.u == b.u);
  // the fallback projects u_hat onto the least-violated hard halfspace
  CHECK(std::abs(a.u(0)) == doctest::Approx(1.0));
}

TEST_CASE("norm saturation applies after the solve") {
  QpProblem p;
  p.u_hat = vec({3.0, 4.0});
  p.u_max = 1.0;
  const QpSolution s = solve_robot_qp(p);
  CHECK(s.saturated);
  CHECK(s.u.norm() == doctest::Approx(1.0));
  CHECK(s.u(0) == doctest::Approx(0.6));
  CHECK(s.u(1) == doctest::Approx(0.8));
}

TEST_CASE("oracle agreement on random instances") {
  std::mt19937_64 rng(2024);
  int optimal = 0, infeasible = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const QpProblem p = random_problem(rng, 4);
    const QpSolution got = solve_robot_qp(p);
    const QpSolution oracle = brute_force_qp(p);
    expect_match(got, oracle);
    if (got.status == QpStatus::Infeasible) {
      ++infeasible;
    } else {
      ++optimal;
      CHECK(got.kkt_residual <= 1e-8);
    }
  }
  CHECK(optimal > 2500);  // random instances are rarely infeasible
  CHECK(infeasible < 300);
}

TEST_CASE("near-parallel rows stay exact") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0), tiny(-1e-7, 1e-7);
  for (int trial = 0; trial < 300; ++trial) {
    QpProblem p;
    p.u_hat = vec({u(rng), u(rng)});
    p.kappa = 2.0;
    Eigen::VectorXd a = vec({u(rng), u(rng)});
    if (a.norm() < 0.1) continue;
    ConstraintRow r1 = cbf({a(0), a(1)}, u(rng));
    ConstraintRow r2 = cbf({a(0) + tiny(rng), a(1) + tiny(rng)}, r1.b + tiny(rng));
    p.rows = {r1, r2};
    // the minimizer direction along the near-degenerate face is conditioned by
    // 1/|a1 - a2|; objectives must still agree tightly
    const QpSolution got = solve_robot_qp(p);
    const QpSolution oracle = brute_force_qp(p);
    REQUIRE(got.status == oracle.status);
    if (got.status == QpStatus::Infeasible) continue;
    CHECK((got.u - oracle.u).lpNorm<Eigen::Infinity>() <= 1e-6);
    CHECK(std::abs(got.objective - oracle.objective) <= 1e-9);
    CHECK(got.kkt_residual <= 1e-8);
  }
}

TEST_CASE("minimal invasiveness against rejection-sampled feasible points") {
  std::mt19937_64 rng(4096);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  int tested = 0;
  long found_total = 0;
  while (tested < 20) {
    const QpProblem p = random_problem(rng, 3);
    const QpSolution s = solve_robot_qp(p);
    if (s.status == QpStatus::Infeasible) continue;
    ++tested;
    const int m = static_cast<int>(p.u_hat.size());
    for (int k = 0; k < 1000; ++k) {
      // rejection sampling in a box around the optimum
      Eigen::VectorXd cand =
          s.u + Eigen::VectorXd::NullaryExpr(m, [&](Eigen::Index) { return u(rng); });
      const double delta = s.delta + u(rng);
      bool ok = true;
      for (const auto& row : p.rows) {
        const double slack = row.kind == RowKind::ClfRelaxable ? delta : 0.0;
        if (row.a.dot(cand) - slack > row.b + 1e-12) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      ++found_total;
      const double obj = (cand - p.u_hat).squaredNorm() + p.kappa * delta * delta;
      CHECK(s.objective <= obj + 1e-9);
    }
  }
  CHECK(found_total > 2000);
}

TEST_CASE("solution is continuous in the nominal input") {
  std::mt19937_64 rng(512);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    QpProblem p = random_problem(rng, 3);
    const QpSolution s0 = solve_robot_qp(p);
    if (s0.status == QpStatus::Infeasible) continue;
    QpProblem q = p;
    for (Eigen::Index i = 0; i < q.u_hat.size(); ++i) q.u_hat(i) += 1e-6 * u(rng);
    const QpSolution s1 = solve_robot_qp(q);
    if (s1.status == QpStatus::Infeasible) continue;
    CHECK((s1.u - s0.u).lpNorm<Eigen::Infinity>() <= 1e-4);
  }
}

TEST_CASE("joint solve equals the elementwise solve bit for bit") {
  std::mt19937_64 rng(99);
  std::vector<QpProblem> batch;
  for (int i = 0; i < 40; ++i) batch.push_back(random_problem(rng, 4));
  const std::vector<QpSolution> joint = solve_joint_qp(batch);
  REQUIRE(joint.size() == batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    const QpSolution solo = solve_robot_qp(batch[i]);
    CHECK(joint[i].status == solo.status);
    CHECK(joint[i].u == solo.u);
    CHECK(joint[i].delta == solo.delta);
    CHECK(joint[i].objective == solo.objective);
  }

  // N identical unconstrained problems -> N copies of u_hat
  QpProblem plain;
  plain.u_hat = vec({0.7, -0.4});
  const std::vector<QpSolution> copies = solve_joint_qp({plain, plain, plain});
  for (const auto& s : copies) {
    CHECK(s.u(0) == 0.7);
    CHECK(s.u(1) == -0.4);
  }

  // only the robot with an active row deviates
  QpProblem constrained = plain;
  constrained.rows = {cbf({1.0, 0.0}, 0.0)};
  const std::vector<QpSolution> mixed = solve_joint_qp({plain, constrained});
  CHECK(mixed[0].u(0) == 0.7);
  CHECK(mixed[1].u(0) == doctest::Approx(0.0));
  CHECK(mixed[1].u(1) == doctest::Approx(-0.4));
}

TEST_CASE("kkt certificate fields are populated") {
  std::mt19937_64 rng(7777);
  for (int trial = 0; trial < 500; ++trial) {
    const QpProblem p = random_problem(rng, 4);
    const QpSolution s = solve_robot_qp(p);
    if (s.status == QpStatus::Infeasible) continue;
    CHECK(s.kkt_residual <= 1e-8);
    // primal feasibility double-check against the raw rows
    for (const auto& row : p.rows) {
      if (row.kind == RowKind::CbfHard && row.a.norm() < 1e-12) continue;
      const double slack = row.kind == RowKind::ClfRelaxable ? s.delta : 0.0;
      CHECK(row.a.dot(s.u) - slack <= row.b + 1e-9);
    }
  }
}

TEST_CASE("invalid problems are rejected") {
  QpProblem p;  // empty u_hat
  CHECK_THROWS_AS(solve_robot_qp(p), std::invalid_argument);
  p.u_hat = vec({1.0});
  p.kappa = 0.0;
  CHECK_THROWS_AS(solve_robot_qp(p), std::invalid_argument);
  p.kappa = 1.0;
  p.rows = {cbf({1.0, 0.0}, 0.0)};  // dimension mismatch
  CHECK_THROWS_AS(solve_robot_qp(p), std::invalid_argument);
}
