#include "persistify/qp.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace persistify {

namespace {

constexpr double kFeasTol = 1e-11;
constexpr double kZeroRowTol = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Prepared {
  Eigen::VectorXd u_hat;
  double kappa = 1.0;
  bool has_clf = false;
  int m = 0;   // control dimension
  int nv = 0;  // decision dimension (m or m+1)
  std::vector<int> row_index;       // kept rows -> original indices
  Eigen::MatrixXd normals;          // one decision-space normal per kept row
  Eigen::VectorXd rhs;
  bool dropped_degenerate = false;
  bool impossible_row = false;      // 0.u <= b with b < 0
};

Prepared prepare(const QpProblem& p, double eps_vacuous = 1e-8) {
  Prepared pr;
  pr.u_hat = p.u_hat;
  pr.kappa = p.kappa;
  pr.m = static_cast<int>(p.u_hat.size());
  if (pr.m < 1) throw std::invalid_argument("qp: u_hat must be nonempty");
  if (!(p.kappa > 0.0)) throw std::invalid_argument("qp: kappa must be positive");
  for (const auto& row : p.rows) {
    if (row.a.size() != pr.m) throw std::invalid_argument("qp: row dimension mismatch");
    if (row.kind == RowKind::ClfRelaxable) pr.has_clf = true;
  }
  pr.nv = pr.m + (pr.has_clf ? 1 : 0);

  for (size_t i = 0; i < p.rows.size(); ++i) {
    const auto& row = p.rows[i];
    if (row.kind == RowKind::CbfHard && row.a.norm() < kZeroRowTol) {
      if (row.b < -eps_vacuous) {
        pr.impossible_row = true;
      } else {
        pr.dropped_degenerate = true;
      }
      continue;
    }
    Eigen::VectorXd n = Eigen::VectorXd::Zero(pr.nv);
    n.head(pr.m) = row.a;
    if (row.kind == RowKind::ClfRelaxable) n(pr.m) = -1.0;
    pr.row_index.push_back(static_cast<int>(i));
    pr.normals.conservativeResize(pr.nv, static_cast<Eigen::Index>(pr.row_index.size()));
    pr.normals.col(static_cast<Eigen::Index>(pr.row_index.size()) - 1) = n;
    pr.rhs.conservativeResize(static_cast<Eigen::Index>(pr.row_index.size()));
    pr.rhs(static_cast<Eigen::Index>(pr.row_index.size()) - 1) = row.b;
  }
  return pr;
}

double objective_of(const Prepared& pr, const Eigen::VectorXd& v) {
  const double du = (v.head(pr.m) - pr.u_hat).squaredNorm();
  const double delta = pr.has_clf ? v(pr.m) : 0.0;
  return du + pr.kappa * delta * delta;
}

Eigen::VectorXd hessian_diag(const Prepared& pr) {
  Eigen::VectorXd g = Eigen::VectorXd::Constant(pr.nv, 2.0);
  if (pr.has_clf) g(pr.m) = 2.0 * pr.kappa;
  return g;
}

Eigen::VectorXd gradient_lin(const Prepared& pr) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(pr.nv);
  a.head(pr.m) = -2.0 * pr.u_hat;
  return a;
}

// cancellation-aware violation threshold for a.v <= b
double row_tol(const Prepared& pr, Eigen::Index i, const Eigen::VectorXd& v) {
  return kFeasTol * (1.0 + std::abs(pr.normals.col(i).dot(v)) + std::abs(pr.rhs(i)));
}

// one LU solve plus two rounds of iterative refinement
Eigen::VectorXd refined_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, bool* ok) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (ok) *ok = lu.isInvertible();
  Eigen::VectorXd x = lu.solve(b);
  for (int pass = 0; pass < 2; ++pass) {
    x += lu.solve(b - A * x);
  }
  return x;
}

double kkt_residual_of(const Prepared& pr, const Eigen::VectorXd& v,
                       const std::vector<int>& active, const Eigen::VectorXd& mu) {
  const Eigen::VectorXd g = hessian_diag(pr);
  Eigen::VectorXd stat = g.cwiseProduct(v) + gradient_lin(pr);
  double mu_neg = 0.0;
  double compl_max = 0.0;
  for (size_t k = 0; k < active.size(); ++k) {
    const Eigen::Index col = active[static_cast<size_t>(k)];
    stat += mu(static_cast<Eigen::Index>(k)) * pr.normals.col(col);
    mu_neg = std::max(mu_neg, -mu(static_cast<Eigen::Index>(k)));
    const double slack = pr.normals.col(col).dot(v) - pr.rhs(col);
    compl_max = std::max(compl_max, std::abs(mu(static_cast<Eigen::Index>(k)) * slack));
  }
  double viol = 0.0;
  for (Eigen::Index i = 0; i < pr.rhs.size(); ++i) {
    viol = std::max(viol, pr.normals.col(i).dot(v) - pr.rhs(i));
  }
  return std::max({stat.lpNorm<Eigen::Infinity>(), viol, mu_neg, compl_max});
}

QpSolution pack(const Prepared& pr, const QpProblem& p, const Eigen::VectorXd& v,
                const std::vector<int>& active_kept, const Eigen::VectorXd& mu,
                QpStatus status) {
  QpSolution s;
  s.u = v.head(pr.m);
  s.delta = pr.has_clf ? v(pr.m) : 0.0;
  for (int k : active_kept) s.active_set.push_back(pr.row_index[static_cast<size_t>(k)]);
  std::sort(s.active_set.begin(), s.active_set.end());
  s.objective = objective_of(pr, v);
  s.kkt_residual = kkt_residual_of(pr, v, active_kept, mu);
  s.status = status;
  if (status == QpStatus::Optimal && pr.dropped_degenerate) {
    s.status = QpStatus::DegenerateRowDropped;
  }
  if (p.u_max && s.u.norm() > *p.u_max) {
    s.u *= *p.u_max / s.u.norm();
    s.saturated = true;
    s.objective = (s.u - pr.u_hat).squaredNorm() + pr.kappa * s.delta * s.delta;
  }
  return s;
}

// Fallback for jointly infeasible hard rows: project u_hat onto the hard
// halfspace it violates least, then absorb any CLF rows with delta.
QpSolution infeasible_fallback(const Prepared& pr, const QpProblem& p) {
  Eigen::VectorXd u = pr.u_hat;
  double best_viol = kInf;
  int best = -1;
  for (size_t i = 0; i < p.rows.size(); ++i) {
    const auto& row = p.rows[i];
    if (row.kind != RowKind::CbfHard) continue;
    const double norm2 = row.a.squaredNorm();
    if (norm2 < kZeroRowTol * kZeroRowTol) continue;
    const double viol = row.a.dot(pr.u_hat) - row.b;
    if (viol > kFeasTol && viol < best_viol) {
      best_viol = viol;
      best = static_cast<int>(i);
    }
  }
  if (best >= 0) {
    const auto& row = p.rows[static_cast<size_t>(best)];
    u -= (best_viol / row.a.squaredNorm()) * row.a;
  }
  double delta = 0.0;
  if (pr.has_clf) {
    for (const auto& row : p.rows) {
      if (row.kind == RowKind::ClfRelaxable) {
        delta = std::max(delta, row.a.dot(u) - row.b);
      }
    }
  }
  QpSolution s;
  s.u = u;
  s.delta = delta;
  s.objective = (u - pr.u_hat).squaredNorm() + pr.kappa * delta * delta;
  s.kkt_residual = kInf;
  s.status = QpStatus::Infeasible;
  if (p.u_max && s.u.norm() > *p.u_max) {
    s.u *= *p.u_max / s.u.norm();
    s.saturated = true;
  }
  return s;
}

}  // namespace

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "ok";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::DegenerateRowDropped: return "degenerate";
  }
  return "?";
}

// Exact equality re-solve of the converged active set; drops rows whose
// multipliers come out negative. Removes the drift the incremental updates
// accumulate over partial steps.
void polish_active_set(const Prepared& pr, Eigen::VectorXd& v, std::vector<int>& active,
                       Eigen::VectorXd& mu) {
  const Eigen::VectorXd g = hessian_diag(pr);
  const Eigen::VectorXd a_lin = gradient_lin(pr);
  for (int guard = 0; guard < 16; ++guard) {
    const int na = static_cast<int>(active.size());
    if (na == 0) {
      v = -a_lin.cwiseQuotient(g);
      mu.resize(0);
      return;
    }
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(pr.nv + na, pr.nv + na);
    kkt.topLeftCorner(pr.nv, pr.nv) = g.asDiagonal();
    Eigen::VectorXd rhs(pr.nv + na);
    rhs.head(pr.nv) = -a_lin;
    for (int k = 0; k < na; ++k) {
      const Eigen::Index col = active[static_cast<size_t>(k)];
      kkt.block(0, pr.nv + k, pr.nv, 1) = pr.normals.col(col);
      kkt.block(pr.nv + k, 0, 1, pr.nv) = pr.normals.col(col).transpose();
      rhs(pr.nv + k) = pr.rhs(col);
    }
    bool invertible = false;
    const Eigen::VectorXd sol = refined_solve(kkt, rhs, &invertible);
    int drop = -1;
    if (!invertible) {
      // dependent rows cannot all stay active; shed the weakest multiplier
      double weakest = kInf;
      for (int k = 0; k < na; ++k) {
        const double m = k < mu.size() ? std::abs(mu(k)) : 0.0;
        if (m < weakest) {
          weakest = m;
          drop = k;
        }
      }
    } else {
      v = sol.head(pr.nv);
      mu = sol.tail(na);
      double most_negative = -1e-12;
      for (int k = 0; k < na; ++k) {
        if (mu(k) < most_negative) {
          most_negative = mu(k);
          drop = k;
        }
      }
      if (drop < 0) return;
    }
    active.erase(active.begin() + drop);
    Eigen::VectorXd mu2(static_cast<Eigen::Index>(active.size()));
    int w = 0;
    for (int k = 0; k < na; ++k) {
      if (k != drop && k < mu.size()) mu2(w++) = mu(k);
    }
    mu = mu2;
  }
}

QpSolution solve_robot_qp(const QpProblem& p) {
  const Prepared pr = prepare(p);
  if (pr.impossible_row) return infeasible_fallback(pr, p);

  const Eigen::VectorXd g = hessian_diag(pr);
  const Eigen::VectorXd ginv = g.cwiseInverse();
  const Eigen::VectorXd a_lin = gradient_lin(pr);

  // Unconstrained minimum; constraints are added one violated row at a time
  // while the dual stays feasible (Goldfarb-Idnani scheme, recomputed
  // factorizations -- the problems are tiny).
  Eigen::VectorXd v = -ginv.cwiseProduct(a_lin);
  std::vector<int> active;
  Eigen::VectorXd mu(0);

  const int n_rows = static_cast<int>(pr.row_index.size());
  const int max_iter = 50 * (n_rows + 1);
  for (int iter = 0; iter < max_iter; ++iter) {
    // most violated inactive row
    int p_idx = -1;
    double worst = 0.0;
    for (int i = 0; i < n_rows; ++i) {
      if (std::find(active.begin(), active.end(), i) != active.end()) continue;
      const double viol = pr.normals.col(i).dot(v) - pr.rhs(i);
      if (viol > row_tol(pr, i, v) && viol > worst) {
        worst = viol;
        p_idx = i;
      }
    }
    if (p_idx < 0) {
      polish_active_set(pr, v, active, mu);
      // polishing can only have moved v onto the exact face; if that exposed
      // a violated row, take another outer pass
      bool clean = true;
      for (int i = 0; i < n_rows; ++i) {
        if (pr.normals.col(i).dot(v) - pr.rhs(i) > row_tol(pr, i, v)) clean = false;
      }
      if (!clean) continue;
      return pack(pr, p, v, active, mu, QpStatus::Optimal);
    }

    const Eigen::VectorXd cp = -pr.normals.col(p_idx);  // >= form normal
    // work in the G-metric: with S = G^{-1/2}, the primal direction is the
    // S-space residual of projecting S*cp onto the active normals, which keeps
    // the z ~ 0 test stable even for nearly dependent active sets
    const Eigen::VectorXd sqrt_ginv = ginv.cwiseSqrt();
    const Eigen::VectorXd y = sqrt_ginv.cwiseProduct(cp);
    double mu_p = 0.0;
    bool resolved = false;
    for (int inner = 0; inner < max_iter && !resolved; ++inner) {
      const int na = static_cast<int>(active.size());
      Eigen::VectorXd z;
      Eigen::VectorXd r(na);
      double ztcp;
      if (na == 0) {
        z = ginv.cwiseProduct(cp);
        ztcp = y.squaredNorm();
      } else {
        Eigen::MatrixXd B(pr.nv, na);
        for (int k = 0; k < na; ++k) {
          B.col(k) = -sqrt_ginv.cwiseProduct(pr.normals.col(active[static_cast<size_t>(k)]));
        }
        r = B.colPivHouseholderQr().solve(y);
        const Eigen::VectorXd w = y - B * r;
        z = sqrt_ginv.cwiseProduct(w);
        ztcp = w.squaredNorm();  // equals cp.z by construction
      }

      const double viol = pr.normals.col(p_idx).dot(v) - pr.rhs(p_idx);  // a.v - b > 0
      const double t2 = (ztcp > 1e-13 * (1.0 + y.squaredNorm())) ? viol / ztcp : kInf;

      double t1 = kInf;
      int drop = -1;
      for (int k = 0; k < na; ++k) {
        if (r(k) > 1e-14) {
          const double cand = std::max(0.0, mu(k)) / r(k);
          if (cand < t1) {
            t1 = cand;
            drop = k;
          }
        }
      }

      const double t = std::min(t1, t2);
      if (t == kInf) return infeasible_fallback(pr, p);

      if (t2 == kInf) {
        // dual-only step: reduce blocking multiplier to zero and retry
        for (int k = 0; k < na; ++k) mu(k) -= t * r(k);
        mu_p += t;
        active.erase(active.begin() + drop);
        Eigen::VectorXd mu2(na - 1);
        int w = 0;
        for (int k = 0; k < na; ++k) {
          if (k != drop) mu2(w++) = mu(k);
        }
        mu = mu2;
        continue;
      }

      v += t * z;
      for (int k = 0; k < na; ++k) mu(k) -= t * r(k);
      mu_p += t;

      if (t == t2) {
        active.push_back(p_idx);
        Eigen::VectorXd mu2(na + 1);
        mu2.head(na) = mu;
        mu2(na) = mu_p;
        mu = mu2;
        resolved = true;
      } else {
        active.erase(active.begin() + drop);
        Eigen::VectorXd mu2(na - 1);
        int w = 0;
        for (int k = 0; k < na; ++k) {
          if (k != drop) mu2(w++) = mu(k);
        }
        mu = mu2;
      }
    }
    if (!resolved) return infeasible_fallback(pr, p);
  }
  // The dual objective increases strictly at every full step, so this is
  // unreachable for well-posed inputs; certify whatever we have.
  const double res = kkt_residual_of(pr, v, active, mu);
  return pack(pr, p, v, active, mu, res < 1e-8 ? QpStatus::Optimal : QpStatus::Infeasible);
}

std::vector<QpSolution> solve_joint_qp(const std::vector<QpProblem>& problems) {
  std::vector<QpSolution> out;
  out.reserve(problems.size());
  for (const auto& p : problems) out.push_back(solve_robot_qp(p));
  return out;
}

namespace {

// lexicographic subset enumeration: {}, {0}, {0,1}, {0,1,2}, ..., {1}, ...
void enumerate_subsets(int n, std::vector<int>& current, int next,
                       const std::function<void(const std::vector<int>&)>& visit) {
  visit(current);
  for (int i = next; i < n; ++i) {
    current.push_back(i);
    enumerate_subsets(n, current, i + 1, visit);
    current.pop_back();
  }
}

}  // namespace

QpSolution brute_force_qp(const QpProblem& p) {
  const Prepared pr = prepare(p);
  if (pr.row_index.size() > 16) throw std::invalid_argument("brute_force_qp: too many rows");
  if (pr.impossible_row) return infeasible_fallback(pr, p);

  const int n_rows = static_cast<int>(pr.row_index.size());
  const Eigen::VectorXd g = hessian_diag(pr);
  const Eigen::VectorXd a_lin = gradient_lin(pr);

  bool found = false;
  double best_obj = kInf;
  Eigen::VectorXd best_v;
  std::vector<int> best_set;
  Eigen::VectorXd best_mu;

  std::vector<int> current;
  const std::function<void(const std::vector<int>&)> visit = [&](const std::vector<int>& s) {
    const int na = static_cast<int>(s.size());
    if (na > pr.nv) return;
    Eigen::VectorXd v;
    Eigen::VectorXd lam(na);
    if (na == 0) {
      v = -a_lin.cwiseQuotient(g);
    } else {
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(pr.nv + na, pr.nv + na);
      kkt.topLeftCorner(pr.nv, pr.nv) = g.asDiagonal();
      Eigen::VectorXd rhs(pr.nv + na);
      rhs.head(pr.nv) = -a_lin;
      for (int k = 0; k < na; ++k) {
        kkt.block(0, pr.nv + k, pr.nv, 1) = pr.normals.col(s[static_cast<size_t>(k)]);
        kkt.block(pr.nv + k, 0, 1, pr.nv) = pr.normals.col(s[static_cast<size_t>(k)]).transpose();
        rhs(pr.nv + k) = pr.rhs(s[static_cast<size_t>(k)]);
      }
      bool invertible = false;
      const Eigen::VectorXd sol = refined_solve(kkt, rhs, &invertible);
      if (!invertible) return;
      v = sol.head(pr.nv);
      lam = sol.tail(na);
    }
    for (Eigen::Index i = 0; i < pr.rhs.size(); ++i) {
      const double viol = pr.normals.col(i).dot(v) - pr.rhs(i);
      if (viol > 1e-9 && viol > row_tol(pr, i, v)) return;
    }
    const double obj = objective_of(pr, v);
    if (obj < best_obj - 1e-12) {
      best_obj = obj;
      best_v = v;
      best_set = s;
      best_mu = lam;
      found = true;
    }
  };
  enumerate_subsets(n_rows, current, 0, visit);

  if (!found) return infeasible_fallback(pr, p);
  return pack(pr, p, best_v, best_set, best_mu, QpStatus::Optimal);
}

}  // namespace persistify
