#include "lempc/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lempc/error.hpp"

namespace lempc {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::infeasible:
      return "infeasible";
    case SolveStatus::unbounded:
      return "unbounded";
    case SolveStatus::max_iter:
      return "max_iter";
  }
  return "unknown";
}

double qp_objective(const QpProblem& problem, const VectorXd& x) {
  return 0.5 * x.dot(problem.P * x) + problem.q.dot(x);
}

KktResidual kkt_residual(const QpProblem& problem, const VectorXd& x, const VectorXd& y) {
  KktResidual res;
  VectorXd grad = problem.P * x + problem.q;
  if (problem.num_rows() > 0) {
    grad += problem.G.transpose() * y;
    const VectorXd slack = problem.g - problem.G * x;
    res.primal = std::max(0.0, -slack.minCoeff());
    res.complementarity = std::max(y.cwiseProduct(slack).cwiseAbs().maxCoeff(),
                                   std::max(0.0, -y.minCoeff()));
  }
  res.stationarity = grad.size() > 0 ? grad.lpNorm<Eigen::Infinity>() : 0.0;
  return res;
}

KktReport verify_kkt(const QpProblem& problem, const Solution& solution, double tol) {
  KktReport report;
  report.residual = kkt_residual(problem, solution.x, solution.y);
  report.stationarity_ok = report.residual.stationarity <= tol;
  report.primal_ok = report.residual.primal <= tol;
  report.complementarity_ok = report.residual.complementarity <= tol;
  return report;
}

namespace {

double norm_inf(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

void validate(const QpProblem& pb) {
  const auto n = pb.num_vars();
  LEMPC_REQUIRE(pb.P.rows() == n && pb.P.cols() == n, "solve_qp: P must be n x n");
  LEMPC_REQUIRE(pb.G.cols() == n || pb.num_rows() == 0, "solve_qp: G must have n columns");
  LEMPC_REQUIRE(pb.G.rows() == pb.num_rows(), "solve_qp: G and g row counts differ");
  LEMPC_REQUIRE(pb.P.allFinite() && pb.q.allFinite() && pb.G.allFinite() && pb.g.allFinite(),
                "solve_qp: non-finite problem data");
  const double scale = std::max(1.0, pb.P.cwiseAbs().maxCoeff());
  LEMPC_REQUIRE((pb.P - pb.P.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
                "solve_qp: P must be symmetric");
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(pb.P, Eigen::EigenvaluesOnly);
    LEMPC_REQUIRE(eig.eigenvalues().minCoeff() >= -1e-9 * scale,
                  "solve_qp: P must be positive semidefinite");
  }
}

double max_residual(const KktResidual& r) {
  return std::max({r.stationarity, r.primal, r.complementarity});
}

// Solves the equality-constrained KKT system on a guessed active set and
// refines the guess until the multipliers are nonnegative and the inactive
// rows are satisfied.
bool polish(const QpProblem& pb, VectorXd& x, VectorXd& y, double tol) {
  const auto n = pb.num_vars();
  const auto m = pb.num_rows();
  std::vector<char> active(m, 0);
  {
    const VectorXd slack = pb.g - pb.G * x;
    for (Eigen::Index i = 0; i < m; ++i) active[i] = y(i) > slack(i) ? 1 : 0;
  }
  constexpr double delta = 1e-11;
  for (int round = 0; round < 20; ++round) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < m; ++i)
      if (active[i]) rows.push_back(i);
    const auto k = static_cast<Eigen::Index>(rows.size());

    MatrixXd K = MatrixXd::Zero(n + k, n + k);
    K.topLeftCorner(n, n) = pb.P;
    VectorXd rhs(n + k);
    rhs.head(n) = -pb.q;
    for (Eigen::Index a = 0; a < k; ++a) {
      K.block(n + a, 0, 1, n) = pb.G.row(rows[a]);
      K.block(0, n + a, n, 1) = pb.G.row(rows[a]).transpose();
      rhs(n + a) = pb.g(rows[a]);
    }
    MatrixXd Kreg = K;
    Kreg.topLeftCorner(n, n).diagonal().array() += delta;
    Kreg.bottomRightCorner(k, k).diagonal().array() -= delta;
    Eigen::PartialPivLU<MatrixXd> lu(Kreg);
    VectorXd sol = lu.solve(rhs);
    for (int refine = 0; refine < 10; ++refine) {
      const VectorXd r = rhs - K * sol;
      if (norm_inf(r) <= 1e-14 * (1.0 + norm_inf(rhs))) break;
      sol += lu.solve(r);
    }
    if (!sol.allFinite()) return false;

    VectorXd xp = sol.head(n);
    VectorXd yp = VectorXd::Zero(m);
    for (Eigen::Index a = 0; a < k; ++a) yp(rows[a]) = sol(n + a);

    bool changed = false;
    // Drop the most negative multiplier, add the most violated inactive row.
    Eigen::Index worst_dual = -1;
    double worst_dual_val = -tol;
    for (Eigen::Index a = 0; a < k; ++a) {
      if (yp(rows[a]) < worst_dual_val) {
        worst_dual_val = yp(rows[a]);
        worst_dual = rows[a];
      }
    }
    const VectorXd slack = pb.g - pb.G * xp;
    Eigen::Index worst_primal = -1;
    double worst_primal_val = -tol;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!active[i] && slack(i) < worst_primal_val) {
        worst_primal_val = slack(i);
        worst_primal = i;
      }
    }
    if (worst_dual >= 0) {
      active[worst_dual] = 0;
      changed = true;
    }
    if (worst_primal >= 0) {
      active[worst_primal] = 1;
      changed = true;
    }
    if (!changed) {
      x = std::move(xp);
      y = yp.cwiseMax(0.0);
      return true;
    }
  }
  return false;
}

Solution solve_unconstrained(const QpProblem& pb, double tol) {
  Solution sol;
  const auto n = pb.num_vars();
  sol.y = VectorXd(0);
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(pb.P);
  sol.x = n > 0 ? VectorXd(cod.solve(-pb.q)) : VectorXd(0);
  sol.kkt = kkt_residual(pb, sol.x, sol.y);
  if (sol.kkt.stationarity <= tol * (1.0 + norm_inf(pb.q))) {
    sol.status = SolveStatus::optimal;
    sol.objective = qp_objective(pb, sol.x);
  } else {
    sol.status = SolveStatus::unbounded;
  }
  return sol;
}

}  // namespace

Solution solve_qp(const QpProblem& pb, const QpSettings& st) {
  validate(pb);
  const auto n = pb.num_vars();
  const auto m = pb.num_rows();
  if (m == 0) return solve_unconstrained(pb, st.eps_abs);

  const MatrixXd& G = pb.G;
  const MatrixXd Gt = G.transpose();
  const MatrixXd GtG = Gt * G;
  double rho = st.rho;
  const double sigma = st.sigma;

  auto factorize = [&](double r) {
    MatrixXd M = pb.P + r * GtG;
    M.diagonal().array() += sigma;
    return Eigen::LLT<MatrixXd>(M);
  };
  Eigen::LLT<MatrixXd> llt = factorize(rho);

  VectorXd x = VectorXd::Zero(n);
  VectorXd z = VectorXd::Zero(m);
  VectorXd y = VectorXd::Zero(m);
  VectorXd x_prev = x;
  VectorXd y_prev = y;

  Solution sol;
  sol.status = SolveStatus::max_iter;
  double best_score = std::numeric_limits<double>::infinity();
  int best_iter = 0;
  int iter = 0;

  for (iter = 1; iter <= st.max_iter; ++iter) {
    x_prev = x;
    y_prev = y;
    const VectorXd rhs = sigma * x - pb.q + Gt * (rho * z - y);
    const VectorXd xt = llt.solve(rhs);
    const VectorXd zt = G * xt;
    x = st.alpha * xt + (1.0 - st.alpha) * x;
    const VectorXd zr = st.alpha * zt + (1.0 - st.alpha) * z;
    const VectorXd z_new = (zr + y / rho).cwiseMin(pb.g);
    y += rho * (zr - z_new);
    z = z_new;

    if (iter % st.check_interval != 0 && iter != st.max_iter) continue;

    const VectorXd Gx = G * x;
    const VectorXd Px = pb.P * x;
    const VectorXd Gty = Gt * y;
    const double prim = norm_inf(Gx - z);
    const double dual = norm_inf(Px + pb.q + Gty);
    const double eps_prim = st.eps_abs + st.eps_rel * std::max(norm_inf(Gx), norm_inf(z));
    const double eps_dual =
        st.eps_abs + st.eps_rel * std::max({norm_inf(Px), norm_inf(Gty), norm_inf(pb.q)});
    if (prim <= eps_prim && dual <= eps_dual) {
      sol.status = SolveStatus::optimal;
      break;
    }

    // Primal infeasibility: dy is a ray with G'dy ~ 0, dy >= 0, g'dy < 0.
    const VectorXd dy = y - y_prev;
    const double dy_norm = norm_inf(dy);
    if (dy_norm > st.eps_infeasible) {
      const double eps = st.eps_infeasible * dy_norm;
      if (norm_inf(Gt * dy) <= eps && pb.g.dot(dy.cwiseMax(0.0)) < -eps &&
          norm_inf(dy.cwiseMin(0.0)) <= eps) {
        sol.status = SolveStatus::infeasible;
        break;
      }
    }
    // Unboundedness: dx with P dx ~ 0, q'dx < 0, G dx <= 0.
    const VectorXd dx = x - x_prev;
    const double dx_norm = norm_inf(dx);
    if (dx_norm > st.eps_infeasible) {
      const double eps = st.eps_infeasible * dx_norm;
      if (norm_inf(pb.P * dx) <= eps && pb.q.dot(dx) < -eps && (G * dx).maxCoeff() <= eps) {
        sol.status = SolveStatus::unbounded;
        break;
      }
    }

    const double score = std::max(prim / eps_prim, dual / eps_dual);
    if (score < 0.999 * best_score) {
      best_score = score;
      best_iter = iter;
    } else if (iter - best_iter >= st.stall_window) {
      break;
    }

    // Balance primal and dual residuals through the penalty.
    const double prim_scale = std::max({norm_inf(Gx), norm_inf(z), 1e-30});
    const double dual_scale = std::max({norm_inf(Px), norm_inf(Gty), norm_inf(pb.q), 1e-30});
    const double ratio =
        std::sqrt((prim / prim_scale) / std::max(dual / dual_scale, 1e-30));
    if (ratio > 5.0 || ratio < 0.2) {
      rho = std::clamp(rho * ratio, 1e-6, 1e6);
      llt = factorize(rho);
    }
  }
  sol.iterations = std::min(iter, st.max_iter);

  if (sol.status == SolveStatus::infeasible || sol.status == SolveStatus::unbounded) {
    sol.x = x;
    sol.y = y;
    return sol;
  }

  sol.x = x;
  sol.y = y.cwiseMax(0.0);
  sol.kkt = kkt_residual(pb, sol.x, sol.y);
  if (st.polish) {
    VectorXd xp = sol.x;
    VectorXd yp = y;
    if (polish(pb, xp, yp, 1e-12)) {
      const KktResidual pr = kkt_residual(pb, xp, yp);
      if (max_residual(pr) <= std::max(max_residual(sol.kkt), st.eps_abs)) {
        sol.x = std::move(xp);
        sol.y = std::move(yp);
        sol.kkt = pr;
        sol.polished = true;
        sol.status = SolveStatus::optimal;
      }
    }
  }
  sol.objective = qp_objective(pb, sol.x);
  return sol;
}

}  // namespace lempc
