#pragma once

#include <Eigen/Dense>
#include <string>

namespace lempc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// minimize 0.5 x'Px + q'x  subject to  G x <= g
struct QpProblem {
  MatrixXd P;
  VectorXd q;
  MatrixXd G;
  VectorXd g;

  Eigen::Index num_vars() const { return q.size(); }
  Eigen::Index num_rows() const { return g.size(); }
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iter };

std::string to_string(SolveStatus s);

struct KktResidual {
  double stationarity = 0.0;     // |Px + q + G'y|_inf
  double primal = 0.0;           // |max(Gx - g, 0)|_inf
  double complementarity = 0.0;  // max_i |y_i (g - Gx)_i| plus dual sign violation
};

struct Solution {
  VectorXd x;
  VectorXd y;  // multipliers of G x <= g, nonnegative at optimality
  double objective = 0.0;
  SolveStatus status = SolveStatus::max_iter;
  KktResidual kkt;
  int iterations = 0;
  bool polished = false;
};

struct QpSettings {
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  double eps_infeasible = 1e-8;
  int max_iter = 20000;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  int check_interval = 25;
  bool polish = true;
  // Infeasibility is only declared after this many iterations without
  // residual improvement, on top of the usual dual-ray certificate.
  int stall_window = 5000;
};

/// Dense operator-splitting (ADMM) QP solver with adaptive penalty and an
/// active-set polish on the detected active rows. Throws ValidationError on
/// inconsistent dimensions or an indefinite P.
Solution solve_qp(const QpProblem& problem, const QpSettings& settings = {});

/// minimize c'x subject to G x <= g. Objective values are exact up to
/// rounding; `x` is a vertex of the feasible set when one exists. Reports
/// infeasible and unbounded distinctly.
Solution solve_lp(const VectorXd& c, const MatrixXd& G, const VectorXd& g,
                  double tol = 1e-9);

struct KktReport {
  KktResidual residual;
  bool stationarity_ok = false;
  bool primal_ok = false;
  bool complementarity_ok = false;
  bool pass() const { return stationarity_ok && primal_ok && complementarity_ok; }
};

/// Recomputes the KKT residuals of (x, y) from the problem data alone.
KktReport verify_kkt(const QpProblem& problem, const Solution& solution, double tol);

KktResidual kkt_residual(const QpProblem& problem, const VectorXd& x, const VectorXd& y);

double qp_objective(const QpProblem& problem, const VectorXd& x);

}  // namespace lempc
