#pragma once

#include <Eigen/Dense>
#include <string>

namespace lempc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Stabilizing solution of the discrete algebraic Riccati equation together
/// with the associated LQ gain and closed-loop matrix.
struct RiccatiSolution {
  MatrixXd P;
  MatrixXd K;    // n x m, u = K x
  MatrixXd Acl;  // A + B K
  int iterations = 0;
};

/// Solves P = A'PA + Q - A'PB (B'PB + R)^-1 B'PA by fixed-point iteration
/// from P0 = Q, symmetrizing every step. Stops once the sup-norm of the
/// update drops below `tol`, which is also the fixed-point residual.
///
/// Throws ValidationError on inconsistent dimensions, asymmetric or
/// indefinite Q, or R not positive definite. Throws NumericalError when the
/// iteration does not converge in `max_iter` steps or the result does not
/// stabilize (A, B).
RiccatiSolution solve_dare(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                           const MatrixXd& R, double tol = 1e-12, int max_iter = 100000);

/// K = -(R + B'PB)^-1 B'PA.
MatrixXd lqr_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& R,
                  const MatrixXd& P);

/// Sup-norm of A'PA + Q - A'PB (B'PB + R)^-1 B'PA - P.
double dare_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                     const MatrixXd& R, const MatrixXd& P);

/// Orthonormal basis of ker M via SVD. Singular values at or below
/// rel_tol * sigma_max count as zero. A full-rank M yields zero columns.
MatrixXd null_space_basis(const MatrixXd& M, double rel_tol = 1e-10);

struct StabilityCertificate {
  bool stable = false;
  MatrixXd X;  // solves M'XM - X = -I when stable
  std::string diagnostic;
};

/// Schur stability decided by the discrete Lyapunov equation M'XM - X = -I:
/// stable iff it has a symmetric positive definite solution.
StabilityCertificate is_schur_stable(const MatrixXd& M);

/// Sup-norm (max absolute row sum).
double inf_norm(const MatrixXd& M);

bool all_finite(const MatrixXd& M);

}  // namespace lempc
