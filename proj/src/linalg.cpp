#include "lempc/linalg.hpp"

#include <cmath>
#include <sstream>

#include "lempc/error.hpp"

namespace lempc {

double inf_norm(const MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  return M.cwiseAbs().rowwise().sum().maxCoeff();
}

bool all_finite(const MatrixXd& M) { return M.allFinite(); }

namespace {

void check_dare_inputs(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                       const MatrixXd& R) {
  const auto m = A.rows();
  const auto n = B.cols();
  LEMPC_REQUIRE(A.cols() == m, "solve_dare: A must be square");
  LEMPC_REQUIRE(B.rows() == m, "solve_dare: B must have as many rows as A");
  LEMPC_REQUIRE(Q.rows() == m && Q.cols() == m, "solve_dare: Q must be m x m");
  LEMPC_REQUIRE(R.rows() == n && R.cols() == n, "solve_dare: R must be n x n");
  LEMPC_REQUIRE(all_finite(A) && all_finite(B) && all_finite(Q) && all_finite(R),
                "solve_dare: non-finite entries");
  LEMPC_REQUIRE((Q - Q.transpose()).cwiseAbs().maxCoeff() <= 1e-10,
                "solve_dare: Q must be symmetric");
  LEMPC_REQUIRE((R - R.transpose()).cwiseAbs().maxCoeff() <= 1e-10,
                "solve_dare: R must be symmetric");

  // Sylvester's law of inertia: D of the LDL' factorization carries the sign
  // pattern of the eigenvalues.
  Eigen::LDLT<MatrixXd> q_ldlt(Q);
  LEMPC_REQUIRE(q_ldlt.info() == Eigen::Success &&
                    (q_ldlt.vectorD().array() >= -1e-12).all(),
                "solve_dare: Q must be positive semidefinite");
  Eigen::LLT<MatrixXd> r_llt(R);
  LEMPC_REQUIRE(r_llt.info() == Eigen::Success, "solve_dare: R must be positive definite");
}

MatrixXd riccati_map(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                     const MatrixXd& R, const MatrixXd& P) {
  const MatrixXd BtPA = B.transpose() * P * A;
  const MatrixXd S = B.transpose() * P * B + R;
  return A.transpose() * P * A + Q - BtPA.transpose() * S.ldlt().solve(BtPA);
}

}  // namespace

MatrixXd lqr_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& R,
                  const MatrixXd& P) {
  LEMPC_REQUIRE(A.rows() == A.cols() && B.rows() == A.rows() && P.rows() == A.rows() &&
                    P.cols() == A.rows() && R.rows() == B.cols() && R.cols() == B.cols(),
                "lqr_gain: dimension mismatch");
  const MatrixXd S = R + B.transpose() * P * B;
  Eigen::FullPivLU<MatrixXd> lu(S);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) throw NumericalError("lqr_gain: R + B'PB is singular");
  return -lu.solve(B.transpose() * P * A);
}

double dare_residual(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                     const MatrixXd& R, const MatrixXd& P) {
  return inf_norm(riccati_map(A, B, Q, R, P) - P);
}

RiccatiSolution solve_dare(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q,
                           const MatrixXd& R, double tol, int max_iter) {
  check_dare_inputs(A, B, Q, R);
  LEMPC_REQUIRE(tol > 0 && max_iter > 0, "solve_dare: tol and max_iter must be positive");

  RiccatiSolution sol;
  MatrixXd P = Q;
  bool converged = false;
  int k = 0;
  for (; k < max_iter; ++k) {
    MatrixXd next = riccati_map(A, B, Q, R, P);
    next = 0.5 * (next + next.transpose());
    if (!all_finite(next)) {
      throw NumericalError("solve_dare: iteration diverged (is (A, B) stabilizable?)");
    }
    const double step = inf_norm(next - P);
    P = std::move(next);
    if (step <= tol) {
      converged = true;
      ++k;
      break;
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "solve_dare: no convergence within " << max_iter << " iterations";
    throw NumericalError(os.str());
  }

  sol.P = P;
  sol.K = lqr_gain(A, B, R, P);
  sol.Acl = A + B * sol.K;
  sol.iterations = k;

  auto cert = is_schur_stable(sol.Acl);
  if (!cert.stable) {
    throw NumericalError("solve_dare: closed loop A + BK is not Schur stable: " +
                         cert.diagnostic);
  }
  return sol;
}

MatrixXd null_space_basis(const MatrixXd& M, double rel_tol) {
  const auto cols = M.cols();
  if (cols == 0) return MatrixXd(0, 0);
  if (M.rows() == 0) return MatrixXd::Identity(cols, cols);

  Eigen::JacobiSVD<MatrixXd> svd(M, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > rel_tol * smax && smax > 0.0) ++rank;
  }
  MatrixXd basis = svd.matrixV().rightCols(cols - rank);

  // Deterministic orientation: largest-magnitude entry of each column positive.
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    Eigen::Index imax = 0;
    basis.col(j).cwiseAbs().maxCoeff(&imax);
    if (basis(imax, j) < 0) basis.col(j) *= -1.0;
  }
  return basis;
}

StabilityCertificate is_schur_stable(const MatrixXd& M) {
  LEMPC_REQUIRE(M.rows() == M.cols(), "is_schur_stable: matrix must be square");
  StabilityCertificate cert;
  const auto m = M.rows();
  if (m == 0) {
    cert.stable = true;
    cert.X = MatrixXd(0, 0);
    return cert;
  }

  // vec(M'XM) = (M' kron M') vec(X)
  const MatrixXd Mt = M.transpose();
  const auto mm = m * m;
  MatrixXd L(mm, mm);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      L.block(i * m, j * m, m, m) = Mt(i, j) * Mt;
    }
  }
  L -= MatrixXd::Identity(mm, mm);
  const MatrixXd I = MatrixXd::Identity(m, m);
  const VectorXd rhs = -Eigen::Map<const VectorXd>(I.data(), mm);

  Eigen::FullPivLU<MatrixXd> lu(L);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    cert.diagnostic = "Lyapunov system singular: eigenvalue product on the unit circle";
    return cert;
  }
  VectorXd vecX = lu.solve(rhs);
  MatrixXd X = Eigen::Map<MatrixXd>(vecX.data(), m, m);
  X = 0.5 * (X + X.transpose());
  if (!all_finite(X)) {
    cert.diagnostic = "Lyapunov solution not finite";
    return cert;
  }
  Eigen::LLT<MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) {
    cert.diagnostic = "Lyapunov solution is not positive definite";
    return cert;
  }
  cert.stable = true;
  cert.X = std::move(X);
  return cert;
}

}  // namespace lempc
