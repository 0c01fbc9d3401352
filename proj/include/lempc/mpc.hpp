#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lempc/convex.hpp"
#include "lempc/polytope.hpp"
#include "lempc/system.hpp"

namespace lempc {

/// Finite-horizon cost  sum_{k<N} x_k'Q x_k + u_k'R u_k + x_N'P x_N  with
/// x_k in X, u_k in U for k < N and x_N in Xf.
struct MpcConfig {
  MatrixXd Q;
  MatrixXd R;
  MatrixXd P;
  int N = 1;
  HPolytope Xf;
};

/// The MPC problem with the dynamics substituted out. For an initial state
/// x0 the decision variable is the stacked input sequence U = (u_0..u_{N-1}):
///
///   minimize   0.5 U'H U + (F x0)'U + x0'Y x0
///   subject to G U <= w + E x0
///
/// and the predicted states (x_1..x_N) equal Sx x0 + Su U.
struct CondensedQp {
  MatrixXd Sx;  // N m x m
  MatrixXd Su;  // N m x N n
  MatrixXd H;   // N n x N n, symmetric positive definite
  MatrixXd F;   // N n x m
  MatrixXd Y;   // m x m
  MatrixXd G;
  VectorXd w;
  MatrixXd E;
  HPolytope X;  // x_0 must lie in X as well
  int N = 0;
  Eigen::Index state_dim = 0;
  Eigen::Index input_dim = 0;

  QpProblem problem_at(const VectorXd& x0) const;
};

CondensedQp condense(const LtiSystem& system, const MpcConfig& config);

struct MpcResult {
  bool feasible = false;
  VectorXd u0;
  VectorXd u_seq;
  double value = 0.0;
  SolveStatus status = SolveStatus::infeasible;
};

/// First input of the MPC optimizer at x0. `feasible` is false (and no
/// input returned) when x0 admits no admissible input sequence.
MpcResult kappa_mpc(const CondensedQp& condensed, const VectorXd& x0,
                    const QpSettings& settings = {});

struct Sample {
  VectorXd x;
  VectorXd u;
  double value = 0.0;
};

/// n states drawn uniformly over X, kept only where the MPC problem is
/// feasible, labelled with the MPC input. Index i depends only on (seed, i).
/// Throws NumericalError when the acceptance rate falls below 0.1%.
std::vector<Sample> sample_training_set(const LtiSystem& system, const CondensedQp& condensed,
                                        std::size_t n, std::uint64_t seed);

}  // namespace lempc
