#pragma once

#include <Eigen/Dense>

#include "lempc/polytope.hpp"

namespace lempc {

/// x(t+1) = A x(t) + B u(t) with x in X, u in U.
struct LtiSystem {
  MatrixXd A;  // m x m
  MatrixXd B;  // m x n
  HPolytope X;
  HPolytope U;

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index input_dim() const { return B.cols(); }

  VectorXd step(const VectorXd& x, const VectorXd& u) const { return A * x + B * u; }

  /// Throws ValidationError on any dimension mismatch.
  void validate() const;
};

}  // namespace lempc
