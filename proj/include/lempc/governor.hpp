#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "lempc/convex.hpp"
#include "lempc/polytope.hpp"
#include "lempc/system.hpp"

namespace lempc {

/// Equilibria (x_s, u_s) = (Mx gamma, Mu gamma), gamma in R^p, spanning
/// ker [A - I, B]. The stacked [Mx; Mu] has orthonormal columns.
struct EquilibriumParam {
  MatrixXd Mx;
  MatrixXd Mu;
  Eigen::Index p() const { return Mx.cols(); }
};

EquilibriumParam equilibrium_basis(const MatrixXd& A, const MatrixXd& B);

/// Statically admissible commands {gamma : Mx gamma in X, Mu gamma in U},
/// redundancy-pruned. May be unbounded when the basis is degenerate; use
/// is_bounded to check. Throws ValidationError when gamma = 0 is excluded.
HPolytope command_set(const EquilibriumParam& param, const HPolytope& X, const HPolytope& U);

struct GovernorModel {
  MatrixXd K;
  MatrixXd Mx;
  MatrixXd Mu;
  MatrixXd Mgamma;    // Mu - K Mx
  HPolytope gamma_set;
  HPolytope aug_set;  // in (x, gamma) space
  HPolytope sigma_inf;
  double s = 1.0;
  double eps = 1e-6;
  int sigma_index = 0;
  int aug_index = 0;

  Eigen::Index state_dim() const { return K.cols(); }
  Eigen::Index input_dim() const { return K.rows(); }
  Eigen::Index command_dim() const { return Mgamma.cols(); }
};

/// Composes equilibrium_basis, command_set, Mgamma and the augmented
/// admissible set, then checks that the gamma = 0 slice equals the plain
/// admissible set. Throws NumericalError if any stage fails.
GovernorModel build_governor(const LtiSystem& system, const MatrixXd& K, double s = 1.0,
                             double eps = 1e-6);

/// Same, with a caller-supplied equilibrium basis (any full-rank
/// parameterization of the kernel, not necessarily orthonormal).
GovernorModel build_governor(const LtiSystem& system, const MatrixXd& K,
                             const EquilibriumParam& basis, double s = 1.0, double eps = 1e-6);

/// Per control loop; never shared between plants.
struct GovernorState {
  std::optional<VectorXd> gamma_prev;
};

enum class GovernStatus { optimal, fallback, out_of_domain };

std::string to_string(GovernStatus s);

struct GovernResult {
  VectorXd u;
  VectorXd gamma;
  GovernStatus status = GovernStatus::out_of_domain;
};

/// Nearest input of the form Kx + Mgamma gamma, in s-weighted squared norm,
/// with (x, gamma) in the augmented set. Falls back to the previous gamma if
/// the QP fails. Throws OutOfDomainError when neither is available.
GovernResult govern(const GovernorModel& model, GovernorState& state, const VectorXd& x,
                    const VectorXd& u_nn, const QpSettings& settings = {});

/// True iff some gamma has (x, gamma) in the augmented set.
bool membership(const GovernorModel& model, const VectorXd& x, double tol = 1e-9);

/// The projection of the augmented set onto the state coordinates.
HPolytope governed_region(const GovernorModel& model);

}  // namespace lempc
