#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace lempc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Halfspace representation {x : H x <= h}. Immutable after construction.
class HPolytope {
 public:
  HPolytope() = default;
  HPolytope(MatrixXd H, VectorXd h);

  /// All of R^dim (no rows).
  static HPolytope universe(Eigen::Index dim);
  static HPolytope box(const VectorXd& lower, const VectorXd& upper);

  Eigen::Index dim() const { return H_.cols(); }
  Eigen::Index num_rows() const { return h_.size(); }
  const MatrixXd& H() const { return H_; }
  const VectorXd& h() const { return h_; }

  /// Same set with the offsets scaled, {x : Hx <= s h}.
  HPolytope scaled_offsets(double s) const;

 private:
  MatrixXd H_ = MatrixXd(0, 0);
  VectorXd h_ = VectorXd(0);
};

/// True iff H x <= h + tol (1 + |h|) in every row.
bool contains(const HPolytope& P, const VectorXd& x, double tol = 0.0);

/// Row concatenation.
HPolytope intersect(const HPolytope& P, const HPolytope& Q);

struct ChebyshevBall {
  VectorXd center;
  double radius = 0.0;  // negative when the polytope is empty
};

/// Largest inscribed ball, with all variables boxed at +-1e6.
ChebyshevBall chebyshev_ball(const HPolytope& P);

bool is_empty(const HPolytope& P, double tol = 1e-9);

/// max d'x over P. Throws NumericalError when P is empty or unbounded in d.
double support(const HPolytope& P, const VectorXd& direction);

bool is_bounded(const HPolytope& P);

/// Drops rows implied by the others. Throws NumericalError when P is empty.
HPolytope remove_redundant(const HPolytope& P, double tol = 1e-9);

/// inner is a subset of outer, checked by support LPs on outer's rows.
bool is_subset(const HPolytope& inner, const HPolytope& outer, double tol = 1e-8);

/// Mutual containment at support-value tolerance tol.
bool set_equal(const HPolytope& P, const HPolytope& Q, double tol = 1e-8);

/// {x : input_rows hold at x, Acl x in P}. `input_rows` is the input
/// constraint pulled back to state space, i.e. rows H_U K <= h_U.
HPolytope predecessor(const HPolytope& P, const MatrixXd& Acl, const HPolytope& input_rows);

struct AdmissibleSetResult {
  HPolytope set;
  int determination_index = 0;
  bool converged = false;
};

/// Gilbert-Tan recursion S_{i+1} = Pre(S_i) ∩ S_i from S_0 = initial for the
/// autonomous map z+ = F z with stage rows `input_rows` on z. Works in any
/// lifted space; the plain and augmented sets are both built on it.
AdmissibleSetResult admissible_set(const MatrixXd& F, const HPolytope& input_rows,
                                   const HPolytope& initial, int max_iter = 500,
                                   double tol = 1e-8);

/// Maximal constraint admissible set of x+ = (A + BK) x with x in X, Kx in U.
AdmissibleSetResult max_admissible_set(const MatrixXd& A, const MatrixXd& B,
                                       const MatrixXd& K, const HPolytope& X,
                                       const HPolytope& U, int max_iter = 500);

/// Admissible set in (x, gamma) space for the lifted map
/// [x; gamma]+ = [[A+BK, B Mgamma], [0, I]] [x; gamma] with x in X,
/// Kx + Mgamma gamma in U and gamma in (1 - eps) Gamma.
AdmissibleSetResult max_admissible_set_aug(const MatrixXd& A, const MatrixXd& B,
                                           const MatrixXd& K, const MatrixXd& Mgamma,
                                           const HPolytope& X, const HPolytope& U,
                                           const HPolytope& Gamma, double eps = 1e-6,
                                           int max_iter = 500);

/// The lifted closed-loop matrix used by max_admissible_set_aug.
MatrixXd lifted_dynamics(const MatrixXd& Acl, const MatrixXd& B, const MatrixXd& Mgamma);

/// Fourier-Motzkin elimination of the listed coordinates, pruning after
/// each one. Throws NumericalError when the intermediate row count exceeds
/// row_cap.
HPolytope project_eliminate(const HPolytope& P, std::vector<Eigen::Index> drop,
                            Eigen::Index row_cap = 20000);

/// {x : (x, fixed) in P} where `fixed` are the trailing coordinates.
HPolytope slice_trailing(const HPolytope& P, const VectorXd& fixed);

/// N-step controllable set to Xf under x+ = Ax + Bu, x in X, u in U.
HPolytope n_step_controllable_set(const MatrixXd& A, const MatrixXd& B, const HPolytope& X,
                                  const HPolytope& U, const HPolytope& Xf, int N);

/// Uniform samples. Index i of the output depends only on (seed, i).
std::vector<VectorXd> sample_uniform(const HPolytope& P, std::size_t count,
                                     std::uint64_t seed);

/// Axis-aligned bounding box via support LPs; columns are (lower, upper).
MatrixXd bounding_box(const HPolytope& P);

/// Counterclockwise vertex cycle of a bounded, nonempty 2-D polytope.
std::vector<Eigen::Vector2d> vertices_2d(const HPolytope& P);
double area_2d(const HPolytope& P);

}  // namespace lempc
