#pragma once

// Fixtures for the two benchmark plants and oracles that reach the same
// answers by routes independent of the library code under test.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "lempc/convex.hpp"
#include "lempc/governor.hpp"
#include "lempc/linalg.hpp"
#include "lempc/mlp.hpp"
#include "lempc/polytope.hpp"
#include "lempc/random.hpp"
#include "lempc/system.hpp"

namespace fixtures {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using lempc::HPolytope;
using lempc::LtiSystem;
using lempc::MlpParams;
using lempc::QpProblem;
using lempc::Rng;

inline HPolytope box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
  VectorXd l(static_cast<Eigen::Index>(lo.size())), u(static_cast<Eigen::Index>(hi.size()));
  Eigen::Index i = 0;
  for (double v : lo) l(i++) = v;
  i = 0;
  for (double v : hi) u(i++) = v;
  return HPolytope::box(l, u);
}

inline LtiSystem example1() {
  LtiSystem s;
  s.A.resize(2, 2);
  s.A << 1.0, 0.5, -0.1, 0.9;
  s.B.resize(2, 1);
  s.B << 1.0, 0.0;
  s.X = box({-5, -5}, {5, 5});
  s.U = box({-1}, {1});
  return s;
}

inline LtiSystem example2() {
  LtiSystem s;
  s.A.resize(4, 4);
  s.A << 0.7, -0.1, 0.0, 0.0,
         0.2, -0.5, 0.1, 0.0,
         0.0, 0.1, 0.1, 0.0,
         0.5, 0.0, 0.5, 0.5;
  s.B = MatrixXd::Constant(4, 1, 0.1);
  s.X = box({-5, -5, -1, -1}, {5, 5, 1, 1});
  s.U = box({-2}, {2});
  return s;
}

inline VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

/// Strictly feasible by construction: a random point satisfies every row
/// with slack.
inline QpProblem random_feasible_qp(Rng& rng, int d, int rows) {
  MatrixXd L(d, d);
  for (Eigen::Index i = 0; i < L.size(); ++i) L.data()[i] = rng.normal();
  QpProblem qp;
  qp.P = L * L.transpose() + 0.1 * MatrixXd::Identity(d, d);
  qp.q.resize(d);
  for (int i = 0; i < d; ++i) qp.q(i) = 3.0 * rng.normal();
  qp.G.resize(rows, d);
  for (Eigen::Index i = 0; i < qp.G.size(); ++i) qp.G.data()[i] = rng.normal();
  VectorXd x0(d);
  for (int i = 0; i < d; ++i) x0(i) = rng.normal();
  qp.g = qp.G * x0;
  for (int i = 0; i < rows; ++i) qp.g(i) += rng.uniform(0.0, 1.0);
  return qp;
}

/// Smallest |pre-activation| over the hidden layers on a batch.
inline double kink_distance(const MlpParams& p, const MatrixXd& X) {
  double closest = INFINITY;
  MatrixXd a = X;
  for (std::size_t l = 0; l + 1 < p.W.size(); ++l) {
    const MatrixXd z = (p.W[l] * a).colwise() + p.b[l];
    closest = std::min(closest, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return closest;
}

}  // namespace fixtures

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using lempc::GovernorModel;
using lempc::HPolytope;

/// Plain row check, written out so it does not go through contains().
inline bool inside(const HPolytope& P, const VectorXd& x, double tol = 1e-9) {
  for (Eigen::Index i = 0; i < P.num_rows(); ++i) {
    if (P.H().row(i).dot(x) > P.h()(i) + tol * (1.0 + std::abs(P.h()(i)))) return false;
  }
  return true;
}

/// Simulates x+ = Acl x under u = Kx and reports whether X and U hold for
/// `steps` steps.
inline bool closed_loop_admissible(const MatrixXd& Acl, const MatrixXd& K, const HPolytope& X,
                                   const HPolytope& U, VectorXd x, int steps,
                                   double tol = 1e-9) {
  for (int t = 0; t < steps; ++t) {
    if (!inside(X, x, tol) || !inside(U, K * x, tol)) return false;
    x = Acl * x;
  }
  return inside(X, x, tol) && inside(U, K * x, tol);
}

/// All pairwise facet intersections of a 2-D polytope that satisfy every
/// row: the vertex set, found without ordering facets.
inline std::vector<Eigen::Vector2d> brute_vertices(const HPolytope& P, double tol = 1e-9) {
  std::vector<Eigen::Vector2d> out;
  const auto r = P.num_rows();
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = i + 1; j < r; ++j) {
      Eigen::Matrix2d M;
      M << P.H().row(i), P.H().row(j);
      if (std::abs(M.determinant()) < 1e-12) continue;
      const Eigen::Vector2d v = M.lu().solve(Eigen::Vector2d(P.h()(i), P.h()(j)));
      if (inside(P, v, tol)) out.push_back(v);
    }
  }
  return out;
}

inline double brute_support(const HPolytope& P, const Eigen::Vector2d& d) {
  double best = -INFINITY;
  for (const auto& v : brute_vertices(P)) best = std::max(best, d.dot(v));
  return best;
}

/// Convex hull area of the brute-force vertex set (angle sort about the
/// centroid, then the shoelace formula).
inline double brute_area(const HPolytope& P) {
  auto v = brute_vertices(P);
  if (v.size() < 3) return 0.0;
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& p : v) c += p;
  c /= static_cast<double>(v.size());
  std::sort(v.begin(), v.end(), [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return std::atan2(a.y() - c.y(), a.x() - c.x()) < std::atan2(b.y() - c.y(), b.x() - c.x());
  });
  double area = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    area += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * std::abs(area);
}

/// Optimal value of  min 0.5 x'Px + q'x  s.t.  Gx <= g  for P positive
/// definite, by accelerated projected gradient ascent on the dual
///   max_{y >= 0}  -0.5 (q + G'y)' P^-1 (q + G'y) - g'y.
/// Returns the primal point recovered from the final multipliers.
struct DualGradientResult {
  VectorXd x;
  VectorXd y;
  double dual_value = 0.0;
  double primal_value = 0.0;
  int iterations = 0;
};

inline DualGradientResult projected_gradient_qp(const MatrixXd& P, const VectorXd& q,
                                                const MatrixXd& G, const VectorXd& g,
                                                int max_iter = 1000000, double tol = 1e-13) {
  const Eigen::LLT<MatrixXd> llt(P);
  const MatrixXd Pinv = llt.solve(MatrixXd::Identity(P.rows(), P.cols()));
  const MatrixXd D = G * Pinv * G.transpose();
  const VectorXd c = G * Pinv * q + g;
  // Dual: maximize -0.5 y'Dy - c'y (+ const); gradient -Dy - c.
  const double L = std::max(D.operatorNorm(), 1e-12);
  VectorXd y = VectorXd::Zero(G.rows()), y_prev = y, z = y;
  double t = 1.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    VectorXd next = (z - (D * z + c) / L).cwiseMax(0.0);
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    // Gradient-based restart.
    if ((z - next).dot(next - y) > 0.0) t_next = 1.0;
    z = next + ((t - 1.0) / t_next) * (next - y);
    if (t_next == 1.0) z = next;
    y_prev = y;
    y = next;
    t = t_next;
    if ((y - y_prev).lpNorm<Eigen::Infinity>() <= tol * (1.0 + y.lpNorm<Eigen::Infinity>())) break;
  }
  DualGradientResult r;
  r.y = y;
  r.x = -Pinv * (q + G.transpose() * y);
  r.dual_value = -0.5 * (q + G.transpose() * y).dot(Pinv * (q + G.transpose() * y)) - g.dot(y);
  r.primal_value = 0.5 * r.x.dot(P * r.x) + q.dot(r.x);
  r.iterations = it;
  return r;
}

/// Central finite difference of a scalar function along one coordinate.
template <class F>
double central_difference(F&& f, double& coord, double h) {
  const double saved = coord;
  coord = saved + h;
  const double up = f();
  coord = saved - h;
  const double down = f();
  coord = saved;
  return (up - down) / (2.0 * h);
}

/// Feasible gamma interval at x for a scalar command, from the augmented rows.
inline std::pair<double, double> gamma_interval(const GovernorModel& model, const VectorXd& x) {
  const auto& H = model.aug_set.H();
  const auto& h = model.aug_set.h();
  double lo = -INFINITY, hi = INFINITY;
  for (Eigen::Index r = 0; r < H.rows(); ++r) {
    const double a = H(r, H.cols() - 1);
    const double rhs = h(r) - H.row(r).head(H.cols() - 1).dot(x);
    if (a > 1e-14) hi = std::min(hi, rhs / a);
    else if (a < -1e-14) lo = std::max(lo, rhs / a);
  }
  return {lo, hi};
}

}  // namespace oracle
