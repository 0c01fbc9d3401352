// Dense revised simplex for  min c'x  s.t.  G x <= g  with few variables and
// many rows, the shape of every support, redundancy and Chebyshev query in
// the polytope code. It runs on the dual standard form
//
//   min g'y  s.t.  G'y = -c,  y >= 0
//
// whose basis is d x d. Each basic set of rows defines a candidate vertex
// x = G_B^-1 g_B, and the reduced cost of row j is its slack g_j - G_j x, so an
// iteration enters the most violated row and the method stops at a feasible
// vertex. A box |x_i| <= kBox is appended so a dual-feasible basis exists from
// the start; an optimum resting on that box means the LP is unbounded.

#include <cmath>
#include <limits>
#include <vector>

#include "lempc/convex.hpp"
#include "lempc/error.hpp"

namespace lempc {

namespace {

constexpr double kBox = 1e7;

}  // namespace

Solution solve_lp(const VectorXd& c, const MatrixXd& G, const VectorXd& g, double tol) {
  const Eigen::Index d = c.size();
  const Eigen::Index r = g.size();
  LEMPC_REQUIRE(G.rows() == r && G.cols() == d, "solve_lp: dimension mismatch");
  LEMPC_REQUIRE(c.allFinite() && G.allFinite() && g.allFinite(), "solve_lp: non-finite data");

  Solution sol;
  sol.y = VectorXd::Zero(r);
  if (d == 0) {
    sol.x = VectorXd(0);
    const bool feasible = r == 0 || g.minCoeff() >= -tol;
    sol.status = feasible ? SolveStatus::optimal : SolveStatus::infeasible;
    return sol;
  }

  // Rows 0..r-1 are the problem, r..r+d-1 are x_i <= kBox, r+d..r+2d-1 are
  // -x_i <= kBox.
  const Eigen::Index total = r + 2 * d;
  MatrixXd Ga(total, d);
  VectorXd ga(total);
  Ga.topRows(r) = G;
  ga.head(r) = g;
  Ga.middleRows(r, d) = MatrixXd::Identity(d, d);
  Ga.bottomRows(d) = -MatrixXd::Identity(d, d);
  ga.tail(2 * d).setConstant(kBox);

  VectorXd row_norm(total);
  for (Eigen::Index j = 0; j < total; ++j) row_norm(j) = std::max(Ga.row(j).norm(), 1e-300);

  // Initial basis: for each coordinate the box row whose multiplier is
  // nonnegative in  G_B' y_B = -c.
  std::vector<Eigen::Index> basis(d);
  std::vector<char> in_basis(total, 0);
  for (Eigen::Index i = 0; i < d; ++i) {
    basis[i] = (-c(i) >= 0.0) ? r + i : r + d + i;
    in_basis[basis[i]] = 1;
  }

  MatrixXd GB(d, d);
  VectorXd gB(d);
  VectorXd x(d);
  VectorXd yB(d);
  const int max_iter = static_cast<int>(50 * (total + d));
  int degenerate_run = 0;
  bool bland = false;

  auto factor = [&]() {
    for (Eigen::Index i = 0; i < d; ++i) {
      GB.row(i) = Ga.row(basis[i]);
      gB(i) = ga(basis[i]);
    }
    Eigen::PartialPivLU<MatrixXd> lu(GB);
    x = lu.solve(gB);
    yB = lu.transpose().solve(-c);
    return lu;
  };

  int it = 0;
  for (; it < max_iter; ++it) {
    auto lu = factor();

    // Entering row: most violated constraint at the current vertex.
    Eigen::Index enter = -1;
    double best = 0.0;
    for (Eigen::Index j = 0; j < total; ++j) {
      if (in_basis[j]) continue;
      const double slack = (ga(j) - Ga.row(j).dot(x)) / row_norm(j);
      if (slack < -tol * (1.0 + std::abs(ga(j)) / row_norm(j))) {
        if (bland) {
          enter = j;
          break;
        }
        if (slack < best) {
          best = slack;
          enter = j;
        }
      }
    }
    if (enter < 0) break;

    // Direction of the basic multipliers as the entering one grows.
    const VectorXd w = lu.transpose().solve(Ga.row(enter).transpose());
    Eigen::Index leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < d; ++i) {
      if (w(i) <= 1e-12) continue;
      const double t = std::max(yB(i), 0.0) / w(i);
      const bool better = t < ratio - 1e-14 ||
                          (t <= ratio + 1e-14 && leave >= 0 &&
                           (bland ? basis[i] < basis[leave] : w(i) > w(leave)));
      if (leave < 0 || better) {
        ratio = t;
        leave = i;
      }
    }
    if (leave < 0) {
      // Dual ray: the violated row can never be satisfied.
      sol.status = SolveStatus::infeasible;
      sol.x = x;
      sol.iterations = it;
      return sol;
    }
    degenerate_run = ratio <= 1e-14 ? degenerate_run + 1 : 0;
    if (degenerate_run > 50) bland = true;

    in_basis[basis[leave]] = 0;
    basis[leave] = enter;
    in_basis[enter] = 1;
  }
  sol.iterations = it;
  if (it == max_iter) {
    sol.status = SolveStatus::max_iter;
    sol.x = x;
    return sol;
  }
  factor();

  sol.x = x;
  sol.objective = c.dot(x);
  bool on_box = false;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (basis[i] < r) {
      sol.y(basis[i]) = std::max(yB(i), 0.0);
    } else if (yB(i) > tol) {
      on_box = true;
    }
  }
  sol.status = on_box ? SolveStatus::unbounded : SolveStatus::optimal;
  if (r > 0) {
    const VectorXd slack = g - G * x;
    sol.kkt.primal = std::max(0.0, -slack.minCoeff());
    sol.kkt.complementarity = sol.y.cwiseProduct(slack).cwiseAbs().maxCoeff();
  }
  sol.kkt.stationarity = (c + G.transpose() * sol.y).lpNorm<Eigen::Infinity>();
  return sol;
}

}  // namespace lempc
