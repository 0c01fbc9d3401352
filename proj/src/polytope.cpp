#include "lempc/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "lempc/convex.hpp"
#include "lempc/error.hpp"
#include "lempc/linalg.hpp"
#include "lempc/random.hpp"

namespace lempc {

namespace {

constexpr double kChebyshevBox = 1e6;

// Rows scaled to unit normals; zero rows are dropped when trivially true.
// Returns false when a zero row is violated (the set is empty).
bool normalized_rows(const HPolytope& P, MatrixXd& H, VectorXd& h, double tol) {
  std::vector<Eigen::Index> keep;
  VectorXd norms(P.num_rows());
  for (Eigen::Index i = 0; i < P.num_rows(); ++i) {
    norms(i) = P.H().row(i).norm();
    if (norms(i) <= 1e-14) {
      if (P.h()(i) < -tol) return false;
      continue;
    }
    keep.push_back(i);
  }
  H.resize(static_cast<Eigen::Index>(keep.size()), P.dim());
  h.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto i = keep[k];
    H.row(k) = P.H().row(i) / norms(i);
    h(k) = P.h()(i) / norms(i);
  }
  return true;
}

MatrixXd select_rows(const MatrixXd& M, const std::vector<Eigen::Index>& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), M.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(k) = M.row(rows[k]);
  return out;
}

VectorXd select(const VectorXd& v, const std::vector<Eigen::Index>& rows) {
  VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out(k) = v(rows[k]);
  return out;
}

}  // namespace

HPolytope::HPolytope(MatrixXd H, VectorXd h) : H_(std::move(H)), h_(std::move(h)) {
  LEMPC_REQUIRE(H_.rows() == h_.size(), "HPolytope: row count of H must equal length of h");
  LEMPC_REQUIRE(H_.allFinite() && h_.allFinite(), "HPolytope: non-finite entries");
}

HPolytope HPolytope::universe(Eigen::Index dim) {
  return HPolytope(MatrixXd(0, dim), VectorXd(0));
}

HPolytope HPolytope::box(const VectorXd& lower, const VectorXd& upper) {
  LEMPC_REQUIRE(lower.size() == upper.size(), "HPolytope::box: bound sizes differ");
  LEMPC_REQUIRE((lower.array() <= upper.array()).all(), "HPolytope::box: lower exceeds upper");
  const auto d = lower.size();
  MatrixXd H(2 * d, d);
  H << MatrixXd::Identity(d, d), -MatrixXd::Identity(d, d);
  VectorXd h(2 * d);
  h << upper, -lower;
  return HPolytope(std::move(H), std::move(h));
}

HPolytope HPolytope::scaled_offsets(double s) const { return HPolytope(H_, s * h_); }

bool contains(const HPolytope& P, const VectorXd& x, double tol) {
  LEMPC_REQUIRE(x.size() == P.dim(), "contains: dimension mismatch");
  if (P.num_rows() == 0) return true;
  const VectorXd lhs = P.H() * x;
  for (Eigen::Index i = 0; i < P.num_rows(); ++i) {
    if (lhs(i) > P.h()(i) + tol * (1.0 + std::abs(P.h()(i)))) return false;
  }
  return true;
}

HPolytope intersect(const HPolytope& P, const HPolytope& Q) {
  LEMPC_REQUIRE(P.dim() == Q.dim(), "intersect: dimension mismatch");
  MatrixXd H(P.num_rows() + Q.num_rows(), P.dim());
  H << P.H(), Q.H();
  VectorXd h(P.num_rows() + Q.num_rows());
  h << P.h(), Q.h();
  return HPolytope(std::move(H), std::move(h));
}

ChebyshevBall chebyshev_ball(const HPolytope& P) {
  const auto d = P.dim();
  ChebyshevBall ball;
  ball.center = VectorXd::Zero(d);

  std::vector<Eigen::Index> rows;
  double zero_row_violation = 0.0;
  for (Eigen::Index i = 0; i < P.num_rows(); ++i) {
    if (P.H().row(i).norm() <= 1e-14) {
      zero_row_violation = std::min(zero_row_violation, P.h()(i));
    } else {
      rows.push_back(i);
    }
  }
  const auto r = static_cast<Eigen::Index>(rows.size());
  MatrixXd G = MatrixXd::Zero(r + 2 * (d + 1), d + 1);
  VectorXd g(r + 2 * (d + 1));
  for (Eigen::Index k = 0; k < r; ++k) {
    G.block(k, 0, 1, d) = P.H().row(rows[k]);
    G(k, d) = P.H().row(rows[k]).norm();
    g(k) = P.h()(rows[k]);
  }
  G.block(r, 0, d + 1, d + 1) = MatrixXd::Identity(d + 1, d + 1);
  G.block(r + d + 1, 0, d + 1, d + 1) = -MatrixXd::Identity(d + 1, d + 1);
  g.tail(2 * (d + 1)).setConstant(kChebyshevBox);

  VectorXd c = VectorXd::Zero(d + 1);
  c(d) = -1.0;
  const Solution sol = solve_lp(c, G, g);
  if (sol.status != SolveStatus::optimal) {
    ball.radius = -std::numeric_limits<double>::infinity();
    return ball;
  }
  ball.center = sol.x.head(d);
  ball.radius = std::min(sol.x(d), zero_row_violation < 0 ? zero_row_violation : sol.x(d));
  return ball;
}

bool is_empty(const HPolytope& P, double tol) {
  if (P.num_rows() == 0) return false;
  return chebyshev_ball(P).radius < -tol;
}

double support(const HPolytope& P, const VectorXd& direction) {
  LEMPC_REQUIRE(direction.size() == P.dim(), "support: dimension mismatch");
  const Solution sol = solve_lp(-direction, P.H(), P.h());
  if (sol.status == SolveStatus::infeasible) throw NumericalError("support: empty polytope");
  if (sol.status == SolveStatus::unbounded) throw NumericalError("support: unbounded direction");
  if (sol.status != SolveStatus::optimal) throw NumericalError("support: LP failed");
  return -sol.objective;
}

bool is_bounded(const HPolytope& P) {
  for (Eigen::Index i = 0; i < P.dim(); ++i) {
    for (double sgn : {1.0, -1.0}) {
      VectorXd c = VectorXd::Zero(P.dim());
      c(i) = -sgn;
      const Solution sol = solve_lp(c, P.H(), P.h());
      if (sol.status == SolveStatus::unbounded) return false;
    }
  }
  return true;
}

HPolytope remove_redundant(const HPolytope& P, double tol) {
  MatrixXd H;
  VectorXd h;
  if (!normalized_rows(P, H, h, tol) || is_empty(P, tol)) {
    throw NumericalError("remove_redundant: polytope is empty");
  }
  const auto r = H.rows();

  // Near-duplicate normals: keep the tightest offset.
  std::vector<char> alive(r, 1);
  if (r <= 4000) {
    for (Eigen::Index i = 0; i < r; ++i) {
      if (!alive[i]) continue;
      for (Eigen::Index j = i + 1; j < r; ++j) {
        if (!alive[j]) continue;
        if ((H.row(i) - H.row(j)).cwiseAbs().maxCoeff() <= 1e-12) {
          if (h(j) < h(i)) {
            alive[i] = 0;
            break;
          }
          alive[j] = 0;
        }
      }
    }
  }

  // Row k is redundant when max H_k x over the others, with row k relaxed to
  // keep the LP bounded, stays at or below h_k.
  for (Eigen::Index k = 0; k < r; ++k) {
    if (!alive[k]) continue;
    std::vector<Eigen::Index> rows;
    for (Eigen::Index j = 0; j < r; ++j)
      if (alive[j]) rows.push_back(j);
    MatrixXd G = select_rows(H, rows);
    VectorXd g = select(h, rows);
    for (std::size_t a = 0; a < rows.size(); ++a) {
      if (rows[a] == k) g(static_cast<Eigen::Index>(a)) += 1.0;
    }
    const Solution sol = solve_lp(-H.row(k).transpose(), G, g);
    if (sol.status == SolveStatus::optimal && -sol.objective <= h(k) + tol) alive[k] = 0;
  }

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < r; ++i)
    if (alive[i]) keep.push_back(i);
  return HPolytope(select_rows(H, keep), select(h, keep));
}

bool is_subset(const HPolytope& inner, const HPolytope& outer, double tol) {
  LEMPC_REQUIRE(inner.dim() == outer.dim(), "is_subset: dimension mismatch");
  if (is_empty(inner)) return true;
  for (Eigen::Index i = 0; i < outer.num_rows(); ++i) {
    const double norm = outer.H().row(i).norm();
    const Solution sol = solve_lp(-outer.H().row(i).transpose(), inner.H(), inner.h());
    if (sol.status == SolveStatus::unbounded) return false;
    if (sol.status != SolveStatus::optimal) throw NumericalError("is_subset: LP failed");
    if (norm <= 1e-14) {
      if (outer.h()(i) < -tol) return false;
      continue;
    }
    if ((-sol.objective - outer.h()(i)) / norm > tol) return false;
  }
  return true;
}

bool set_equal(const HPolytope& P, const HPolytope& Q, double tol) {
  return is_subset(P, Q, tol) && is_subset(Q, P, tol);
}

HPolytope predecessor(const HPolytope& P, const MatrixXd& Acl, const HPolytope& input_rows) {
  LEMPC_REQUIRE(Acl.rows() == P.dim() && Acl.cols() == P.dim(),
                "predecessor: closed-loop matrix does not match polytope dimension");
  LEMPC_REQUIRE(input_rows.dim() == P.dim(), "predecessor: input rows dimension mismatch");
  return intersect(input_rows, HPolytope(P.H() * Acl, P.h()));
}

AdmissibleSetResult admissible_set(const MatrixXd& F, const HPolytope& input_rows,
                                   const HPolytope& initial, int max_iter, double tol) {
  AdmissibleSetResult result;
  HPolytope current = remove_redundant(initial);
  for (int i = 0; i < max_iter; ++i) {
    HPolytope next = remove_redundant(intersect(predecessor(current, F, input_rows), current));
    if (set_equal(next, current, tol)) {
      result.set = std::move(current);
      result.determination_index = i;
      result.converged = true;
      return result;
    }
    current = std::move(next);
  }
  result.set = std::move(current);
  result.determination_index = max_iter;
  result.converged = false;
  return result;
}

namespace {

void check_admissible_inputs(const MatrixXd& A, const MatrixXd& B, const MatrixXd& K,
                             const HPolytope& X, const HPolytope& U) {
  const auto m = A.rows();
  const auto n = B.cols();
  LEMPC_REQUIRE(A.cols() == m && B.rows() == m, "admissible set: A, B dimension mismatch");
  LEMPC_REQUIRE(K.rows() == n && K.cols() == m, "admissible set: K must be n x m");
  LEMPC_REQUIRE(X.dim() == m && U.dim() == n, "admissible set: constraint dimension mismatch");
  LEMPC_REQUIRE(is_schur_stable(A + B * K).stable,
                "admissible set: A + BK must be Schur stable");
  if (!contains(X, VectorXd::Zero(m)) || !contains(U, VectorXd::Zero(n))) {
    throw ValidationError("admissible set: origin violates the constraints, the set is empty");
  }
}

}  // namespace

AdmissibleSetResult max_admissible_set(const MatrixXd& A, const MatrixXd& B,
                                       const MatrixXd& K, const HPolytope& X,
                                       const HPolytope& U, int max_iter) {
  check_admissible_inputs(A, B, K, X, U);
  const HPolytope input_rows(U.H() * K, U.h());
  return admissible_set(A + B * K, input_rows, X, max_iter);
}

MatrixXd lifted_dynamics(const MatrixXd& Acl, const MatrixXd& B, const MatrixXd& Mgamma) {
  const auto m = Acl.rows();
  const auto p = Mgamma.cols();
  MatrixXd F = MatrixXd::Zero(m + p, m + p);
  F.topLeftCorner(m, m) = Acl;
  F.topRightCorner(m, p) = B * Mgamma;
  F.bottomRightCorner(p, p) = MatrixXd::Identity(p, p);
  return F;
}

AdmissibleSetResult max_admissible_set_aug(const MatrixXd& A, const MatrixXd& B,
                                           const MatrixXd& K, const MatrixXd& Mgamma,
                                           const HPolytope& X, const HPolytope& U,
                                           const HPolytope& Gamma, double eps, int max_iter) {
  check_admissible_inputs(A, B, K, X, U);
  const auto m = A.rows();
  const auto n = B.cols();
  const auto p = Mgamma.cols();
  LEMPC_REQUIRE(Mgamma.rows() == n, "max_admissible_set_aug: Mgamma must have n rows");
  LEMPC_REQUIRE(Gamma.dim() == p, "max_admissible_set_aug: Gamma dimension mismatch");
  LEMPC_REQUIRE(eps >= 0.0 && eps < 1.0, "max_admissible_set_aug: eps must lie in [0, 1)");
  if (p > 0 && !contains(Gamma, VectorXd::Zero(p))) {
    throw NumericalError("max_admissible_set_aug: Gamma does not contain gamma = 0");
  }

  MatrixXd KM(n, m + p);
  KM << K, Mgamma;
  const HPolytope input_rows(U.H() * KM, U.h());

  const HPolytope tight = Gamma.scaled_offsets(1.0 - eps);
  MatrixXd H0 = MatrixXd::Zero(X.num_rows() + tight.num_rows(), m + p);
  H0.topLeftCorner(X.num_rows(), m) = X.H();
  H0.bottomRightCorner(tight.num_rows(), p) = tight.H();
  VectorXd h0(X.num_rows() + tight.num_rows());
  h0 << X.h(), tight.h();

  return admissible_set(lifted_dynamics(A + B * K, B, Mgamma), input_rows,
                        HPolytope(std::move(H0), std::move(h0)), max_iter);
}

HPolytope project_eliminate(const HPolytope& P, std::vector<Eigen::Index> drop,
                            Eigen::Index row_cap) {
  std::sort(drop.begin(), drop.end());
  drop.erase(std::unique(drop.begin(), drop.end()), drop.end());
  for (auto j : drop) {
    LEMPC_REQUIRE(j >= 0 && j < P.dim(), "project_eliminate: coordinate out of range");
  }

  HPolytope cur = remove_redundant(P);
  // Highest index first so the remaining indices stay valid.
  for (auto it = drop.rbegin(); it != drop.rend(); ++it) {
    const Eigen::Index j = *it;
    const MatrixXd& H = cur.H();
    const VectorXd& h = cur.h();
    std::vector<Eigen::Index> pos, neg, zero;
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
      if (H(i, j) > 1e-12)
        pos.push_back(i);
      else if (H(i, j) < -1e-12)
        neg.push_back(i);
      else
        zero.push_back(i);
    }
    const auto out_rows =
        static_cast<Eigen::Index>(zero.size() + pos.size() * neg.size());
    if (out_rows > row_cap) {
      std::ostringstream os;
      os << "project_eliminate: " << out_rows << " intermediate rows exceed the cap of "
         << row_cap << "; reduce the state dimension or the horizon";
      throw NumericalError(os.str());
    }
    const auto d = cur.dim();
    MatrixXd Hn(out_rows, d);
    VectorXd hn(out_rows);
    Eigen::Index k = 0;
    for (auto i : zero) {
      Hn.row(k) = H.row(i);
      hn(k++) = h(i);
    }
    for (auto a : pos) {
      for (auto b : neg) {
        const double sa = H(a, j);
        const double sb = -H(b, j);
        Hn.row(k) = H.row(a) / sa + H.row(b) / sb;
        hn(k++) = h(a) / sa + h(b) / sb;
      }
    }
    // Remove column j.
    MatrixXd reduced(out_rows, d - 1);
    reduced.leftCols(j) = Hn.leftCols(j);
    reduced.rightCols(d - 1 - j) = Hn.rightCols(d - 1 - j);
    cur = remove_redundant(HPolytope(std::move(reduced), std::move(hn)));
  }
  return cur;
}

HPolytope slice_trailing(const HPolytope& P, const VectorXd& fixed) {
  const auto p = fixed.size();
  LEMPC_REQUIRE(p <= P.dim(), "slice_trailing: too many fixed coordinates");
  const auto m = P.dim() - p;
  return HPolytope(P.H().leftCols(m), P.h() - P.H().rightCols(p) * fixed);
}

HPolytope n_step_controllable_set(const MatrixXd& A, const MatrixXd& B, const HPolytope& X,
                                  const HPolytope& U, const HPolytope& Xf, int N) {
  const auto m = A.rows();
  const auto n = B.cols();
  LEMPC_REQUIRE(A.cols() == m && B.rows() == m, "n_step_controllable_set: A, B mismatch");
  LEMPC_REQUIRE(X.dim() == m && Xf.dim() == m && U.dim() == n,
                "n_step_controllable_set: constraint dimension mismatch");
  LEMPC_REQUIRE(N >= 0, "n_step_controllable_set: N must be nonnegative");

  HPolytope K = remove_redundant(Xf);
  std::vector<Eigen::Index> inputs(static_cast<std::size_t>(n));
  std::iota(inputs.begin(), inputs.end(), m);
  for (int i = 0; i < N; ++i) {
    const auto rk = K.num_rows();
    const auto rx = X.num_rows();
    const auto ru = U.num_rows();
    MatrixXd H = MatrixXd::Zero(rk + rx + ru, m + n);
    H.topLeftCorner(rk, m) = K.H() * A;
    H.topRightCorner(rk, n) = K.H() * B;
    H.block(rk, 0, rx, m) = X.H();
    H.bottomRightCorner(ru, n) = U.H();
    VectorXd h(rk + rx + ru);
    h << K.h(), X.h(), U.h();
    K = project_eliminate(HPolytope(std::move(H), std::move(h)), inputs);
  }
  return K;
}

MatrixXd bounding_box(const HPolytope& P) {
  const auto d = P.dim();
  MatrixXd box(d, 2);
  for (Eigen::Index i = 0; i < d; ++i) {
    VectorXd e = VectorXd::Zero(d);
    e(i) = 1.0;
    box(i, 1) = support(P, e);
    box(i, 0) = -support(P, -e);
  }
  return box;
}

std::vector<VectorXd> sample_uniform(const HPolytope& P, std::size_t count,
                                     std::uint64_t seed) {
  std::vector<VectorXd> out;
  out.reserve(count);
  if (count == 0) return out;
  const auto d = P.dim();
  const MatrixXd box = bounding_box(P);  // throws when empty or unbounded
  const VectorXd lo = box.col(0);
  const VectorXd hi = box.col(1);
  constexpr double tol = 1e-9;

  auto draw_box = [&](Rng& rng) {
    VectorXd x(d);
    for (Eigen::Index i = 0; i < d; ++i) x(i) = rng.uniform(lo(i), hi(i));
    return x;
  };

  // Pilot run decides between rejection and hit-and-run.
  constexpr int kPilot = 400;
  int accepted = 0;
  {
    Rng pilot = Rng::substream(seed, ~std::uint64_t{0});
    for (int k = 0; k < kPilot; ++k) accepted += contains(P, draw_box(pilot), tol) ? 1 : 0;
  }

  if (accepted >= kPilot / 100 && accepted > 0) {
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng = Rng::substream(seed, i);
      for (;;) {
        VectorXd x = draw_box(rng);
        if (contains(P, x, tol)) {
          out.push_back(std::move(x));
          break;
        }
      }
    }
    return out;
  }

  // Thin set: hit-and-run from the Chebyshev center.
  const VectorXd center = chebyshev_ball(P).center;
  const int burn_in = static_cast<int>(50 * d);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::substream(seed, i);
    VectorXd x = center;
    for (int step = 0; step < burn_in; ++step) {
      VectorXd dir(d);
      for (Eigen::Index k = 0; k < d; ++k) dir(k) = rng.normal();
      dir.normalize();
      const VectorXd a = P.H() * dir;
      const VectorXd s = P.h() - P.H() * x;
      double tmin = -std::numeric_limits<double>::infinity();
      double tmax = std::numeric_limits<double>::infinity();
      for (Eigen::Index r = 0; r < a.size(); ++r) {
        if (a(r) > 1e-14)
          tmax = std::min(tmax, std::max(s(r), 0.0) / a(r));
        else if (a(r) < -1e-14)
          tmin = std::max(tmin, std::max(s(r), 0.0) / a(r));
      }
      x += rng.uniform(tmin, tmax) * dir;
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Eigen::Vector2d> vertices_2d(const HPolytope& P) {
  LEMPC_REQUIRE(P.dim() == 2, "vertices_2d: polytope must be two-dimensional");
  const HPolytope R = remove_redundant(P);
  LEMPC_REQUIRE(R.num_rows() >= 3 && is_bounded(R), "vertices_2d: polytope must be bounded");
  const auto r = R.num_rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> angle(static_cast<std::size_t>(r));
  for (Eigen::Index i = 0; i < r; ++i) angle[i] = std::atan2(R.H()(i, 1), R.H()(i, 0));
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return angle[a] < angle[b]; });

  std::vector<Eigen::Vector2d> verts;
  verts.reserve(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto a = order[k];
    const auto b = order[(k + 1) % order.size()];
    Eigen::Matrix2d M;
    M.row(0) = R.H().row(a);
    M.row(1) = R.H().row(b);
    Eigen::Vector2d rhs(R.h()(a), R.h()(b));
    verts.emplace_back(M.partialPivLu().solve(rhs));
  }
  return verts;
}

double area_2d(const HPolytope& P) {
  const auto v = vertices_2d(P);
  double twice = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    twice += a.x() * b.y() - a.y() * b.x();
  }
  return 0.5 * std::abs(twice);
}

}  // namespace lempc
