#include <doctest.h>

#include "lempc/error.hpp"
#include "lempc/linalg.hpp"
#include "lempc/mpc.hpp"
#include "lempc/polytope.hpp"
#include "support.hpp"

using namespace lempc;
using fixtures::box;
using fixtures::vec;

namespace {

struct Plant {
  LtiSystem sys;
  RiccatiSolution ric;
  HPolytope sigma;
  CondensedQp cq;

  explicit Plant(LtiSystem s, int N = 10) : sys(std::move(s)) {
    const auto m = sys.state_dim();
    const auto n = sys.input_dim();
    ric = solve_dare(sys.A, sys.B, MatrixXd::Identity(m, m), MatrixXd::Identity(n, n));
    sigma = max_admissible_set(sys.A, sys.B, ric.K, sys.X, sys.U).set;
    cq = condense(sys, {MatrixXd::Identity(m, m), MatrixXd::Identity(n, n), ric.P, N, sigma});
  }
};

const Plant& ex1() {
  static const Plant p(fixtures::example1());
  return p;
}

const Plant& ex2() {
  static const Plant p(fixtures::example2());
  return p;
}

}  // namespace

TEST_CASE("one-step scalar mpc without constraints") {
  LtiSystem s{MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1), HPolytope::universe(1),
              HPolytope::universe(1)};
  const auto cq = condense(s, {MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1), 1,
                               HPolytope::universe(1)});
  const auto r = kappa_mpc(cq, vec({1.0}));
  REQUIRE(r.feasible);
  // minimize u^2 + (1 + u)^2 plus the stage cost x0^2 = 1.
  CHECK(r.u0(0) == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(r.value == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("prediction matrices") {
  const auto& p = ex1();
  const auto m = 2;
  SUBCASE("zero inputs give free response") {
    const VectorXd x0 = vec({1.0, -2.0});
    const VectorXd pred = p.cq.Sx * x0 + p.cq.Su * VectorXd::Zero(10);
    MatrixXd Ak = MatrixXd::Identity(m, m);
    for (int k = 0; k < 10; ++k) {
      Ak = p.sys.A * Ak;
      CHECK((pred.segment(k * m, m) - Ak * x0).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SUBCASE("random inputs match step-by-step simulation") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      const VectorXd x0 = vec({rng.uniform(-5, 5), rng.uniform(-5, 5)});
      VectorXd useq(10);
      for (int k = 0; k < 10; ++k) useq(k) = rng.uniform(-1, 1);
      const VectorXd pred = p.cq.Sx * x0 + p.cq.Su * useq;
      VectorXd x = x0;
      for (int k = 0; k < 10; ++k) {
        x = p.sys.step(x, useq.segment(k, 1));
        CHECK((pred.segment(k * m, m) - x).cwiseAbs().maxCoeff() <= 1e-10);
      }
    }
  }
  SUBCASE("hessian is symmetric positive definite") {
    CHECK((p.cq.H - p.cq.H.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(p.cq.H.llt().info() == Eigen::Success);
    CHECK(p.cq.Su.cols() == 10);
  }
  SUBCASE("condensed objective equals the stage-wise cost") {
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
      const VectorXd x0 = vec({rng.uniform(-5, 5), rng.uniform(-5, 5)});
      VectorXd useq(10);
      for (int k = 0; k < 10; ++k) useq(k) = rng.uniform(-1, 1);
      double direct = 0.0;
      VectorXd x = x0;
      for (int k = 0; k < 10; ++k) {
        direct += x.squaredNorm() + useq(k) * useq(k);
        x = p.sys.step(x, useq.segment(k, 1));
      }
      direct += x.dot(p.ric.P * x);
      const QpProblem qp = p.cq.problem_at(x0);
      const double condensed = qp_objective(qp, useq) + x0.dot(p.cq.Y * x0);
      CHECK(condensed == doctest::Approx(direct).epsilon(1e-10));
    }
  }
}

TEST_CASE("condense validates its configuration") {
  const auto sys = fixtures::example1();
  const MatrixXd I2 = MatrixXd::Identity(2, 2), I1 = MatrixXd::Identity(1, 1);
  CHECK_THROWS_AS(condense(sys, {I2, I1, I2, 0, sys.X}), ValidationError);
  CHECK_THROWS_AS(condense(sys, {I1, I1, I2, 5, sys.X}), ValidationError);
  CHECK_THROWS_AS(condense(sys, {I2, MatrixXd::Zero(1, 1), I2, 5, sys.X}), ValidationError);
  CHECK_THROWS_AS(condense(sys, {-I2, I1, I2, 5, sys.X}), ValidationError);
  CHECK_THROWS_AS(condense(sys, {I2, I1, I2, 5, box({-9, -9}, {9, 9})}), ValidationError);
  LtiSystem bad = sys;
  bad.B = MatrixXd::Ones(3, 1);
  CHECK_THROWS_AS(condense(bad, {I2, I1, I2, 5, sys.X}), ValidationError);
}

TEST_CASE("kappa_mpc at the origin") {
  const auto r = kappa_mpc(ex1().cq, VectorXd::Zero(2));
  REQUIRE(r.feasible);
  CHECK(r.u0.cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(std::abs(r.value) <= 1e-9);
}

TEST_CASE("mpc reduces to the lqr law inside the admissible set") {
  const auto& p = ex1();
  const auto pts = sample_uniform(p.sigma, 50, 21);
  double worst = 0.0;
  for (const auto& x : pts) {
    const auto r = kappa_mpc(p.cq, x);
    REQUIRE(r.feasible);
    worst = std::max(worst, (r.u0 - p.ric.K * x).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("mpc feasibility matches the controllable set") {
  const auto& p = ex1();
  const HPolytope X10 = n_step_controllable_set(p.sys.A, p.sys.B, p.sys.X, p.sys.U, p.sigma, 10);
  // Points outside X entirely, inside X but outside X10, and inside X10.
  CHECK_FALSE(kappa_mpc(p.cq, vec({6.0, 0.0})).feasible);
  Rng rng(14);
  int outside = 0;
  for (int k = 0; k < 300; ++k) {
    const VectorXd x = vec({rng.uniform(-5, 5), rng.uniform(-5, 5)});
    double margin = INFINITY;
    for (Eigen::Index r = 0; r < X10.num_rows(); ++r)
      margin = std::min(margin, std::abs(X10.H().row(r).dot(x) - X10.h()(r)) / X10.H().row(r).norm());
    if (margin < 1e-5) continue;
    const bool in = contains(X10, x);
    outside += in ? 0 : 1;
    const auto r = kappa_mpc(p.cq, x);
    CHECK(r.feasible == in);
    if (!r.feasible) CHECK(r.u0.size() == 0);
  }
  CHECK(outside > 10);
}

TEST_CASE("mpc solutions satisfy constraints, value positivity and the terminal condition") {
  const auto& p = ex1();
  Rng rng(15);
  for (int k = 0; k < 40; ++k) {
    const VectorXd x0 = vec({rng.uniform(-5, 5), rng.uniform(-5, 5)});
    const auto r = kappa_mpc(p.cq, x0);
    if (!r.feasible) continue;
    CHECK(r.value > 0.0);
    const VectorXd pred = p.cq.Sx * x0 + p.cq.Su * r.u_seq;
    for (int j = 0; j < 10; ++j) {
      CHECK(contains(p.sys.U, r.u_seq.segment(j, 1), 1e-7));
      if (j < 9) CHECK(contains(p.sys.X, pred.segment(2 * j, 2), 1e-7));
    }
    CHECK(contains(p.sigma, pred.tail(2), 1e-7));
  }
}

TEST_CASE("training set sampling") {
  SUBCASE("example 1, n = 100") {
    const auto& p = ex1();
    const auto data = sample_training_set(p.sys, p.cq, 100, 1);
    REQUIRE(data.size() == 100);
    for (const auto& s : data) {
      const auto r = kappa_mpc(p.cq, s.x);
      CHECK(r.feasible);
      CHECK((r.u0 - s.u).cwiseAbs().maxCoeff() <= 1e-9);
      CHECK(contains(p.sys.U, s.u, 1e-7));
    }
    const auto again = sample_training_set(p.sys, p.cq, 100, 1);
    for (std::size_t i = 0; i < data.size(); ++i) CHECK(data[i].x == again[i].x);
  }
  SUBCASE("example 2, n = 500") {
    const auto& p = ex2();
    const auto data = sample_training_set(p.sys, p.cq, 500, 2);
    REQUIRE(data.size() == 500);
    for (const auto& s : data) {
      CHECK(contains(p.sys.X, s.x));
      CHECK(s.u(0) >= -2.0 - 1e-7);
      CHECK(s.u(0) <= 2.0 + 1e-7);
    }
  }
  SUBCASE("n = 0 is rejected") {
    CHECK_THROWS_AS(sample_training_set(ex1().sys, ex1().cq, 0, 1), ValidationError);
  }
  SUBCASE("a region with no feasible states is reported") {
    // Terminal set far smaller than anything reachable in one step from most of X.
    const auto& p = ex1();
    const auto cq = condense(p.sys, {MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1), p.ric.P, 1,
                                     box({-1e-6, -1e-6}, {1e-6, 1e-6})});
    CHECK_THROWS_AS(sample_training_set(p.sys, cq, 5, 1), NumericalError);
  }
}
