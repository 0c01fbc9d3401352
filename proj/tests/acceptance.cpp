// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Reference values come from the oracles in support.hpp, not from
// the code under test.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>

#include "lempc/error.hpp"
#include "lempc/governor.hpp"
#include "lempc/linalg.hpp"
#include "lempc/mlp.hpp"
#include "lempc/mpc.hpp"
#include "lempc/polytope.hpp"
#include "lempc/simulate.hpp"
#include "support.hpp"

using namespace lempc;
using fixtures::vec;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Everything downstream of synthesis for one plant: sets, MPC, a trained
// network and the governor.
struct Plant {
  LtiSystem sys;
  RiccatiSolution ric;
  GovernorModel model;
  HPolytope region;
  CondensedQp mpc10;
  MlpParams net;
  TrainResult training;
  std::vector<int> sizes;
  double train_seconds = 0.0;

  Plant(LtiSystem s, std::vector<int> hidden, std::size_t samples) : sys(std::move(s)) {
    const auto m = sys.state_dim(), n = sys.input_dim();
    ric = solve_dare(sys.A, sys.B, MatrixXd::Identity(m, m), MatrixXd::Identity(n, n));
    model = build_governor(sys, ric.K);
    region = governed_region(model);
    mpc10 = condense(sys, {MatrixXd::Identity(m, m), MatrixXd::Identity(n, n), ric.P, 10, model.sigma_inf});
    sizes = {static_cast<int>(m)};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(static_cast<int>(n));
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 1000;
    cfg.seed = 1;
    const auto start = Clock::now();
    training = train(sample_training_set(sys, mpc10, samples, 1), sizes, cfg);
    train_seconds = seconds_since(start);
    net = training.params;
  }

  DualModeController controller() const { return {ric.K, model.sigma_inf, net}; }

  Policy governed() const {
    const auto c = controller();
    return governed_policy(model, [c](const VectorXd& x) { return c.eval(x); });
  }
};

const Plant& ex1() {
  static const Plant p(fixtures::example1(), {20, 20, 20}, 100);
  return p;
}

const Plant& ex2() {
  static const Plant p(fixtures::example2(), {20, 20, 20, 20, 20, 20}, 500);
  return p;
}

// --------------------------------------------------------------------------

Outcome dare_reproduction() {
  const auto start = Clock::now();
  const auto sys = fixtures::example1();
  const auto ric = solve_dare(sys.A, sys.B, MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1));
  const double t = seconds_since(start);
  MatrixXd P_ref(2, 2), K_ref(1, 2);
  P_ref << 1.71, -0.26, -0.26, 5.53;
  K_ref << -0.64, -0.23;
  const double dP = (ric.P - P_ref).cwiseAbs().maxCoeff();
  const double dK = (ric.K - K_ref).cwiseAbs().maxCoeff();
  return {dP <= 0.01 && dK <= 0.01 && t < 1.0,
          "P = [" + fmt("%.4f", ric.P(0, 0)) + ", " + fmt("%.4f", ric.P(0, 1)) + "; " + fmt("%.4f", ric.P(1, 0)) +
              ", " + fmt("%.4f", ric.P(1, 1)) + "], K = [" + fmt("%.4f", ric.K(0, 0)) + ", " +
              fmt("%.4f", ric.K(0, 1)) + "], max dev P " + fmt("%.2e", dP) + ", K " + fmt("%.2e", dK) + ", " +
              fmt("%.4f", t) + " s"};
}

Outcome mpc_matches_lqr() {
  const auto start = Clock::now();
  const auto sys = fixtures::example1();
  const auto ric = solve_dare(sys.A, sys.B, MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1));
  const auto sigma = max_admissible_set(sys.A, sys.B, ric.K, sys.X, sys.U).set;
  const auto cq = condense(sys, {MatrixXd::Identity(2, 2), MatrixXd::Identity(1, 1), ric.P, 10, sigma});
  double worst = 0.0;
  bool all_feasible = true;
  for (const auto& x : sample_uniform(sigma, 200, 2)) {
    const auto r = kappa_mpc(cq, x);
    all_feasible = all_feasible && r.feasible;
    worst = std::max(worst, (r.u0 - ric.K * x).lpNorm<Eigen::Infinity>());
  }
  const double t = seconds_since(start);
  return {all_feasible && worst <= 1e-4 && t < 30.0,
          "200 states, max |u_mpc - Kx| = " + fmt("%.2e", worst) + ", " + fmt("%.2f", t) + " s"};
}

Outcome slice_equality() {
  std::string detail;
  bool ok = true;
  for (const Plant* p : {&ex1(), &ex2()}) {
    const auto& g = p->model;
    const HPolytope slice = slice_trailing(g.aug_set, VectorXd::Zero(g.command_dim()));
    const bool eq = set_equal(slice, g.sigma_inf, 1e-8);
    ok = ok && eq;
    detail += (detail.empty() ? "" : ", ") + std::string("example ") + (p == &ex1() ? "1" : "2") + ": " +
              (eq ? "equal" : "DIFFERENT") + " (" + std::to_string(slice.num_rows()) + " vs " +
              std::to_string(g.sigma_inf.num_rows()) + " rows)";
  }
  return {ok, detail};
}

Outcome safety_fuzz() {
  const auto start = Clock::now();
  std::string detail;
  bool ok = true;
  for (const Plant* p : {&ex1(), &ex2()}) {
    const auto x0s = sample_uniform(p->region, 500, 44);
    std::size_t violations = 0, out_of_domain = 0, steps = 0;
    for (std::size_t i = 0; i < x0s.size(); ++i) {
      const MlpParams net = init_mlp(p->sizes, 10000 + i);
      const auto traj = run_closed_loop(
          p->sys, governed_policy(p->model, [net](const VectorXd& x) { return mlp_forward(net, x); }), x0s[i], 50);
      violations += traj.violation_count();
      out_of_domain += traj.terminated ? 1 : 0;
      steps += traj.steps();
    }
    ok = ok && violations == 0 && out_of_domain == 0 && steps == 500 * 50;
    detail += (detail.empty() ? "" : "; ") + std::string("example ") + (p == &ex1() ? "1" : "2") + ": " +
              std::to_string(violations) + " violations, " + std::to_string(out_of_domain) + " stopped runs, " +
              std::to_string(steps) + " steps";
  }
  const double t = seconds_since(start);
  return {ok && t < 300.0, detail + ", " + fmt("%.1f", t) + " s"};
}

Outcome invariance() {
  std::string detail;
  bool ok = true;
  for (const Plant* p : {&ex1(), &ex2()}) {
    const auto& g = p->model;
    const auto m = g.state_dim();
    std::size_t bad_sigma = 0, bad_aug = 0;
    for (const auto& x0 : sample_uniform(g.sigma_inf, 500, 5)) {
      VectorXd x = x0;
      for (int t = 0; t < 100; ++t) {
        if (!oracle::inside(p->sys.X, x) || !oracle::inside(p->sys.U, g.K * x) || !oracle::inside(g.sigma_inf, x)) {
          ++bad_sigma;
          break;
        }
        x = p->ric.Acl * x;
      }
    }
    for (const auto& z0 : sample_uniform(g.aug_set, 500, 6)) {
      const VectorXd gamma = z0.tail(g.command_dim());
      VectorXd x = z0.head(m);
      for (int t = 0; t < 100; ++t) {
        VectorXd z(z0.size());
        z << x, gamma;
        const VectorXd u = g.K * x + g.Mgamma * gamma;
        if (!oracle::inside(p->sys.X, x) || !oracle::inside(p->sys.U, u) || !oracle::inside(g.aug_set, z)) {
          ++bad_aug;
          break;
        }
        x = p->sys.A * x + p->sys.B * u;
      }
    }
    ok = ok && bad_sigma == 0 && bad_aug == 0;
    detail += (detail.empty() ? "" : "; ") + std::string("example ") + (p == &ex1() ? "1" : "2") +
              ": admissible set " + std::to_string(bad_sigma) + "/500 escapes, augmented set " +
              std::to_string(bad_aug) + "/500 escapes";
  }
  return {ok, detail};
}

Outcome region_structure() {
  const auto& p = ex1();
  const auto& s = p.sys;
  const auto& sigma = p.model.sigma_inf;
  const HPolytope X1 = n_step_controllable_set(s.A, s.B, s.X, s.U, sigma, 1);
  const HPolytope X3 = n_step_controllable_set(s.A, s.B, s.X, s.U, sigma, 3);
  const HPolytope X10 = n_step_controllable_set(s.A, s.B, s.X, s.U, sigma, 10);
  const bool nested = is_subset(X1, X3, 1e-8) && is_subset(X3, X10, 1e-8);
  const bool governed = is_subset(sigma, p.region, 1e-8) && is_subset(p.region, s.X, 1e-8);
  // Areas from brute-force vertex enumeration, independent of the library.
  const double a1 = oracle::brute_area(X1), a3 = oracle::brute_area(X3), a10 = oracle::brute_area(X10);
  const double ag = oracle::brute_area(p.region);
  const bool ordered = a1 < ag && ag < a10;
  return {nested && governed && ordered,
          std::string("X1 in X3 in X10: ") + (nested ? "yes" : "NO") + ", admissible in governed in X: " +
              (governed ? "yes" : "NO") + ", areas X1 " + fmt("%.2f", a1) + " < governed " + fmt("%.2f", ag) +
              " < X10 " + fmt("%.2f", a10) + "; X3 " + fmt("%.2f", a3) + " (governed/X3 = " +
              fmt("%.3f", ag / a3) + ", not gated)"};
}

Outcome training_sanity() {
  const auto start = Clock::now();
  const auto& p = ex1();
  const double ratio = p.training.final_loss / p.training.initial_loss;

  // The linear law on the set where the MPC law is linear.
  std::vector<Sample> linear;
  for (const auto& x : sample_uniform(p.model.sigma_inf, 100, 3)) linear.push_back({x, p.ric.K * x, 0.0});
  TrainConfig cfg;
  cfg.epochs = 1000;
  cfg.seed = 1;
  cfg.validation_fraction = 0.0;
  const auto lin = train(linear, {2, 20, 20, 20, 1}, cfg);
  MatrixXd X(2, 100), Y(1, 100);
  for (int i = 0; i < 100; ++i) {
    X.col(i) = linear[i].x;
    Y.col(i) = linear[i].u;
  }
  const double lin_mse = mse(lin.params, X, Y);
  const double t = seconds_since(start) + p.train_seconds;
  return {ratio <= 0.1 && lin_mse <= 1e-3 && t < 120.0,
          "example 1 loss " + fmt("%.4g", p.training.initial_loss) + " -> " + fmt("%.4g", p.training.final_loss) +
              " (ratio " + fmt("%.2e", ratio) + "), linear-law mse " + fmt("%.2e", lin_mse) + ", " +
              fmt("%.2f", t) + " s"};
}

Outcome convergence() {
  std::vector<std::pair<const Plant*, std::vector<VectorXd>>> cases;
  std::vector<VectorXd> vertices;
  for (const auto& v : oracle::brute_vertices(ex1().region)) vertices.emplace_back(v);
  cases.emplace_back(&ex1(), vertices);
  cases.emplace_back(&ex2(), std::vector<VectorXd>{vec({-1.12, -4.62, 0.03, -0.85})});
  bool ok = true;
  std::string detail;
  for (const auto& [p, x0s] : cases) {
    std::size_t violations = 0, stopped = 0, never_entered = 0;
    double worst = 0.0;
    for (const auto& x0 : x0s) {
      const auto traj = run_closed_loop(p->sys, p->governed(), x0, 50);
      violations += traj.violation_count();
      stopped += traj.terminated ? 1 : 0;
      never_entered += entry_step(traj, p->model.sigma_inf) < 0 ? 1 : 0;
      worst = std::max(worst, traj.states.back().norm());
    }
    ok = ok && violations == 0 && stopped == 0 && never_entered == 0 && worst <= 0.01;
    detail += (detail.empty() ? "" : "; ") + std::string("example ") + (p == &ex1() ? "1" : "2") + ": " +
              std::to_string(x0s.size()) + " starts, " + std::to_string(violations) + " violations, " +
              std::to_string(never_entered) + " never entered, max |x(50)| = " + fmt("%.2e", worst);
  }
  return {ok, detail};
}

Outcome timing() {
  const auto& p = ex1();
  std::vector<VectorXd> x0s;
  for (const auto& v : oracle::brute_vertices(p.region)) x0s.emplace_back(v);
  const auto cq = p.mpc10;
  const auto report = compare(p.sys,
                              {{"governed", [&] { return p.governed(); }},
                               {"mpc N=10", [cq] { return mpc_policy(cq); }}},
                              x0s, 50, p.model.sigma_inf);
  const double tg = report.rows[0].mean_step_time, tm = report.rows[1].mean_step_time;
  return {report.rows[1].terminated == 0 && tg < tm,
          "example 1 mean step: governed " + fmt("%.4f", 1e3 * tg) + " ms, MPC N=10 " + fmt("%.4f", 1e3 * tm) +
              " ms over " + std::to_string(x0s.size()) + " runs of 50 steps"};
}

Outcome numerical_kernels() {
  // Gradients.
  double worst_grad = 0.0;
  int compared = 0, seeds = 0;
  for (int seed = 0; seeds < 20; ++seed) {
    MlpParams p = init_mlp({3, 8, 6, 2}, 5000 + seed);
    Rng rng(seed);
    for (auto& b : p.b)
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * rng.normal();
    MatrixXd X(3, 12), Y(2, 12);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = rng.normal();
    // Keep finite-difference probes away from ReLU kinks.
    if (fixtures::kink_distance(p, X) < 1e-3) continue;
    ++seeds;
    const auto lg = loss_and_gradient(p, X, Y);
    auto loss = [&] { return mse(p, X, Y); };
    auto check = [&](double analytic, double& param) {
      const double numeric = oracle::central_difference(loss, param, 1e-5);
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      worst_grad = std::max(worst_grad, std::abs(analytic - numeric) / scale);
      ++compared;
    };
    for (std::size_t l = 0; l < p.W.size(); ++l) {
      for (Eigen::Index i = 0; i < p.W[l].size(); ++i) check(lg.grad.dW[l].data()[i], p.W[l].data()[i]);
      for (Eigen::Index i = 0; i < p.b[l].size(); ++i) check(lg.grad.db[l](i), p.b[l](i));
    }
  }
  // QPs.
  Rng rng(2025);
  int kkt_fail = 0;
  double worst_obj = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + static_cast<int>(rng.next() % 8);
    const int rows = 1 + static_cast<int>(rng.next() % 24);
    const QpProblem qp = fixtures::random_feasible_qp(rng, d, rows);
    const auto sol = solve_qp(qp);
    if (sol.status != SolveStatus::optimal || !verify_kkt(qp, sol, 1e-6).pass()) ++kkt_fail;
    const auto ref = oracle::projected_gradient_qp(qp.P, qp.q, qp.G, qp.g);
    worst_obj = std::max(worst_obj, std::abs(sol.objective - ref.dual_value) / (1.0 + std::abs(ref.dual_value)));
  }
  return {worst_grad <= 1e-5 && kkt_fail == 0 && worst_obj <= 1e-5,
          std::to_string(compared) + " gradient entries over 20 seeds, max rel err " + fmt("%.2e", worst_grad) +
              "; 50 QPs, " + std::to_string(kkt_fail) + " KKT failures, max objective gap " + fmt("%.2e", worst_obj)};
}

// Best input of the form Kx + Mgamma gamma on a uniform grid over [lo, hi].
double grid_best_u(double kx, double mg, double target, double lo, double hi, int points, double* best_gamma) {
  double best = std::numeric_limits<double>::infinity(), best_u = kx;
  for (int i = 0; i < points; ++i) {
    const double gamma = lo + (hi - lo) * i / (points - 1);
    const double u = kx + mg * gamma;
    if (std::abs(u - target) < best) {
      best = std::abs(u - target);
      best_u = u;
      *best_gamma = gamma;
    }
  }
  return best_u;
}

Outcome governor_oracle() {
  const auto& p = ex1();
  const auto& g = p.model;
  const auto xs = sample_uniform(p.region, 100, 8);
  Rng rng(9);
  double worst = 0.0;
  for (const auto& x : xs) {
    const VectorXd u_nn = vec({rng.uniform(-3.0, 3.0)});
    GovernorState st;
    const auto r = govern(g, st, x, u_nn);
    const auto [lo, hi] = oracle::gamma_interval(g, x);
    const double kx = (g.K * x)(0), mg = g.Mgamma(0, 0);
    // A 10^4-point pass over the whole interval, then a 10^4-point pass
    // over the two cells around the coarse winner.
    double gamma = 0.0;
    grid_best_u(kx, mg, u_nn(0), lo, hi, 10000, &gamma);
    const double cell = (hi - lo) / 9999.0;
    const double best_u = grid_best_u(kx, mg, u_nn(0), std::max(lo, gamma - cell), std::min(hi, gamma + cell),
                                      10000, &gamma);
    worst = std::max(worst, std::abs(r.u(0) - best_u));
  }
  return {worst <= 1e-4, "100 random (x, u_nn) pairs, max |u - u_grid| = " + fmt("%.2e", worst)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "DARE/LQR reproduction", dare_reproduction},
      {2, "MPC equals LQR on the admissible set", mpc_matches_lqr},
      {3, "gamma = 0 slice equals the admissible set", slice_equality},
      {4, "governor safety with random networks", safety_fuzz},
      {5, "invariance of the admissible and augmented sets", invariance},
      {6, "feasible region structure", region_structure},
      {7, "training sanity", training_sanity},
      {8, "closed-loop convergence", convergence},
      {9, "governed step faster than MPC N=10", timing},
      {10, "numerical kernels", numerical_kernels},
      {11, "governor matches grid search", governor_oracle},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures, std::size(criteria));
  return failures == 0 ? 0 : 1;
}
