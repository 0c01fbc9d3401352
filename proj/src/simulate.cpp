#include "lempc/simulate.hpp"

#include <chrono>
#include <memory>

#include "lempc/error.hpp"

namespace lempc {

std::size_t Trajectory::violation_count() const {
  std::size_t count = 0;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const bool xv = x_violation[t] != 0;
    const bool uv = t < u_violation.size() && u_violation[t] != 0;
    if (xv || uv) ++count;
  }
  return count;
}

Trajectory run_closed_loop(const LtiSystem& system, const Policy& policy, const VectorXd& x0,
                           int T, double tol) {
  LEMPC_REQUIRE(T >= 1, "run_closed_loop: T must be at least 1");
  LEMPC_REQUIRE(x0.size() == system.state_dim(), "run_closed_loop: x0 dimension mismatch");
  using clock = std::chrono::steady_clock;

  Trajectory traj;
  traj.states.reserve(static_cast<std::size_t>(T) + 1);
  VectorXd x = x0;
  traj.states.push_back(x);
  traj.x_violation.push_back(contains(system.X, x, tol) ? 0 : 1);

  for (int t = 0; t < T; ++t) {
    PolicyOutput out;
    const auto start = clock::now();
    try {
      out = policy(x);
    } catch (const std::exception& e) {
      traj.step_times.push_back(std::chrono::duration<double>(clock::now() - start).count());
      traj.terminated = true;
      traj.error = e.what();
      break;
    }
    traj.step_times.push_back(std::chrono::duration<double>(clock::now() - start).count());
    if (out.u.size() != system.input_dim() || !out.u.allFinite()) {
      traj.terminated = true;
      traj.error = "policy returned an invalid input";
      break;
    }
    traj.inputs.push_back(out.u);
    traj.gammas.push_back(out.gamma);
    traj.statuses.push_back(out.status);
    traj.u_violation.push_back(contains(system.U, out.u, tol) ? 0 : 1);

    x = system.step(x, out.u);
    traj.states.push_back(x);
    traj.x_violation.push_back(contains(system.X, x, tol) ? 0 : 1);
  }
  return traj;
}

int entry_step(const Trajectory& traj, const HPolytope& set, double tol) {
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    if (contains(set, traj.states[t], tol)) return static_cast<int>(t);
  }
  return -1;
}

Policy zero_policy(Eigen::Index input_dim) {
  return [input_dim](const VectorXd&) { return PolicyOutput{VectorXd::Zero(input_dim), {}, "ok"}; };
}

Policy linear_policy(const MatrixXd& K) {
  return [K](const VectorXd& x) { return PolicyOutput{K * x, {}, "ok"}; };
}

Policy mpc_policy(const CondensedQp& condensed) {
  auto c = std::make_shared<const CondensedQp>(condensed);
  return [c](const VectorXd& x) {
    MpcResult r = kappa_mpc(*c, x);
    if (!r.feasible) throw NumericalError("mpc_policy: MPC problem infeasible at the current state");
    return PolicyOutput{std::move(r.u0), {}, "optimal"};
  };
}

Policy dual_mode_policy(const DualModeController& controller) {
  auto c = std::make_shared<const DualModeController>(controller);
  return [c](const VectorXd& x) {
    const bool linear = c->linear_branch(x);
    return PolicyOutput{linear ? VectorXd(c->K * x) : mlp_forward(c->mlp, x), {},
                        linear ? "linear" : "network"};
  };
}

Policy governed_policy(const GovernorModel& model, std::function<VectorXd(const VectorXd&)> nn) {
  auto m = std::make_shared<const GovernorModel>(model);
  auto state = std::make_shared<GovernorState>();
  return [m, state, nn = std::move(nn)](const VectorXd& x) {
    const GovernResult r = govern(*m, *state, x, nn(x));
    return PolicyOutput{r.u, r.gamma, to_string(r.status)};
  };
}

namespace {

VectorXd project_onto(const HPolytope& U, const VectorXd& v) {
  if (contains(U, v)) return v;
  QpProblem qp;
  qp.P = 2.0 * MatrixXd::Identity(v.size(), v.size());
  qp.q = -2.0 * v;
  qp.G = U.H();
  qp.g = U.h();
  const Solution sol = solve_qp(qp);
  if (sol.status != SolveStatus::optimal) throw NumericalError("project_onto: U is empty");
  return sol.x;
}

}  // namespace

Policy projection_baseline(const LtiSystem& system, const HPolytope& feasible_region,
                           std::function<VectorXd(const VectorXd&)> nn) {
  LEMPC_REQUIRE(feasible_region.dim() == system.state_dim(),
                "projection_baseline: region dimension mismatch");
  auto sys = std::make_shared<const LtiSystem>(system);
  auto region = std::make_shared<const HPolytope>(feasible_region);
  return [sys, region, nn = std::move(nn)](const VectorXd& x) {
    const VectorXd u_nn = nn(x);
    const auto n = sys->input_dim();
    QpProblem qp;
    qp.P = 2.0 * MatrixXd::Identity(n, n);
    qp.q = -2.0 * u_nn;
    qp.G.resize(sys->U.num_rows() + region->num_rows(), n);
    qp.G << sys->U.H(), region->H() * sys->B;
    qp.g.resize(qp.G.rows());
    qp.g << sys->U.h(), region->h() - region->H() * sys->A * x;
    const Solution sol = solve_qp(qp);
    if (sol.status == SolveStatus::optimal) return PolicyOutput{sol.x, {}, "projected"};
    return PolicyOutput{project_onto(sys->U, u_nn), {}, "infeasible"};
  };
}

Policy projection_dual_mode(const LtiSystem& system, const HPolytope& feasible_region,
                            const DualModeController& controller) {
  auto c = std::make_shared<const DualModeController>(controller);
  Policy inner = projection_baseline(system, feasible_region,
                                     [c](const VectorXd& x) { return mlp_forward(c->mlp, x); });
  return [c, inner = std::move(inner)](const VectorXd& x) {
    if (c->linear_branch(x)) return PolicyOutput{c->K * x, {}, "linear"};
    return inner(x);
  };
}

ComparisonReport compare(const LtiSystem& system, const std::vector<NamedPolicy>& policies,
                         const std::vector<VectorXd>& x0s, int T,
                         const std::optional<HPolytope>& sigma_inf) {
  ComparisonReport report;
  for (const auto& named : policies) {
    ComparisonRow row;
    row.name = named.name;
    std::vector<Trajectory> runs;
    std::size_t steps = 0;
    for (const auto& x0 : x0s) {
      Trajectory traj = run_closed_loop(system, named.make(), x0, T);
      row.runs += 1;
      row.violations += traj.violation_count();
      row.terminated += traj.terminated ? 1 : 0;
      row.max_terminal_norm = std::max(row.max_terminal_norm, traj.states.back().norm());
      if (sigma_inf) {
        const int entry = entry_step(traj, *sigma_inf);
        if (entry < 0 || row.max_entry_step < 0)
          row.max_entry_step = -1;
        else
          row.max_entry_step = std::max(row.max_entry_step, entry);
      }
      for (double dt : traj.step_times) row.total_time += dt;
      steps += traj.step_times.size();
      runs.push_back(std::move(traj));
    }
    row.mean_step_time = steps > 0 ? row.total_time / static_cast<double>(steps) : 0.0;
    report.rows.push_back(row);
    report.trajectories.push_back(std::move(runs));
  }
  return report;
}

}  // namespace lempc
