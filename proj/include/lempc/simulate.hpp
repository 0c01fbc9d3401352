#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lempc/governor.hpp"
#include "lempc/mlp.hpp"
#include "lempc/mpc.hpp"
#include "lempc/system.hpp"

namespace lempc {

struct PolicyOutput {
  VectorXd u;
  std::optional<VectorXd> gamma;
  std::string status = "ok";
};

/// A state-feedback policy. May carry per-run state (governor), so build a
/// fresh one per run. Throwing ends the run.
using Policy = std::function<PolicyOutput(const VectorXd& x)>;
using PolicyFactory = std::function<Policy()>;

struct Trajectory {
  std::vector<VectorXd> states;  // T + 1 entries unless the run stopped early
  std::vector<VectorXd> inputs;  // one per completed step
  std::vector<std::optional<VectorXd>> gammas;
  std::vector<char> x_violation;  // per state
  std::vector<char> u_violation;  // per input
  std::vector<double> step_times;  // seconds spent in the policy per step
  std::vector<std::string> statuses;
  bool terminated = false;
  std::string error;

  std::size_t steps() const { return inputs.size(); }
  std::size_t violation_count() const;
};

/// Simulates x+ = Ax + Bu under the policy, recording violations of X and U
/// at containment tolerance `tol`. A throwing policy stops the run and sets
/// `terminated` and `error`.
Trajectory run_closed_loop(const LtiSystem& system, const Policy& policy, const VectorXd& x0,
                           int T, double tol = 1e-9);

// --- policies ---

Policy zero_policy(Eigen::Index input_dim);
Policy linear_policy(const MatrixXd& K);
Policy mpc_policy(const CondensedQp& condensed);
Policy dual_mode_policy(const DualModeController& controller);

/// The network's suggestion filtered by the safety governor. Owns its own
/// governor state.
Policy governed_policy(const GovernorModel& model, std::function<VectorXd(const VectorXd&)> nn);

/// u = argmin |u - nn(x)|^2  s.t.  u in U, Ax + Bu in feasible_region. When
/// infeasible, applies nn(x) projected onto U and reports "infeasible".
Policy projection_baseline(const LtiSystem& system, const HPolytope& feasible_region,
                           std::function<VectorXd(const VectorXd&)> nn);

/// projection_baseline outside sigma_inf, Kx inside.
Policy projection_dual_mode(const LtiSystem& system, const HPolytope& feasible_region,
                            const DualModeController& controller);

struct NamedPolicy {
  std::string name;
  PolicyFactory make;
};

struct ComparisonRow {
  std::string name;
  std::size_t runs = 0;
  std::size_t violations = 0;   // steps with an X or U violation, summed over runs
  std::size_t terminated = 0;   // runs stopped by a policy error
  double max_terminal_norm = 0.0;
  int max_entry_step = 0;       // latest first step inside sigma_inf; -1 if some run never enters
  double total_time = 0.0;      // seconds, summed over runs
  double mean_step_time = 0.0;  // seconds per control step
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  std::vector<std::vector<Trajectory>> trajectories;  // [policy][x0]
};

/// One run per (policy, x0). sigma_inf, when given, defines the entry step.
ComparisonReport compare(const LtiSystem& system, const std::vector<NamedPolicy>& policies,
                         const std::vector<VectorXd>& x0s, int T,
                         const std::optional<HPolytope>& sigma_inf = std::nullopt);

/// First t with x(t) in `set`, or -1.
int entry_step(const Trajectory& traj, const HPolytope& set, double tol = 1e-9);

}  // namespace lempc
