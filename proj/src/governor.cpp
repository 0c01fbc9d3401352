#include "lempc/governor.hpp"

#include <numeric>
#include <vector>

#include "lempc/error.hpp"
#include "lempc/linalg.hpp"

namespace lempc {

std::string to_string(GovernStatus s) {
  switch (s) {
    case GovernStatus::optimal:
      return "optimal";
    case GovernStatus::fallback:
      return "fallback";
    case GovernStatus::out_of_domain:
      return "out_of_domain";
  }
  return "unknown";
}

EquilibriumParam equilibrium_basis(const MatrixXd& A, const MatrixXd& B) {
  const auto m = A.rows();
  const auto n = B.cols();
  LEMPC_REQUIRE(A.cols() == m && B.rows() == m, "equilibrium_basis: A, B dimension mismatch");
  MatrixXd M(m, m + n);
  M << A - MatrixXd::Identity(m, m), B;
  const MatrixXd basis = null_space_basis(M);
  if (basis.cols() == 0) {
    throw NumericalError("equilibrium_basis: [A - I, B] has trivial kernel (no equilibria)");
  }
  EquilibriumParam param;
  param.Mx = basis.topRows(m);
  param.Mu = basis.bottomRows(n);
  return param;
}

HPolytope command_set(const EquilibriumParam& param, const HPolytope& X, const HPolytope& U) {
  LEMPC_REQUIRE(X.dim() == param.Mx.rows() && U.dim() == param.Mu.rows(),
                "command_set: constraint dimension mismatch");
  const HPolytope raw = intersect(HPolytope(X.H() * param.Mx, X.h()),
                                  HPolytope(U.H() * param.Mu, U.h()));
  LEMPC_REQUIRE(contains(raw, VectorXd::Zero(param.p()), 1e-12),
                "command_set: gamma = 0 is not statically admissible (origin excluded)");
  return remove_redundant(raw);
}

GovernorModel build_governor(const LtiSystem& system, const MatrixXd& K, double s, double eps) {
  system.validate();
  return build_governor(system, K, equilibrium_basis(system.A, system.B), s, eps);
}

GovernorModel build_governor(const LtiSystem& system, const MatrixXd& K,
                             const EquilibriumParam& eq, double s, double eps) {
  system.validate();
  LEMPC_REQUIRE(s > 0.0, "build_governor: weight s must be positive");
  LEMPC_REQUIRE(eps > 0.0 && eps < 1.0, "build_governor: eps must lie in (0, 1)");
  const auto m = system.state_dim();
  const auto n = system.input_dim();
  LEMPC_REQUIRE(K.rows() == n && K.cols() == m, "build_governor: K must be n x m");

  GovernorModel model;
  model.K = K;
  model.s = s;
  model.eps = eps;

  LEMPC_REQUIRE(eq.Mx.rows() == m && eq.Mu.rows() == n && eq.Mu.cols() == eq.Mx.cols(),
                "build_governor: equilibrium basis dimension mismatch");
  const MatrixXd residual = (system.A - MatrixXd::Identity(m, m)) * eq.Mx + system.B * eq.Mu;
  LEMPC_REQUIRE(residual.cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + eq.Mx.cwiseAbs().maxCoeff()),
                "build_governor: basis columns are not equilibria");
  model.Mx = eq.Mx;
  model.Mu = eq.Mu;
  model.Mgamma = eq.Mu - K * eq.Mx;
  model.gamma_set = command_set(eq, system.X, system.U);

  const AdmissibleSetResult sigma =
      max_admissible_set(system.A, system.B, K, system.X, system.U);
  if (!sigma.converged) throw NumericalError("build_governor: admissible set did not converge");
  model.sigma_inf = sigma.set;
  model.sigma_index = sigma.determination_index;

  const AdmissibleSetResult aug = max_admissible_set_aug(
      system.A, system.B, K, model.Mgamma, system.X, system.U, model.gamma_set, eps);
  if (!aug.converged) {
    throw NumericalError("build_governor: augmented admissible set did not converge");
  }
  model.aug_set = aug.set;
  model.aug_index = aug.determination_index;

  const HPolytope slice = slice_trailing(model.aug_set, VectorXd::Zero(eq.p()));
  if (!set_equal(slice, model.sigma_inf, 1e-8)) {
    throw NumericalError(
        "build_governor: gamma = 0 slice of the augmented set differs from the admissible set");
  }
  return model;
}

namespace {

void split_aug(const GovernorModel& model, const VectorXd& x, MatrixXd& Hg, VectorXd& rhs) {
  const auto m = model.state_dim();
  const auto p = model.command_dim();
  Hg = model.aug_set.H().rightCols(p);
  rhs = model.aug_set.h() - model.aug_set.H().leftCols(m) * x;
}

VectorXd stack(const VectorXd& x, const VectorXd& gamma) {
  VectorXd z(x.size() + gamma.size());
  z << x, gamma;
  return z;
}

}  // namespace

GovernResult govern(const GovernorModel& model, GovernorState& state, const VectorXd& x,
                    const VectorXd& u_nn, const QpSettings& settings) {
  LEMPC_REQUIRE(x.size() == model.state_dim() && u_nn.size() == model.input_dim(),
                "govern: dimension mismatch");
  LEMPC_REQUIRE(x.allFinite(), "govern: state must be finite");
  const VectorXd Kx = model.K * x;
  VectorXd target = u_nn;
  if (!target.allFinite()) target = Kx;

  MatrixXd Hg;
  VectorXd rhs;
  split_aug(model, x, Hg, rhs);

  std::optional<VectorXd> gamma;
  QpProblem qp;
  qp.P = 2.0 * model.s * model.Mgamma.transpose() * model.Mgamma;
  qp.P = 0.5 * (qp.P + qp.P.transpose());
  qp.q = 2.0 * model.s * model.Mgamma.transpose() * (Kx - target);
  qp.G = Hg;
  qp.g = rhs;
  const Solution sol = solve_qp(qp, settings);
  if (sol.status == SolveStatus::optimal && contains(model.aug_set, stack(x, sol.x), 1e-9)) {
    gamma = sol.x;
  }

  GovernResult res;
  if (gamma) {
    res.status = GovernStatus::optimal;
  } else if (state.gamma_prev) {
    // Holding the previous command keeps (x, gamma) admissible.
    gamma = *state.gamma_prev;
    res.status = GovernStatus::fallback;
  } else {
    throw OutOfDomainError("govern: no admissible command; the state lies outside the governed "
                           "region and no previous command is available");
  }
  res.gamma = *gamma;
  res.u = Kx + model.Mgamma * res.gamma;
  state.gamma_prev = res.gamma;
  return res;
}

bool membership(const GovernorModel& model, const VectorXd& x, double tol) {
  LEMPC_REQUIRE(x.size() == model.state_dim(), "membership: dimension mismatch");
  const auto p = model.command_dim();
  MatrixXd Hg;
  VectorXd rhs;
  split_aug(model, x, Hg, rhs);
  // min t  s.t.  Hg gamma - t |row| <= rhs: the deepest achievable margin.
  const auto r = Hg.rows();
  MatrixXd G(r, p + 1);
  G.leftCols(p) = Hg;
  for (Eigen::Index i = 0; i < r; ++i) G(i, p) = -model.aug_set.H().row(i).norm();
  VectorXd c = VectorXd::Zero(p + 1);
  c(p) = 1.0;
  const Solution sol = solve_lp(c, G, rhs);
  if (sol.status == SolveStatus::unbounded) return true;
  if (sol.status != SolveStatus::optimal) return false;
  return sol.x(p) <= tol;
}

HPolytope governed_region(const GovernorModel& model) {
  const auto m = model.state_dim();
  std::vector<Eigen::Index> drop(static_cast<std::size_t>(model.command_dim()));
  std::iota(drop.begin(), drop.end(), m);
  return project_eliminate(model.aug_set, drop);
}

}  // namespace lempc
