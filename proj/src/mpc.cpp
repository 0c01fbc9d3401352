#include "lempc/mpc.hpp"

#include <sstream>

#include "lempc/error.hpp"
#include "lempc/random.hpp"

namespace lempc {

void LtiSystem::validate() const {
  const auto m = A.rows();
  const auto n = B.cols();
  LEMPC_REQUIRE(m > 0 && A.cols() == m, "system: A must be square and nonempty");
  LEMPC_REQUIRE(B.rows() == m && n > 0, "system: B must be m x n with n >= 1");
  LEMPC_REQUIRE(A.allFinite() && B.allFinite(), "system: non-finite entries");
  LEMPC_REQUIRE(X.dim() == m, "system: X must live in state space");
  LEMPC_REQUIRE(U.dim() == n, "system: U must live in input space");
}

namespace {

bool is_symmetric(const MatrixXd& M) {
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + M.cwiseAbs().maxCoeff());
}

bool is_psd(const MatrixXd& M) {
  if (!is_symmetric(M)) return false;
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (M + M.transpose()));
  return eig.eigenvalues().minCoeff() >= -1e-10 * (1.0 + M.cwiseAbs().maxCoeff());
}

}  // namespace

QpProblem CondensedQp::problem_at(const VectorXd& x0) const {
  QpProblem pb;
  pb.P = H;
  pb.q = F * x0;
  pb.G = G;
  pb.g = w + E * x0;
  return pb;
}

CondensedQp condense(const LtiSystem& system, const MpcConfig& config) {
  system.validate();
  const auto m = system.state_dim();
  const auto n = system.input_dim();
  const int N = config.N;
  LEMPC_REQUIRE(N >= 1, "condense: horizon N must be at least 1");
  LEMPC_REQUIRE(config.Q.rows() == m && config.Q.cols() == m, "condense: Q must be m x m");
  LEMPC_REQUIRE(config.P.rows() == m && config.P.cols() == m, "condense: P must be m x m");
  LEMPC_REQUIRE(config.R.rows() == n && config.R.cols() == n, "condense: R must be n x n");
  LEMPC_REQUIRE(config.Xf.dim() == m, "condense: Xf must live in state space");
  LEMPC_REQUIRE(is_psd(config.Q), "condense: Q must be symmetric positive semidefinite");
  LEMPC_REQUIRE(is_psd(config.P), "condense: P must be symmetric positive semidefinite");
  LEMPC_REQUIRE(is_symmetric(config.R) && config.R.llt().info() == Eigen::Success,
                "condense: R must be symmetric positive definite");
  LEMPC_REQUIRE(is_subset(config.Xf, system.X), "condense: Xf must be contained in X");

  CondensedQp c;
  c.N = N;
  c.state_dim = m;
  c.input_dim = n;
  c.X = system.X;

  c.Sx = MatrixXd::Zero(N * m, m);
  c.Su = MatrixXd::Zero(N * m, N * n);
  MatrixXd Apow = MatrixXd::Identity(m, m);  // A^(k-1) when filling block k
  std::vector<MatrixXd> AkB;                 // A^j B
  for (int k = 1; k <= N; ++k) {
    AkB.push_back(Apow * system.B);
    Apow = system.A * Apow;
    c.Sx.block((k - 1) * m, 0, m, m) = Apow;
  }
  for (int k = 1; k <= N; ++k) {
    for (int j = 0; j < k; ++j) {
      c.Su.block((k - 1) * m, j * n, m, n) = AkB[k - 1 - j];
    }
  }

  MatrixXd Qbar = MatrixXd::Zero(N * m, N * m);
  for (int k = 0; k < N - 1; ++k) Qbar.block(k * m, k * m, m, m) = config.Q;
  Qbar.block((N - 1) * m, (N - 1) * m, m, m) = config.P;
  MatrixXd Rbar = MatrixXd::Zero(N * n, N * n);
  for (int k = 0; k < N; ++k) Rbar.block(k * n, k * n, n, n) = config.R;

  c.H = 2.0 * (c.Su.transpose() * Qbar * c.Su + Rbar);
  c.H = 0.5 * (c.H + c.H.transpose());
  c.F = 2.0 * c.Su.transpose() * Qbar * c.Sx;
  c.Y = config.Q + c.Sx.transpose() * Qbar * c.Sx;

  const auto ru = system.U.num_rows();
  const auto rx = system.X.num_rows();
  const auto rf = config.Xf.num_rows();
  const auto rows = N * ru + (N - 1) * rx + rf;
  c.G = MatrixXd::Zero(rows, N * n);
  c.w = VectorXd::Zero(rows);
  c.E = MatrixXd::Zero(rows, m);
  Eigen::Index r = 0;
  for (int k = 0; k < N; ++k) {
    c.G.block(r, k * n, ru, n) = system.U.H();
    c.w.segment(r, ru) = system.U.h();
    r += ru;
  }
  for (int k = 1; k <= N; ++k) {
    const HPolytope& S = (k == N) ? config.Xf : system.X;
    const auto rs = S.num_rows();
    c.G.block(r, 0, rs, N * n) = S.H() * c.Su.middleRows((k - 1) * m, m);
    c.w.segment(r, rs) = S.h();
    c.E.middleRows(r, rs) = -S.H() * c.Sx.middleRows((k - 1) * m, m);
    r += rs;
  }
  return c;
}

MpcResult kappa_mpc(const CondensedQp& condensed, const VectorXd& x0, const QpSettings& settings) {
  LEMPC_REQUIRE(x0.size() == condensed.state_dim, "kappa_mpc: state dimension mismatch");
  MpcResult res;
  if (!contains(condensed.X, x0, 1e-9)) {
    res.status = SolveStatus::infeasible;
    return res;
  }
  const Solution sol = solve_qp(condensed.problem_at(x0), settings);
  res.status = sol.status;
  if (sol.status != SolveStatus::optimal) return res;
  res.feasible = true;
  res.u_seq = sol.x;
  res.u0 = sol.x.head(condensed.input_dim);
  res.value = sol.objective + x0.dot(condensed.Y * x0);
  return res;
}

std::vector<Sample> sample_training_set(const LtiSystem& system, const CondensedQp& condensed,
                                        std::size_t n, std::uint64_t seed) {
  LEMPC_REQUIRE(n >= 1, "sample_training_set: n must be at least 1");
  const MatrixXd box = bounding_box(system.X);
  const auto m = system.state_dim();
  // 1000 draws without a hit means an acceptance rate below 0.1%.
  constexpr int kMaxDraws = 1000;

  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::substream(seed, i);
    bool done = false;
    for (int draw = 0; draw < kMaxDraws && !done; ++draw) {
      VectorXd x(m);
      for (Eigen::Index k = 0; k < m; ++k) x(k) = rng.uniform(box(k, 0), box(k, 1));
      if (!contains(system.X, x, 1e-9)) continue;
      MpcResult r = kappa_mpc(condensed, x);
      if (!r.feasible) continue;
      out.push_back(Sample{std::move(x), std::move(r.u0), r.value});
      done = true;
    }
    if (!done) {
      std::ostringstream os;
      os << "sample_training_set: no feasible state in " << kMaxDraws
         << " draws (acceptance rate below 0.1%); check the constraints and terminal set";
      throw NumericalError(os.str());
    }
  }
  return out;
}

}  // namespace lempc
