#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "lempc/error.hpp"
#include "lempc/polytope.hpp"
#include "lempc/random.hpp"
#include "lempc/records.hpp"
#include "lempc/simulate.hpp"
#include "svg.hpp"

namespace lempc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- config

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw ValidationError("config: " + field + ": " + what);
}

const json& member(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) bad(path + "." + key, "missing");
  return obj.at(key);
}

void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) bad(path, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) bad(path + "." + k, "unknown field");
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(path, "not finite");
  return v;
}

long integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  return j.get<long>();
}

VectorXd vector(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of numbers");
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

MatrixXd matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) bad(path, "expected a nonempty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  MatrixXd M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    const VectorXd row = vector(j[r], rp);
    if (static_cast<std::size_t>(row.size()) != cols)
      bad(rp, "expected " + std::to_string(cols) + " entries, got " + std::to_string(row.size()));
    M.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return M;
}

void expect_shape(const MatrixXd& M, Eigen::Index rows, Eigen::Index cols, const std::string& path) {
  if (M.rows() != rows || M.cols() != cols)
    bad(path, "expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got " +
                  std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
}

HPolytope constraint_set(const json& j, Eigen::Index dim, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
  if (j.contains("lower") || j.contains("upper")) {
    only_keys(j, path, {"lower", "upper"});
    const VectorXd lo = vector(member(j, "lower", path), path + ".lower");
    const VectorXd hi = vector(member(j, "upper", path), path + ".upper");
    if (lo.size() != dim || hi.size() != dim) bad(path, "bounds must have " + std::to_string(dim) + " entries");
    if ((lo.array() > hi.array()).any()) bad(path, "lower exceeds upper");
    return HPolytope::box(lo, hi);
  }
  only_keys(j, path, {"H", "h"});
  const MatrixXd H = matrix(member(j, "H", path), path + ".H");
  const VectorXd h = vector(member(j, "h", path), path + ".h");
  if (H.cols() != dim) bad(path + ".H", "expected " + std::to_string(dim) + " columns");
  if (h.size() != H.rows()) bad(path + ".h", "expected one entry per row of H");
  return HPolytope(H, h);
}

std::string policy_name(const json& j, const std::string& path) {
  static const std::set<std::string> known = {"governed", "dual-mode", "nn", "lqr",
                                              "mpc", "projection", "projection-dual", "zero"};
  if (!j.is_string() || !known.count(j.get<std::string>()))
    bad(path, "expected one of governed, dual-mode, nn, lqr, mpc, projection, projection-dual, zero");
  return j.get<std::string>();
}

void compute_fingerprints(PipelineConfig& cfg, const std::string& synthesis_source,
                          const std::string& nn_source) {
  cfg.synthesis_fingerprint = fingerprint(synthesis_source);
  cfg.dataset_fingerprint = fingerprint(cfg.synthesis_fingerprint + "|samples=" +
                                        std::to_string(cfg.nn.samples) +
                                        "|seed=" + std::to_string(cfg.nn.train.seed));
  cfg.model_fingerprint = fingerprint(cfg.dataset_fingerprint + "|" + nn_source);
}

// Raw sources kept so that overrides can refresh the fingerprints.
struct ConfigSources {
  std::string synthesis;
  std::string nn;
};

ConfigSources sources_of(const json& doc) {
  json synth = json::object();
  for (const char* key : {"system", "constraints", "mpc", "governor", "numerics"})
    if (doc.contains(key)) synth[key] = doc.at(key);
  json nn = doc.contains("nn") ? doc.at("nn") : json::object();
  nn.erase("seed");
  nn.erase("samples");
  return {synth.dump(), nn.dump()};
}

PipelineConfig apply(PipelineConfig cfg, const CommandOptions& opt, const json& doc) {
  if (opt.out) cfg.output = *opt.out;
  if (opt.seed) cfg.nn.train.seed = *opt.seed;
  if (opt.samples) {
    if (*opt.samples == 0) throw ValidationError("sample: n must be positive");
    cfg.nn.samples = *opt.samples;
  }
  if (opt.policy) cfg.simulate.policy = policy_name(json(*opt.policy), "--policy");
  const auto src = sources_of(doc);
  compute_fingerprints(cfg, src.synthesis, src.nn);
  return cfg;
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("config: cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ValidationError("config: " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- artifacts

fs::path artifact(const PipelineConfig& cfg, const std::string& name) { return cfg.output / name; }

std::ofstream open_out(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ValidationError("cannot write " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path, const std::string& producer) {
  std::ifstream is(path);
  if (!is) throw ValidationError("missing artifact " + path.string() + "; run `" + producer + "` first");
  return is;
}

void expect_fingerprint(std::istream& is, const std::string& expected, const fs::path& path,
                        const std::string& producer) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError(path.string() + ": empty artifact");
  std::istringstream ls(line);
  std::string hash, tag, value;
  ls >> hash >> tag >> value;
  if (hash != "#" || tag != "fingerprint") throw ValidationError(path.string() + ": no fingerprint line");
  if (value != expected)
    throw ValidationError(path.string() + " is stale (fingerprint " + value + ", config expects " +
                          expected + "); rerun `" + producer + "`");
}

void put_fingerprint(std::ostream& os, const std::string& fp) { os << "# fingerprint " << fp << "\n"; }

void write_synthesis(const PipelineConfig& cfg, const Synthesis& syn) {
  auto os = open_out(artifact(cfg, "synthesis.txt"));
  put_fingerprint(os, cfg.synthesis_fingerprint);
  const auto& g = syn.governor;
  write_matrix(os, "P", syn.lqr.P);
  write_matrix(os, "K", syn.lqr.K);
  write_matrix(os, "Mx", g.Mx);
  write_matrix(os, "Mu", g.Mu);
  write_matrix(os, "Mgamma", g.Mgamma);
  MatrixXd scalars(1, 4);
  scalars << g.s, g.eps, g.sigma_index, g.aug_index;
  write_matrix(os, "scalars", scalars);
  write_polytope(os, "sigma_inf", g.sigma_inf);
  write_polytope(os, "gamma_set", g.gamma_set);
  write_polytope(os, "aug_set", g.aug_set);
}

// Re-derives what can be re-derived cheaply and rejects anything that
// disagrees with the config.
void validate_synthesis(const PipelineConfig& cfg, const Synthesis& syn) {
  const auto& sys = cfg.system;
  const auto m = sys.state_dim(), n = sys.input_dim();
  const auto& g = syn.governor;
  const auto p = g.Mx.cols();
  auto fail = [](const std::string& what) { throw ValidationError("synthesis.txt: " + what); };
  if (syn.P.rows() != m || syn.P.cols() != m || g.K.rows() != n || g.K.cols() != m) fail("dimensions disagree with config");
  if (g.Mu.rows() != n || g.Mu.cols() != p || g.Mgamma.rows() != n || g.Mgamma.cols() != p)
    fail("equilibrium basis dimensions");
  if (g.sigma_inf.dim() != m || g.aug_set.dim() != m + p || g.gamma_set.dim() != p) fail("set dimensions");
  if ((syn.P - syn.P.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + syn.P.cwiseAbs().maxCoeff()))
    fail("P is not symmetric");
  if (cfg.P && syn.P != *cfg.P) fail("P differs from the configured P");
  const MatrixXd K = lqr_gain(sys.A, sys.B, cfg.R, syn.P);
  if ((K - g.K).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + K.cwiseAbs().maxCoeff())) fail("K is not the gain of P");
  if (!is_schur_stable(sys.A + sys.B * g.K).stable) fail("A + BK is not Schur stable");
  if ((g.Mgamma - (g.Mu - g.K * g.Mx)).cwiseAbs().maxCoeff() > 1e-9) fail("Mgamma != Mu - K Mx");
  const MatrixXd eq = (sys.A - MatrixXd::Identity(m, m)) * g.Mx + sys.B * g.Mu;
  if (p > 0 && eq.cwiseAbs().maxCoeff() > 1e-9 * (1.0 + g.Mx.cwiseAbs().maxCoeff())) fail("basis is not an equilibrium basis");
  if (!contains(g.sigma_inf, VectorXd::Zero(m), 1e-9)) fail("admissible set excludes the origin");
  if (!set_equal(slice_trailing(g.aug_set, VectorXd::Zero(p)), g.sigma_inf))
    fail("gamma = 0 slice of the augmented set differs from the admissible set");
}

Synthesis read_synthesis(const PipelineConfig& cfg) {
  const auto path = artifact(cfg, "synthesis.txt");
  auto is = open_in(path, "synthesize");
  expect_fingerprint(is, cfg.synthesis_fingerprint, path, "synthesize");
  Synthesis syn;
  auto& g = syn.governor;
  syn.P = read_matrix(is, "P");
  g.K = read_matrix(is, "K");
  g.Mx = read_matrix(is, "Mx");
  g.Mu = read_matrix(is, "Mu");
  g.Mgamma = read_matrix(is, "Mgamma");
  const MatrixXd scalars = read_matrix(is, "scalars");
  if (scalars.rows() != 1 || scalars.cols() != 4) throw ValidationError("synthesis.txt: bad scalars record");
  g.s = scalars(0, 0);
  g.eps = scalars(0, 1);
  g.sigma_index = static_cast<int>(scalars(0, 2));
  g.aug_index = static_cast<int>(scalars(0, 3));
  g.sigma_inf = read_polytope(is, "sigma_inf");
  g.gamma_set = read_polytope(is, "gamma_set");
  g.aug_set = read_polytope(is, "aug_set");
  syn.lqr.P = syn.P;
  syn.lqr.K = g.K;
  syn.lqr.Acl = cfg.system.A + cfg.system.B * g.K;
  validate_synthesis(cfg, syn);
  return syn;
}

std::vector<Sample> read_dataset(const PipelineConfig& cfg) {
  const auto path = artifact(cfg, "dataset.csv");
  auto is = open_in(path, "sample");
  expect_fingerprint(is, cfg.dataset_fingerprint, path, "sample");
  auto data = read_dataset_csv(is);
  const auto& sys = cfg.system;
  if (data.empty()) throw ValidationError("dataset.csv: no samples");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    const std::string where = "dataset.csv row " + std::to_string(i + 1) + ": ";
    if (s.x.size() != sys.state_dim() || s.u.size() != sys.input_dim())
      throw ValidationError(where + "dimensions disagree with config");
    if (!contains(sys.X, s.x, 1e-6) || !contains(sys.U, s.u, 1e-6))
      throw ValidationError(where + "sample violates the constraints");
    if (!std::isfinite(s.value) || s.value < 0.0) throw ValidationError(where + "invalid value");
  }
  return data;
}

std::vector<int> layer_sizes(const PipelineConfig& cfg) {
  std::vector<int> sizes = {static_cast<int>(cfg.system.state_dim())};
  sizes.insert(sizes.end(), cfg.nn.hidden.begin(), cfg.nn.hidden.end());
  sizes.push_back(static_cast<int>(cfg.system.input_dim()));
  return sizes;
}

MlpParams read_model(const PipelineConfig& cfg) {
  const auto path = artifact(cfg, "model.txt");
  auto is = open_in(path, "train");
  expect_fingerprint(is, cfg.model_fingerprint, path, "train");
  MlpParams p = read_mlp(is, "policy");
  if (p.layer_sizes != layer_sizes(cfg)) throw ValidationError("model.txt: layer sizes disagree with config");
  for (std::size_t l = 0; l < p.W.size(); ++l)
    if (!all_finite(p.W[l]) || !all_finite(p.b[l])) throw ValidationError("model.txt: non-finite weights");
  return p;
}

CondensedQp condensed(const PipelineConfig& cfg, const Synthesis& syn, int N) {
  return condense(cfg.system, {cfg.Q, cfg.R, syn.P, N, syn.governor.sigma_inf});
}

HPolytope region_of(const PipelineConfig& cfg, const GovernorModel& g) {
  const auto m = g.state_dim();
  std::vector<Eigen::Index> drop(static_cast<std::size_t>(g.command_dim()));
  for (std::size_t i = 0; i < drop.size(); ++i) drop[i] = m + static_cast<Eigen::Index>(i);
  try {
    return project_eliminate(g.aug_set, drop, cfg.numerics.fm_row_cap);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) +
                         "; raise numerics.fm_row_cap, or use membership queries (simulate, compare) "
                         "which solve an LP per state and never project");
  }
}

std::vector<VectorXd> initial_states(const PipelineConfig& cfg, const GovernorModel& g) {
  if (!cfg.simulate.vertices) return cfg.simulate.initial_states;
  if (cfg.system.state_dim() != 2)
    throw ValidationError("config: simulate.initial_states: \"vertices\" needs a 2-D state space");
  std::vector<VectorXd> x0s;
  for (const auto& v : vertices_2d(region_of(cfg, g))) x0s.emplace_back(v);
  return x0s;
}

// States uniformly drawn from the augmented set, projected to x. They lie in
// the governed region in any dimension.
std::vector<VectorXd> governed_samples(const GovernorModel& g, std::size_t count, std::uint64_t seed) {
  std::vector<VectorXd> out;
  for (const auto& z : sample_uniform(g.aug_set, count, seed)) out.emplace_back(z.head(g.state_dim()));
  return out;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::string fmt_row(const MatrixXd& M) {
  std::ostringstream os;
  os << "[";
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    os << (r ? "; " : "");
    for (Eigen::Index c = 0; c < M.cols(); ++c) os << (c ? ", " : "") << fmt(M(r, c));
  }
  return os.str() + "]";
}

std::vector<Eigen::Vector2d> polygon(const HPolytope& P) {
  try {
    return vertices_2d(P);
  } catch (const std::exception&) {
    return {};
  }
}

Eigen::Vector2d lower2(const HPolytope& X) { return bounding_box(X).col(0).head<2>(); }
Eigen::Vector2d upper2(const HPolytope& X) { return bounding_box(X).col(1).head<2>(); }

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

bool is_governed(const std::string& policy) { return policy == "governed"; }

}  // namespace

// ---------------------------------------------------------------- parsing

PipelineConfig parse_config(const json& doc) {
  only_keys(doc, "config", {"system", "constraints", "mpc", "nn", "governor", "simulate", "region", "numerics", "output"});
  PipelineConfig cfg;

  const json& sys = member(doc, "system", "config");
  only_keys(sys, "system", {"A", "B"});
  cfg.system.A = matrix(member(sys, "A", "system"), "system.A");
  const auto m = cfg.system.A.rows();
  expect_shape(cfg.system.A, m, m, "system.A");
  cfg.system.B = matrix(member(sys, "B", "system"), "system.B");
  if (cfg.system.B.rows() != m) bad("system.B", "expected " + std::to_string(m) + " rows");
  const auto n = cfg.system.B.cols();
  if (n == 0) bad("system.B", "expected at least one column");

  const json& con = member(doc, "constraints", "config");
  only_keys(con, "constraints", {"X", "U"});
  cfg.system.X = constraint_set(member(con, "X", "constraints"), m, "constraints.X");
  cfg.system.U = constraint_set(member(con, "U", "constraints"), n, "constraints.U");

  const json& mpc = member(doc, "mpc", "config");
  only_keys(mpc, "mpc", {"Q", "R", "N", "P"});
  cfg.Q = matrix(member(mpc, "Q", "mpc"), "mpc.Q");
  expect_shape(cfg.Q, m, m, "mpc.Q");
  cfg.R = matrix(member(mpc, "R", "mpc"), "mpc.R");
  expect_shape(cfg.R, n, n, "mpc.R");
  cfg.N = static_cast<int>(integer(member(mpc, "N", "mpc"), "mpc.N"));
  if (cfg.N < 1) bad("mpc.N", "must be at least 1");
  if (mpc.contains("P")) {
    cfg.P = matrix(mpc.at("P"), "mpc.P");
    expect_shape(*cfg.P, m, m, "mpc.P");
  }

  if (doc.contains("nn")) {
    const json& nn = doc.at("nn");
    only_keys(nn, "nn", {"hidden", "samples", "learning_rate", "epochs", "seed", "validation_fraction"});
    if (nn.contains("hidden")) {
      const json& h = nn.at("hidden");
      if (!h.is_array()) bad("nn.hidden", "expected an array of widths");
      for (std::size_t i = 0; i < h.size(); ++i) {
        const long w = integer(h[i], "nn.hidden[" + std::to_string(i) + "]");
        if (w < 1) bad("nn.hidden[" + std::to_string(i) + "]", "width must be positive");
        cfg.nn.hidden.push_back(static_cast<int>(w));
      }
    }
    if (nn.contains("samples")) {
      const long s = integer(nn.at("samples"), "nn.samples");
      if (s < 1) bad("nn.samples", "must be positive");
      cfg.nn.samples = static_cast<std::size_t>(s);
    }
    if (nn.contains("learning_rate")) cfg.nn.train.learning_rate = number(nn.at("learning_rate"), "nn.learning_rate");
    if (nn.contains("epochs")) cfg.nn.train.epochs = static_cast<int>(integer(nn.at("epochs"), "nn.epochs"));
    if (nn.contains("seed")) {
      const long s = integer(nn.at("seed"), "nn.seed");
      if (s < 0) bad("nn.seed", "must be nonnegative");
      cfg.nn.train.seed = static_cast<std::uint64_t>(s);
    }
    if (nn.contains("validation_fraction"))
      cfg.nn.train.validation_fraction = number(nn.at("validation_fraction"), "nn.validation_fraction");
    if (cfg.nn.train.learning_rate <= 0.0) bad("nn.learning_rate", "must be positive");
    if (cfg.nn.train.epochs < 0) bad("nn.epochs", "must be nonnegative");
    if (cfg.nn.train.validation_fraction < 0.0 || cfg.nn.train.validation_fraction >= 1.0)
      bad("nn.validation_fraction", "must lie in [0, 1)");
  }

  if (doc.contains("governor")) {
    const json& g = doc.at("governor");
    only_keys(g, "governor", {"s", "epsilon"});
    if (g.contains("s")) cfg.s = number(g.at("s"), "governor.s");
    if (g.contains("epsilon")) cfg.eps = number(g.at("epsilon"), "governor.epsilon");
    if (cfg.s <= 0.0) bad("governor.s", "must be positive");
    if (cfg.eps <= 0.0 || cfg.eps >= 1.0) bad("governor.epsilon", "must lie in (0, 1)");
  }

  if (doc.contains("simulate")) {
    const json& s = doc.at("simulate");
    only_keys(s, "simulate", {"T", "initial_states", "policy", "fuzz_runs"});
    if (s.contains("T")) cfg.simulate.T = static_cast<int>(integer(s.at("T"), "simulate.T"));
    if (cfg.simulate.T < 1) bad("simulate.T", "horizon must be at least 1");
    if (s.contains("initial_states")) {
      const json& x0 = s.at("initial_states");
      if (x0.is_string()) {
        if (x0.get<std::string>() != "vertices") bad("simulate.initial_states", "expected \"vertices\" or a list of states");
        cfg.simulate.vertices = true;
      } else {
        const MatrixXd X0 = matrix(x0, "simulate.initial_states");
        if (X0.cols() != m) bad("simulate.initial_states", "each state needs " + std::to_string(m) + " entries");
        for (Eigen::Index r = 0; r < X0.rows(); ++r) cfg.simulate.initial_states.emplace_back(X0.row(r).transpose());
      }
    } else {
      cfg.simulate.vertices = true;
    }
    if (s.contains("policy")) cfg.simulate.policy = policy_name(s.at("policy"), "simulate.policy");
    if (s.contains("fuzz_runs")) {
      const long f = integer(s.at("fuzz_runs"), "simulate.fuzz_runs");
      if (f < 0) bad("simulate.fuzz_runs", "must be nonnegative");
      cfg.simulate.fuzz_runs = static_cast<std::size_t>(f);
    }
  } else {
    cfg.simulate.vertices = true;
  }

  if (doc.contains("region")) {
    const json& r = doc.at("region");
    only_keys(r, "region", {"horizons"});
    if (r.contains("horizons")) {
      cfg.horizons.clear();
      const json& h = r.at("horizons");
      if (!h.is_array()) bad("region.horizons", "expected an array of integers");
      for (std::size_t i = 0; i < h.size(); ++i) {
        const long v = integer(h[i], "region.horizons[" + std::to_string(i) + "]");
        if (v < 0) bad("region.horizons[" + std::to_string(i) + "]", "must be nonnegative");
        cfg.horizons.push_back(static_cast<int>(v));
      }
    }
  }

  if (doc.contains("numerics")) {
    const json& nu = doc.at("numerics");
    only_keys(nu, "numerics", {"dare_tol", "dare_max_iter", "containment_tol", "boundary_tol", "fm_row_cap"});
    auto& c = cfg.numerics;
    if (nu.contains("dare_tol")) c.dare_tol = number(nu.at("dare_tol"), "numerics.dare_tol");
    if (nu.contains("dare_max_iter")) c.dare_max_iter = static_cast<int>(integer(nu.at("dare_max_iter"), "numerics.dare_max_iter"));
    if (nu.contains("containment_tol")) c.containment_tol = number(nu.at("containment_tol"), "numerics.containment_tol");
    if (nu.contains("boundary_tol")) c.boundary_tol = number(nu.at("boundary_tol"), "numerics.boundary_tol");
    if (nu.contains("fm_row_cap")) c.fm_row_cap = integer(nu.at("fm_row_cap"), "numerics.fm_row_cap");
    if (c.dare_tol <= 0.0 || c.dare_max_iter < 1 || c.containment_tol < 0.0 || c.boundary_tol < 0.0 || c.fm_row_cap < 1)
      bad("numerics", "tolerances must be nonnegative and limits positive");
  }

  if (doc.contains("output")) {
    if (!doc.at("output").is_string()) bad("output", "expected a directory path");
    cfg.output = doc.at("output").get<std::string>();
  }

  cfg.system.validate();
  const auto src = sources_of(doc);
  compute_fingerprints(cfg, src.synthesis, src.nn);
  return cfg;
}

PipelineConfig load_config(const fs::path& path) { return parse_config(read_json(path)); }

namespace {

PipelineConfig configure(const CommandOptions& opt) {
  const json doc = read_json(opt.config);
  return apply(parse_config(doc), opt, doc);
}

}  // namespace

// ---------------------------------------------------------------- commands

int cmd_synthesize(const CommandOptions& opt) {
  const auto cfg = configure(opt);
  const auto& sys = cfg.system;
  Synthesis syn;
  if (cfg.P) {
    syn.lqr.P = *cfg.P;
    syn.lqr.K = lqr_gain(sys.A, sys.B, cfg.R, *cfg.P);
    syn.lqr.Acl = sys.A + sys.B * syn.lqr.K;
    if (!is_schur_stable(syn.lqr.Acl).stable)
      throw NumericalError("synthesize: the gain from the supplied P does not stabilize the plant");
  } else {
    syn.lqr = solve_dare(sys.A, sys.B, cfg.Q, cfg.R, cfg.numerics.dare_tol, cfg.numerics.dare_max_iter);
  }
  syn.P = syn.lqr.P;
  syn.governor = build_governor(sys, syn.lqr.K, cfg.s, cfg.eps);
  const auto& g = syn.governor;

  // Lifted-loop invariance spot check on the stored augmented set.
  const MatrixXd F = lifted_dynamics(syn.lqr.Acl, sys.B, g.Mgamma);
  const auto m = g.state_dim();
  for (const auto& z : sample_uniform(g.aug_set, 200, cfg.nn.train.seed)) {
    const VectorXd u = g.K * z.head(m) + g.Mgamma * z.tail(g.command_dim());
    if (!contains(g.aug_set, F * z, 1e-7) || !contains(sys.U, u, 1e-7) || !contains(sys.X, z.head(m), 1e-7))
      throw NumericalError("synthesize: augmented set failed the invariance check");
  }

  write_synthesis(cfg, syn);
  std::cout << "P = " << fmt_row(syn.P) << (cfg.P ? "  (supplied)" : "") << "\n";
  if (!cfg.P) std::cout << "DARE iterations: " << syn.lqr.iterations << "\n";
  std::cout << "K = " << fmt_row(g.K) << "\n";
  std::cout << "admissible set: " << g.sigma_inf.num_rows() << " rows, determination index " << g.sigma_index << "\n";
  std::cout << "command set: dimension " << g.command_dim() << ", " << g.gamma_set.num_rows() << " rows\n";
  std::cout << "augmented set: " << g.aug_set.num_rows() << " rows, determination index " << g.aug_index << "\n";
  std::cout << "gamma = 0 slice equals the admissible set: yes\n";
  std::cout << "invariance check: 200 samples ok\n";
  std::cout << "wrote " << artifact(cfg, "synthesis.txt").string() << "\n";
  return kExitOk;
}

int cmd_sample(const CommandOptions& opt) {
  const auto cfg = configure(opt);
  const auto syn = read_synthesis(cfg);
  const auto data = sample_training_set(cfg.system, condensed(cfg, syn, cfg.N), cfg.nn.samples, cfg.nn.train.seed);
  auto os = open_out(artifact(cfg, "dataset.csv"));
  put_fingerprint(os, cfg.dataset_fingerprint);
  write_dataset_csv(os, data);
  std::cout << "sampled " << data.size() << " feasible states (N = " << cfg.N << ", seed " << cfg.nn.train.seed
            << ")\nwrote " << artifact(cfg, "dataset.csv").string() << "\n";
  return kExitOk;
}

int cmd_train(const CommandOptions& opt) {
  const auto cfg = configure(opt);
  const auto data = read_dataset(cfg);
  const auto result = train(data, layer_sizes(cfg), cfg.nn.train);
  {
    auto os = open_out(artifact(cfg, "model.txt"));
    put_fingerprint(os, cfg.model_fingerprint);
    write_mlp(os, "policy", result.params);
  }
  {
    auto os = open_out(artifact(cfg, "loss.csv"));
    put_fingerprint(os, cfg.model_fingerprint);
    write_loss_csv(os, result.loss_history);
  }
  const double ratio = result.initial_loss > 0.0 ? result.final_loss / result.initial_loss : 0.0;
  std::cout << "trained " << result.params.layer_sizes.size() - 1 << " layers on " << result.train_size
            << " samples (" << result.validation_size << " held out)\n"
            << "loss " << fmt(result.initial_loss) << " -> " << fmt(result.final_loss)
            << " (final/initial " << fmt(ratio) << ")";
  if (result.validation_size > 0) std::cout << ", validation mse " << fmt(result.validation_mse);
  std::cout << "\nwrote " << artifact(cfg, "model.txt").string() << "\n";
  return kExitOk;
}

namespace {

struct Loaded {
  Synthesis syn;
  std::optional<MlpParams> net;
};

DualModeController controller_of(const PipelineConfig& cfg, const Loaded& l) {
  DualModeController c{l.syn.governor.K, l.syn.governor.sigma_inf, *l.net};
  c.boundary_tol = cfg.numerics.boundary_tol;
  return c;
}

PolicyFactory policy_factory(const PipelineConfig& cfg, const Loaded& l, const std::string& name) {
  const auto& g = l.syn.governor;
  if (name == "zero") return [n = cfg.system.input_dim()] { return zero_policy(n); };
  if (name == "lqr") return [K = g.K] { return linear_policy(K); };
  if (name == "mpc") {
    auto cq = std::make_shared<CondensedQp>(condensed(cfg, l.syn, cfg.N));
    return [cq] { return mpc_policy(*cq); };
  }
  if (!l.net) throw ValidationError("policy " + name + " needs model.txt; run `train` first");
  const auto ctrl = controller_of(cfg, l);
  if (name == "nn") {
    return [net = *l.net] {
      return Policy([net](const VectorXd& x) { return PolicyOutput{mlp_forward(net, x), {}, "network"}; });
    };
  }
  if (name == "dual-mode") return [ctrl] { return dual_mode_policy(ctrl); };
  if (name == "governed")
    return [g, ctrl] { return governed_policy(g, [ctrl](const VectorXd& x) { return ctrl.eval(x); }); };
  if (cfg.system.state_dim() != 2) throw ValidationError("policy " + name + " is only available for 2-D systems");
  auto feasible = std::make_shared<HPolytope>(
      n_step_controllable_set(cfg.system.A, cfg.system.B, cfg.system.X, cfg.system.U, g.sigma_inf, cfg.N));
  if (name == "projection")
    return [sys = cfg.system, feasible, net = *l.net] {
      return projection_baseline(sys, *feasible, [net](const VectorXd& x) { return mlp_forward(net, x); });
    };
  if (name == "projection-dual")
    return [sys = cfg.system, feasible, ctrl] { return projection_dual_mode(sys, *feasible, ctrl); };
  throw ValidationError("unknown policy " + name);
}

bool needs_model(const std::string& policy) {
  return policy != "zero" && policy != "lqr" && policy != "mpc";
}

std::string svg_name(const std::string& s) {
  std::string out = s;
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

}  // namespace

int cmd_simulate(const CommandOptions& opt) {
  const auto cfg = configure(opt);
  Loaded l{read_synthesis(cfg), std::nullopt};
  const auto& policy = cfg.simulate.policy;
  if (needs_model(policy)) l.net = read_model(cfg);
  const auto x0s = initial_states(cfg, l.syn.governor);
  if (x0s.empty()) throw ValidationError("simulate: no initial states");
  const auto make = policy_factory(cfg, l, policy);

  std::size_t violations = 0, terminated = 0;
  std::vector<SvgPath> paths;
  for (std::size_t i = 0; i < x0s.size(); ++i) {
    const auto traj = run_closed_loop(cfg.system, make(), x0s[i], cfg.simulate.T, cfg.numerics.containment_tol);
    violations += traj.violation_count();
    terminated += traj.terminated ? 1 : 0;
    const std::string name = "traj_" + svg_name(policy) + "_" + std::to_string(i) + ".csv";
    auto os = open_out(artifact(cfg, name));
    put_fingerprint(os, cfg.model_fingerprint);
    write_trajectory_csv(os, traj);
    std::cout << "run " << i << ": x0 = " << fmt_row(x0s[i].transpose()) << ", " << traj.steps() << " steps, "
              << traj.violation_count() << " violations, |x(T)| = " << fmt(traj.states.back().norm());
    if (traj.terminated) std::cout << ", stopped: " << traj.error;
    std::cout << "\n";
    if (cfg.system.state_dim() == 2) {
      SvgPath p{"run " + std::to_string(i), kPalette[i % 7], {}};
      for (const auto& x : traj.states) p.points.emplace_back(x(0), x(1));
      paths.push_back(std::move(p));
    }
  }
  if (cfg.system.state_dim() == 2) {
    const auto& g = l.syn.governor;
    std::vector<SvgPolygon> regions = {{"X", "#bbbbbb", polygon(cfg.system.X)},
                                       {"governed region", "#1f77b4", polygon(region_of(cfg, g))},
                                       {"admissible set", "#2ca02c", polygon(g.sigma_inf)}};
    write_svg(artifact(cfg, "trajectories_" + svg_name(policy) + ".svg"), lower2(cfg.system.X),
              upper2(cfg.system.X), regions, paths, "closed loop: " + policy);
  }
  std::cout << x0s.size() << " runs, " << violations << " violation steps, " << terminated << " stopped early\n";
  if (is_governed(policy) && (violations > 0 || terminated > 0)) return kExitSafety;
  return kExitOk;
}

int cmd_region(const CommandOptions& opt) {
  const auto cfg = configure(opt);
  const auto syn = read_synthesis(cfg);
  const auto& sys = cfg.system;
  const auto& g = syn.governor;
  const auto m = sys.state_dim();

  std::vector<std::pair<std::string, HPolytope>> regions = {{"admissible", g.sigma_inf},
                                                            {"governed", region_of(cfg, g)}};
  std::vector<int> horizons = cfg.horizons;
  std::sort(horizons.begin(), horizons.end());
  horizons.erase(std::unique(horizons.begin(), horizons.end()), horizons.end());
  for (int N : horizons) {
    try {
      regions.emplace_back("mpc_N" + std::to_string(N),
                           n_step_controllable_set(sys.A, sys.B, sys.X, sys.U, g.sigma_inf, N));
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + "; the " + std::to_string(N) +
                           "-step set needs a projection per step, so lower region.horizons for this plant");
    }
  }

  for (std::size_t i = 3; i < regions.size(); ++i) {
    const bool nested = is_subset(regions[i - 1].second, regions[i].second);
    std::cout << regions[i - 1].first << " inside " << regions[i].first << ": " << (nested ? "yes" : "NO") << "\n";
    if (!nested) throw NumericalError("region: controllable sets are not nested");
  }

  {
    auto os = open_out(artifact(cfg, "areas.csv"));
    put_fingerprint(os, cfg.synthesis_fingerprint);
    os << "region,rows" << (m == 2 ? ",area" : "") << "\n";
    std::cout << std::left << std::setw(14) << "region" << std::setw(8) << "rows" << (m == 2 ? "area" : "") << "\n";
    for (const auto& [name, P] : regions) {
      os << name << "," << P.num_rows();
      std::cout << std::setw(14) << name << std::setw(8) << P.num_rows();
      if (m == 2) {
        const double a = area_2d(P);
        os << "," << format_double(a);
        std::cout << fmt(a, 5);
      }
      os << "\n";
      std::cout << "\n";
    }
  }

  // Membership over a grid (2-D) or over seeded samples of X (any dimension).
  std::vector<VectorXd> points;
  if (m == 2) {
    const MatrixXd bb = bounding_box(sys.X);
    constexpr int kGrid = 61;
    for (int i = 0; i < kGrid; ++i)
      for (int j = 0; j < kGrid; ++j) {
        VectorXd x(2);
        x << bb(0, 0) + (bb(0, 1) - bb(0, 0)) * i / (kGrid - 1), bb(1, 0) + (bb(1, 1) - bb(1, 0)) * j / (kGrid - 1);
        points.push_back(x);
      }
  } else {
    points = sample_uniform(sys.X, 2000, cfg.nn.train.seed);
  }
  {
    auto os = open_out(artifact(cfg, "membership.csv"));
    put_fingerprint(os, cfg.synthesis_fingerprint);
    for (Eigen::Index k = 0; k < m; ++k) os << "x" << k + 1 << ",";
    for (std::size_t r = 0; r < regions.size(); ++r) os << regions[r].first << (r + 1 < regions.size() ? "," : "\n");
    for (const auto& x : points) {
      for (Eigen::Index k = 0; k < m; ++k) os << format_double(x(k)) << ",";
      for (std::size_t r = 0; r < regions.size(); ++r)
        os << (contains(regions[r].second, x, cfg.numerics.containment_tol) ? 1 : 0)
           << (r + 1 < regions.size() ? "," : "\n");
    }
  }

  if (m == 2) {
    auto os = open_out(artifact(cfg, "regions.csv"));
    put_fingerprint(os, cfg.synthesis_fingerprint);
    os << "region,vertex,x1,x2\n";
    std::vector<SvgPolygon> polys;
    for (std::size_t r = regions.size(); r-- > 0;) {
      const auto v = vertices_2d(regions[r].second);
      for (std::size_t i = 0; i < v.size(); ++i)
        os << regions[r].first << "," << i << "," << format_double(v[i].x()) << "," << format_double(v[i].y()) << "\n";
      polys.push_back({regions[r].first, kPalette[r % 7], v});
    }
    write_svg(artifact(cfg, "regions.svg"), lower2(sys.X), upper2(sys.X), polys, {}, "feasible regions");
  }
  std::cout << "wrote " << artifact(cfg, "areas.csv").string() << "\n";
  return kExitOk;
}

int cmd_compare(const CommandOptions& opt) {
  const auto cfg = configure(opt);
  Loaded l{read_synthesis(cfg), read_model(cfg)};
  const auto& g = l.syn.governor;
  const auto x0s = initial_states(cfg, g);
  if (x0s.empty()) throw ValidationError("compare: no initial states");

  std::vector<NamedPolicy> policies;
  for (int N : {1, 3, 10}) {
    auto cq = std::make_shared<CondensedQp>(condensed(cfg, l.syn, N));
    policies.push_back({"mpc N=" + std::to_string(N), [cq] { return mpc_policy(*cq); }});
  }
  if (cfg.system.state_dim() == 2) {
    policies.push_back({"projection", policy_factory(cfg, l, "projection")});
    policies.push_back({"projection dual-mode", policy_factory(cfg, l, "projection-dual")});
  }
  policies.push_back({"governed", policy_factory(cfg, l, "governed")});
  auto report = compare(cfg.system, policies, x0s, cfg.simulate.T, g.sigma_inf);

  // Governor against fresh random networks with amplified outputs.
  const std::size_t fuzz = cfg.simulate.fuzz_runs;
  if (fuzz > 0) {
    auto counter = std::make_shared<std::uint64_t>(0);
    const auto sizes = layer_sizes(cfg);
    const std::uint64_t seed = cfg.nn.train.seed;
    NamedPolicy adversarial{"governed random network", [g, sizes, seed, counter] {
                              const MlpParams net = init_mlp(sizes, Rng::substream(seed, (*counter)++).next());
                              return governed_policy(g, [net](const VectorXd& x) { return VectorXd(100.0 * mlp_forward(net, x)); });
                            }};
    auto adv = compare(cfg.system, {adversarial}, governed_samples(g, fuzz, seed + 1), cfg.simulate.T, g.sigma_inf);
    report.rows.push_back(adv.rows[0]);
  }

  auto os = open_out(artifact(cfg, "compare.csv"));
  put_fingerprint(os, cfg.model_fingerprint);
  os << "policy,runs,violations,terminated,max_terminal_norm,max_entry_step,total_time,mean_step_time\n";
  std::cout << std::left << std::setw(26) << "policy" << std::setw(6) << "runs" << std::setw(12) << "violations"
            << std::setw(12) << "terminated" << std::setw(14) << "max |x(T)|" << std::setw(8) << "entry"
            << "mean step [ms]\n";
  bool unsafe = false;
  for (const auto& r : report.rows) {
    os << r.name << "," << r.runs << "," << r.violations << "," << r.terminated << "," << format_double(r.max_terminal_norm)
       << "," << r.max_entry_step << "," << format_double(r.total_time) << "," << format_double(r.mean_step_time) << "\n";
    std::cout << std::setw(26) << r.name << std::setw(6) << r.runs << std::setw(12) << r.violations << std::setw(12)
              << r.terminated << std::setw(14) << fmt(r.max_terminal_norm, 4) << std::setw(8) << r.max_entry_step
              << fmt(1e3 * r.mean_step_time, 4) << "\n";
    if (r.name.rfind("governed", 0) == 0 && (r.violations > 0 || r.terminated > 0)) unsafe = true;
  }
  std::cout << "wrote " << artifact(cfg, "compare.csv").string() << "\n";
  return unsafe ? kExitSafety : kExitOk;
}

}  // namespace lempc::cli
