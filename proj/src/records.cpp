#include "lempc/records.hpp"

#include <cstdio>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "lempc/error.hpp"

namespace lempc {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool next_record_line(std::istream& is, std::string& line) {
  while (std::getline(is, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    return true;
  }
  return false;
}

namespace {

std::string expect_line(std::istream& is, const std::string& what) {
  std::string line;
  if (!next_record_line(is, line)) throw ValidationError("record: unexpected end of input, expected " + what);
  return line;
}

double parse_double(const std::string& tok) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw ValidationError("record: not a number: '" + tok + "'");
  }
  if (pos != tok.size()) throw ValidationError("record: not a number: '" + tok + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void write_matrix(std::ostream& os, const std::string& name, const MatrixXd& M) {
  os << "matrix " << name << ' ' << M.rows() << ' ' << M.cols() << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) os << ' ';
      os << format_double(M(i, j));
    }
    os << '\n';
  }
}

MatrixXd read_matrix(std::istream& is, const std::string& name) {
  std::istringstream head(expect_line(is, "matrix " + name));
  std::string tag, got;
  Eigen::Index rows = -1, cols = -1;
  head >> tag >> got >> rows >> cols;
  if (tag != "matrix" || got != name || rows < 0 || cols < 0) {
    throw ValidationError("record: expected 'matrix " + name + " <rows> <cols>'");
  }
  MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    std::istringstream row(expect_line(is, "matrix row"));
    for (Eigen::Index j = 0; j < cols; ++j) {
      std::string tok;
      if (!(row >> tok)) throw ValidationError("record: short row in matrix " + name);
      M(i, j) = parse_double(tok);
    }
  }
  return M;
}

void write_polytope(std::ostream& os, const std::string& name, const HPolytope& P) {
  os << "polytope " << name << '\n';
  os << "dim " << P.dim() << " rows " << P.num_rows() << '\n';
  for (Eigen::Index i = 0; i < P.num_rows(); ++i) {
    for (Eigen::Index j = 0; j < P.dim(); ++j) os << format_double(P.H()(i, j)) << ' ';
    os << "| " << format_double(P.h()(i)) << '\n';
  }
}

HPolytope read_polytope(std::istream& is, const std::string& name) {
  {
    std::istringstream head(expect_line(is, "polytope " + name));
    std::string tag, got;
    head >> tag >> got;
    if (tag != "polytope" || got != name) {
      throw ValidationError("record: expected 'polytope " + name + "'");
    }
  }
  std::istringstream sizes(expect_line(is, "dim/rows"));
  std::string t1, t2;
  Eigen::Index d = -1, r = -1;
  sizes >> t1 >> d >> t2 >> r;
  if (t1 != "dim" || t2 != "rows" || d < 0 || r < 0) {
    throw ValidationError("record: expected 'dim <d> rows <r>' in polytope " + name);
  }
  MatrixXd H(r, d);
  VectorXd h(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    std::istringstream row(expect_line(is, "polytope row"));
    std::string tok;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!(row >> tok)) throw ValidationError("record: short row in polytope " + name);
      H(i, j) = parse_double(tok);
    }
    if (!(row >> tok) || tok != "|" || !(row >> tok)) {
      throw ValidationError("record: polytope rows must read 'h_1 ... h_d | b'");
    }
    h(i) = parse_double(tok);
  }
  return HPolytope(std::move(H), std::move(h));
}

void write_mlp(std::ostream& os, const std::string& name, const MlpParams& params) {
  params.validate();
  os << "mlp " << name << '\n';
  os << "sizes " << params.layer_sizes.size();
  for (int s : params.layer_sizes) os << ' ' << s;
  os << '\n';
  for (std::size_t l = 0; l < params.W.size(); ++l) {
    write_matrix(os, "W" + std::to_string(l), params.W[l]);
    write_matrix(os, "b" + std::to_string(l), params.b[l].transpose());
  }
}

MlpParams read_mlp(std::istream& is, const std::string& name) {
  {
    std::istringstream head(expect_line(is, "mlp " + name));
    std::string tag, got;
    head >> tag >> got;
    if (tag != "mlp" || got != name) throw ValidationError("record: expected 'mlp " + name + "'");
  }
  std::istringstream sizes(expect_line(is, "sizes"));
  std::string tag;
  std::size_t count = 0;
  sizes >> tag >> count;
  if (tag != "sizes" || count < 2) throw ValidationError("record: bad mlp sizes line");
  MlpParams p;
  for (std::size_t i = 0; i < count; ++i) {
    int s = 0;
    if (!(sizes >> s)) throw ValidationError("record: short mlp sizes line");
    p.layer_sizes.push_back(s);
  }
  for (std::size_t l = 0; l + 1 < count; ++l) {
    p.W.push_back(read_matrix(is, "W" + std::to_string(l)));
    p.b.push_back(read_matrix(is, "b" + std::to_string(l)).transpose());
  }
  p.validate();
  return p;
}

void write_dataset_csv(std::ostream& os, const std::vector<Sample>& samples) {
  LEMPC_REQUIRE(!samples.empty(), "write_dataset_csv: no samples");
  const auto m = samples.front().x.size();
  const auto n = samples.front().u.size();
  for (Eigen::Index i = 0; i < m; ++i) os << 'x' << i + 1 << ',';
  for (Eigen::Index i = 0; i < n; ++i) os << 'u' << i + 1 << ',';
  os << "value\n";
  for (const auto& s : samples) {
    for (Eigen::Index i = 0; i < m; ++i) os << format_double(s.x(i)) << ',';
    for (Eigen::Index i = 0; i < n; ++i) os << format_double(s.u(i)) << ',';
    os << format_double(s.value) << '\n';
  }
}

std::vector<Sample> read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("dataset: empty file");
  const auto header = split(trim(line), ',');
  Eigen::Index m = 0, n = 0;
  for (const auto& col : header) {
    if (!col.empty() && col[0] == 'x') ++m;
    if (!col.empty() && col[0] == 'u') ++n;
  }
  if (m == 0 || n == 0 || header.back() != "value" ||
      static_cast<Eigen::Index>(header.size()) != m + n + 1) {
    throw ValidationError("dataset: header must be x1..xm,u1..un,value");
  }
  std::vector<Sample> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (static_cast<Eigen::Index>(cells.size()) != m + n + 1) {
      throw ValidationError("dataset: wrong column count on line " + std::to_string(lineno));
    }
    Sample s;
    s.x.resize(m);
    s.u.resize(n);
    for (Eigen::Index i = 0; i < m; ++i) s.x(i) = parse_double(cells[i]);
    for (Eigen::Index i = 0; i < n; ++i) s.u(i) = parse_double(cells[m + i]);
    s.value = parse_double(cells[m + n]);
    out.push_back(std::move(s));
  }
  return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool with_timing) {
  if (traj.states.empty()) return;
  const auto m = traj.states.front().size();
  const auto n = traj.inputs.empty() ? 0 : traj.inputs.front().size();
  Eigen::Index p = 0;
  for (const auto& g : traj.gammas)
    if (g) p = std::max(p, g->size());

  os << 't';
  for (Eigen::Index i = 0; i < m; ++i) os << ",x" << i + 1;
  for (Eigen::Index i = 0; i < n; ++i) os << ",u" << i + 1;
  for (Eigen::Index i = 0; i < p; ++i) os << ",gamma" << i + 1;
  os << ",x_violation,u_violation";
  if (with_timing) os << ",step_time";
  os << ",status\n";

  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    os << t;
    for (Eigen::Index i = 0; i < m; ++i) os << ',' << format_double(traj.states[t](i));
    const bool has_input = t < traj.inputs.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      os << ',';
      if (has_input) os << format_double(traj.inputs[t](i));
    }
    for (Eigen::Index i = 0; i < p; ++i) {
      os << ',';
      if (has_input && traj.gammas[t]) os << format_double((*traj.gammas[t])(i));
    }
    os << ',' << int(traj.x_violation[t]) << ',';
    if (has_input) os << int(traj.u_violation[t]);
    if (with_timing) {
      os << ',';
      if (t < traj.step_times.size()) os << format_double(traj.step_times[t]);
    }
    os << ',';
    if (has_input) os << traj.statuses[t];
    os << '\n';
  }
}

void write_loss_csv(std::ostream& os, const std::vector<double>& history) {
  os << "epoch,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    os << i + 1 << ',' << format_double(history[i]) << '\n';
  }
}

std::string fingerprint(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << hash;
  return os.str();
}

}  // namespace lempc
