#pragma once

// Text persistence: matrices, polytopes and networks as line-oriented
// records with 17 significant digits, datasets and trajectories as CSV.
//
//   matrix <name> <rows> <cols>
//   <row 0 entries>
//   ...
//   polytope <name>
//   dim <d> rows <r>
//   <h_1> ... <h_d> | <b>
//   ...
//   mlp <name>
//   sizes <count> <n_0> ... <n_L>
//   matrix W<l> ... / matrix b<l> ... per layer

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lempc/mlp.hpp"
#include "lempc/mpc.hpp"
#include "lempc/polytope.hpp"
#include "lempc/simulate.hpp"

namespace lempc {

std::string format_double(double v);

void write_matrix(std::ostream& os, const std::string& name, const MatrixXd& M);
MatrixXd read_matrix(std::istream& is, const std::string& name);

void write_polytope(std::ostream& os, const std::string& name, const HPolytope& P);
HPolytope read_polytope(std::istream& is, const std::string& name);

void write_mlp(std::ostream& os, const std::string& name, const MlpParams& params);
MlpParams read_mlp(std::istream& is, const std::string& name);

/// Columns x1..xm, u1..un, value.
void write_dataset_csv(std::ostream& os, const std::vector<Sample>& samples);
std::vector<Sample> read_dataset_csv(std::istream& is);

/// Columns t, x1..xm, u1..un, gamma1..gammap, x_violation, u_violation,
/// step_time, status. Timing can be left out for byte-stable output.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, bool with_timing = true);

void write_loss_csv(std::ostream& os, const std::vector<double>& history);

/// 64-bit FNV-1a as 16 hex digits.
std::string fingerprint(const std::string& text);

/// Reads the next non-empty line that is not a '#' comment.
bool next_record_line(std::istream& is, std::string& line);

}  // namespace lempc
