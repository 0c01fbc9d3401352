#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lempc/governor.hpp"
#include "lempc/linalg.hpp"
#include "lempc/mlp.hpp"
#include "lempc/mpc.hpp"
#include "lempc/system.hpp"

namespace lempc::cli {

struct NumericsConfig {
  double dare_tol = 1e-12;
  int dare_max_iter = 100000;
  double containment_tol = 1e-9;
  double boundary_tol = 1e-9;
  long fm_row_cap = 20000;
};

struct NnConfig {
  std::vector<int> hidden;
  std::size_t samples = 100;
  TrainConfig train;
};

struct SimulateConfig {
  int T = 50;
  bool vertices = false;  // start from the vertices of the governed region
  std::vector<VectorXd> initial_states;
  std::string policy = "governed";
  std::size_t fuzz_runs = 0;  // adversarial-network runs in `compare`
};

struct PipelineConfig {
  LtiSystem system;
  MatrixXd Q, R;
  std::optional<MatrixXd> P;
  int N = 10;
  NnConfig nn;
  double s = 1.0;
  double eps = 1e-6;
  SimulateConfig simulate;
  std::vector<int> horizons = {1, 3, 10};
  NumericsConfig numerics;
  std::filesystem::path output = "out";

  // Hashes of the config sections each stage depends on.
  std::string synthesis_fingerprint;
  std::string dataset_fingerprint;
  std::string model_fingerprint;
};

/// Parses and cross-checks a config. Throws ValidationError naming the field.
PipelineConfig parse_config(const nlohmann::json& doc);
PipelineConfig load_config(const std::filesystem::path& path);

/// Everything `synthesize` produces.
struct Synthesis {
  MatrixXd P;
  RiccatiSolution lqr;  // P, K and Acl as used downstream
  GovernorModel governor;
};

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<std::string> policy;
};

int cmd_synthesize(const CommandOptions& opt);
int cmd_sample(const CommandOptions& opt);
int cmd_train(const CommandOptions& opt);
int cmd_simulate(const CommandOptions& opt);
int cmd_region(const CommandOptions& opt);
int cmd_compare(const CommandOptions& opt);

/// Exit codes.
constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitSafety = 4;

}  // namespace lempc::cli
