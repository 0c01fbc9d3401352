#include <CLI11.hpp>
#include <iostream>

#include "lempc/error.hpp"
#include "pipeline.hpp"

using namespace lempc::cli;

int main(int argc, char** argv) {
  CLI::App app{"Learning-enabled MPC pipeline: sets, sampling, training, governed simulation"};
  app.require_subcommand(1);

  CommandOptions opt;

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const CommandOptions&);
  };
  const Command commands[] = {
      {"synthesize", "Solve the Riccati equation and build the admissible and augmented sets", cmd_synthesize},
      {"sample", "Sample feasible MPC solutions into dataset.csv", cmd_sample},
      {"train", "Fit the network to the dataset", cmd_train},
      {"simulate", "Closed-loop runs from the configured initial states", cmd_simulate},
      {"region", "Admissible, governed and MPC feasible regions with areas", cmd_region},
      {"compare", "Timing and violation table across policies", cmd_compare},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", opt.config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "Output directory (overrides the config)");
    sub->add_option("--seed", opt.seed, "Sampling and training seed (overrides nn.seed)");
    if (std::string(c.name) == "sample") sub->add_option("--samples", opt.samples, "Number of samples (overrides nn.samples)");
    if (std::string(c.name) == "simulate")
      sub->add_option("--policy", opt.policy,
                      "governed, dual-mode, nn, lqr, mpc, projection, projection-dual or zero");
    subs.emplace_back(sub, &c);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  for (const auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    try {
      return cmd->run(opt);
    } catch (const lempc::ValidationError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitValidation;
    } catch (const lempc::OutOfDomainError& e) {
      std::cerr << "safety: " << e.what() << "\n";
      return kExitSafety;
    } catch (const lempc::NumericalError& e) {
      std::cerr << "numerical failure: " << e.what() << "\n";
      return kExitNumerical;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitNumerical;
    }
  }
  return kExitValidation;
}
