// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. All real work happens in physcorr::cli; this file
// only maps flags onto overrides and exit codes.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "physcorr/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"physics-aware reward scoring and preference optimization pipeline"};
  app.set_version_flag("--version", "physcorr 0.1.0");
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "pipeline config file (JSON)")
      ->required();

  std::optional<int> jobs;
  app.add_option("--jobs", jobs, "worker cap for parallel stages");
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "seed recorded for the toy training run");
  std::optional<double> alpha;
  app.add_option("--alpha", alpha, "reweighting exponent");
  std::optional<std::string> beta;
  app.add_option("--beta", beta, "reweighting scale: \"max\" or a fixed value");
  std::optional<double> gamma;
  app.add_option("--gamma", gamma, "DPO temperature");
  std::optional<int> n_videos;
  app.add_option("--n-videos", n_videos, "required videos per prompt group");
  std::optional<double> tau;
  app.add_option("--tau", tau, "question relevance threshold");

  const char* subcommands[][2] = {
      {"score", "score every video in the manifest and write the score table"},
      {"fit-rm", "fit the mixing weight against human annotations"},
      {"select-pairs", "build win/lose preference pairs from the score table"},
      {"reweight", "attach density-based weights to the preference pairs"},
      {"train-toy", "train the toy policy with and without reweighting"},
      {"report", "summarize prompt composition and pipeline artifacts"},
  };
  for (const auto& sc : subcommands) {
    app.add_subcommand(sc[0], sc[1])->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad invocation is a config error
  }

  physcorr::cli::CliOverrides overrides;
  overrides.jobs = jobs;
  overrides.seed = seed;
  overrides.alpha = alpha;
  overrides.beta = beta;
  overrides.gamma = gamma;
  overrides.n_videos = n_videos;
  overrides.tau = tau;

  const std::string command = app.get_subcommands().front()->get_name();
  return physcorr::cli::run_command(command, config_path, overrides, std::cout,
                                    std::cerr);
}
