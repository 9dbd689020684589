// SPDX-License-Identifier: Apache-2.0
//
// Pipeline configuration: one JSON file with strict key checking, command-line
// overrides and a canonical resolved snapshot for provenance.

#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace physcorr::cli {

struct PathsConfig {
  std::string embeddings;
  std::string manifest;
  std::string questions;
  std::string verdicts;       // replay cache
  std::string prompts;        // prompt list for composition reports
  std::string annotations;
  std::string qualities;      // optional latent qualities for train-toy
  std::string stats;          // subject stats input (stats.mode == "file")
  std::string mixer_params;   // fitted mixer input for scoring
  std::string score_table;    // defaults to <out_dir>/score_table.jsonl
  std::string pairs;          // defaults to <out_dir>/pairs.jsonl
  std::string pairs_weighted; // defaults to <out_dir>/pairs_weighted.jsonl
  std::string policy_init;    // optional initial toy policy
  std::string out_dir = "out";
};

// How the subject-score normalization statistics are obtained: fitted from
// the corpus at hand, loaded from a stats artifact, or pinned in the config.
struct StatsConfig {
  std::string mode = "computed";  // computed | file | fixed
  double mu = 0.0;                // fixed mode only
  double sigma = 1.0;             // fixed mode only, > 0
};

struct MixerSection {
  double lambda_init = 0.0;
  double learning_rate = 1e-2;
  int steps = 2000;
  double huber_delta = 0.2;
};

struct MechanicsSection {
  double tau = 0.5;
  std::string backend = "replay";  // replay | live
  std::string host = "127.0.0.1";
  int port = 0;
  std::string path = "/verdict";
  double timeout_sec = 10.0;
  int max_attempts = 3;
  int backoff_initial_ms = 100;
};

struct SelectionSection {
  int n_videos = 0;  // expected group size; 0 disables the check
  double epsilon = 1e-9;
};

struct ReweightSection {
  double alpha = 1.0;
  std::string beta_mode = "max";  // max | fixed
  double beta_value = 0.58;
  double bin_width = 0.01;
};

struct DpoSection {
  double gamma = 0.1;
  double learning_rate = 0.5;
  int steps = 200;
  std::uint64_t seed = 0;
};

struct ReportSection {
  std::string mode = "rm";  // rm (1:5) | dpo (1:2) prompt composition
};

struct PipelineConfig {
  std::string corpus_id = "corpus-0";
  int jobs = 1;
  PathsConfig paths;
  StatsConfig stats;
  MixerSection mixer;
  MechanicsSection mechanics;
  SelectionSection selection;
  ReweightSection reweight;
  DpoSection dpo;
  ReportSection report;
};

// Flag-level overrides; a set value wins over the config file.
struct CliOverrides {
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::string> beta;  // "max" or a fixed numeric value
  std::optional<double> gamma;
  std::optional<int> n_videos;
  std::optional<double> tau;
};

// Strict loader: unknown keys, wrong types and out-of-range values raise
// ConfigError naming the offending key.
PipelineConfig load_config(const std::string& path);

void apply_overrides(PipelineConfig& cfg, const CliOverrides& overrides);

// Full range validation, used after loading and after overrides.
void validate_config(const PipelineConfig& cfg);

// Canonical resolved-config JSON (fixed key order, stable float format).
std::string resolved_config_json(const PipelineConfig& cfg);

}  // namespace physcorr::cli
