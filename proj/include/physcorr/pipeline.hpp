// SPDX-License-Identifier: Apache-2.0
//
// Command layer: each subcommand reads its input artifacts, runs the
// corresponding library stages and writes canonical outputs plus a resolved
// config snapshot into the output directory.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "physcorr/config.hpp"
#include "physcorr/curation.hpp"
#include "physcorr/io_formats.hpp"

namespace physcorr::cli {

// Effective artifact locations: explicit path if configured, otherwise the
// conventional file name inside the output directory.
std::string effective_score_table(const PipelineConfig& cfg);
std::string effective_pairs(const PipelineConfig& cfg);
std::string effective_pairs_weighted(const PipelineConfig& cfg);

// Rebuilds per-prompt video groups from a score table, preserving the
// first-appearance order of prompts and the row order within each group.
std::vector<curation::VideoGroup> group_score_rows(
    const std::vector<io::ScoreRow>& rows);

// Subcommand bodies. Human-readable progress goes to `out`; each ends with
// one machine-readable "SUMMARY <command> key=value ..." line. Artifacts are
// written into cfg.paths.out_dir. Errors surface as physcorr exceptions.
void cmd_score(const PipelineConfig& cfg, std::ostream& out);
void cmd_fit_rm(const PipelineConfig& cfg, std::ostream& out);
void cmd_select_pairs(const PipelineConfig& cfg, std::ostream& out);
void cmd_reweight(const PipelineConfig& cfg, std::ostream& out);
void cmd_train_toy(const PipelineConfig& cfg, std::ostream& out);
void cmd_report(const PipelineConfig& cfg, std::ostream& out);

// Loads the config, applies overrides, dispatches and maps exceptions to
// exit codes: 0 success, 2 config error, 3 input error, 4 divergence,
// 1 anything else. Messages go to `err`.
int run_command(const std::string& command, const std::string& config_path,
                const CliOverrides& overrides, std::ostream& out,
                std::ostream& err);

}  // namespace physcorr::cli
