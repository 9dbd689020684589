// SPDX-License-Identifier: Apache-2.0
//
// Prompt set composition at fixed ratios and win/lose preference pair
// selection over scored video groups.

#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "physcorr/score_core.hpp"

namespace physcorr::curation {

struct PromptRecord {
  std::string prompt_id;
  std::string text;
  std::string category;  // physics_challenging | neutral
  std::string source;
};

struct RatioSpec {
  double first = 1.0;
  double second = 5.0;
  double tolerance = 0.01;  // relative deviation allowed before warning
};

struct RatioReport {
  std::size_t first_count = 0;
  std::size_t second_count = 0;
  double expected_ratio = 0.0;  // second / first
  double actual_ratio = 0.0;
  bool ok = false;
  std::string message;
};

struct PromptComposition {
  std::vector<PromptRecord> prompts;  // first list then second, input order
  RatioReport report;
};

// Union of the two disjoint lists with the count ratio checked against the
// spec. Ratio deviation is a warning in the report, duplicates are an error.
PromptComposition compose_prompts(std::span<const PromptRecord> first,
                                  std::span<const PromptRecord> second,
                                  const RatioSpec& spec);

// Reward-model corpus: physics-challenging vs neutral prompts at 1:5.
PromptComposition compose_rm_prompts(std::span<const PromptRecord> physics,
                                     std::span<const PromptRecord> neutral,
                                     double tolerance = 0.01);

// DPO corpus: challenging vs random prompts at 1:2.
PromptComposition compose_dpo_prompts(std::span<const PromptRecord> challenging,
                                      std::span<const PromptRecord> random,
                                      double tolerance = 0.01);

// All scored generations of one prompt.
struct VideoGroup {
  std::string prompt_id;
  std::vector<score_core::PhyScoreRecord> videos;
};

struct PreferencePair {
  std::string prompt_id;
  std::string win_video_id;
  std::string lose_video_id;
  double s_win = 0.0;
  double s_lose = 0.0;
  double delta = 0.0;    // s_win - s_lose
  double weight = 1.0;   // filled by the reweighting stage
};

struct SkipNotice {
  std::string prompt_id;
  std::string reason;
};

using SelectionResult = std::variant<PreferencePair, SkipNotice>;

// win = argmax score, lose = argmin score, ties broken by lowest index.
// Groups whose score spread is below epsilon are skipped as degenerate.
SelectionResult select_pair(const VideoGroup& group, double epsilon);

struct DatasetBuildResult {
  std::vector<PreferencePair> pairs;
  std::vector<SkipNotice> skips;
};

// One pair per non-degenerate group, input order preserved.
DatasetBuildResult build_preference_dataset(std::span<const VideoGroup> groups,
                                            double epsilon);

}  // namespace physcorr::curation
