// SPDX-License-Identifier: Apache-2.0
//
// Unit tests for prompt composition ratios and preference pair selection.

#include <doctest.h>

#include <limits>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "physcorr/curation.hpp"
#include "physcorr/errors.hpp"

namespace cur = physcorr::curation;
namespace sc = physcorr::score_core;
using physcorr::GroupError;
using physcorr::InputError;
using physcorr::RangeError;

namespace {

std::vector<cur::PromptRecord> make_prompts(const std::string& prefix,
                                            std::size_t n,
                                            const std::string& category) {
  std::vector<cur::PromptRecord> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({prefix + std::to_string(i), "text " + std::to_string(i),
                   category, "synthetic"});
  return out;
}

cur::VideoGroup make_group(const std::string& prompt,
                           const std::vector<double>& scores) {
  cur::VideoGroup g;
  g.prompt_id = prompt;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    sc::PhyScoreRecord rec;
    rec.video_id = prompt + "-v" + std::to_string(i);
    rec.s_phy = scores[i];
    g.videos.push_back(rec);
  }
  return g;
}

}  // namespace

TEST_CASE("compose_prompts keeps input order and counts") {
  const auto physics = make_prompts("phys", 2, "physics_challenging");
  const auto neutral = make_prompts("neut", 10, "neutral");
  const auto comp = cur::compose_rm_prompts(physics, neutral);

  REQUIRE(comp.prompts.size() == 12);
  CHECK(comp.prompts.front().prompt_id == "phys0");
  CHECK(comp.prompts[1].prompt_id == "phys1");
  CHECK(comp.prompts[2].prompt_id == "neut0");
  CHECK(comp.prompts.back().prompt_id == "neut9");

  CHECK(comp.report.first_count == 2);
  CHECK(comp.report.second_count == 10);
  CHECK(comp.report.expected_ratio == 5.0);
  CHECK(comp.report.actual_ratio == 5.0);
  CHECK(comp.report.ok);
  CHECK(comp.report.message.find("(ok)") != std::string::npos);
}

TEST_CASE("ratio deviation beyond tolerance is a warning, not an error") {
  const auto physics = make_prompts("phys", 2, "physics_challenging");
  const auto neutral = make_prompts("neut", 11, "neutral");  // 1:5.5
  const auto comp = cur::compose_rm_prompts(physics, neutral, 0.01);
  CHECK_FALSE(comp.report.ok);
  CHECK(comp.prompts.size() == 13);
  CHECK(comp.report.message.find("warning") != std::string::npos);

  // The same counts pass with a looser tolerance.
  const auto loose = cur::compose_rm_prompts(physics, neutral, 0.2);
  CHECK(loose.report.ok);
}

TEST_CASE("dpo composition expects 1:2") {
  const auto challenging = make_prompts("chal", 3, "physics_challenging");
  const auto random = make_prompts("rand", 6, "random");
  const auto comp = cur::compose_dpo_prompts(challenging, random);
  CHECK(comp.report.expected_ratio == 2.0);
  CHECK(comp.report.ok);
}

TEST_CASE("empty first list yields a not-ok report") {
  const std::vector<cur::PromptRecord> none;
  const auto neutral = make_prompts("neut", 4, "neutral");
  const auto comp = cur::compose_rm_prompts(none, neutral);
  CHECK_FALSE(comp.report.ok);
  CHECK(comp.report.first_count == 0);
  CHECK(comp.prompts.size() == 4);
  CHECK(comp.report.message.find("undefined") != std::string::npos);
}

TEST_CASE("duplicate prompt ids across lists are an error") {
  const auto physics = make_prompts("p", 2, "physics_challenging");
  const auto clashing = make_prompts("p", 3, "neutral");  // p0, p1 repeat
  CHECK_THROWS_AS(cur::compose_rm_prompts(physics, clashing), InputError);
}

TEST_CASE("select_pair picks argmax and argmin") {
  const auto group = make_group("p0", {0.3, 0.9, 0.1, 0.6});
  const auto sel = cur::select_pair(group, 1e-9);
  const auto* pair = std::get_if<cur::PreferencePair>(&sel);
  REQUIRE(pair != nullptr);
  CHECK(pair->prompt_id == "p0");
  CHECK(pair->win_video_id == "p0-v1");
  CHECK(pair->lose_video_id == "p0-v2");
  CHECK(pair->s_win == 0.9);
  CHECK(pair->s_lose == 0.1);
  CHECK(pair->delta == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(pair->weight == 1.0);
}

TEST_CASE("select_pair breaks ties toward the lowest index") {
  // Two maxima and two minima; the earlier video wins each role.
  const auto group = make_group("p1", {0.2, 0.8, 0.8, 0.2});
  const auto sel = cur::select_pair(group, 1e-9);
  const auto* pair = std::get_if<cur::PreferencePair>(&sel);
  REQUIRE(pair != nullptr);
  CHECK(pair->win_video_id == "p1-v1");
  CHECK(pair->lose_video_id == "p1-v0");
}

TEST_CASE("degenerate groups are skipped, not fatal") {
  const auto flat = make_group("p2", {0.5, 0.5, 0.5});
  const auto sel = cur::select_pair(flat, 1e-9);
  const auto* skip = std::get_if<cur::SkipNotice>(&sel);
  REQUIRE(skip != nullptr);
  CHECK(skip->prompt_id == "p2");
  CHECK(skip->reason.find("degenerate") != std::string::npos);
}

TEST_CASE("epsilon boundary: spread equal to epsilon is kept") {
  // delta = 0.25 exactly; skip only applies when delta < epsilon.
  const auto group = make_group("p3", {0.5, 0.75});
  CHECK(std::holds_alternative<cur::PreferencePair>(cur::select_pair(group, 0.25)));
  CHECK(std::holds_alternative<cur::SkipNotice>(
      cur::select_pair(group, 0.2500001)));
}

TEST_CASE("select_pair input validation") {
  CHECK_THROWS_AS(cur::select_pair(make_group("p4", {0.5}), 1e-9), GroupError);
  CHECK_THROWS_AS(cur::select_pair(make_group("p5", {}), 1e-9), GroupError);

  auto poisoned = make_group("p6", {0.5, 0.7});
  poisoned.videos[1].s_phy = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(cur::select_pair(poisoned, 1e-9), RangeError);
}

TEST_CASE("build_preference_dataset preserves group order and collects skips") {
  std::vector<cur::VideoGroup> groups{
      make_group("a", {0.1, 0.9}),
      make_group("b", {0.4, 0.4}),
      make_group("c", {0.7, 0.2, 0.5}),
  };
  const auto result = cur::build_preference_dataset(groups, 1e-9);
  REQUIRE(result.pairs.size() == 2);
  CHECK(result.pairs[0].prompt_id == "a");
  CHECK(result.pairs[1].prompt_id == "c");
  CHECK(result.pairs[1].win_video_id == "c-v0");
  CHECK(result.pairs[1].lose_video_id == "c-v1");
  REQUIRE(result.skips.size() == 1);
  CHECK(result.skips[0].prompt_id == "b");
}

TEST_CASE("build_preference_dataset rejects an empty corpus") {
  const std::vector<cur::VideoGroup> none;
  CHECK_THROWS_AS(cur::build_preference_dataset(none, 1e-9), InputError);
}

TEST_CASE("pair invariants hold over random groups") {
  std::mt19937 rng(17u);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> scores(2 + trial % 6);
    for (auto& s : scores) s = unit(rng);
    const auto sel = cur::select_pair(make_group("t", scores), 1e-9);
    if (const auto* pair = std::get_if<cur::PreferencePair>(&sel)) {
      CHECK(pair->s_win >= pair->s_lose);
      CHECK(pair->delta == pair->s_win - pair->s_lose);
      CHECK(pair->win_video_id != pair->lose_video_id);
      for (double s : scores) {
        CHECK(pair->s_win >= s);
        CHECK(pair->s_lose <= s);
      }
    }
  }
}
