// SPDX-License-Identifier: Apache-2.0

#include "physcorr/curation.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "physcorr/errors.hpp"

namespace physcorr::curation {

PromptComposition compose_prompts(std::span<const PromptRecord> first,
                                  std::span<const PromptRecord> second,
                                  const RatioSpec& spec) {
  PromptComposition out;
  out.prompts.reserve(first.size() + second.size());
  std::unordered_set<std::string> seen;
  for (const auto* list : {&first, &second}) {
    for (const auto& p : *list) {
      if (!seen.insert(p.prompt_id).second)
        throw InputError("duplicate prompt_id '" + p.prompt_id +
                         "' in prompt composition");
      out.prompts.push_back(p);
    }
  }

  RatioReport& rep = out.report;
  rep.first_count = first.size();
  rep.second_count = second.size();
  rep.expected_ratio = spec.second / spec.first;

  std::ostringstream msg;
  if (first.empty()) {
    rep.ok = false;
    msg << "first list is empty; ratio undefined (expected 1:" << rep.expected_ratio
        << ")";
  } else {
    rep.actual_ratio =
        static_cast<double>(second.size()) / static_cast<double>(first.size());
    const double deviation =
        std::fabs(rep.actual_ratio - rep.expected_ratio) / rep.expected_ratio;
    rep.ok = deviation <= spec.tolerance;
    msg << first.size() << " + " << second.size() << " prompts, ratio 1:"
        << rep.actual_ratio << " vs expected 1:" << rep.expected_ratio
        << (rep.ok ? " (ok)" : " (warning: deviation beyond tolerance)");
  }
  rep.message = msg.str();
  return out;
}

PromptComposition compose_rm_prompts(std::span<const PromptRecord> physics,
                                     std::span<const PromptRecord> neutral,
                                     double tolerance) {
  return compose_prompts(physics, neutral, RatioSpec{1.0, 5.0, tolerance});
}

PromptComposition compose_dpo_prompts(std::span<const PromptRecord> challenging,
                                      std::span<const PromptRecord> random,
                                      double tolerance) {
  return compose_prompts(challenging, random, RatioSpec{1.0, 2.0, tolerance});
}

SelectionResult select_pair(const VideoGroup& group, double epsilon) {
  if (group.videos.size() < 2)
    throw GroupError("group for prompt '" + group.prompt_id +
                     "' has fewer than 2 videos");
  std::size_t win = 0;
  std::size_t lose = 0;
  for (std::size_t i = 0; i < group.videos.size(); ++i) {
    const double s = group.videos[i].s_phy;
    if (!std::isfinite(s))
      throw RangeError("non-finite PhyScore for video '" +
                       group.videos[i].video_id + "'");
    // strict comparisons keep the lowest index on ties
    if (s > group.videos[win].s_phy) win = i;
    if (s < group.videos[lose].s_phy) lose = i;
  }
  const double delta = group.videos[win].s_phy - group.videos[lose].s_phy;
  if (delta < epsilon)
    return SkipNotice{group.prompt_id,
                      "degenerate group: score spread " + std::to_string(delta) +
                          " below epsilon"};
  PreferencePair pair;
  pair.prompt_id = group.prompt_id;
  pair.win_video_id = group.videos[win].video_id;
  pair.lose_video_id = group.videos[lose].video_id;
  pair.s_win = group.videos[win].s_phy;
  pair.s_lose = group.videos[lose].s_phy;
  pair.delta = delta;
  pair.weight = 1.0;
  return pair;
}

DatasetBuildResult build_preference_dataset(std::span<const VideoGroup> groups,
                                            double epsilon) {
  if (groups.empty())
    throw InputError("cannot build a preference dataset from zero groups");
  DatasetBuildResult out;
  out.pairs.reserve(groups.size());
  for (const auto& group : groups) {
    SelectionResult sel = select_pair(group, epsilon);
    if (auto* pair = std::get_if<PreferencePair>(&sel))
      out.pairs.push_back(std::move(*pair));
    else
      out.skips.push_back(std::move(std::get<SkipNotice>(sel)));
  }
  return out;
}

}  // namespace physcorr::curation
