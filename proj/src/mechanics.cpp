// SPDX-License-Identifier: Apache-2.0

#include "physcorr/mechanics.hpp"

#include "physcorr/errors.hpp"
#include "physcorr/logging.hpp"

namespace physcorr::mechanics {

const char* to_string(ConstraintViolation v) {
  switch (v) {
    case ConstraintViolation::difficulty: return "difficulty";
    case ConstraintViolation::domain: return "domain";
    case ConstraintViolation::relevance: return "relevance";
  }
  return "unknown";
}

PairValidation validate_question_pair(const QuestionPair& pair,
                                      const ConstraintConfig& cfg) {
  if (pair.q1.text.empty() || pair.q2.text.empty())
    throw ContractError("question pair for prompt '" + pair.prompt_id +
                        "' has empty question text");
  // Fixed check order: difficulty, domain, relevance.
  if (!(pair.q1.difficulty < pair.q2.difficulty))
    return {false, ConstraintViolation::difficulty};
  if (pair.q1.domain_tag != "mechanics" || pair.q2.domain_tag != "mechanics")
    return {false, ConstraintViolation::domain};
  if (!(pair.q1.relevance > cfg.tau) || !(pair.q2.relevance > cfg.tau))
    return {false, ConstraintViolation::relevance};
  return {true, std::nullopt};
}

MechanicsScore score_mechanics(const MechanicsVerdict& v1,
                               const std::optional<MechanicsVerdict>& v2) {
  if (!v1.correct) {
    if (v2.has_value())
      throw ContractError("second-stage verdict supplied after first-level failure");
    return {0.0, 1};  // first-level failure
  }
  if (!v2.has_value())
    throw ContractError("second-stage verdict missing after first-level success");
  return v2->correct ? MechanicsScore{1.0, 2} : MechanicsScore{0.5, 2};
}

MechanicsVerdict acquire_verdict(const VideoRef& video,
                                 const PhysicsQuestion& question,
                                 VerdictBackend& backend) {
  return backend.acquire(video, question);
}

MechanicsScore run_mechanics_pipeline(const VideoRef& video,
                                      const QuestionPair& pair,
                                      VerdictBackend& backend) {
  const MechanicsVerdict v1 = acquire_verdict(video, pair.q1, backend);
  if (!v1.correct) {
    log::debug("mechanics: video '" + video.video_id + "' failed first level");
    return score_mechanics(v1, std::nullopt);
  }
  const MechanicsVerdict v2 = acquire_verdict(video, pair.q2, backend);
  return score_mechanics(v1, v2);
}

ReplayCache ReplayCache::from_records(std::vector<CachedVerdict> records) {
  ReplayCache cache;
  for (auto& rec : records) {
    auto key = std::make_pair(rec.video_id, rec.question_id);
    if (cache.entries_.count(key) != 0)
      throw InputError("duplicate verdict cache key (video '" + rec.video_id +
                       "', question '" + rec.question_id + "')");
    cache.entries_.emplace(std::move(key), std::move(rec));
  }
  return cache;
}

MechanicsVerdict ReplayCache::acquire(const VideoRef& video,
                                      const PhysicsQuestion& question) {
  const auto it = entries_.find({video.video_id, question.question_id});
  if (it == entries_.end())
    throw MissingVerdictError(video.video_id, question.question_id);
  return {video.video_id, question.question_id, it->second.correct,
          VerdictSource::replay};
}

}  // namespace physcorr::mechanics
