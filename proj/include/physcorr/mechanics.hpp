// SPDX-License-Identifier: Apache-2.0
//
// Two-stage mechanics scoring: question-pair constraint validation, the
// hierarchical scoring pipeline and the verdict backends behind it.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace physcorr::mechanics {

struct PhysicsQuestion {
  std::string question_id;
  std::string prompt_id;
  std::string text;
  int difficulty = 1;  // ordinal, >= 1
  std::string domain_tag;
  double relevance = 0.0;  // against the prompt, in [0, 1]
  int level = 1;           // 1 = first stage, 2 = second stage
};

struct QuestionPair {
  PhysicsQuestion q1;  // first-level
  PhysicsQuestion q2;  // second-level
  std::string prompt_id;
};

struct ConstraintConfig {
  double tau = 0.5;  // relevance threshold, 0 <= tau < 1
};

// Checked in this fixed order; a rejection names the first violation.
enum class ConstraintViolation { difficulty, domain, relevance };

const char* to_string(ConstraintViolation v);

struct PairValidation {
  bool accepted = false;
  std::optional<ConstraintViolation> violation;
};

// Accepted iff difficulty(q1) < difficulty(q2), both domain tags are
// "mechanics" and both relevance values exceed tau. Rejection is a value,
// not an error.
PairValidation validate_question_pair(const QuestionPair& pair,
                                      const ConstraintConfig& cfg);

enum class VerdictSource { live, replay };

struct MechanicsVerdict {
  std::string video_id;
  std::string question_id;
  bool correct = false;
  VerdictSource source = VerdictSource::replay;
};

struct MechanicsScore {
  double value = 0.0;     // {0, 0.5, 1}
  int stage_reached = 1;  // 1 or 2
};

// Truth table of the two-stage evaluation. v2 must be present exactly when
// v1 is correct; anything else is a ContractError.
MechanicsScore score_mechanics(const MechanicsVerdict& v1,
                               const std::optional<MechanicsVerdict>& v2);

struct VideoRef {
  std::string video_id;
  std::string uri;  // opaque reference passed to live backends
};

// Pluggable source of verdicts: a live inference endpoint or a replay cache.
class VerdictBackend {
public:
  virtual ~VerdictBackend() = default;
  virtual MechanicsVerdict acquire(const VideoRef& video,
                                   const PhysicsQuestion& question) = 0;
};

MechanicsVerdict acquire_verdict(const VideoRef& video,
                                 const PhysicsQuestion& question,
                                 VerdictBackend& backend);

// Runs the hierarchical pipeline: q1 first, q2 only on first-stage success.
// Exactly one backend call is made when the first level fails.
MechanicsScore run_mechanics_pipeline(const VideoRef& video,
                                      const QuestionPair& pair,
                                      VerdictBackend& backend);

// One record of the append-only verdict cache file.
struct CachedVerdict {
  std::string video_id;
  std::string question_id;
  std::string question_text;
  std::string answer_text;
  bool correct = false;
};

// Read-only verdict store keyed by (video_id, question_id).
class ReplayCache : public VerdictBackend {
public:
  // Duplicate keys are an ingestion error (InputError).
  static ReplayCache from_records(std::vector<CachedVerdict> records);

  MechanicsVerdict acquire(const VideoRef& video,
                           const PhysicsQuestion& question) override;

  std::size_t size() const { return entries_.size(); }

private:
  std::map<std::pair<std::string, std::string>, CachedVerdict> entries_;
};

struct LiveBackendConfig {
  std::string host = "127.0.0.1";
  int port = 0;
  std::string path = "/verdict";
  double timeout_sec = 10.0;
  int max_attempts = 3;
  int backoff_initial_ms = 100;  // doubled after each failed attempt
};

// HTTP backend: POSTs {video_ref, question_text} and expects
// {answer_text, correct}. Retries with exponential backoff, then raises
// BackendError carrying the attempt count.
class LiveBackend : public VerdictBackend {
public:
  explicit LiveBackend(LiveBackendConfig cfg) : cfg_(std::move(cfg)) {}

  MechanicsVerdict acquire(const VideoRef& video,
                           const PhysicsQuestion& question) override;

private:
  LiveBackendConfig cfg_;
};

}  // namespace physcorr::mechanics
