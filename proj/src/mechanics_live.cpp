// SPDX-License-Identifier: Apache-2.0
//
// HTTP verdict backend. Kept in its own translation unit so the bulky
// httplib header is compiled once.

#include <chrono>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "physcorr/errors.hpp"
#include "physcorr/logging.hpp"
#include "physcorr/mechanics.hpp"

namespace physcorr::mechanics {

namespace {

struct AttemptResult {
  bool ok = false;
  MechanicsVerdict verdict;
  std::string failure;
};

AttemptResult try_once(const LiveBackendConfig& cfg, const VideoRef& video,
                       const PhysicsQuestion& question) {
  httplib::Client client(cfg.host, cfg.port);
  const auto timeout_ms =
      static_cast<std::chrono::milliseconds::rep>(cfg.timeout_sec * 1000.0);
  client.set_connection_timeout(std::chrono::milliseconds(timeout_ms));
  client.set_read_timeout(std::chrono::milliseconds(timeout_ms));
  client.set_write_timeout(std::chrono::milliseconds(timeout_ms));

  nlohmann::json request;
  request["video_ref"] = video.uri;
  request["question_text"] = question.text;

  auto res = client.Post(cfg.path, request.dump(), "application/json");
  if (!res) return {false, {}, "no response from endpoint"};
  if (res->status != 200)
    return {false, {}, "endpoint returned status " + std::to_string(res->status)};

  nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded()) return {false, {}, "response is not valid JSON"};
  if (!body.contains("correct") || !body["correct"].is_boolean())
    return {false, {}, "response lacks boolean 'correct' field"};
  if (!body.contains("answer_text") || !body["answer_text"].is_string())
    return {false, {}, "response lacks string 'answer_text' field"};

  MechanicsVerdict verdict{video.video_id, question.question_id,
                           body["correct"].get<bool>(), VerdictSource::live};
  return {true, verdict, {}};
}

}  // namespace

MechanicsVerdict LiveBackend::acquire(const VideoRef& video,
                                      const PhysicsQuestion& question) {
  std::string last_failure = "no attempt made";
  int backoff_ms = cfg_.backoff_initial_ms;
  for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
    AttemptResult result = try_once(cfg_, video, question);
    if (result.ok) return result.verdict;
    last_failure = result.failure;
    log::debug("live backend attempt " + std::to_string(attempt) +
               " failed for video '" + video.video_id + "': " + last_failure);
    if (attempt < cfg_.max_attempts) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
  }
  throw BackendError("live verdict backend failed for video '" + video.video_id +
                         "', question '" + question.question_id +
                         "': " + last_failure,
                     cfg_.max_attempts);
}

}  // namespace physcorr::mechanics
