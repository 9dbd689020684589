// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace physcorr {

// Base class for every error raised by this library. Subclasses exist so
// callers (and the CLI exit-code mapping) can distinguish failure classes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-range configuration values.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Missing or unusable input artifacts.
class InputError : public Error {
public:
  using Error::Error;
};

// A file failed strict parsing. Carries the location of the offense.
class ParseError : public InputError {
public:
  ParseError(const std::string& path, std::size_t line, const std::string& reason)
      : InputError(path + ":" + std::to_string(line) + ": " + reason),
        path_(path), line_(line), reason_(reason) {}

  // Binary variant: location is a byte offset instead of a line number.
  static ParseError at_offset(const std::string& path, std::size_t offset,
                              const std::string& reason) {
    ParseError e(path, 0, reason);
    e.offset_ = offset;
    // rebuild the message with an @offset location
    e.message_ = path + "@" + std::to_string(offset) + ": " + reason;
    return e;
  }

  const char* what() const noexcept override {
    return message_.empty() ? InputError::what() : message_.c_str();
  }

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }
  const std::string& reason() const { return reason_; }

private:
  std::string path_;
  std::size_t line_ = 0;
  std::size_t offset_ = 0;
  std::string reason_;
  std::string message_;
};

// Failed filesystem write/read that is not a parse problem.
class IoError : public Error {
public:
  using Error::Error;
};

// Embedding sequence shape violations (too few frames, mismatched dims).
class DimensionError : public Error {
public:
  using Error::Error;
};

// Inputs that are structurally valid but numerically unusable
// (e.g. a zero-norm frame vector).
class DegenerateInputError : public Error {
public:
  using Error::Error;
};

// Corpus statistics could not be formed (zero variance, too few samples).
class StatsError : public Error {
public:
  using Error::Error;
};

// A scalar parameter is outside its admissible domain (e.g. non-finite).
class ParameterError : public Error {
public:
  using Error::Error;
};

// Value outside its documented range (scores must live in [0,1], etc.).
class RangeError : public Error {
public:
  using Error::Error;
};

// An id did not resolve to a known prompt/item slot.
class IndexError : public Error {
public:
  using Error::Error;
};

// Caller broke an API contract (e.g. supplied a second-stage verdict after
// a first-stage failure).
class ContractError : public Error {
public:
  using Error::Error;
};

// A video group cannot produce a preference pair.
class GroupError : public Error {
public:
  using Error::Error;
};

// Replay cache has no verdict for the requested (video, question) key.
class MissingVerdictError : public Error {
public:
  MissingVerdictError(const std::string& video_id, const std::string& question_id)
      : Error("missing verdict for video '" + video_id + "', question '" +
              question_id + "'"),
        video_id_(video_id), question_id_(question_id) {}

  const std::string& video_id() const { return video_id_; }
  const std::string& question_id() const { return question_id_; }

private:
  std::string video_id_;
  std::string question_id_;
};

// Live verdict endpoint failed after exhausting retries, or returned a
// payload we cannot interpret.
class BackendError : public Error {
public:
  BackendError(const std::string& message, int attempts)
      : Error(message + " (attempts: " + std::to_string(attempts) + ")"),
        attempts_(attempts) {}

  int attempts() const { return attempts_; }

private:
  int attempts_ = 0;
};

// Optimization produced a non-finite loss or parameter.
class DivergenceError : public Error {
public:
  DivergenceError(const std::string& message, std::size_t step)
      : Error(message + " at step " + std::to_string(step)), step_(step) {}

  std::size_t step() const { return step_; }

private:
  std::size_t step_ = 0;
};

}  // namespace physcorr
