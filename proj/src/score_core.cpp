// SPDX-License-Identifier: Apache-2.0

#include "physcorr/score_core.hpp"

#include <cmath>
#include <string>

#include "physcorr/errors.hpp"

namespace physcorr::score_core {

namespace {

double dot(const std::vector<float>& a, const std::vector<float>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

double norm(const std::vector<float>& v) { return std::sqrt(dot(v, v)); }

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sigmoid_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

void validate_sequence(const EmbeddingSequence& seq) {
  if (seq.frames.size() < 2)
    throw DimensionError("embedding sequence '" + seq.video_id +
                         "' needs at least 2 frames, got " +
                         std::to_string(seq.frames.size()));
  const std::size_t d = seq.frames.front().size();
  if (d < 1)
    throw DimensionError("embedding sequence '" + seq.video_id +
                         "' has empty frame vectors");
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    if (seq.frames[t].size() != d)
      throw DimensionError("embedding sequence '" + seq.video_id + "' frame " +
                           std::to_string(t) + " has dimension " +
                           std::to_string(seq.frames[t].size()) + ", expected " +
                           std::to_string(d));
    if (norm(seq.frames[t]) == 0.0)
      throw DegenerateInputError("embedding sequence '" + seq.video_id +
                                 "' frame " + std::to_string(t) +
                                 " has zero norm");
  }
}

double subject_consistency(const EmbeddingSequence& seq) {
  validate_sequence(seq);
  const std::size_t f = seq.frames.size();
  double acc = 0.0;
  for (std::size_t t = 0; t + 1 < f; ++t) {
    const double cos = dot(seq.frames[t], seq.frames[t + 1]) /
                       (norm(seq.frames[t]) * norm(seq.frames[t + 1]));
    acc += cos;
  }
  return acc / static_cast<double>(f - 1);
}

SubjectStats fit_subject_stats(std::span<const double> corpus,
                               const std::string& corpus_id) {
  if (corpus.size() < 2)
    throw StatsError("subject stats need at least 2 corpus scores, got " +
                     std::to_string(corpus.size()));
  double mean = 0.0;
  for (double x : corpus) mean += x;
  mean /= static_cast<double>(corpus.size());
  double var = 0.0;
  for (double x : corpus) var += (x - mean) * (x - mean);
  var /= static_cast<double>(corpus.size());  // population convention
  if (var <= 0.0)
    throw StatsError("subject score corpus has zero variance; normalization undefined");
  return SubjectStats{corpus_id, mean, std::sqrt(var)};
}

double normalize_subject(double raw, const SubjectStats& stats) {
  return sigmoid((raw - stats.mu) / stats.sigma);
}

double mix_scores(double s_subj_norm, double s_mech, const MixerParams& params) {
  if (!std::isfinite(params.lambda))
    throw ParameterError("mixer lambda is not finite");
  if (s_subj_norm < 0.0 || s_subj_norm > 1.0)
    throw RangeError("s_subj_norm " + std::to_string(s_subj_norm) +
                     " outside [0, 1]");
  if (s_mech != 0.0 && s_mech != 0.5 && s_mech != 1.0)
    throw RangeError("s_mech " + std::to_string(s_mech) +
                     " not in {0, 0.5, 1}");
  const double w = sigmoid(params.lambda);
  return w * s_subj_norm + (1.0 - w) * s_mech;
}

PhyScoreRecord compose_record(const std::string& video_id, double s_subj_raw,
                              const SubjectStats& stats, double s_mech,
                              const MixerParams& params) {
  PhyScoreRecord rec;
  rec.video_id = video_id;
  rec.s_subj_raw = s_subj_raw;
  rec.s_subj_norm = normalize_subject(s_subj_raw, stats);
  rec.s_mech = s_mech;
  rec.s_phy = mix_scores(rec.s_subj_norm, s_mech, params);
  return rec;
}

double huber_loss(double residual, const HuberConfig& cfg) {
  const double z = std::fabs(residual);
  if (z <= cfg.delta) return 0.5 * residual * residual;
  return cfg.delta * (z - 0.5 * cfg.delta);
}

double huber_grad(double residual, const HuberConfig& cfg) {
  if (std::fabs(residual) <= cfg.delta) return residual;
  return residual > 0.0 ? cfg.delta : -cfg.delta;
}

double fit_loss(std::span<const AnnotatedSample> samples, double lambda,
                const HuberConfig& cfg) {
  const double w = sigmoid(lambda);
  double acc = 0.0;
  for (const auto& s : samples) {
    const double pred = w * s.s_subj_norm + (1.0 - w) * s.s_mech;
    acc += huber_loss(pred - s.human_score, cfg);
  }
  return acc / static_cast<double>(samples.size());
}

double fit_loss_grad(std::span<const AnnotatedSample> samples, double lambda,
                     const HuberConfig& cfg) {
  const double w = sigmoid(lambda);
  const double sg = sigmoid_grad(lambda);
  double acc = 0.0;
  for (const auto& s : samples) {
    const double pred = w * s.s_subj_norm + (1.0 - w) * s.s_mech;
    acc += huber_grad(pred - s.human_score, cfg) * (s.s_subj_norm - s.s_mech) * sg;
  }
  return acc / static_cast<double>(samples.size());
}

FitResult fit_lambda(std::span<const AnnotatedSample> samples,
                     const HuberConfig& huber, const FitConfig& cfg) {
  if (samples.empty())
    throw StatsError("fit_lambda needs at least one sample");
  if (cfg.steps < 0)
    throw ParameterError("fit_lambda step count must be non-negative");

  double lambda = cfg.lambda_init;
  FitResult out;
  out.loss_trace.reserve(static_cast<std::size_t>(cfg.steps) + 1);

  double loss = fit_loss(samples, lambda, huber);
  if (!std::isfinite(loss)) throw DivergenceError("non-finite fit loss", 0);
  out.loss_trace.push_back(loss);

  for (int step = 1; step <= cfg.steps; ++step) {
    const double g = fit_loss_grad(samples, lambda, huber);
    lambda -= cfg.learning_rate * g;
    if (!std::isfinite(lambda))
      throw DivergenceError("non-finite lambda", static_cast<std::size_t>(step));
    loss = fit_loss(samples, lambda, huber);
    if (!std::isfinite(loss))
      throw DivergenceError("non-finite fit loss", static_cast<std::size_t>(step));
    out.loss_trace.push_back(loss);
  }

  out.params.lambda = lambda;
  return out;
}

}  // namespace physcorr::score_core
