// SPDX-License-Identifier: Apache-2.0
//
// Subject-consistency scoring, score mixing and the 1-D Huber fit of the
// mixing logit against human annotations.

#pragma once

#include <span>
#include <string>
#include <vector>

namespace physcorr::score_core {

// Per-video sequence of frame embeddings. Payload precision is 32-bit float
// to match the on-disk encoding; all arithmetic is done in double.
struct EmbeddingSequence {
  std::string video_id;
  std::vector<std::vector<float>> frames;  // F rows of dimension d

  std::size_t frame_count() const { return frames.size(); }
  std::size_t dim() const { return frames.empty() ? 0 : frames.front().size(); }
};

// Throws DimensionError (F < 2, ragged rows, d < 1) or DegenerateInputError
// (zero-norm frame). Used both at ingestion and before scoring.
void validate_sequence(const EmbeddingSequence& seq);

// Mean and population standard deviation of raw subject scores over a
// reference corpus. sigma > 0 always holds for a constructed instance.
struct SubjectStats {
  std::string corpus_id;
  double mu = 0.0;
  double sigma = 1.0;
};

// Pre-sigmoid mixing logit; the effective subject weight is sigmoid(lambda).
struct MixerParams {
  double lambda = 0.0;
};

// All four score views of one video.
struct PhyScoreRecord {
  std::string video_id;
  double s_subj_raw = 0.0;   // mean consecutive-frame cosine, in [-1, 1]
  double s_subj_norm = 0.0;  // sigmoid(z-score), in (0, 1)
  double s_mech = 0.0;       // {0, 0.5, 1}
  double s_phy = 0.0;        // mixed score, in [0, 1]
};

// Feature row for the mixer fit: precomputed normalized subject score,
// mechanics score and the human-annotated target.
struct AnnotatedSample {
  std::string prompt_id;
  std::string video_id;
  double s_subj_norm = 0.0;
  double s_mech = 0.0;
  double human_score = 0.0;
};

struct HuberConfig {
  double delta = 0.2;  // quadratic/linear transition point, > 0
};

// Gradient-descent settings for the 1-D lambda fit.
struct FitConfig {
  double lambda_init = 0.0;
  double learning_rate = 1e-2;
  int steps = 2000;
};

struct FitResult {
  MixerParams params;
  std::vector<double> loss_trace;  // loss at step 0..steps (length steps + 1)
};

// Numerically stable logistic sigmoid and its derivative.
double sigmoid(double x);
double sigmoid_grad(double x);

// Mean cosine similarity between consecutive frames: order-sensitive,
// deterministic, invariant under uniform positive scaling of the frames.
double subject_consistency(const EmbeddingSequence& seq);

// Sample mean and population standard deviation (divide by n) of the corpus.
// Throws StatsError for fewer than two scores or zero variance.
SubjectStats fit_subject_stats(std::span<const double> corpus,
                               const std::string& corpus_id);

// sigmoid((raw - mu) / sigma); strictly increasing in raw.
double normalize_subject(double raw, const SubjectStats& stats);

// Convex combination sigmoid(lambda) * s_subj_norm + (1 - sigmoid(lambda)) * s_mech.
double mix_scores(double s_subj_norm, double s_mech, const MixerParams& params);

// Builds the full record for one video from its raw subject score and
// mechanics score.
PhyScoreRecord compose_record(const std::string& video_id, double s_subj_raw,
                              const SubjectStats& stats, double s_mech,
                              const MixerParams& params);

// Huber loss: z^2/2 on |z| <= delta, delta * (|z| - delta/2) beyond.
double huber_loss(double residual, const HuberConfig& cfg);

// Its derivative: z on the quadratic branch, delta * sign(z) on the linear one.
double huber_grad(double residual, const HuberConfig& cfg);

// Mean Huber loss of the mixed prediction against the human target, as a
// function of lambda, plus its analytic derivative. Exposed separately so the
// fit can be checked against finite differences.
double fit_loss(std::span<const AnnotatedSample> samples, double lambda,
                const HuberConfig& cfg);
double fit_loss_grad(std::span<const AnnotatedSample> samples, double lambda,
                     const HuberConfig& cfg);

// Plain gradient descent on fit_loss over lambda only. Deterministic.
// Throws DivergenceError if the loss or lambda turns non-finite.
FitResult fit_lambda(std::span<const AnnotatedSample> samples,
                     const HuberConfig& huber, const FitConfig& cfg);

}  // namespace physcorr::score_core
