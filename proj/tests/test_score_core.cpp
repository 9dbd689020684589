// SPDX-License-Identifier: Apache-2.0
//
// Unit tests for subject consistency, score mixing and the lambda fit.
// Derived expectations are checked against hand evaluation or central finite
// differences, never against the implementation itself.

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "physcorr/errors.hpp"
#include "physcorr/score_core.hpp"

namespace sc = physcorr::score_core;
using physcorr::DegenerateInputError;
using physcorr::DimensionError;
using physcorr::DivergenceError;
using physcorr::ParameterError;
using physcorr::RangeError;
using physcorr::StatsError;

namespace {

sc::EmbeddingSequence make_seq(std::string id,
                               std::vector<std::vector<float>> frames) {
  sc::EmbeddingSequence seq;
  seq.video_id = std::move(id);
  seq.frames = std::move(frames);
  return seq;
}

// Central finite difference with h = 1e-5, the independent gradient oracle.
template <typename F>
double central_diff(F f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace

TEST_CASE("sigmoid basics and stability") {
  CHECK(sc::sigmoid(0.0) == 0.5);
  CHECK(sc::sigmoid(1.0) == doctest::Approx(0.7310585786300049).epsilon(1e-14));

  // Symmetry sigmoid(-x) = 1 - sigmoid(x).
  for (double x : {0.1, 0.7, 2.5, 10.0, 35.0}) {
    CHECK(sc::sigmoid(-x) == doctest::Approx(1.0 - sc::sigmoid(x)).epsilon(1e-14));
  }

  // Extreme arguments stay finite and saturate instead of overflowing.
  CHECK(sc::sigmoid(800.0) == 1.0);
  CHECK(sc::sigmoid(-800.0) >= 0.0);
  CHECK(sc::sigmoid(-800.0) < 1e-300);
  CHECK(std::isfinite(sc::sigmoid(800.0)));
  CHECK(std::isfinite(sc::sigmoid(-800.0)));

  // Strictly increasing on a coarse grid.
  double prev = sc::sigmoid(-6.0);
  for (double x = -5.5; x <= 6.0; x += 0.5) {
    const double cur = sc::sigmoid(x);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("sigmoid_grad matches finite differences") {
  CHECK(sc::sigmoid_grad(0.0) == 0.25);
  for (double x : {-3.0, -1.0, -0.2, 0.0, 0.4, 1.3, 2.8}) {
    const double fd = central_diff([](double v) { return sc::sigmoid(v); }, x);
    CHECK(sc::sigmoid_grad(x) == doctest::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("subject consistency: hand-evaluated three-frame sequence") {
  // cos((1,0),(1,1)) = cos((1,1),(0,1)) = 1/sqrt(2); the mean is 1/sqrt(2).
  const auto seq = make_seq("v0", {{1.0f, 0.0f}, {1.0f, 1.0f}, {0.0f, 1.0f}});
  CHECK(sc::subject_consistency(seq) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("subject consistency: endpoints of the cosine range") {
  const auto aligned = make_seq("v1", {{3.0f, 4.0f}, {3.0f, 4.0f}});
  CHECK(sc::subject_consistency(aligned) == doctest::Approx(1.0).epsilon(1e-12));

  const auto opposed = make_seq("v2", {{1.0f, 0.0f}, {-1.0f, 0.0f}});
  CHECK(sc::subject_consistency(opposed) == doctest::Approx(-1.0).epsilon(1e-12));

  const auto orthogonal = make_seq("v3", {{1.0f, 0.0f}, {0.0f, 2.0f}});
  CHECK(sc::subject_consistency(orthogonal) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("subject consistency: invariant under positive frame scaling") {
  const auto base = make_seq("v4", {{1.0f, 2.0f, -1.0f},
                                    {0.5f, 1.0f, 0.25f},
                                    {-2.0f, 1.0f, 1.0f}});
  // Powers of two scale exactly in float, so the quotient is bit-stable.
  auto scaled = base;
  for (auto& frame : scaled.frames)
    for (auto& x : frame) x *= 4.0f;
  CHECK(sc::subject_consistency(scaled) ==
        doctest::Approx(sc::subject_consistency(base)).epsilon(1e-14));
}

TEST_CASE("subject consistency: order sensitive") {
  const std::vector<float> a{1.0f, 0.0f};
  const std::vector<float> b{1.0f, 1.0f};
  const std::vector<float> c{0.0f, 1.0f};
  const double abc = sc::subject_consistency(make_seq("v5", {a, b, c}));
  const double acb = sc::subject_consistency(make_seq("v6", {a, c, b}));
  // a..b..c walks two 45 degree hops; a..c..b has a 90 degree hop in it.
  CHECK(abc == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(acb == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(abc != acb);
}

TEST_CASE("subject consistency stays within [-1, 1] on random input") {
  std::mt19937 rng(11u);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  for (int trial = 0; trial < 50; ++trial) {
    sc::EmbeddingSequence seq;
    seq.video_id = "r" + std::to_string(trial);
    const std::size_t frames = 2 + static_cast<std::size_t>(trial % 7);
    for (std::size_t f = 0; f < frames; ++f) {
      std::vector<float> frame(5);
      for (auto& x : frame) x = gauss(rng);
      seq.frames.push_back(std::move(frame));
    }
    const double s = sc::subject_consistency(seq);
    CHECK(s >= -1.0 - 1e-12);
    CHECK(s <= 1.0 + 1e-12);
  }
}

TEST_CASE("validate_sequence rejects malformed shapes") {
  CHECK_THROWS_AS(sc::validate_sequence(make_seq("one", {{1.0f}})),
                  DimensionError);
  CHECK_THROWS_AS(sc::validate_sequence(make_seq("empty", {})), DimensionError);
  CHECK_THROWS_AS(
      sc::validate_sequence(make_seq("ragged", {{1.0f, 2.0f}, {1.0f}})),
      DimensionError);
  CHECK_THROWS_AS(sc::validate_sequence(make_seq("zerodim", {{}, {}})),
                  DimensionError);
  CHECK_THROWS_AS(
      sc::validate_sequence(make_seq("null", {{1.0f, 0.0f}, {0.0f, 0.0f}})),
      DegenerateInputError);
  CHECK_NOTHROW(sc::validate_sequence(make_seq("ok", {{1.0f}, {2.0f}})));
}

TEST_CASE("fit_subject_stats uses the population convention") {
  const std::vector<double> two{0.0, 1.0};
  const auto s2 = sc::fit_subject_stats(two, "c");
  CHECK(s2.mu == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s2.sigma == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s2.corpus_id == "c");

  // Population variance of {0.2, 0.4, 0.6, 0.8} is 0.05; the sample
  // convention would give 0.2/3 instead and fail this check.
  const std::vector<double> four{0.2, 0.4, 0.6, 0.8};
  const auto s4 = sc::fit_subject_stats(four, "c");
  CHECK(s4.mu == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s4.sigma == doctest::Approx(std::sqrt(0.05)).epsilon(1e-14));
}

TEST_CASE("fit_subject_stats failure modes") {
  const std::vector<double> one{0.4};
  CHECK_THROWS_AS(sc::fit_subject_stats(one, "c"), StatsError);
  const std::vector<double> constant{0.3, 0.3, 0.3};
  CHECK_THROWS_AS(sc::fit_subject_stats(constant, "c"), StatsError);
}

TEST_CASE("normalize_subject pins the midpoint and hand values") {
  const sc::SubjectStats stats{"c", 0.5, 0.25};
  CHECK(sc::normalize_subject(0.5, stats) == 0.5);
  // z = (0.75 - 0.5) / 0.25 = 1.
  CHECK(sc::normalize_subject(0.75, stats) ==
        doctest::Approx(0.7310585786300049).epsilon(1e-14));
  CHECK(sc::normalize_subject(0.25, stats) ==
        doctest::Approx(1.0 - 0.7310585786300049).epsilon(1e-14));
  // Strictly increasing in the raw score.
  CHECK(sc::normalize_subject(0.6, stats) > sc::normalize_subject(0.5, stats));
}

TEST_CASE("mix_scores hand values and limits") {
  // lambda = 0 weighs both halves equally.
  CHECK(sc::mix_scores(0.8, 0.5, sc::MixerParams{0.0}) ==
        doctest::Approx(0.65).epsilon(1e-15));
  // Saturated lambda collapses onto one side.
  CHECK(sc::mix_scores(0.8, 0.0, sc::MixerParams{40.0}) ==
        doctest::Approx(0.8).epsilon(1e-12));
  CHECK(sc::mix_scores(0.8, 1.0, sc::MixerParams{-40.0}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // Convexity keeps the mix inside the hull of its inputs.
  for (double lam : {-2.0, -0.5, 0.0, 0.5, 2.0}) {
    const double m = sc::mix_scores(0.3, 1.0, sc::MixerParams{lam});
    CHECK(m >= 0.3);
    CHECK(m <= 1.0);
  }
}

TEST_CASE("mix_scores input validation") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(sc::mix_scores(0.5, 0.5, sc::MixerParams{nan}), ParameterError);
  CHECK_THROWS_AS(sc::mix_scores(1.2, 0.5, sc::MixerParams{0.0}), RangeError);
  CHECK_THROWS_AS(sc::mix_scores(-0.1, 0.5, sc::MixerParams{0.0}), RangeError);
  CHECK_THROWS_AS(sc::mix_scores(0.5, 0.3, sc::MixerParams{0.0}), RangeError);
  CHECK_NOTHROW(sc::mix_scores(0.0, 1.0, sc::MixerParams{0.0}));
}

TEST_CASE("compose_record is consistent with its parts") {
  const sc::SubjectStats stats{"c", 0.6, 0.2};
  const sc::MixerParams params{0.3};
  const auto rec = sc::compose_record("vid", 0.72, stats, 0.5, params);
  CHECK(rec.video_id == "vid");
  CHECK(rec.s_subj_raw == 0.72);
  CHECK(rec.s_subj_norm == sc::normalize_subject(0.72, stats));
  CHECK(rec.s_mech == 0.5);
  CHECK(rec.s_phy == sc::mix_scores(rec.s_subj_norm, 0.5, params));
}

TEST_CASE("huber loss hand values at delta = 0.2") {
  const sc::HuberConfig cfg{0.2};
  CHECK(sc::huber_loss(0.0, cfg) == 0.0);
  CHECK(sc::huber_loss(0.1, cfg) == doctest::Approx(0.005).epsilon(1e-15));
  CHECK(sc::huber_loss(-0.1, cfg) == doctest::Approx(0.005).epsilon(1e-15));
  CHECK(sc::huber_loss(0.2, cfg) == doctest::Approx(0.02).epsilon(1e-15));
  // Linear branch: 0.2 * (0.5 - 0.1) = 0.08.
  CHECK(sc::huber_loss(0.5, cfg) == doctest::Approx(0.08).epsilon(1e-15));
  CHECK(sc::huber_loss(-0.5, cfg) == doctest::Approx(0.08).epsilon(1e-15));
}

TEST_CASE("huber gradient hand values and sign") {
  const sc::HuberConfig cfg{0.2};
  CHECK(sc::huber_grad(0.0, cfg) == 0.0);
  CHECK(sc::huber_grad(0.15, cfg) == 0.15);
  CHECK(sc::huber_grad(-0.15, cfg) == -0.15);
  CHECK(sc::huber_grad(0.7, cfg) == 0.2);
  CHECK(sc::huber_grad(-0.7, cfg) == -0.2);
}

TEST_CASE("huber loss is C1 at the transition") {
  const sc::HuberConfig cfg{0.2};
  const double eps = 1e-9;
  CHECK(std::fabs(sc::huber_loss(0.2 + eps, cfg) - sc::huber_loss(0.2 - eps, cfg)) <
        1e-8);
  CHECK(std::fabs(sc::huber_grad(0.2 + eps, cfg) - sc::huber_grad(0.2 - eps, cfg)) <
        1e-8);
  // Away from the kink the gradient matches finite differences.
  for (double r : {-0.6, -0.15, 0.05, 0.45}) {
    const double fd =
        central_diff([&](double v) { return sc::huber_loss(v, cfg); }, r);
    CHECK(sc::huber_grad(r, cfg) == doctest::Approx(fd).epsilon(1e-8));
  }
}

namespace {

// Deterministic random annotated set, resampled until no residual at the
// probe lambda sits near the Huber kink (where finite differences lie).
std::vector<sc::AnnotatedSample> draw_samples_away_from_kink(
    std::mt19937& rng, double lambda, const sc::HuberConfig& huber) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> mech_pick(0, 2);
  for (;;) {
    std::vector<sc::AnnotatedSample> samples;
    for (int i = 0; i < 8; ++i) {
      sc::AnnotatedSample s;
      s.prompt_id = "p" + std::to_string(i);
      s.video_id = "v" + std::to_string(i);
      s.s_subj_norm = unit(rng);
      s.s_mech = 0.5 * mech_pick(rng);
      s.human_score = unit(rng);
      samples.push_back(std::move(s));
    }
    const double w = sc::sigmoid(lambda);
    bool near_kink = false;
    for (const auto& s : samples) {
      const double resid = w * s.s_subj_norm + (1.0 - w) * s.s_mech - s.human_score;
      if (std::fabs(std::fabs(resid) - huber.delta) < 1e-3) near_kink = true;
    }
    if (!near_kink) return samples;
  }
}

}  // namespace

TEST_CASE("fit_loss gradient matches finite differences") {
  const sc::HuberConfig huber{0.2};
  std::mt19937 rng(29u);
  std::uniform_real_distribution<double> lam_dist(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double lambda = lam_dist(rng);
    const auto samples = draw_samples_away_from_kink(rng, lambda, huber);
    const double analytic = sc::fit_loss_grad(samples, lambda, huber);
    const double fd = central_diff(
        [&](double v) { return sc::fit_loss(samples, v, huber); }, lambda);
    CHECK(analytic == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("fit_lambda recovers a noiseless subject weight of 0.7") {
  std::mt19937 rng(3u);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> mech_pick(0, 2);
  std::vector<sc::AnnotatedSample> samples;
  for (int i = 0; i < 200; ++i) {
    sc::AnnotatedSample s;
    s.prompt_id = "p" + std::to_string(i);
    s.video_id = "v" + std::to_string(i);
    s.s_subj_norm = unit(rng);
    s.s_mech = 0.5 * mech_pick(rng);
    s.human_score = 0.7 * s.s_subj_norm + 0.3 * s.s_mech;
    samples.push_back(std::move(s));
  }

  sc::FitConfig fit;
  fit.lambda_init = 0.0;
  fit.learning_rate = 1.0;
  fit.steps = 2000;
  const auto result = sc::fit_lambda(samples, sc::HuberConfig{0.2}, fit);

  CHECK(result.loss_trace.size() == 2001);
  CHECK(sc::sigmoid(result.params.lambda) == doctest::Approx(0.7).epsilon(0.01));
  CHECK(result.loss_trace.back() < 1e-8);
  CHECK(result.loss_trace.back() <= result.loss_trace.front());

  // Bitwise deterministic rerun.
  const auto again = sc::fit_lambda(samples, sc::HuberConfig{0.2}, fit);
  REQUIRE(again.loss_trace.size() == result.loss_trace.size());
  for (std::size_t i = 0; i < again.loss_trace.size(); ++i)
    CHECK(again.loss_trace[i] == result.loss_trace[i]);
  CHECK(again.params.lambda == result.params.lambda);
}

TEST_CASE("fit_lambda zero steps returns the initial point") {
  std::vector<sc::AnnotatedSample> samples(1);
  samples[0].s_subj_norm = 0.9;
  samples[0].s_mech = 0.0;
  samples[0].human_score = 0.2;
  sc::FitConfig fit;
  fit.lambda_init = 0.4;
  fit.steps = 0;
  const auto result = sc::fit_lambda(samples, sc::HuberConfig{0.2}, fit);
  CHECK(result.params.lambda == 0.4);
  CHECK(result.loss_trace.size() == 1);
  CHECK(result.loss_trace[0] ==
        doctest::Approx(sc::fit_loss(samples, 0.4, sc::HuberConfig{0.2}))
            .epsilon(1e-15));
}

TEST_CASE("fit_lambda failure modes") {
  const std::vector<sc::AnnotatedSample> empty;
  CHECK_THROWS_AS(
      sc::fit_lambda(empty, sc::HuberConfig{0.2}, sc::FitConfig{}), StatsError);

  std::vector<sc::AnnotatedSample> samples(2);
  samples[0].s_subj_norm = 0.9;
  samples[0].s_mech = 0.0;
  samples[0].human_score = 0.2;
  samples[1] = samples[0];

  sc::FitConfig bad_steps;
  bad_steps.steps = -1;
  CHECK_THROWS_AS(sc::fit_lambda(samples, sc::HuberConfig{0.2}, bad_steps),
                  ParameterError);

  // A poisoned target surfaces as divergence at the very first evaluation.
  auto poisoned = samples;
  poisoned[1].human_score = std::numeric_limits<double>::quiet_NaN();
  try {
    sc::fit_lambda(poisoned, sc::HuberConfig{0.2}, sc::FitConfig{});
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == 0);
  }

  // An infinite learning rate blows lambda up on the first update.
  sc::FitConfig wild;
  wild.learning_rate = std::numeric_limits<double>::infinity();
  wild.steps = 5;
  try {
    sc::fit_lambda(samples, sc::HuberConfig{0.2}, wild);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == 1);
  }
}
