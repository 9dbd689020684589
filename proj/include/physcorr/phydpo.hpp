// SPDX-License-Identifier: Apache-2.0
//
// Empirical PhyScore density, rarity-based pair reweighting and the weighted
// DPO objective realized on a toy categorical policy.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "physcorr/curation.hpp"

namespace physcorr::phydpo {

// Fixed-width histogram over [0, 1]; bin k covers [k*w, (k+1)*w) and 1.0
// folds into the top bin.
struct ScoreHistogram {
  double bin_width = 0.01;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  std::size_t bin_count() const { return counts.size(); }
  std::size_t bin_index(double s) const;

  // count(bin(s)) / (total * bin_width); zero for empty bins.
  double density(double s) const;

  // Same, but empty bins are floored at one phantom count so downstream
  // weights stay finite.
  double density_floored(double s) const;

  double max_density() const;
};

// Bins the scores. Throws RangeError if any score leaves [0, 1].
ScoreHistogram build_histogram(std::span<const double> scores,
                               double bin_width = 0.01);

// density(s_win) * density(s_lose), with the empty-bin floor applied.
double joint_probability(const ScoreHistogram& hist, double s_win, double s_lose);

enum class BetaMode { computed_max_density, fixed };

struct ReweightConfig {
  double alpha = 1.0;  // prioritization exponent, >= 0
  BetaMode beta_mode = BetaMode::computed_max_density;
  double beta_fixed = 0.58;  // used only in fixed mode
};

// Max-bin density in computed mode, beta_fixed otherwise (must be > 0).
double resolve_beta(const ScoreHistogram& hist, const ReweightConfig& cfg);

// (beta / P)^alpha; exactly 1 when alpha == 0.
double pair_weight(const ScoreHistogram& hist, double s_win, double s_lose,
                   const ReweightConfig& cfg);

// Fills every pair's weight in place. Idempotent.
void reweight_dataset(std::span<curation::PreferencePair> pairs,
                      const ScoreHistogram& hist, const ReweightConfig& cfg);

// Per-prompt categorical distribution over candidate items with a frozen
// reference copy, standing in for the full generation policy.
class ToyPolicy {
public:
  ToyPolicy() = default;

  // Zero logits everywhere: the policy and its reference start uniform.
  static ToyPolicy uniform(std::vector<std::string> prompt_ids,
                           std::vector<std::vector<std::string>> items);

  static ToyPolicy from_logits(std::vector<std::string> prompt_ids,
                               std::vector<std::vector<std::string>> items,
                               std::vector<std::vector<double>> logits,
                               std::vector<std::vector<double>> reference_logits);

  std::size_t prompt_count() const { return prompt_ids_.size(); }
  const std::vector<std::string>& prompt_ids() const { return prompt_ids_; }
  const std::vector<std::string>& items(std::size_t prompt) const {
    return items_[prompt];
  }

  // Throws IndexError for unknown ids.
  std::size_t prompt_index(const std::string& prompt_id) const;
  std::size_t item_index(std::size_t prompt, const std::string& item_id) const;

  const std::vector<double>& logits(std::size_t prompt) const {
    return logits_[prompt];
  }
  const std::vector<double>& reference_logits(std::size_t prompt) const {
    return reference_logits_[prompt];
  }
  std::vector<double>& mutable_logits(std::size_t prompt) {
    return logits_[prompt];
  }

  std::vector<double> probabilities(std::size_t prompt) const;
  std::vector<double> reference_probabilities(std::size_t prompt) const;

  double log_prob(std::size_t prompt, std::size_t item) const;
  double reference_log_prob(std::size_t prompt, std::size_t item) const;

private:
  std::vector<std::string> prompt_ids_;
  std::vector<std::vector<std::string>> items_;
  std::vector<std::vector<double>> logits_;
  std::vector<std::vector<double>> reference_logits_;
};

struct DpoConfig {
  double gamma = 0.1;  // temperature inside the DPO sigmoid, > 0
  double learning_rate = 0.5;
  int steps = 200;
  std::uint64_t seed = 0;
};

struct DpoEval {
  double loss = 0.0;
  double margin = 0.0;  // implicit reward margin before the sigmoid
  std::size_t prompt = 0;
  std::vector<double> grad_row;  // d loss / d logits of the pair's prompt row
};

// -log sigmoid(gamma * [(log pi(win) - log ref(win)) - (log pi(lose) - log ref(lose))])
// with the analytic gradient w.r.t. the pair's prompt row.
DpoEval dpo_loss(const ToyPolicy& policy, const curation::PreferencePair& pair,
                 const DpoConfig& cfg);

// Mean of weight * dpo_loss over the dataset.
double phydpo_loss(const ToyPolicy& policy,
                   std::span<const curation::PreferencePair> pairs,
                   const DpoConfig& cfg);

struct TrainResult {
  ToyPolicy policy;
  std::vector<double> loss_trace;  // loss at step 0..steps
};

// Full-batch gradient descent on phydpo_loss. Deterministic; raises
// DivergenceError (with the step index) on a non-finite loss.
TrainResult train_toy(ToyPolicy policy,
                      std::span<const curation::PreferencePair> pairs,
                      const DpoConfig& cfg);

}  // namespace physcorr::phydpo
