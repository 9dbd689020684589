// SPDX-License-Identifier: Apache-2.0

#include "physcorr/phydpo.hpp"

#include <algorithm>
#include <cmath>

#include "physcorr/errors.hpp"

namespace physcorr::phydpo {

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

std::vector<double> softmax(const std::vector<double>& v) {
  const double lse = log_sum_exp(v);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i] - lse);
  return out;
}

void check_score_range(double s, const char* name) {
  if (!(s >= 0.0 && s <= 1.0))
    throw RangeError(std::string(name) + " " + std::to_string(s) +
                     " outside [0, 1]");
}

}  // namespace

std::size_t ScoreHistogram::bin_index(double s) const {
  check_score_range(s, "score");
  const auto idx = static_cast<std::size_t>(std::floor(s / bin_width));
  return std::min(idx, counts.size() - 1);  // folds s == 1.0 into the top bin
}

double ScoreHistogram::density(double s) const {
  return static_cast<double>(counts[bin_index(s)]) /
         (static_cast<double>(total) * bin_width);
}

double ScoreHistogram::density_floored(double s) const {
  const std::uint64_t c = std::max<std::uint64_t>(counts[bin_index(s)], 1);
  return static_cast<double>(c) / (static_cast<double>(total) * bin_width);
}

double ScoreHistogram::max_density() const {
  const std::uint64_t c = *std::max_element(counts.begin(), counts.end());
  return static_cast<double>(c) / (static_cast<double>(total) * bin_width);
}

ScoreHistogram build_histogram(std::span<const double> scores, double bin_width) {
  if (scores.empty()) throw InputError("cannot build a histogram from zero scores");
  if (!(bin_width > 0.0 && bin_width <= 1.0))
    throw ParameterError("histogram bin width must lie in (0, 1]");
  ScoreHistogram hist;
  hist.bin_width = bin_width;
  const auto bins =
      static_cast<std::size_t>(std::ceil(1.0 / bin_width - 1e-12));
  hist.counts.assign(std::max<std::size_t>(bins, 1), 0);
  for (double s : scores) {
    check_score_range(s, "score");
    hist.counts[hist.bin_index(s)] += 1;
  }
  hist.total = scores.size();
  return hist;
}

double joint_probability(const ScoreHistogram& hist, double s_win,
                         double s_lose) {
  return hist.density_floored(s_win) * hist.density_floored(s_lose);
}

double resolve_beta(const ScoreHistogram& hist, const ReweightConfig& cfg) {
  if (cfg.beta_mode == BetaMode::computed_max_density) return hist.max_density();
  if (!(cfg.beta_fixed > 0.0))
    throw ConfigError("fixed beta must be > 0, got " +
                      std::to_string(cfg.beta_fixed));
  return cfg.beta_fixed;
}

double pair_weight(const ScoreHistogram& hist, double s_win, double s_lose,
                   const ReweightConfig& cfg) {
  if (cfg.alpha < 0.0)
    throw ConfigError("reweight alpha must be >= 0, got " +
                      std::to_string(cfg.alpha));
  if (cfg.alpha == 0.0) return 1.0;
  const double beta = resolve_beta(hist, cfg);
  const double joint = joint_probability(hist, s_win, s_lose);
  return std::pow(beta / joint, cfg.alpha);
}

void reweight_dataset(std::span<curation::PreferencePair> pairs,
                      const ScoreHistogram& hist, const ReweightConfig& cfg) {
  for (auto& pair : pairs)
    pair.weight = pair_weight(hist, pair.s_win, pair.s_lose, cfg);
}

ToyPolicy ToyPolicy::uniform(std::vector<std::string> prompt_ids,
                             std::vector<std::vector<std::string>> items) {
  std::vector<std::vector<double>> logits(items.size());
  for (std::size_t i = 0; i < items.size(); ++i)
    logits[i].assign(items[i].size(), 0.0);
  auto reference = logits;
  return from_logits(std::move(prompt_ids), std::move(items), std::move(logits),
                     std::move(reference));
}

ToyPolicy ToyPolicy::from_logits(std::vector<std::string> prompt_ids,
                                 std::vector<std::vector<std::string>> items,
                                 std::vector<std::vector<double>> logits,
                                 std::vector<std::vector<double>> reference_logits) {
  if (prompt_ids.size() != items.size() || prompt_ids.size() != logits.size() ||
      prompt_ids.size() != reference_logits.size())
    throw ContractError("toy policy: prompt/items/logits sizes disagree");
  for (std::size_t i = 0; i < prompt_ids.size(); ++i) {
    if (items[i].size() < 2)
      throw ContractError("toy policy: prompt '" + prompt_ids[i] +
                          "' needs at least 2 items");
    if (logits[i].size() != items[i].size() ||
        reference_logits[i].size() != items[i].size())
      throw ContractError("toy policy: logit row size mismatch for prompt '" +
                          prompt_ids[i] + "'");
  }
  ToyPolicy p;
  p.prompt_ids_ = std::move(prompt_ids);
  p.items_ = std::move(items);
  p.logits_ = std::move(logits);
  p.reference_logits_ = std::move(reference_logits);
  return p;
}

std::size_t ToyPolicy::prompt_index(const std::string& prompt_id) const {
  for (std::size_t i = 0; i < prompt_ids_.size(); ++i)
    if (prompt_ids_[i] == prompt_id) return i;
  throw IndexError("unknown prompt '" + prompt_id + "' in toy policy");
}

std::size_t ToyPolicy::item_index(std::size_t prompt,
                                  const std::string& item_id) const {
  const auto& row = items_[prompt];
  for (std::size_t i = 0; i < row.size(); ++i)
    if (row[i] == item_id) return i;
  throw IndexError("unknown item '" + item_id + "' for prompt '" +
                   prompt_ids_[prompt] + "'");
}

std::vector<double> ToyPolicy::probabilities(std::size_t prompt) const {
  return softmax(logits_[prompt]);
}

std::vector<double> ToyPolicy::reference_probabilities(std::size_t prompt) const {
  return softmax(reference_logits_[prompt]);
}

double ToyPolicy::log_prob(std::size_t prompt, std::size_t item) const {
  return logits_[prompt][item] - log_sum_exp(logits_[prompt]);
}

double ToyPolicy::reference_log_prob(std::size_t prompt, std::size_t item) const {
  return reference_logits_[prompt][item] - log_sum_exp(reference_logits_[prompt]);
}

DpoEval dpo_loss(const ToyPolicy& policy, const curation::PreferencePair& pair,
                 const DpoConfig& cfg) {
  if (!(cfg.gamma > 0.0))
    throw ConfigError("dpo gamma must be > 0, got " + std::to_string(cfg.gamma));
  const std::size_t prompt = policy.prompt_index(pair.prompt_id);
  const std::size_t win = policy.item_index(prompt, pair.win_video_id);
  const std::size_t lose = policy.item_index(prompt, pair.lose_video_id);

  const double margin =
      (policy.log_prob(prompt, win) - policy.reference_log_prob(prompt, win)) -
      (policy.log_prob(prompt, lose) - policy.reference_log_prob(prompt, lose));

  DpoEval eval;
  eval.prompt = prompt;
  eval.margin = margin;
  eval.loss = softplus(-cfg.gamma * margin);

  // d loss / d margin = -gamma * sigmoid(-gamma * margin); the log-partition
  // terms cancel between win and lose, so only those two logits move.
  const double dmargin = -cfg.gamma * logistic(-cfg.gamma * margin);
  eval.grad_row.assign(policy.logits(prompt).size(), 0.0);
  eval.grad_row[win] += dmargin;
  eval.grad_row[lose] -= dmargin;
  return eval;
}

double phydpo_loss(const ToyPolicy& policy,
                   std::span<const curation::PreferencePair> pairs,
                   const DpoConfig& cfg) {
  if (pairs.empty()) throw InputError("phydpo loss needs at least one pair");
  double acc = 0.0;
  for (const auto& pair : pairs)
    acc += pair.weight * dpo_loss(policy, pair, cfg).loss;
  return acc / static_cast<double>(pairs.size());
}

TrainResult train_toy(ToyPolicy policy,
                      std::span<const curation::PreferencePair> pairs,
                      const DpoConfig& cfg) {
  if (pairs.empty()) throw InputError("train_toy needs at least one pair");
  if (cfg.steps < 0) throw ConfigError("train_toy step count must be non-negative");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate))
    throw ConfigError("train_toy learning rate must be finite and >= 0");

  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  TrainResult out;
  out.loss_trace.reserve(static_cast<std::size_t>(cfg.steps) + 1);

  std::vector<std::vector<double>> grads(policy.prompt_count());

  for (int step = 0; step <= cfg.steps; ++step) {
    for (std::size_t p = 0; p < policy.prompt_count(); ++p)
      grads[p].assign(policy.logits(p).size(), 0.0);

    double loss = 0.0;
    for (const auto& pair : pairs) {
      DpoEval eval = dpo_loss(policy, pair, cfg);
      loss += pair.weight * eval.loss;
      auto& row = grads[eval.prompt];
      for (std::size_t j = 0; j < row.size(); ++j)
        row[j] += pair.weight * inv_n * eval.grad_row[j];
    }
    loss *= inv_n;
    if (!std::isfinite(loss))
      throw DivergenceError("non-finite training loss",
                            static_cast<std::size_t>(step));
    out.loss_trace.push_back(loss);
    if (step == cfg.steps) break;

    for (std::size_t p = 0; p < policy.prompt_count(); ++p) {
      auto& row = policy.mutable_logits(p);
      for (std::size_t j = 0; j < row.size(); ++j)
        row[j] -= cfg.learning_rate * grads[p][j];
    }
  }

  out.policy = std::move(policy);
  return out;
}

}  // namespace physcorr::phydpo
