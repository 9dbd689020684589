// SPDX-License-Identifier: Apache-2.0

#include "physcorr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <thread>
#include <utility>
#include <vector>

#include "physcorr/errors.hpp"
#include "physcorr/logging.hpp"
#include "physcorr/mechanics.hpp"
#include "physcorr/phydpo.hpp"
#include "physcorr/score_core.hpp"

namespace physcorr::cli {

namespace fs = std::filesystem;
using io::format_double;

namespace {

std::string join_path(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

void require_path_configured(const std::string& path, const char* what) {
  if (path.empty()) {
    throw ConfigError(std::string("config: no path configured for ") + what);
  }
}

void require_file(const std::string& path, const char* what) {
  require_path_configured(path, what);
  if (!fs::exists(path)) {
    throw InputError(std::string(what) + " not found: " + path);
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  out << content;
  out.flush();
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

void write_snapshot(const PipelineConfig& cfg, const char* command) {
  std::string name = std::string("config_") + command + ".json";
  write_text_file(join_path(cfg.paths.out_dir, name.c_str()),
                  resolved_config_json(cfg));
}

// Deterministic worker pool: each index is processed exactly once and lands
// in a preallocated slot, so the output does not depend on scheduling.
void parallel_for(int jobs, std::size_t n,
                  const std::function<void(std::size_t)>& body) {
  int workers = jobs;
  if (static_cast<std::size_t>(workers) > n) {
    workers = static_cast<int>(n);
  }
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      body(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&]() {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) {
          return;
        }
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) {
            first_error = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (auto& t : threads) {
    t.join();
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }
}

score_core::SubjectStats resolve_stats(const PipelineConfig& cfg,
                                       std::span<const double> corpus) {
  if (cfg.stats.mode == "fixed") {
    score_core::SubjectStats stats;
    stats.corpus_id = cfg.corpus_id;
    stats.mu = cfg.stats.mu;
    stats.sigma = cfg.stats.sigma;
    return stats;
  }
  if (cfg.stats.mode == "file") {
    require_file(cfg.paths.stats, "subject stats file");
    return io::read_subject_stats(cfg.paths.stats).stats;
  }
  return score_core::fit_subject_stats(corpus, cfg.corpus_id);
}

void persist_stats(const PipelineConfig& cfg,
                   const score_core::SubjectStats& stats) {
  io::SubjectStatsFile file;
  file.header = io::make_header("physcorr/subject_stats", cfg.corpus_id);
  file.stats = stats;
  io::write_subject_stats(file, join_path(cfg.paths.out_dir, "subject_stats.txt"));
}

score_core::MixerParams resolve_mixer(const PipelineConfig& cfg) {
  score_core::MixerParams params;
  if (!cfg.paths.mixer_params.empty()) {
    require_file(cfg.paths.mixer_params, "mixer params file");
    params = io::read_mixer_params(cfg.paths.mixer_params).params;
  } else {
    params.lambda = cfg.mixer.lambda_init;
  }
  return params;
}

// One validated question pair per prompt, built from the question fixture.
std::map<std::string, mechanics::QuestionPair> build_question_pairs(
    const PipelineConfig& cfg, const std::set<std::string>& prompts) {
  io::QuestionFile qf = io::read_questions(cfg.paths.questions);
  std::map<std::string, std::optional<mechanics::PhysicsQuestion>> level1;
  std::map<std::string, std::optional<mechanics::PhysicsQuestion>> level2;
  for (const auto& q : qf.questions) {
    auto& slot = (q.level == 1 ? level1 : level2)[q.prompt_id];
    if (slot.has_value()) {
      throw InputError("prompt '" + q.prompt_id + "' has more than one level-" +
                       std::to_string(q.level) + " question");
    }
    slot = q;
  }
  std::map<std::string, mechanics::QuestionPair> pairs;
  mechanics::ConstraintConfig constraint{cfg.mechanics.tau};
  for (const auto& prompt_id : prompts) {
    auto it1 = level1.find(prompt_id);
    auto it2 = level2.find(prompt_id);
    if (it1 == level1.end() || it2 == level2.end()) {
      throw InputError("prompt '" + prompt_id +
                       "' needs one level-1 and one level-2 question");
    }
    mechanics::QuestionPair pair;
    pair.q1 = *it1->second;
    pair.q2 = *it2->second;
    pair.prompt_id = prompt_id;
    mechanics::PairValidation check =
        mechanics::validate_question_pair(pair, constraint);
    if (!check.accepted) {
      throw InputError("question pair for prompt '" + prompt_id +
                       "' rejected by constraint: " +
                       mechanics::to_string(*check.violation));
    }
    pairs.emplace(prompt_id, std::move(pair));
  }
  return pairs;
}

std::unique_ptr<mechanics::VerdictBackend> build_backend(
    const PipelineConfig& cfg) {
  if (cfg.mechanics.backend == "replay") {
    require_file(cfg.paths.verdicts, "verdict cache");
    io::VerdictCacheFile vf = io::read_verdict_cache(cfg.paths.verdicts);
    return std::make_unique<mechanics::ReplayCache>(
        mechanics::ReplayCache::from_records(std::move(vf.records)));
  }
  mechanics::LiveBackendConfig lc;
  lc.host = cfg.mechanics.host;
  lc.port = cfg.mechanics.port;
  lc.path = cfg.mechanics.path;
  lc.timeout_sec = cfg.mechanics.timeout_sec;
  lc.max_attempts = cfg.mechanics.max_attempts;
  lc.backoff_initial_ms = cfg.mechanics.backoff_initial_ms;
  return std::make_unique<mechanics::LiveBackend>(lc);
}

void print_histogram_sketch(std::ostream& out, std::span<const double> scores) {
  constexpr int kBuckets = 10;
  constexpr int kMaxBar = 50;
  std::vector<std::size_t> counts(kBuckets, 0);
  for (double s : scores) {
    int b = static_cast<int>(s * kBuckets);
    if (b >= kBuckets) {
      b = kBuckets - 1;  // s == 1.0 folds into the top bucket
    }
    counts[static_cast<std::size_t>(b)]++;
  }
  std::size_t peak = *std::max_element(counts.begin(), counts.end());
  out << "s_phy distribution:\n";
  for (int b = 0; b < kBuckets; ++b) {
    char label[32];
    std::snprintf(label, sizeof label, "[%.1f, %.1f%c", b / 10.0, (b + 1) / 10.0,
                  b + 1 == kBuckets ? ']' : ')');
    std::size_t width = counts[static_cast<std::size_t>(b)];
    if (peak > kMaxBar) {
      width = width * kMaxBar / peak;
    }
    out << "  " << label << ' ' << std::string(width, '#') << ' '
        << counts[static_cast<std::size_t>(b)] << '\n';
  }
}

std::map<std::pair<std::string, std::string>, double> load_quality_map(
    const std::string& path) {
  io::QualityFile qf = io::read_qualities(path);
  std::map<std::pair<std::string, std::string>, double> out;
  for (const auto& row : qf.rows) {
    out[{row.prompt_id, row.video_id}] = row.quality;
  }
  return out;
}

}  // namespace

std::string effective_score_table(const PipelineConfig& cfg) {
  return cfg.paths.score_table.empty()
             ? join_path(cfg.paths.out_dir, "score_table.jsonl")
             : cfg.paths.score_table;
}

std::string effective_pairs(const PipelineConfig& cfg) {
  return cfg.paths.pairs.empty() ? join_path(cfg.paths.out_dir, "pairs.jsonl")
                                 : cfg.paths.pairs;
}

std::string effective_pairs_weighted(const PipelineConfig& cfg) {
  return cfg.paths.pairs_weighted.empty()
             ? join_path(cfg.paths.out_dir, "pairs_weighted.jsonl")
             : cfg.paths.pairs_weighted;
}

std::vector<curation::VideoGroup> group_score_rows(
    const std::vector<io::ScoreRow>& rows) {
  std::vector<curation::VideoGroup> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& row : rows) {
    auto [it, inserted] = index.emplace(row.prompt_id, groups.size());
    if (inserted) {
      curation::VideoGroup g;
      g.prompt_id = row.prompt_id;
      groups.push_back(std::move(g));
    }
    score_core::PhyScoreRecord rec;
    rec.video_id = row.video_id;
    rec.s_subj_raw = row.s_subj_raw;
    rec.s_subj_norm = row.s_subj_norm;
    rec.s_mech = row.s_mech;
    rec.s_phy = row.s_phy;
    groups[it->second].videos.push_back(std::move(rec));
  }
  return groups;
}

// ---------------------------------------------------------------------------

void cmd_score(const PipelineConfig& cfg, std::ostream& out) {
  require_file(cfg.paths.manifest, "video manifest");
  require_file(cfg.paths.embeddings, "embeddings file");
  require_file(cfg.paths.questions, "questions file");
  write_snapshot(cfg, "score");

  io::ManifestFile manifest = io::read_manifest(cfg.paths.manifest);
  if (manifest.rows.empty()) {
    throw InputError("manifest holds no videos: " + cfg.paths.manifest);
  }
  io::EmbeddingFile emb = io::read_embeddings(cfg.paths.embeddings);
  std::map<std::string, const score_core::EmbeddingSequence*> by_video;
  for (const auto& seq : emb.sequences) {
    by_video.emplace(seq.video_id, &seq);
  }
  std::vector<const score_core::EmbeddingSequence*> seqs;
  seqs.reserve(manifest.rows.size());
  for (const auto& row : manifest.rows) {
    auto it = by_video.find(row.video_id);
    if (it == by_video.end()) {
      throw InputError("no embedding for video '" + row.video_id + "'");
    }
    seqs.push_back(it->second);
  }
  if (by_video.size() > manifest.rows.size()) {
    log::info("embeddings file holds sequences absent from the manifest");
  }

  std::vector<double> raw(manifest.rows.size(), 0.0);
  parallel_for(cfg.jobs, manifest.rows.size(), [&](std::size_t i) {
    raw[i] = score_core::subject_consistency(*seqs[i]);
  });

  score_core::SubjectStats stats = resolve_stats(cfg, raw);
  persist_stats(cfg, stats);
  score_core::MixerParams params = resolve_mixer(cfg);

  std::set<std::string> prompt_ids;
  for (const auto& row : manifest.rows) {
    prompt_ids.insert(row.prompt_id);
  }
  std::map<std::string, mechanics::QuestionPair> pairs =
      build_question_pairs(cfg, prompt_ids);
  std::unique_ptr<mechanics::VerdictBackend> backend = build_backend(cfg);

  io::ScoreTableFile table;
  table.header = io::make_header("physcorr/score_table", cfg.corpus_id);
  std::vector<double> phys;
  phys.reserve(manifest.rows.size());
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const io::ManifestRow& row = manifest.rows[i];
    mechanics::VideoRef ref{row.video_id, row.video_ref};
    mechanics::MechanicsScore mech;
    try {
      mech = mechanics::run_mechanics_pipeline(ref, pairs.at(row.prompt_id),
                                               *backend);
    } catch (const MissingVerdictError& e) {
      throw InputError("while scoring video '" + row.video_id + "': " + e.what());
    } catch (const BackendError& e) {
      throw InputError("while scoring video '" + row.video_id + "': " + e.what());
    }
    score_core::PhyScoreRecord rec = score_core::compose_record(
        row.video_id, raw[i], stats, mech.value, params);
    io::ScoreRow srow;
    srow.prompt_id = row.prompt_id;
    srow.video_id = rec.video_id;
    srow.s_subj_raw = rec.s_subj_raw;
    srow.s_subj_norm = rec.s_subj_norm;
    srow.s_mech = rec.s_mech;
    srow.s_phy = rec.s_phy;
    table.rows.push_back(std::move(srow));
    phys.push_back(rec.s_phy);
  }

  std::string table_path = effective_score_table(cfg);
  io::write_score_table(table, table_path);

  double mean = 0.0;
  for (double s : phys) {
    mean += s;
  }
  mean /= static_cast<double>(phys.size());
  out << "scored " << phys.size() << " videos across " << prompt_ids.size()
      << " prompts\n";
  out << "mean s_phy: " << format_double(mean) << '\n';
  print_histogram_sketch(out, phys);
  out << "score table: " << table_path << '\n';
  out << "SUMMARY score videos=" << phys.size() << " prompts="
      << prompt_ids.size() << " mean_s_phy=" << format_double(mean)
      << " table=" << table_path << '\n';
}

// ---------------------------------------------------------------------------

void cmd_fit_rm(const PipelineConfig& cfg, std::ostream& out) {
  require_file(cfg.paths.annotations, "annotations file");
  write_snapshot(cfg, "fit-rm");

  io::AnnotationFile ann = io::read_annotations(cfg.paths.annotations);
  if (ann.rows.empty()) {
    throw InputError("annotations file holds no samples: " +
                     cfg.paths.annotations);
  }
  std::vector<double> raws;
  raws.reserve(ann.rows.size());
  for (const auto& row : ann.rows) {
    raws.push_back(row.s_subj_raw);
  }
  score_core::SubjectStats stats = resolve_stats(cfg, raws);
  persist_stats(cfg, stats);

  std::vector<score_core::AnnotatedSample> samples;
  samples.reserve(ann.rows.size());
  for (const auto& row : ann.rows) {
    score_core::AnnotatedSample s;
    s.prompt_id = row.prompt_id;
    s.video_id = row.video_id;
    s.s_subj_norm = score_core::normalize_subject(row.s_subj_raw, stats);
    s.s_mech = row.s_mech;
    s.human_score = row.human_score;
    samples.push_back(std::move(s));
  }

  score_core::HuberConfig huber{cfg.mixer.huber_delta};
  score_core::FitConfig fit_cfg;
  fit_cfg.lambda_init = cfg.mixer.lambda_init;
  fit_cfg.learning_rate = cfg.mixer.learning_rate;
  fit_cfg.steps = cfg.mixer.steps;
  score_core::FitResult result = score_core::fit_lambda(samples, huber, fit_cfg);

  io::MixerParamsFile mp;
  mp.header = io::make_header("physcorr/mixer_params", cfg.corpus_id);
  mp.params = result.params;
  io::write_mixer_params(mp, join_path(cfg.paths.out_dir, "mixer_params.txt"));
  io::write_trace(io::make_trace(result.loss_trace, cfg.corpus_id),
                  join_path(cfg.paths.out_dir, "fit_trace.tsv"));

  double final_loss = result.loss_trace.back();
  double weight = score_core::sigmoid(result.params.lambda);
  out << "fitted lambda: " << format_double(result.params.lambda)
      << " (subject weight sigmoid(lambda): " << format_double(weight) << ")\n";
  out << "final Huber loss: " << format_double(final_loss) << '\n';
  out << "SUMMARY fit-rm samples=" << samples.size() << " lambda="
      << format_double(result.params.lambda) << " sigmoid_lambda="
      << format_double(weight) << " final_loss=" << format_double(final_loss)
      << '\n';
}

// ---------------------------------------------------------------------------

void cmd_select_pairs(const PipelineConfig& cfg, std::ostream& out) {
  std::string table_path = effective_score_table(cfg);
  if (!fs::exists(table_path)) {
    throw InputError("score table not found: " + table_path);
  }
  write_snapshot(cfg, "select-pairs");

  io::ScoreTableFile table = io::read_score_table(table_path);
  if (table.rows.empty()) {
    throw InputError("score table holds no rows: " + table_path);
  }
  std::vector<curation::VideoGroup> groups = group_score_rows(table.rows);
  if (cfg.selection.n_videos > 0) {
    for (const auto& g : groups) {
      if (g.videos.size() != static_cast<std::size_t>(cfg.selection.n_videos)) {
        throw InputError("prompt '" + g.prompt_id + "' has " +
                         std::to_string(g.videos.size()) +
                         " videos, expected " +
                         std::to_string(cfg.selection.n_videos));
      }
    }
  }
  curation::DatasetBuildResult result =
      curation::build_preference_dataset(groups, cfg.selection.epsilon);

  io::PreferenceFile pf;
  pf.header = io::make_header("physcorr/preference_pairs", cfg.corpus_id);
  pf.pairs = result.pairs;
  std::string pairs_path = effective_pairs(cfg);
  io::write_preference_pairs(pf, pairs_path);

  for (const auto& skip : result.skips) {
    out << "skipped prompt '" << skip.prompt_id << "': " << skip.reason << '\n';
  }
  out << "selected " << result.pairs.size() << " pairs from " << groups.size()
      << " groups (" << result.skips.size() << " skipped)\n";
  out << "pairs: " << pairs_path << '\n';
  out << "SUMMARY select-pairs pairs=" << result.pairs.size() << " groups="
      << groups.size() << " skipped=" << result.skips.size() << " out="
      << pairs_path << '\n';
}

// ---------------------------------------------------------------------------

void cmd_reweight(const PipelineConfig& cfg, std::ostream& out) {
  std::string pairs_path = effective_pairs(cfg);
  std::string table_path = effective_score_table(cfg);
  if (!fs::exists(pairs_path)) {
    throw InputError("preference pairs not found: " + pairs_path);
  }
  if (!fs::exists(table_path)) {
    throw InputError("score table not found: " + table_path);
  }
  write_snapshot(cfg, "reweight");

  io::PreferenceFile pf = io::read_preference_pairs(pairs_path);
  io::ScoreTableFile table = io::read_score_table(table_path);
  if (table.rows.empty()) {
    throw InputError("score table holds no rows: " + table_path);
  }
  std::vector<double> scores;
  scores.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    scores.push_back(row.s_phy);
  }
  phydpo::ScoreHistogram hist =
      phydpo::build_histogram(scores, cfg.reweight.bin_width);

  phydpo::ReweightConfig rc;
  rc.alpha = cfg.reweight.alpha;
  rc.beta_mode = cfg.reweight.beta_mode == "max"
                     ? phydpo::BetaMode::computed_max_density
                     : phydpo::BetaMode::fixed;
  rc.beta_fixed = cfg.reweight.beta_value;
  double beta = phydpo::resolve_beta(hist, rc);
  phydpo::reweight_dataset(pf.pairs, hist, rc);

  io::ReweightMetadata meta;
  meta.alpha = rc.alpha;
  meta.beta_mode = rc.beta_mode == phydpo::BetaMode::computed_max_density
                       ? "computed_max_density"
                       : "fixed";
  meta.beta_value = beta;
  meta.bin_width = cfg.reweight.bin_width;
  meta.total = hist.total;
  pf.reweight = meta;
  pf.header = io::make_header("physcorr/preference_pairs", cfg.corpus_id);
  std::string weighted_path = effective_pairs_weighted(cfg);
  io::write_preference_pairs(pf, weighted_path);
  io::write_histogram_report(io::make_histogram_report(hist, cfg.corpus_id),
                             join_path(cfg.paths.out_dir, "histogram.tsv"));

  out << "beta (" << meta.beta_mode << "): " << format_double(beta) << '\n';
  std::ostringstream summary;
  summary << "SUMMARY reweight pairs=" << pf.pairs.size() << " alpha="
          << format_double(rc.alpha) << " beta=" << format_double(beta)
          << " total=" << hist.total;
  if (!pf.pairs.empty()) {
    double wmin = pf.pairs.front().weight;
    double wmax = wmin;
    for (const auto& p : pf.pairs) {
      wmin = std::min(wmin, p.weight);
      wmax = std::max(wmax, p.weight);
    }
    out << "weights: min=" << format_double(wmin) << ", max="
        << format_double(wmax) << '\n';
    summary << " weight_min=" << format_double(wmin) << " weight_max="
            << format_double(wmax);
  }
  out << "weighted pairs: " << weighted_path << '\n';
  out << summary.str() << " out=" << weighted_path << '\n';
}

// ---------------------------------------------------------------------------

namespace {

// Starting policy for train-toy: explicit artifact, else uniform over the
// score-table groups behind the pairs, else uniform over pair endpoints.
phydpo::ToyPolicy initial_policy(const PipelineConfig& cfg,
                                 const std::vector<curation::PreferencePair>& pairs) {
  if (!cfg.paths.policy_init.empty()) {
    require_file(cfg.paths.policy_init, "initial policy");
    return io::read_policy(cfg.paths.policy_init).policy;
  }
  std::string table_path = effective_score_table(cfg);
  std::vector<std::string> prompt_ids;
  std::vector<std::vector<std::string>> items;
  if (fs::exists(table_path)) {
    io::ScoreTableFile table = io::read_score_table(table_path);
    std::map<std::string, std::vector<std::string>> by_prompt;
    for (const auto& row : table.rows) {
      by_prompt[row.prompt_id].push_back(row.video_id);
    }
    for (const auto& pair : pairs) {
      auto it = by_prompt.find(pair.prompt_id);
      if (it == by_prompt.end()) {
        throw InputError("score table has no rows for prompt '" +
                         pair.prompt_id + "'");
      }
      prompt_ids.push_back(pair.prompt_id);
      items.push_back(it->second);
    }
  } else {
    for (const auto& pair : pairs) {
      prompt_ids.push_back(pair.prompt_id);
      items.push_back({pair.win_video_id, pair.lose_video_id});
    }
  }
  return phydpo::ToyPolicy::uniform(std::move(prompt_ids), std::move(items));
}

double mean_expected_quality(
    const phydpo::ToyPolicy& policy,
    const std::map<std::pair<std::string, std::string>, double>& quality,
    bool use_reference) {
  double sum = 0.0;
  for (std::size_t p = 0; p < policy.prompt_count(); ++p) {
    std::vector<double> probs =
        use_reference ? policy.reference_probabilities(p) : policy.probabilities(p);
    const auto& ids = policy.items(p);
    double expected = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = quality.find({policy.prompt_ids()[p], ids[i]});
      if (it == quality.end()) {
        throw InputError("no declared quality for prompt '" +
                         policy.prompt_ids()[p] + "', video '" + ids[i] + "'");
      }
      expected += probs[i] * it->second;
    }
    sum += expected;
  }
  return sum / static_cast<double>(policy.prompt_count());
}

}  // namespace

void cmd_train_toy(const PipelineConfig& cfg, std::ostream& out) {
  std::string weighted_path = effective_pairs_weighted(cfg);
  if (!fs::exists(weighted_path)) {
    throw InputError("weighted preference pairs not found: " + weighted_path);
  }
  write_snapshot(cfg, "train-toy");

  io::PreferenceFile pf = io::read_preference_pairs(weighted_path);
  if (pf.pairs.empty()) {
    throw InputError("no preference pairs to train on: " + weighted_path);
  }

  phydpo::ToyPolicy init = initial_policy(cfg, pf.pairs);
  phydpo::DpoConfig dc;
  dc.gamma = cfg.dpo.gamma;
  dc.learning_rate = cfg.dpo.learning_rate;
  dc.steps = cfg.dpo.steps;
  dc.seed = cfg.dpo.seed;

  // Baseline: identical run with every weight forced to 1 (the alpha = 0
  // reduction), so the reweighting effect is isolated.
  std::vector<curation::PreferencePair> base_pairs = pf.pairs;
  for (auto& p : base_pairs) {
    p.weight = 1.0;
  }
  phydpo::TrainResult weighted = phydpo::train_toy(init, pf.pairs, dc);
  phydpo::TrainResult baseline = phydpo::train_toy(init, base_pairs, dc);

  io::PolicyFile trained;
  trained.header = io::make_header("physcorr/toy_policy", cfg.corpus_id);
  trained.policy = weighted.policy;
  io::write_policy(trained, join_path(cfg.paths.out_dir, "policy_trained.jsonl"));
  io::PolicyFile base_out;
  base_out.header = io::make_header("physcorr/toy_policy", cfg.corpus_id);
  base_out.policy = baseline.policy;
  io::write_policy(base_out, join_path(cfg.paths.out_dir, "policy_baseline.jsonl"));
  io::write_trace(io::make_trace(weighted.loss_trace, cfg.corpus_id),
                  join_path(cfg.paths.out_dir, "train_trace.tsv"));
  io::write_trace(io::make_trace(baseline.loss_trace, cfg.corpus_id),
                  join_path(cfg.paths.out_dir, "train_trace_baseline.tsv"));

  // Per-pair implicit-reward margins before and after each run.
  std::ostringstream report;
  report << "# train-toy report, corpus " << cfg.corpus_id << "\n";
  report << "pairs: " << pf.pairs.size() << "\n";
  report << "steps: " << dc.steps << ", gamma: " << format_double(dc.gamma)
         << ", learning rate: " << format_double(dc.learning_rate)
         << ", seed: " << dc.seed << "\n";
  report << "weighted final loss: "
         << format_double(weighted.loss_trace.back()) << "\n";
  report << "baseline final loss: "
         << format_double(baseline.loss_trace.back()) << "\n";

  std::optional<double> q_ref;
  std::optional<double> q_weighted;
  std::optional<double> q_base;
  if (!cfg.paths.qualities.empty()) {
    require_file(cfg.paths.qualities, "qualities file");
    auto quality = load_quality_map(cfg.paths.qualities);
    q_ref = mean_expected_quality(init, quality, /*use_reference=*/true);
    q_weighted = mean_expected_quality(weighted.policy, quality, false);
    q_base = mean_expected_quality(baseline.policy, quality, false);
    report << "expected latent quality: reference=" << format_double(*q_ref)
           << " weighted=" << format_double(*q_weighted) << " baseline="
           << format_double(*q_base) << "\n";
  }

  report << "pair margins (prompt, weight, initial, final weighted, gain "
            "weighted, final baseline, gain baseline):\n";
  for (const auto& pair : pf.pairs) {
    double m0 = phydpo::dpo_loss(init, pair, dc).margin;
    double mw = phydpo::dpo_loss(weighted.policy, pair, dc).margin;
    double mb = phydpo::dpo_loss(baseline.policy, pair, dc).margin;
    report << pair.prompt_id << '\t' << format_double(pair.weight) << '\t'
           << format_double(m0) << '\t' << format_double(mw) << '\t'
           << format_double(mw - m0) << '\t' << format_double(mb) << '\t'
           << format_double(mb - m0) << '\n';
  }
  write_text_file(join_path(cfg.paths.out_dir, "train_report.txt"),
                  report.str());

  out << "weighted run final loss: " << format_double(weighted.loss_trace.back())
      << '\n';
  out << "baseline run final loss: " << format_double(baseline.loss_trace.back())
      << '\n';
  if (q_ref.has_value()) {
    out << "expected latent quality: reference=" << format_double(*q_ref)
        << " weighted=" << format_double(*q_weighted) << " baseline="
        << format_double(*q_base) << '\n';
  }
  out << "report: " << join_path(cfg.paths.out_dir, "train_report.txt") << '\n';
  out << "SUMMARY train-toy pairs=" << pf.pairs.size() << " loss_weighted="
      << format_double(weighted.loss_trace.back()) << " loss_baseline="
      << format_double(baseline.loss_trace.back());
  if (q_ref.has_value()) {
    out << " quality_ref=" << format_double(*q_ref) << " quality_weighted="
        << format_double(*q_weighted) << " quality_baseline="
        << format_double(*q_base);
  }
  out << '\n';
}

// ---------------------------------------------------------------------------

void cmd_report(const PipelineConfig& cfg, std::ostream& out) {
  write_snapshot(cfg, "report");
  std::size_t artifacts = 0;
  std::optional<bool> ratio_ok;

  if (!cfg.paths.prompts.empty()) {
    require_file(cfg.paths.prompts, "prompts file");
    io::PromptFile prompts = io::read_prompts(cfg.paths.prompts);
    const std::string first_cat = "physics_challenging";
    const std::string second_cat = cfg.report.mode == "rm" ? "neutral" : "random";
    std::vector<curation::PromptRecord> first;
    std::vector<curation::PromptRecord> second;
    for (const auto& p : prompts.prompts) {
      if (p.category == first_cat) {
        first.push_back(p);
      } else if (p.category == second_cat) {
        second.push_back(p);
      } else {
        throw InputError("prompt '" + p.prompt_id + "' has category '" +
                         p.category + "', expected '" + first_cat + "' or '" +
                         second_cat + "' for report mode " + cfg.report.mode);
      }
    }
    curation::PromptComposition comp =
        cfg.report.mode == "rm" ? curation::compose_rm_prompts(first, second)
                                : curation::compose_dpo_prompts(first, second);
    out << "prompt composition (" << cfg.report.mode << "): "
        << comp.report.message << '\n';
    ratio_ok = comp.report.ok;
  }

  const std::string table_path = effective_score_table(cfg);
  if (fs::exists(table_path)) {
    io::ScoreTableFile table = io::read_score_table(table_path);
    double mean = 0.0;
    std::set<std::string> prompts;
    for (const auto& row : table.rows) {
      mean += row.s_phy;
      prompts.insert(row.prompt_id);
    }
    if (!table.rows.empty()) {
      mean /= static_cast<double>(table.rows.size());
    }
    out << "score table: " << table.rows.size() << " rows, " << prompts.size()
        << " prompts, mean s_phy " << format_double(mean) << '\n';
    ++artifacts;
  }
  const std::string stats_path = join_path(cfg.paths.out_dir, "subject_stats.txt");
  if (fs::exists(stats_path)) {
    io::SubjectStatsFile sf = io::read_subject_stats(stats_path);
    out << "subject stats: mu=" << format_double(sf.stats.mu) << " sigma="
        << format_double(sf.stats.sigma) << '\n';
    ++artifacts;
  }
  const std::string mixer_path = join_path(cfg.paths.out_dir, "mixer_params.txt");
  if (fs::exists(mixer_path)) {
    io::MixerParamsFile mf = io::read_mixer_params(mixer_path);
    out << "mixer params: lambda=" << format_double(mf.params.lambda)
        << " (subject weight " << format_double(score_core::sigmoid(mf.params.lambda))
        << ")\n";
    ++artifacts;
  }
  const std::string pairs_path = effective_pairs(cfg);
  if (fs::exists(pairs_path)) {
    io::PreferenceFile pfile = io::read_preference_pairs(pairs_path);
    out << "preference pairs: " << pfile.pairs.size() << '\n';
    ++artifacts;
  }
  const std::string weighted_path = effective_pairs_weighted(cfg);
  if (fs::exists(weighted_path)) {
    io::PreferenceFile pfile = io::read_preference_pairs(weighted_path);
    out << "weighted pairs: " << pfile.pairs.size();
    if (pfile.reweight.has_value()) {
      out << " (alpha=" << format_double(pfile.reweight->alpha) << ", beta="
          << format_double(pfile.reweight->beta_value) << " ["
          << pfile.reweight->beta_mode << "], bin_width="
          << format_double(pfile.reweight->bin_width) << ", total="
          << pfile.reweight->total << ")";
    }
    out << '\n';
    ++artifacts;
  }
  const std::string hist_path = join_path(cfg.paths.out_dir, "histogram.tsv");
  if (fs::exists(hist_path)) {
    io::HistogramReportFile hf = io::read_histogram_report(hist_path);
    out << "histogram: " << hf.rows.size() << " non-empty bins, total "
        << hf.total << '\n';
    ++artifacts;
  }
  for (const char* trace_name : {"fit_trace.tsv", "train_trace.tsv",
                                 "train_trace_baseline.tsv"}) {
    const std::string trace_path = join_path(cfg.paths.out_dir, trace_name);
    if (!fs::exists(trace_path)) {
      continue;
    }
    io::TraceFile tf = io::read_trace(trace_path);
    if (!tf.rows.empty()) {
      out << trace_name << ": " << tf.rows.size() << " entries, loss "
          << format_double(tf.rows.front().loss) << " -> "
          << format_double(tf.rows.back().loss) << '\n';
    }
    ++artifacts;
  }

  out << "SUMMARY report artifacts=" << artifacts;
  if (ratio_ok.has_value()) {
    out << " ratio_ok=" << (*ratio_ok ? 1 : 0);
  }
  out << '\n';
}

// ---------------------------------------------------------------------------

int run_command(const std::string& command, const std::string& config_path,
                const CliOverrides& overrides, std::ostream& out,
                std::ostream& err) {
  try {
    PipelineConfig cfg = load_config(config_path);
    apply_overrides(cfg, overrides);
    if (command == "score") {
      cmd_score(cfg, out);
    } else if (command == "fit-rm") {
      cmd_fit_rm(cfg, out);
    } else if (command == "select-pairs") {
      cmd_select_pairs(cfg, out);
    } else if (command == "reweight") {
      cmd_reweight(cfg, out);
    } else if (command == "train-toy") {
      cmd_train_toy(cfg, out);
    } else if (command == "report") {
      cmd_report(cfg, out);
    } else {
      throw ConfigError("unknown command: " + command);
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return 4;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const MissingVerdictError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const BackendError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace physcorr::cli
