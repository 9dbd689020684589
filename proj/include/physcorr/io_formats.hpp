// SPDX-License-Identifier: Apache-2.0
//
// Every on-disk artifact: versioned headers, canonical serialization and
// strict parsing. Text formats are line-delimited with the header as the
// first line; binary embeddings carry the header in their leading bytes.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "physcorr/curation.hpp"
#include "physcorr/mechanics.hpp"
#include "physcorr/phydpo.hpp"
#include "physcorr/score_core.hpp"

namespace physcorr::io {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kCreatedBy = "physcorr-0.1.0";

struct ArtifactHeader {
  std::string format_name;
  int format_version = kFormatVersion;
  std::string created_by = kCreatedBy;
  std::string corpus_id;
};

ArtifactHeader make_header(const std::string& format_name,
                           const std::string& corpus_id);

// Canonical float rendering: 9 significant digits, stable under repeated
// parse/write cycles.
std::string format_double(double value);

// ---------------------------------------------------------------------------
// Embeddings ("physcorr/embeddings"): binary records or a line-delimited
// text variant for fixtures. read_embeddings sniffs the magic bytes.

struct EmbeddingFile {
  ArtifactHeader header;
  std::vector<score_core::EmbeddingSequence> sequences;
};

EmbeddingFile read_embeddings(const std::string& path);
void write_embeddings_binary(const EmbeddingFile& file, const std::string& path);
void write_embeddings_text(const EmbeddingFile& file, const std::string& path);

// ---------------------------------------------------------------------------
// Subject statistics ("physcorr/subject_stats"): key-value text file.

struct SubjectStatsFile {
  ArtifactHeader header;
  score_core::SubjectStats stats;
  std::string std_convention = "population";
};

SubjectStatsFile read_subject_stats(const std::string& path);
void write_subject_stats(const SubjectStatsFile& file, const std::string& path);

// ---------------------------------------------------------------------------
// Mixer parameters ("physcorr/mixer_params"): key-value text file.

struct MixerParamsFile {
  ArtifactHeader header;
  score_core::MixerParams params;
};

MixerParamsFile read_mixer_params(const std::string& path);
void write_mixer_params(const MixerParamsFile& file, const std::string& path);

// ---------------------------------------------------------------------------
// Verdict cache ("physcorr/verdict_cache"): append-only JSONL records;
// duplicate (video_id, question_id) keys are a parse error.

struct VerdictCacheFile {
  ArtifactHeader header;
  std::vector<mechanics::CachedVerdict> records;
};

VerdictCacheFile read_verdict_cache(const std::string& path);
void write_verdict_cache(const VerdictCacheFile& file, const std::string& path);

// ---------------------------------------------------------------------------
// Question fixtures ("physcorr/questions").

struct QuestionFile {
  ArtifactHeader header;
  std::vector<mechanics::PhysicsQuestion> questions;
};

QuestionFile read_questions(const std::string& path);
void write_questions(const QuestionFile& file, const std::string& path);

// ---------------------------------------------------------------------------
// Prompt lists ("physcorr/prompts").

struct PromptFile {
  ArtifactHeader header;
  std::vector<curation::PromptRecord> prompts;
};

PromptFile read_prompts(const std::string& path);
void write_prompts(const PromptFile& file, const std::string& path);

// ---------------------------------------------------------------------------
// Video manifest ("physcorr/video_manifest"): associates each generated
// video with its prompt and an opaque reference for live backends.

struct ManifestRow {
  std::string prompt_id;
  std::string video_id;
  std::string video_ref;
};

struct ManifestFile {
  ArtifactHeader header;
  std::vector<ManifestRow> rows;
};

ManifestFile read_manifest(const std::string& path);
void write_manifest(const ManifestFile& file, const std::string& path);

// ---------------------------------------------------------------------------
// Human annotations ("physcorr/annotations") for the mixer fit.

struct AnnotationRow {
  std::string prompt_id;
  std::string video_id;
  double s_subj_raw = 0.0;
  double s_mech = 0.0;
  double human_score = 0.0;
};

struct AnnotationFile {
  ArtifactHeader header;
  std::vector<AnnotationRow> rows;
};

AnnotationFile read_annotations(const std::string& path);
void write_annotations(const AnnotationFile& file, const std::string& path);

// ---------------------------------------------------------------------------
// Latent quality table ("physcorr/qualities"): declared per-video quality
// for synthetic fixtures, used by the training comparison report.

struct QualityRow {
  std::string prompt_id;
  std::string video_id;
  double quality = 0.0;
};

struct QualityFile {
  ArtifactHeader header;
  std::vector<QualityRow> rows;
};

QualityFile read_qualities(const std::string& path);
void write_qualities(const QualityFile& file, const std::string& path);

// ---------------------------------------------------------------------------
// Score table ("physcorr/score_table").

struct ScoreRow {
  std::string prompt_id;
  std::string video_id;
  double s_subj_raw = 0.0;
  double s_subj_norm = 0.0;
  double s_mech = 0.0;
  double s_phy = 0.0;
};

struct ScoreTableFile {
  ArtifactHeader header;
  std::vector<ScoreRow> rows;
};

ScoreTableFile read_score_table(const std::string& path);
void write_score_table(const ScoreTableFile& file, const std::string& path);

// ---------------------------------------------------------------------------
// Preference dataset ("physcorr/preference_pairs"). After reweighting the
// header carries alpha, beta (value and mode), bin width and sample total.

struct ReweightMetadata {
  double alpha = 1.0;
  std::string beta_mode;  // "computed_max_density" | "fixed"
  double beta_value = 0.0;
  double bin_width = 0.01;
  std::uint64_t total = 0;
};

struct PreferenceFile {
  ArtifactHeader header;
  std::optional<ReweightMetadata> reweight;
  std::vector<curation::PreferencePair> pairs;
};

PreferenceFile read_preference_pairs(const std::string& path);
void write_preference_pairs(const PreferenceFile& file, const std::string& path);

// ---------------------------------------------------------------------------
// Histogram report ("physcorr/histogram_report"): tab-separated
// {bin_start, count, density} rows for non-empty bins. The header line is
// prefixed with "# " so the table feeds straight into gnuplot.

struct HistogramRow {
  double bin_start = 0.0;
  std::uint64_t count = 0;
  double density = 0.0;
};

struct HistogramReportFile {
  ArtifactHeader header;
  double bin_width = 0.01;
  std::uint64_t total = 0;
  std::vector<HistogramRow> rows;
};

HistogramReportFile make_histogram_report(const phydpo::ScoreHistogram& hist,
                                          const std::string& corpus_id);
HistogramReportFile read_histogram_report(const std::string& path);
void write_histogram_report(const HistogramReportFile& file,
                            const std::string& path);

// ---------------------------------------------------------------------------
// Training trace ("physcorr/training_trace"): tab-separated {step, loss}.

struct TraceRow {
  int step = 0;
  double loss = 0.0;
};

struct TraceFile {
  ArtifactHeader header;
  std::vector<TraceRow> rows;
};

TraceFile make_trace(const std::vector<double>& losses,
                     const std::string& corpus_id);
TraceFile read_trace(const std::string& path);
void write_trace(const TraceFile& file, const std::string& path);

// ---------------------------------------------------------------------------
// Toy policy ("physcorr/toy_policy"): one JSONL row per prompt with current
// and reference logits.

struct PolicyFile {
  ArtifactHeader header;
  phydpo::ToyPolicy policy;
};

PolicyFile read_policy(const std::string& path);
void write_policy(const PolicyFile& file, const std::string& path);

}  // namespace physcorr::io
