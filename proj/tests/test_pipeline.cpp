// SPDX-License-Identifier: Apache-2.0
//
// End-to-end coverage of the command layer: a small deterministic corpus is
// pushed through score, select-pairs, reweight, train-toy and report, and
// the exit-code contract is pinned down for each failure class.

#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "physcorr/config.hpp"
#include "physcorr/errors.hpp"
#include "physcorr/io_formats.hpp"
#include "physcorr/pipeline.hpp"
#include "physcorr/score_core.hpp"

namespace fs = std::filesystem;
namespace cli = physcorr::cli;
namespace io = physcorr::io;
namespace sc = physcorr::score_core;
namespace dpo = physcorr::phydpo;

namespace {

struct TempDir {
  fs::path dir;

  TempDir() {
    static std::atomic<unsigned> counter{0};
    dir = fs::temp_directory_path() /
          ("physcorr-pipe-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter++));
    fs::create_directories(dir);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out << text;
}

std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
  std::map<std::string, std::string> all;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      all[fs::relative(entry.path(), dir).string()] =
          slurp(entry.path().string());
    }
  }
  return all;
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

RunResult run(const std::string& command, const std::string& config_path,
              const cli::CliOverrides& overrides = {}) {
  std::ostringstream out;
  std::ostringstream err;
  RunResult r;
  r.code = cli::run_command(command, config_path, overrides, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// One video of the synthetic corpus: a target raw consistency plus the two
// mechanics verdicts that will sit in the replay cache.
struct VideoSpec {
  double raw;
  bool q1;
  bool q2;
};

using PromptSpec = std::pair<std::string, std::vector<VideoSpec>>;

// p0 spans the score range, p1 is fully degenerate (every video identical)
// and p2 opens with a tie for the top score.
const std::vector<PromptSpec> kCorpus = {
    {"p0", {{1.0, true, true}, {0.5, true, false}, {0.0, false, false},
            {-0.5, false, false}}},
    {"p1", {{0.0, false, false}, {0.0, false, false}, {0.0, false, false},
            {0.0, false, false}}},
    {"p2", {{1.0, true, true}, {1.0, true, true}, {0.5, true, false},
            {-0.5, false, false}}},
};

// Two frames whose cosine equals `raw` exactly up to float rounding.
sc::EmbeddingSequence make_sequence(const std::string& video_id, double raw) {
  sc::EmbeddingSequence seq;
  seq.video_id = video_id;
  const float c = static_cast<float>(raw);
  const float s = static_cast<float>(std::sqrt(1.0 - raw * raw));
  seq.frames = {{1.0f, 0.0f}, {c, s}};
  return seq;
}

double mech_value(const VideoSpec& v) {
  if (!v.q1) return 0.0;
  return v.q2 ? 1.0 : 0.5;
}

// Fixed stats mu=0, sigma=0.5 and lambda=0 give this closed form.
double expected_phy(double raw, double mech) {
  return 0.5 * sc::sigmoid(raw / 0.5) + 0.5 * mech;
}

// Writes the full corpus fixture plus a config whose paths point at it.
std::string write_fixture(const TempDir& tmp,
                          const std::function<void(nlohmann::json&)>& patch = {}) {
  io::ManifestFile manifest;
  manifest.header = io::make_header("physcorr/video_manifest", "t-corpus");
  io::EmbeddingFile emb;
  emb.header = io::make_header("physcorr/embeddings", "t-corpus");
  io::QuestionFile questions;
  questions.header = io::make_header("physcorr/questions", "t-corpus");
  io::VerdictCacheFile verdicts;
  verdicts.header = io::make_header("physcorr/verdict_cache", "t-corpus");
  io::QualityFile qualities;
  qualities.header = io::make_header("physcorr/qualities", "t-corpus");
  io::AnnotationFile annotations;
  annotations.header = io::make_header("physcorr/annotations", "t-corpus");

  const std::map<std::string, std::vector<double>> quality_rows = {
      {"p0", {0.9, 0.6, 0.3, 0.1}},
      {"p1", {0.25, 0.25, 0.25, 0.25}},
      {"p2", {0.9, 0.85, 0.5, 0.1}},
  };

  for (const auto& [prompt_id, videos] : kCorpus) {
    questions.questions.push_back({"q1-" + prompt_id, prompt_id,
                                   "[L1] basic motion in " + prompt_id, 1,
                                   "mechanics", 0.9, 1});
    questions.questions.push_back({"q2-" + prompt_id, prompt_id,
                                   "[L2] energy budget in " + prompt_id, 2,
                                   "mechanics", 0.9, 2});
    for (std::size_t v = 0; v < videos.size(); ++v) {
      const std::string vid = prompt_id + "-v" + std::to_string(v);
      manifest.rows.push_back({prompt_id, vid, "ref://" + vid});
      emb.sequences.push_back(make_sequence(vid, videos[v].raw));
      verdicts.records.push_back(
          {vid, "q1-" + prompt_id, "[L1]", "graded", videos[v].q1});
      verdicts.records.push_back(
          {vid, "q2-" + prompt_id, "[L2]", "graded", videos[v].q2});
      qualities.rows.push_back({prompt_id, vid, quality_rows.at(prompt_id)[v]});
      // Human scores that favor subject consistency 7:3, so fitting pulls
      // lambda upward from its neutral start.
      const double norm = sc::sigmoid(videos[v].raw / 0.5);
      annotations.rows.push_back({prompt_id, vid, videos[v].raw,
                                  mech_value(videos[v]),
                                  0.7 * norm + 0.3 * mech_value(videos[v])});
    }
  }

  io::PromptFile prompts;
  prompts.header = io::make_header("physcorr/prompts", "t-corpus");
  for (int i = 0; i < 12; ++i) {
    prompts.prompts.push_back({"r" + std::to_string(i),
                               "fixture prompt " + std::to_string(i),
                               i < 2 ? "physics_challenging" : "neutral",
                               "fixture"});
  }

  io::write_manifest(manifest, tmp.path("manifest.jsonl"));
  io::write_embeddings_binary(emb, tmp.path("embeddings.bin"));
  io::write_questions(questions, tmp.path("questions.jsonl"));
  io::write_verdict_cache(verdicts, tmp.path("verdicts.jsonl"));
  io::write_qualities(qualities, tmp.path("qualities.jsonl"));
  io::write_annotations(annotations, tmp.path("annotations.jsonl"));
  io::write_prompts(prompts, tmp.path("prompts.jsonl"));

  nlohmann::json j;
  j["corpus_id"] = "t-corpus";
  j["jobs"] = 1;
  j["paths"]["manifest"] = tmp.path("manifest.jsonl");
  j["paths"]["embeddings"] = tmp.path("embeddings.bin");
  j["paths"]["questions"] = tmp.path("questions.jsonl");
  j["paths"]["verdicts"] = tmp.path("verdicts.jsonl");
  j["paths"]["qualities"] = tmp.path("qualities.jsonl");
  j["paths"]["annotations"] = tmp.path("annotations.jsonl");
  j["paths"]["prompts"] = tmp.path("prompts.jsonl");
  j["paths"]["out_dir"] = tmp.path("out");
  j["stats"]["mode"] = "fixed";
  j["stats"]["mu"] = 0.0;
  j["stats"]["sigma"] = 0.5;
  j["mechanics"]["backend"] = "replay";
  j["selection"]["n_videos"] = 4;
  j["reweight"]["alpha"] = 1.0;
  j["reweight"]["beta_mode"] = "max";
  j["reweight"]["bin_width"] = 0.25;
  j["dpo"]["gamma"] = 0.1;
  j["dpo"]["learning_rate"] = 0.5;
  j["dpo"]["steps"] = 20;
  j["report"]["mode"] = "rm";
  if (patch) {
    patch(j);
  }
  const std::string config_path = tmp.path("config.json");
  spit(config_path, j.dump(2) + "\n");
  return config_path;
}

}  // namespace

TEST_CASE("effective paths fall back to the output directory") {
  cli::PipelineConfig cfg;
  cfg.paths.out_dir = "workdir";
  CHECK(cli::effective_score_table(cfg) ==
        (fs::path("workdir") / "score_table.jsonl").string());
  CHECK(cli::effective_pairs(cfg) ==
        (fs::path("workdir") / "pairs.jsonl").string());
  CHECK(cli::effective_pairs_weighted(cfg) ==
        (fs::path("workdir") / "pairs_weighted.jsonl").string());

  cfg.paths.score_table = "elsewhere/table.jsonl";
  cfg.paths.pairs = "elsewhere/p.jsonl";
  cfg.paths.pairs_weighted = "elsewhere/w.jsonl";
  CHECK(cli::effective_score_table(cfg) == "elsewhere/table.jsonl");
  CHECK(cli::effective_pairs(cfg) == "elsewhere/p.jsonl");
  CHECK(cli::effective_pairs_weighted(cfg) == "elsewhere/w.jsonl");
}

TEST_CASE("group_score_rows keeps first-appearance order") {
  std::vector<io::ScoreRow> rows;
  rows.push_back({"pb", "v0", 0.0, 0.5, 0.0, 0.25});
  rows.push_back({"pa", "v1", 0.0, 0.5, 0.0, 0.25});
  rows.push_back({"pb", "v2", 0.0, 0.5, 1.0, 0.75});

  const auto groups = cli::group_score_rows(rows);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].prompt_id == "pb");
  REQUIRE(groups[0].videos.size() == 2);
  CHECK(groups[0].videos[0].video_id == "v0");
  CHECK(groups[0].videos[1].video_id == "v2");
  CHECK(groups[0].videos[1].s_phy == 0.75);
  CHECK(groups[1].prompt_id == "pa");
  CHECK(groups[1].videos.size() == 1);
}

TEST_CASE("score command writes the expected table") {
  TempDir tmp;
  const std::string cfg = write_fixture(tmp);

  const RunResult r = run("score", cfg);
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("scored 12 videos across 3 prompts") != std::string::npos);
  CHECK(r.out.find("SUMMARY score videos=12 prompts=3") != std::string::npos);

  const auto table = io::read_score_table(tmp.path("out/score_table.jsonl"));
  REQUIRE(table.rows.size() == 12);
  std::size_t i = 0;
  for (const auto& [prompt_id, videos] : kCorpus) {
    for (std::size_t v = 0; v < videos.size(); ++v, ++i) {
      const io::ScoreRow& row = table.rows[i];
      CHECK(row.prompt_id == prompt_id);
      CHECK(row.video_id == prompt_id + "-v" + std::to_string(v));
      CHECK(row.s_mech == mech_value(videos[v]));
      CHECK(row.s_subj_raw ==
            doctest::Approx(videos[v].raw).epsilon(1e-6));
      CHECK(row.s_phy ==
            doctest::Approx(expected_phy(videos[v].raw, mech_value(videos[v])))
                .epsilon(1e-6));
    }
  }
  // The degenerate prompt hits the closed form exactly: raw 0 is float-exact.
  CHECK(table.rows[4].s_phy == 0.25);

  // Fixed-mode stats are persisted as configured.
  const auto stats = io::read_subject_stats(tmp.path("out/subject_stats.txt"));
  CHECK(stats.stats.mu == 0.0);
  CHECK(stats.stats.sigma == 0.5);

  // The resolved config snapshot lands next to the artifacts.
  const std::string snapshot = slurp(tmp.path("out/config_score.json"));
  CHECK(snapshot.find("\"corpus_id\": \"t-corpus\"") != std::string::npos);
  CHECK(snapshot.find("\"mode\": \"fixed\"") != std::string::npos);

  // A parallel run must produce byte-identical output.
  const std::string serial = slurp(tmp.path("out/score_table.jsonl"));
  cli::CliOverrides jobs3;
  jobs3.jobs = 3;
  REQUIRE(run("score", cfg, jobs3).code == 0);
  CHECK(slurp(tmp.path("out/score_table.jsonl")) == serial);
}

TEST_CASE("full chain from score to report, rerun is byte-identical") {
  TempDir tmp;
  const std::string cfg = write_fixture(tmp);

  REQUIRE(run("score", cfg).code == 0);

  const RunResult fit = run("fit-rm", cfg);
  INFO(fit.err);
  REQUIRE(fit.code == 0);
  CHECK(fit.out.find("SUMMARY fit-rm samples=12") != std::string::npos);
  const auto mixer = io::read_mixer_params(tmp.path("out/mixer_params.txt"));
  CHECK(mixer.params.lambda > 0.0);  // targets favor the subject term
  const auto fit_trace = io::read_trace(tmp.path("out/fit_trace.tsv"));
  REQUIRE(fit_trace.rows.size() == 2001);  // default steps + 1
  CHECK(fit_trace.rows.back().loss < fit_trace.rows.front().loss);

  const RunResult sel = run("select-pairs", cfg);
  INFO(sel.err);
  REQUIRE(sel.code == 0);
  CHECK(sel.out.find("skipped prompt 'p1'") != std::string::npos);
  CHECK(sel.out.find("SUMMARY select-pairs pairs=2 groups=3 skipped=1") !=
        std::string::npos);

  const auto pairs = io::read_preference_pairs(tmp.path("out/pairs.jsonl"));
  REQUIRE(pairs.pairs.size() == 2);
  CHECK_FALSE(pairs.reweight.has_value());
  CHECK(pairs.pairs[0].prompt_id == "p0");
  CHECK(pairs.pairs[0].win_video_id == "p0-v0");
  CHECK(pairs.pairs[0].lose_video_id == "p0-v3");
  CHECK(pairs.pairs[0].weight == 1.0);
  const double hi = expected_phy(1.0, 1.0);
  const double lo = expected_phy(-0.5, 0.0);
  CHECK(pairs.pairs[0].delta == doctest::Approx(hi - lo).epsilon(1e-6));
  // The p2 tie resolves to the first of the two equal-scoring videos.
  CHECK(pairs.pairs[1].prompt_id == "p2");
  CHECK(pairs.pairs[1].win_video_id == "p2-v0");
  CHECK(pairs.pairs[1].lose_video_id == "p2-v3");

  const RunResult rw = run("reweight", cfg);
  INFO(rw.err);
  REQUIRE(rw.code == 0);
  const auto weighted =
      io::read_preference_pairs(tmp.path("out/pairs_weighted.jsonl"));
  REQUIRE(weighted.reweight.has_value());
  CHECK(weighted.reweight->beta_mode == "computed_max_density");
  CHECK(weighted.reweight->bin_width == 0.25);
  CHECK(weighted.reweight->total == 12);
  // Bin occupancy is [2, 5, 2, 3] out of 12, so the peak density is 5/3 and
  // each winning pair joins a density-1 bin with a density-(2/3) bin. The
  // header value passed through the 9-digit canonical float rendering.
  CHECK(weighted.reweight->beta_value == doctest::Approx(5.0 / 3.0).epsilon(1e-8));
  REQUIRE(weighted.pairs.size() == 2);
  CHECK(weighted.pairs[0].weight == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(weighted.pairs[1].weight == doctest::Approx(2.5).epsilon(1e-12));

  const auto hist = io::read_histogram_report(tmp.path("out/histogram.tsv"));
  REQUIRE(hist.rows.size() == 4);
  CHECK(hist.rows[0].count == 2);
  CHECK(hist.rows[1].count == 5);
  CHECK(hist.rows[2].count == 2);
  CHECK(hist.rows[3].count == 3);
  CHECK(hist.rows[1].bin_start == 0.25);

  const RunResult tr = run("train-toy", cfg);
  INFO(tr.err);
  REQUIRE(tr.code == 0);
  CHECK(tr.out.find("SUMMARY train-toy pairs=2") != std::string::npos);
  CHECK(tr.out.find("quality_ref=") != std::string::npos);

  const auto trace = io::read_trace(tmp.path("out/train_trace.tsv"));
  REQUIRE(trace.rows.size() == 21);  // steps + 1
  CHECK(trace.rows.back().loss < trace.rows.front().loss);

  const auto trained = io::read_policy(tmp.path("out/policy_trained.jsonl"));
  const auto baseline = io::read_policy(tmp.path("out/policy_baseline.jsonl"));
  REQUIRE(trained.policy.prompt_count() == 2);
  CHECK(trained.policy.prompt_ids()[0] == "p0");
  CHECK(trained.policy.items(0).size() == 4);  // groups, not just endpoints
  // Weighted pairs move faster than the unit-weight baseline.
  CHECK(trained.policy.logits(0)[0] > baseline.policy.logits(0)[0]);

  // Training raised the expected latent quality above the uniform reference.
  const auto qualities = io::read_qualities(tmp.path("qualities.jsonl"));
  std::map<std::pair<std::string, std::string>, double> quality;
  for (const auto& row : qualities.rows) {
    quality[{row.prompt_id, row.video_id}] = row.quality;
  }
  double q_ref = 0.0;
  double q_trained = 0.0;
  for (std::size_t p = 0; p < trained.policy.prompt_count(); ++p) {
    const auto probs = trained.policy.probabilities(p);
    const auto refp = trained.policy.reference_probabilities(p);
    const auto& ids = trained.policy.items(p);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const double q = quality.at({trained.policy.prompt_ids()[p], ids[k]});
      q_trained += probs[k] * q;
      q_ref += refp[k] * q;
    }
  }
  q_ref /= 2.0;
  q_trained /= 2.0;
  CHECK(q_ref == doctest::Approx((0.475 + 0.5875) / 2.0).epsilon(1e-9));
  CHECK(q_trained > q_ref + 1e-3);

  const std::string report_txt = slurp(tmp.path("out/train_report.txt"));
  CHECK(report_txt.find("expected latent quality") != std::string::npos);

  const RunResult rep = run("report", cfg);
  INFO(rep.err);
  REQUIRE(rep.code == 0);
  CHECK(rep.out.find("prompt composition (rm)") != std::string::npos);
  CHECK(rep.out.find("(ok)") != std::string::npos);
  CHECK(rep.out.find("score table: 12 rows, 3 prompts") != std::string::npos);
  CHECK(rep.out.find("weighted pairs: 2 (alpha=1, beta=") != std::string::npos);
  CHECK(rep.out.find("ratio_ok=1") != std::string::npos);

  // Replaying every command on the same inputs must reproduce every output
  // byte. This is the determinism contract for the whole chain.
  const auto first = dir_bytes(tmp.path("out"));
  REQUIRE(run("score", cfg).code == 0);
  REQUIRE(run("fit-rm", cfg).code == 0);
  REQUIRE(run("select-pairs", cfg).code == 0);
  REQUIRE(run("reweight", cfg).code == 0);
  REQUIRE(run("train-toy", cfg).code == 0);
  REQUIRE(run("report", cfg).code == 0);
  const auto second = dir_bytes(tmp.path("out"));
  REQUIRE(first.size() == second.size());
  for (const auto& [name, bytes] : first) {
    INFO("artifact: " << name);
    REQUIRE(second.count(name) == 1);
    CHECK(second.at(name) == bytes);
  }
}

TEST_CASE("cli overrides adjust the reweighting stage") {
  TempDir tmp;
  const std::string cfg = write_fixture(tmp);
  REQUIRE(run("score", cfg).code == 0);
  REQUIRE(run("select-pairs", cfg).code == 0);

  cli::CliOverrides ov;
  ov.alpha = 2.0;
  ov.beta = "0.5";
  const RunResult rw = run("reweight", cfg, ov);
  INFO(rw.err);
  REQUIRE(rw.code == 0);

  const auto weighted =
      io::read_preference_pairs(tmp.path("out/pairs_weighted.jsonl"));
  REQUIRE(weighted.reweight.has_value());
  CHECK(weighted.reweight->alpha == 2.0);
  CHECK(weighted.reweight->beta_mode == "fixed");
  CHECK(weighted.reweight->beta_value == 0.5);
  // P = 1 * 2/3, so w = (0.5 / (2/3))^2 = 0.5625.
  CHECK(weighted.pairs[0].weight == doctest::Approx(0.5625).epsilon(1e-12));

  cli::CliOverrides bad;
  bad.beta = "plenty";
  const RunResult rb = run("reweight", cfg, bad);
  CHECK(rb.code == 2);
  CHECK(rb.err.find("--beta") != std::string::npos);

  // A tau override above the fixture relevance rejects every question pair.
  cli::CliOverrides tau;
  tau.tau = 0.95;
  const RunResult rt = run("score", cfg, tau);
  CHECK(rt.code == 3);
  CHECK(rt.err.find("rejected by constraint: relevance") != std::string::npos);

  // An n_videos override that disagrees with the groups is an input error.
  cli::CliOverrides nv;
  nv.n_videos = 3;
  const RunResult rn = run("select-pairs", cfg, nv);
  CHECK(rn.code == 3);
  CHECK(rn.err.find("expected 3") != std::string::npos);
}

TEST_CASE("exit codes separate config, input and divergence failures") {
  TempDir tmp;

  SUBCASE("missing config file") {
    const RunResult r = run("score", tmp.path("absent.json"));
    CHECK(r.code == 2);
    CHECK(r.err.find("cannot open config file") != std::string::npos);
  }

  SUBCASE("config is not json") {
    spit(tmp.path("broken.json"), "{oops");
    CHECK(run("score", tmp.path("broken.json")).code == 2);
  }

  SUBCASE("config rejects unknown keys") {
    spit(tmp.path("extra.json"), "{\"corpus\":\"x\"}");
    const RunResult r = run("score", tmp.path("extra.json"));
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown key") != std::string::npos);
  }

  SUBCASE("unknown command") {
    spit(tmp.path("ok.json"), "{}");
    const RunResult r = run("frobnicate", tmp.path("ok.json"));
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown command") != std::string::npos);
  }

  SUBCASE("missing inputs are input errors") {
    const std::string cfg = write_fixture(tmp);
    fs::remove(tmp.path("manifest.jsonl"));
    const RunResult r = run("score", cfg);
    CHECK(r.code == 3);
    CHECK(r.err.find("video manifest not found") != std::string::npos);

    // select-pairs before any score table exists.
    const RunResult s = run("select-pairs", cfg);
    CHECK(s.code == 3);
    CHECK(s.err.find("score table not found") != std::string::npos);
  }

  SUBCASE("tampered artifacts are input errors") {
    const std::string cfg = write_fixture(tmp);
    REQUIRE(run("score", cfg).code == 0);
    REQUIRE(run("select-pairs", cfg).code == 0);
    const std::string pairs_path = tmp.path("out/pairs.jsonl");
    std::string text = slurp(pairs_path);
    const auto at = text.find("\"weight\":1");
    REQUIRE(at != std::string::npos);
    text.replace(at, 10, "\"weight\":0");
    spit(pairs_path, text);
    const RunResult r = run("reweight", cfg);
    CHECK(r.code == 3);
    CHECK(r.err.find("weight") != std::string::npos);
  }

  SUBCASE("incomplete replay cache is an input error") {
    const std::string cfg = write_fixture(tmp);
    // Drop the level-2 record that v0 needs after its level-1 success.
    auto cache = io::read_verdict_cache(tmp.path("verdicts.jsonl"));
    std::erase_if(cache.records, [](const auto& rec) {
      return rec.video_id == "p0-v0" && rec.question_id == "q2-p0";
    });
    io::write_verdict_cache(cache, tmp.path("verdicts.jsonl"));
    const RunResult r = run("score", cfg);
    CHECK(r.code == 3);
    CHECK(r.err.find("while scoring video 'p0-v0'") != std::string::npos);
  }

  SUBCASE("overflowing training run exits with the divergence code") {
    io::PreferenceFile pf;
    pf.header = io::make_header("physcorr/preference_pairs", "t-corpus");
    for (const char* prompt : {"pa", "pb", "pc"}) {
      physcorr::curation::PreferencePair p;
      p.prompt_id = prompt;
      p.win_video_id = "w";
      p.lose_video_id = "l";
      p.s_win = 0.9;
      p.s_lose = 0.1;
      p.delta = 0.8;
      p.weight = 1e308;  // the weighted loss sum overflows at step 0
      pf.pairs.push_back(p);
    }
    io::write_preference_pairs(pf, tmp.path("heavy.jsonl"));

    nlohmann::json j;
    j["paths"]["pairs_weighted"] = tmp.path("heavy.jsonl");
    j["paths"]["out_dir"] = tmp.path("out");
    spit(tmp.path("config.json"), j.dump(2) + "\n");

    const RunResult r = run("train-toy", tmp.path("config.json"));
    CHECK(r.code == 4);
    CHECK(r.err.find("error:") != std::string::npos);
  }
}

TEST_CASE("score command speaks to a live verdict endpoint") {
  TempDir tmp;

  // One prompt, two videos, graded over HTTP by video_ref and level marker.
  io::ManifestFile manifest;
  manifest.header = io::make_header("physcorr/video_manifest", "live-c");
  manifest.rows = {{"pL", "pL-v0", "ref://pL-v0"}, {"pL", "pL-v1", "ref://pL-v1"}};
  io::write_manifest(manifest, tmp.path("manifest.jsonl"));

  io::EmbeddingFile emb;
  emb.header = io::make_header("physcorr/embeddings", "live-c");
  emb.sequences = {make_sequence("pL-v0", 1.0), make_sequence("pL-v1", 0.0)};
  io::write_embeddings_text(emb, tmp.path("embeddings.jsonl"));

  io::QuestionFile questions;
  questions.header = io::make_header("physcorr/questions", "live-c");
  questions.questions = {
      {"q1-pL", "pL", "[L1] basic?", 1, "mechanics", 0.9, 1},
      {"q2-pL", "pL", "[L2] subtle?", 2, "mechanics", 0.9, 2},
  };
  io::write_questions(questions, tmp.path("questions.jsonl"));

  std::atomic<int> hits{0};
  httplib::Server server;
  server.Post("/verdict", [&](const httplib::Request& req,
                              httplib::Response& res) {
    ++hits;
    const auto body = nlohmann::json::parse(req.body);
    const std::string ref = body.at("video_ref").get<std::string>();
    // v0 passes both levels, v1 fails the first.
    const bool correct = (ref == "ref://pL-v0");
    nlohmann::json out;
    out["answer_text"] = correct ? "yes" : "no";
    out["correct"] = correct;
    res.set_content(out.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread listener([&server] { server.listen_after_bind(); });
  server.wait_until_ready();

  nlohmann::json j;
  j["corpus_id"] = "live-c";
  j["paths"]["manifest"] = tmp.path("manifest.jsonl");
  j["paths"]["embeddings"] = tmp.path("embeddings.jsonl");
  j["paths"]["questions"] = tmp.path("questions.jsonl");
  j["paths"]["out_dir"] = tmp.path("out");
  j["stats"]["mode"] = "computed";
  j["mechanics"]["backend"] = "live";
  j["mechanics"]["host"] = "127.0.0.1";
  j["mechanics"]["port"] = port;
  j["mechanics"]["path"] = "/verdict";
  j["mechanics"]["max_attempts"] = 2;
  j["mechanics"]["backoff_initial_ms"] = 1;
  spit(tmp.path("config.json"), j.dump(2) + "\n");

  const RunResult r = run("score", tmp.path("config.json"));
  server.stop();
  listener.join();
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(hits.load() == 3);  // v0 asks twice, v1 stops after level 1

  const auto table = io::read_score_table(tmp.path("out/score_table.jsonl"));
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].s_mech == 1.0);
  CHECK(table.rows[1].s_mech == 0.0);

  // Computed stats over raw scores {1, 0}: mu 0.5, population sigma 0.5.
  const auto stats = io::read_subject_stats(tmp.path("out/subject_stats.txt"));
  CHECK(stats.stats.mu == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(stats.stats.sigma == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(table.rows[0].s_subj_norm == doctest::Approx(sc::sigmoid(1.0)).epsilon(1e-6));
  CHECK(table.rows[1].s_subj_norm == doctest::Approx(sc::sigmoid(-1.0)).epsilon(1e-6));
}

TEST_CASE("live scoring failure surfaces as an input error") {
  TempDir tmp;
  // Reserve a port, then release it so nothing answers.
  int dead_port = 0;
  {
    httplib::Server probe;
    dead_port = probe.bind_to_any_port("127.0.0.1");
    REQUIRE(dead_port > 0);
    probe.stop();
  }

  const std::string cfg = write_fixture(tmp, [&](nlohmann::json& j) {
    j["mechanics"]["backend"] = "live";
    j["mechanics"]["host"] = "127.0.0.1";
    j["mechanics"]["port"] = dead_port;
    j["mechanics"]["max_attempts"] = 1;
    j["mechanics"]["backoff_initial_ms"] = 0;
    j["mechanics"]["timeout_sec"] = 2.0;
  });
  const RunResult r = run("score", cfg);
  CHECK(r.code == 3);
  CHECK(r.err.find("while scoring video") != std::string::npos);
}
