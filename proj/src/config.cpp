// SPDX-License-Identifier: Apache-2.0

#include "physcorr/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "physcorr/errors.hpp"
#include "physcorr/io_formats.hpp"

namespace physcorr::cli {

namespace {

using nlohmann::json;

std::string quote(const std::string& s) { return json(s).dump(); }

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  std::ostringstream os;
  os << in.rdbuf();
  json j = json::parse(os.str(), nullptr, false);
  if (j.is_discarded()) {
    throw ConfigError("config file is not valid JSON: " + path);
  }
  if (!j.is_object()) {
    throw ConfigError("config file must hold a JSON object: " + path);
  }
  return j;
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  std::set<std::string> ok;
  for (const char* k : allowed) {
    ok.insert(k);
  }
  for (const auto& item : j.items()) {
    if (ok.find(item.key()) == ok.end()) {
      throw ConfigError("config: unknown key \"" + where + item.key() + "\"");
    }
  }
}

double cfg_double(const json& j, const std::string& where, const char* key,
                  double fallback) {
  auto it = j.find(key);
  if (it == j.end()) {
    return fallback;
  }
  if (!it->is_number()) {
    throw ConfigError("config: \"" + where + key + "\" must be a number");
  }
  double v = it->get<double>();
  if (!std::isfinite(v)) {
    throw ConfigError("config: \"" + where + key + "\" must be finite");
  }
  return v;
}

long long cfg_integer(const json& j, const std::string& where, const char* key,
                      long long fallback) {
  auto it = j.find(key);
  if (it == j.end()) {
    return fallback;
  }
  if (!it->is_number_integer()) {
    throw ConfigError("config: \"" + where + key + "\" must be an integer");
  }
  return it->get<long long>();
}

std::string cfg_string(const json& j, const std::string& where, const char* key,
                       const std::string& fallback) {
  auto it = j.find(key);
  if (it == j.end()) {
    return fallback;
  }
  if (!it->is_string()) {
    throw ConfigError("config: \"" + where + key + "\" must be a string");
  }
  return it->get<std::string>();
}

const json kEmptyObject = json::object();

const json& cfg_section(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    return kEmptyObject;
  }
  if (!it->is_object()) {
    throw ConfigError(std::string("config: \"") + key + "\" must be an object");
  }
  return *it;
}

void positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string("config: \"") + name + "\" must be > 0");
  }
}

void non_negative(double v, const char* name) {
  if (v < 0.0 || !std::isfinite(v)) {
    throw ConfigError(std::string("config: \"") + name + "\" must be >= 0");
  }
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
  json j = load_json_file(path);
  check_keys(j, "",
             {"corpus_id", "jobs", "paths", "stats", "mixer", "mechanics",
              "selection", "reweight", "dpo", "report"});
  PipelineConfig cfg;
  cfg.corpus_id = cfg_string(j, "", "corpus_id", cfg.corpus_id);
  cfg.jobs = static_cast<int>(cfg_integer(j, "", "jobs", cfg.jobs));

  const json& paths = cfg_section(j, "paths");
  check_keys(paths, "paths.",
             {"embeddings", "manifest", "questions", "verdicts", "prompts",
              "annotations", "qualities", "stats", "mixer_params",
              "score_table", "pairs", "pairs_weighted", "policy_init",
              "out_dir"});
  PathsConfig& p = cfg.paths;
  p.embeddings = cfg_string(paths, "paths.", "embeddings", p.embeddings);
  p.manifest = cfg_string(paths, "paths.", "manifest", p.manifest);
  p.questions = cfg_string(paths, "paths.", "questions", p.questions);
  p.verdicts = cfg_string(paths, "paths.", "verdicts", p.verdicts);
  p.prompts = cfg_string(paths, "paths.", "prompts", p.prompts);
  p.annotations = cfg_string(paths, "paths.", "annotations", p.annotations);
  p.qualities = cfg_string(paths, "paths.", "qualities", p.qualities);
  p.stats = cfg_string(paths, "paths.", "stats", p.stats);
  p.mixer_params = cfg_string(paths, "paths.", "mixer_params", p.mixer_params);
  p.score_table = cfg_string(paths, "paths.", "score_table", p.score_table);
  p.pairs = cfg_string(paths, "paths.", "pairs", p.pairs);
  p.pairs_weighted =
      cfg_string(paths, "paths.", "pairs_weighted", p.pairs_weighted);
  p.policy_init = cfg_string(paths, "paths.", "policy_init", p.policy_init);
  p.out_dir = cfg_string(paths, "paths.", "out_dir", p.out_dir);

  const json& stats = cfg_section(j, "stats");
  check_keys(stats, "stats.", {"mode", "mu", "sigma"});
  cfg.stats.mode = cfg_string(stats, "stats.", "mode", cfg.stats.mode);
  cfg.stats.mu = cfg_double(stats, "stats.", "mu", cfg.stats.mu);
  cfg.stats.sigma = cfg_double(stats, "stats.", "sigma", cfg.stats.sigma);

  const json& mixer = cfg_section(j, "mixer");
  check_keys(mixer, "mixer.",
             {"lambda_init", "learning_rate", "steps", "huber_delta"});
  cfg.mixer.lambda_init =
      cfg_double(mixer, "mixer.", "lambda_init", cfg.mixer.lambda_init);
  cfg.mixer.learning_rate =
      cfg_double(mixer, "mixer.", "learning_rate", cfg.mixer.learning_rate);
  cfg.mixer.steps =
      static_cast<int>(cfg_integer(mixer, "mixer.", "steps", cfg.mixer.steps));
  cfg.mixer.huber_delta =
      cfg_double(mixer, "mixer.", "huber_delta", cfg.mixer.huber_delta);

  const json& mech = cfg_section(j, "mechanics");
  check_keys(mech, "mechanics.",
             {"tau", "backend", "host", "port", "path", "timeout_sec",
              "max_attempts", "backoff_initial_ms"});
  cfg.mechanics.tau = cfg_double(mech, "mechanics.", "tau", cfg.mechanics.tau);
  cfg.mechanics.backend =
      cfg_string(mech, "mechanics.", "backend", cfg.mechanics.backend);
  cfg.mechanics.host = cfg_string(mech, "mechanics.", "host", cfg.mechanics.host);
  cfg.mechanics.port = static_cast<int>(
      cfg_integer(mech, "mechanics.", "port", cfg.mechanics.port));
  cfg.mechanics.path = cfg_string(mech, "mechanics.", "path", cfg.mechanics.path);
  cfg.mechanics.timeout_sec =
      cfg_double(mech, "mechanics.", "timeout_sec", cfg.mechanics.timeout_sec);
  cfg.mechanics.max_attempts = static_cast<int>(
      cfg_integer(mech, "mechanics.", "max_attempts", cfg.mechanics.max_attempts));
  cfg.mechanics.backoff_initial_ms = static_cast<int>(cfg_integer(
      mech, "mechanics.", "backoff_initial_ms", cfg.mechanics.backoff_initial_ms));

  const json& sel = cfg_section(j, "selection");
  check_keys(sel, "selection.", {"n_videos", "epsilon"});
  cfg.selection.n_videos = static_cast<int>(
      cfg_integer(sel, "selection.", "n_videos", cfg.selection.n_videos));
  cfg.selection.epsilon =
      cfg_double(sel, "selection.", "epsilon", cfg.selection.epsilon);

  const json& rw = cfg_section(j, "reweight");
  check_keys(rw, "reweight.", {"alpha", "beta_mode", "beta_value", "bin_width"});
  cfg.reweight.alpha = cfg_double(rw, "reweight.", "alpha", cfg.reweight.alpha);
  cfg.reweight.beta_mode =
      cfg_string(rw, "reweight.", "beta_mode", cfg.reweight.beta_mode);
  cfg.reweight.beta_value =
      cfg_double(rw, "reweight.", "beta_value", cfg.reweight.beta_value);
  cfg.reweight.bin_width =
      cfg_double(rw, "reweight.", "bin_width", cfg.reweight.bin_width);

  const json& dpo = cfg_section(j, "dpo");
  check_keys(dpo, "dpo.", {"gamma", "learning_rate", "steps", "seed"});
  cfg.dpo.gamma = cfg_double(dpo, "dpo.", "gamma", cfg.dpo.gamma);
  cfg.dpo.learning_rate =
      cfg_double(dpo, "dpo.", "learning_rate", cfg.dpo.learning_rate);
  cfg.dpo.steps =
      static_cast<int>(cfg_integer(dpo, "dpo.", "steps", cfg.dpo.steps));
  long long seed = cfg_integer(dpo, "dpo.", "seed",
                               static_cast<long long>(cfg.dpo.seed));
  if (seed < 0) {
    throw ConfigError("config: \"dpo.seed\" must be >= 0");
  }
  cfg.dpo.seed = static_cast<std::uint64_t>(seed);

  const json& report = cfg_section(j, "report");
  check_keys(report, "report.", {"mode"});
  cfg.report.mode = cfg_string(report, "report.", "mode", cfg.report.mode);

  validate_config(cfg);
  return cfg;
}

void apply_overrides(PipelineConfig& cfg, const CliOverrides& overrides) {
  if (overrides.jobs.has_value()) {
    cfg.jobs = *overrides.jobs;
  }
  if (overrides.seed.has_value()) {
    cfg.dpo.seed = *overrides.seed;
  }
  if (overrides.alpha.has_value()) {
    cfg.reweight.alpha = *overrides.alpha;
  }
  if (overrides.beta.has_value()) {
    const std::string& b = *overrides.beta;
    if (b == "max") {
      cfg.reweight.beta_mode = "max";
    } else {
      double v = 0.0;
      try {
        std::size_t pos = 0;
        v = std::stod(b, &pos);
        if (pos != b.size()) {
          throw ConfigError("");
        }
      } catch (const std::exception&) {
        throw ConfigError("--beta must be \"max\" or a positive number, got \"" +
                          b + "\"");
      }
      cfg.reweight.beta_mode = "fixed";
      cfg.reweight.beta_value = v;
    }
  }
  if (overrides.gamma.has_value()) {
    cfg.dpo.gamma = *overrides.gamma;
  }
  if (overrides.n_videos.has_value()) {
    cfg.selection.n_videos = *overrides.n_videos;
  }
  if (overrides.tau.has_value()) {
    cfg.mechanics.tau = *overrides.tau;
  }
  validate_config(cfg);
}

void validate_config(const PipelineConfig& cfg) {
  if (cfg.corpus_id.empty()) {
    throw ConfigError("config: \"corpus_id\" must be non-empty");
  }
  if (cfg.jobs < 1) {
    throw ConfigError("config: \"jobs\" must be >= 1");
  }
  if (cfg.paths.out_dir.empty()) {
    throw ConfigError("config: \"paths.out_dir\" must be non-empty");
  }
  if (cfg.stats.mode != "computed" && cfg.stats.mode != "file" &&
      cfg.stats.mode != "fixed") {
    throw ConfigError(
        "config: \"stats.mode\" must be \"computed\", \"file\" or \"fixed\"");
  }
  if (cfg.stats.mode == "fixed") {
    positive(cfg.stats.sigma, "stats.sigma");
    if (!std::isfinite(cfg.stats.mu)) {
      throw ConfigError("config: \"stats.mu\" must be finite");
    }
  }
  if (cfg.stats.mode == "file" && cfg.paths.stats.empty()) {
    throw ConfigError(
        "config: \"paths.stats\" is required when stats.mode is \"file\"");
  }
  if (!std::isfinite(cfg.mixer.lambda_init)) {
    throw ConfigError("config: \"mixer.lambda_init\" must be finite");
  }
  positive(cfg.mixer.learning_rate, "mixer.learning_rate");
  if (cfg.mixer.steps < 0) {
    throw ConfigError("config: \"mixer.steps\" must be >= 0");
  }
  positive(cfg.mixer.huber_delta, "mixer.huber_delta");
  if (cfg.mechanics.tau < 0.0 || cfg.mechanics.tau >= 1.0) {
    throw ConfigError("config: \"mechanics.tau\" must lie in [0, 1)");
  }
  if (cfg.mechanics.backend != "replay" && cfg.mechanics.backend != "live") {
    throw ConfigError(
        "config: \"mechanics.backend\" must be \"replay\" or \"live\"");
  }
  if (cfg.mechanics.backend == "live") {
    if (cfg.mechanics.host.empty()) {
      throw ConfigError("config: \"mechanics.host\" must be non-empty");
    }
    if (cfg.mechanics.port < 1 || cfg.mechanics.port > 65535) {
      throw ConfigError("config: \"mechanics.port\" must lie in [1, 65535]");
    }
  }
  positive(cfg.mechanics.timeout_sec, "mechanics.timeout_sec");
  if (cfg.mechanics.max_attempts < 1) {
    throw ConfigError("config: \"mechanics.max_attempts\" must be >= 1");
  }
  if (cfg.mechanics.backoff_initial_ms < 0) {
    throw ConfigError("config: \"mechanics.backoff_initial_ms\" must be >= 0");
  }
  if (cfg.selection.n_videos < 0) {
    throw ConfigError("config: \"selection.n_videos\" must be >= 0");
  }
  positive(cfg.selection.epsilon, "selection.epsilon");
  non_negative(cfg.reweight.alpha, "reweight.alpha");
  if (cfg.reweight.beta_mode != "max" && cfg.reweight.beta_mode != "fixed") {
    throw ConfigError(
        "config: \"reweight.beta_mode\" must be \"max\" or \"fixed\"");
  }
  if (cfg.reweight.beta_mode == "fixed") {
    positive(cfg.reweight.beta_value, "reweight.beta_value");
  }
  if (!(cfg.reweight.bin_width > 0.0) || cfg.reweight.bin_width > 1.0) {
    throw ConfigError("config: \"reweight.bin_width\" must lie in (0, 1]");
  }
  positive(cfg.dpo.gamma, "dpo.gamma");
  positive(cfg.dpo.learning_rate, "dpo.learning_rate");
  if (cfg.dpo.steps < 0) {
    throw ConfigError("config: \"dpo.steps\" must be >= 0");
  }
  if (cfg.report.mode != "rm" && cfg.report.mode != "dpo") {
    throw ConfigError("config: \"report.mode\" must be \"rm\" or \"dpo\"");
  }
}

std::string resolved_config_json(const PipelineConfig& cfg) {
  const auto d = [](double v) { return io::format_double(v); };
  std::ostringstream os;
  os << "{\n";
  os << "  \"corpus_id\": " << quote(cfg.corpus_id) << ",\n";
  os << "  \"jobs\": " << cfg.jobs << ",\n";
  os << "  \"paths\": {\n";
  os << "    \"embeddings\": " << quote(cfg.paths.embeddings) << ",\n";
  os << "    \"manifest\": " << quote(cfg.paths.manifest) << ",\n";
  os << "    \"questions\": " << quote(cfg.paths.questions) << ",\n";
  os << "    \"verdicts\": " << quote(cfg.paths.verdicts) << ",\n";
  os << "    \"prompts\": " << quote(cfg.paths.prompts) << ",\n";
  os << "    \"annotations\": " << quote(cfg.paths.annotations) << ",\n";
  os << "    \"qualities\": " << quote(cfg.paths.qualities) << ",\n";
  os << "    \"stats\": " << quote(cfg.paths.stats) << ",\n";
  os << "    \"mixer_params\": " << quote(cfg.paths.mixer_params) << ",\n";
  os << "    \"score_table\": " << quote(cfg.paths.score_table) << ",\n";
  os << "    \"pairs\": " << quote(cfg.paths.pairs) << ",\n";
  os << "    \"pairs_weighted\": " << quote(cfg.paths.pairs_weighted) << ",\n";
  os << "    \"policy_init\": " << quote(cfg.paths.policy_init) << ",\n";
  os << "    \"out_dir\": " << quote(cfg.paths.out_dir) << "\n";
  os << "  },\n";
  os << "  \"stats\": {\n";
  os << "    \"mode\": " << quote(cfg.stats.mode) << ",\n";
  os << "    \"mu\": " << d(cfg.stats.mu) << ",\n";
  os << "    \"sigma\": " << d(cfg.stats.sigma) << "\n";
  os << "  },\n";
  os << "  \"mixer\": {\n";
  os << "    \"lambda_init\": " << d(cfg.mixer.lambda_init) << ",\n";
  os << "    \"learning_rate\": " << d(cfg.mixer.learning_rate) << ",\n";
  os << "    \"steps\": " << cfg.mixer.steps << ",\n";
  os << "    \"huber_delta\": " << d(cfg.mixer.huber_delta) << "\n";
  os << "  },\n";
  os << "  \"mechanics\": {\n";
  os << "    \"tau\": " << d(cfg.mechanics.tau) << ",\n";
  os << "    \"backend\": " << quote(cfg.mechanics.backend) << ",\n";
  os << "    \"host\": " << quote(cfg.mechanics.host) << ",\n";
  os << "    \"port\": " << cfg.mechanics.port << ",\n";
  os << "    \"path\": " << quote(cfg.mechanics.path) << ",\n";
  os << "    \"timeout_sec\": " << d(cfg.mechanics.timeout_sec) << ",\n";
  os << "    \"max_attempts\": " << cfg.mechanics.max_attempts << ",\n";
  os << "    \"backoff_initial_ms\": " << cfg.mechanics.backoff_initial_ms
     << "\n";
  os << "  },\n";
  os << "  \"selection\": {\n";
  os << "    \"n_videos\": " << cfg.selection.n_videos << ",\n";
  os << "    \"epsilon\": " << d(cfg.selection.epsilon) << "\n";
  os << "  },\n";
  os << "  \"reweight\": {\n";
  os << "    \"alpha\": " << d(cfg.reweight.alpha) << ",\n";
  os << "    \"beta_mode\": " << quote(cfg.reweight.beta_mode) << ",\n";
  os << "    \"beta_value\": " << d(cfg.reweight.beta_value) << ",\n";
  os << "    \"bin_width\": " << d(cfg.reweight.bin_width) << "\n";
  os << "  },\n";
  os << "  \"dpo\": {\n";
  os << "    \"gamma\": " << d(cfg.dpo.gamma) << ",\n";
  os << "    \"learning_rate\": " << d(cfg.dpo.learning_rate) << ",\n";
  os << "    \"steps\": " << cfg.dpo.steps << ",\n";
  os << "    \"seed\": " << cfg.dpo.seed << "\n";
  os << "  },\n";
  os << "  \"report\": {\n";
  os << "    \"mode\": " << quote(cfg.report.mode) << "\n";
  os << "  }\n";
  os << "}\n";
  return os.str();
}

}  // namespace physcorr::cli
