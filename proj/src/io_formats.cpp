// SPDX-License-Identifier: Apache-2.0

#include "physcorr/io_formats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "physcorr/errors.hpp"

namespace physcorr::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kEmbeddingMagic[8] = {'P', 'H', 'Y', 'S', 'C', 'E', 'M', 'B'};

// Format name registry, kept in one place so typos cannot diverge.
constexpr const char* kFmtEmbeddings = "physcorr/embeddings";
constexpr const char* kFmtSubjectStats = "physcorr/subject_stats";
constexpr const char* kFmtMixerParams = "physcorr/mixer_params";
constexpr const char* kFmtVerdictCache = "physcorr/verdict_cache";
constexpr const char* kFmtQuestions = "physcorr/questions";
constexpr const char* kFmtPrompts = "physcorr/prompts";
constexpr const char* kFmtManifest = "physcorr/video_manifest";
constexpr const char* kFmtAnnotations = "physcorr/annotations";
constexpr const char* kFmtQualities = "physcorr/qualities";
constexpr const char* kFmtScoreTable = "physcorr/score_table";
constexpr const char* kFmtPreferencePairs = "physcorr/preference_pairs";
constexpr const char* kFmtHistogramReport = "physcorr/histogram_report";
constexpr const char* kFmtTrainingTrace = "physcorr/training_trace";
constexpr const char* kFmtToyPolicy = "physcorr/toy_policy";

std::string quote(const std::string& s) { return json(s).dump(); }

void ensure_parent_dir(const std::string& path) {
  fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    // An already existing directory is fine; a real failure shows up when
    // the file itself is opened.
  }
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

std::vector<std::string> read_file_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open for reading: " + path);
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(line);
  }
  return lines;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open for reading: " + path);
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// --- strict JSON field access -------------------------------------------

json parse_json_object(const std::string& path, std::size_t line_no,
                       const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw ParseError(path, line_no, "invalid JSON");
  }
  if (!j.is_object()) {
    throw ParseError(path, line_no, "expected a JSON object");
  }
  return j;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& path, std::size_t line_no) {
  std::set<std::string> ok;
  for (const char* k : allowed) {
    ok.insert(k);
  }
  for (const auto& item : j.items()) {
    if (ok.find(item.key()) == ok.end()) {
      throw ParseError(path, line_no, "unknown key \"" + item.key() + "\"");
    }
  }
}

const json& require_field(const json& j, const char* key,
                          const std::string& path, std::size_t line_no) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError(path, line_no, std::string("missing key \"") + key + "\"");
  }
  return *it;
}

std::string get_string(const json& j, const char* key, const std::string& path,
                       std::size_t line_no) {
  const json& v = require_field(j, key, path, line_no);
  if (!v.is_string()) {
    throw ParseError(path, line_no, std::string("key \"") + key + "\" must be a string");
  }
  return v.get<std::string>();
}

double get_double(const json& j, const char* key, const std::string& path,
                  std::size_t line_no) {
  const json& v = require_field(j, key, path, line_no);
  if (!v.is_number()) {
    throw ParseError(path, line_no, std::string("key \"") + key + "\" must be a number");
  }
  double d = v.get<double>();
  if (!std::isfinite(d)) {
    throw ParseError(path, line_no, std::string("key \"") + key + "\" must be finite");
  }
  return d;
}

long long get_integer(const json& j, const char* key, const std::string& path,
                      std::size_t line_no) {
  const json& v = require_field(j, key, path, line_no);
  if (!v.is_number_integer()) {
    throw ParseError(path, line_no,
                     std::string("key \"") + key + "\" must be an integer");
  }
  return v.get<long long>();
}

bool get_bool(const json& j, const char* key, const std::string& path,
              std::size_t line_no) {
  const json& v = require_field(j, key, path, line_no);
  if (!v.is_boolean()) {
    throw ParseError(path, line_no, std::string("key \"") + key + "\" must be a boolean");
  }
  return v.get<bool>();
}

void require_nonempty(const std::string& value, const char* key,
                      const std::string& path, std::size_t line_no) {
  if (value.empty()) {
    throw ParseError(path, line_no, std::string("key \"") + key + "\" must be non-empty");
  }
}

// --- headers -------------------------------------------------------------

std::string header_line(const ArtifactHeader& h, const std::string& extras) {
  std::ostringstream os;
  os << "{\"format\":" << quote(h.format_name)
     << ",\"version\":" << h.format_version
     << ",\"created_by\":" << quote(h.created_by)
     << ",\"corpus_id\":" << quote(h.corpus_id);
  if (!extras.empty()) {
    os << ',' << extras;
  }
  os << '}';
  return os.str();
}

ArtifactHeader parse_header_object(const json& j, const std::string& path,
                                   const char* expected_format,
                                   std::initializer_list<const char*> extra_keys) {
  std::set<std::string> allowed = {"format", "version", "created_by", "corpus_id"};
  for (const char* k : extra_keys) {
    allowed.insert(k);
  }
  for (const auto& item : j.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      throw ParseError(path, 1, "unknown header key \"" + item.key() + "\"");
    }
  }
  ArtifactHeader h;
  h.format_name = get_string(j, "format", path, 1);
  long long version = get_integer(j, "version", path, 1);
  h.created_by = get_string(j, "created_by", path, 1);
  h.corpus_id = get_string(j, "corpus_id", path, 1);
  if (h.format_name != expected_format) {
    throw ParseError(path, 1,
                     std::string("expected format \"") + expected_format +
                         "\", found \"" + h.format_name + "\"");
  }
  if (version != kFormatVersion) {
    throw ParseError(path, 1,
                     "unsupported format version " + std::to_string(version) +
                         " (supported: " + std::to_string(kFormatVersion) + ")");
  }
  h.format_version = static_cast<int>(version);
  return h;
}

// Reads a JSONL artifact: line 1 is the header, every further non-empty line
// is handed to on_row. Returns the parsed header object for callers that
// need the extra keys.
json read_jsonl(const std::string& path, const char* expected_format,
                std::initializer_list<const char*> extra_header_keys,
                ArtifactHeader* header_out,
                const std::function<void(std::size_t, const json&)>& on_row) {
  std::vector<std::string> lines = read_file_lines(path);
  if (lines.empty()) {
    throw ParseError(path, 1, "empty file, expected a header line");
  }
  json hj = parse_json_object(path, 1, lines[0]);
  *header_out = parse_header_object(hj, path, expected_format, extra_header_keys);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      if (i + 1 == lines.size()) {
        continue;  // trailing newline
      }
      throw ParseError(path, i + 1, "blank line inside artifact body");
    }
    on_row(i + 1, parse_json_object(path, i + 1, lines[i]));
  }
  return hj;
}

// --- plain-text token parsing -------------------------------------------

double parse_double_token(const std::string& path, std::size_t line_no,
                          const std::string& token) {
  if (token.empty() || token.find_first_of(" \t") != std::string::npos) {
    throw ParseError(path, line_no, "invalid number \"" + token + "\"");
  }
  double v = 0.0;
  try {
    std::size_t pos = 0;
    v = std::stod(token, &pos);
    if (pos != token.size()) {
      throw ParseError(path, line_no, "invalid number \"" + token + "\"");
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError(path, line_no, "invalid number \"" + token + "\"");
  }
  if (!std::isfinite(v)) {
    throw ParseError(path, line_no, "number \"" + token + "\" must be finite");
  }
  return v;
}

long long parse_int_token(const std::string& path, std::size_t line_no,
                          const std::string& token) {
  if (token.empty()) {
    throw ParseError(path, line_no, "invalid integer \"\"");
  }
  try {
    std::size_t pos = 0;
    long long v = std::stoll(token, &pos);
    if (pos != token.size()) {
      throw ParseError(path, line_no, "invalid integer \"" + token + "\"");
    }
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError(path, line_no, "invalid integer \"" + token + "\"");
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

// TSV artifacts put the header on line 1 behind a "# " comment marker so the
// data rows can be consumed by plotting tools directly.
json read_tsv(const std::string& path, const char* expected_format,
              std::initializer_list<const char*> extra_header_keys,
              ArtifactHeader* header_out, std::size_t columns,
              const std::function<void(std::size_t, const std::vector<std::string>&)>& on_row) {
  std::vector<std::string> lines = read_file_lines(path);
  if (lines.empty() || lines[0].rfind("# ", 0) != 0) {
    throw ParseError(path, 1, "expected a \"# \" header line");
  }
  json hj = parse_json_object(path, 1, lines[0].substr(2));
  *header_out = parse_header_object(hj, path, expected_format, extra_header_keys);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      if (i + 1 == lines.size()) {
        continue;
      }
      throw ParseError(path, i + 1, "blank line inside artifact body");
    }
    if (lines[i].rfind("# ", 0) == 0) {
      continue;  // column comment
    }
    std::vector<std::string> cells = split_tabs(lines[i]);
    if (cells.size() != columns) {
      throw ParseError(path, i + 1,
                       "expected " + std::to_string(columns) + " columns, found " +
                           std::to_string(cells.size()));
    }
    on_row(i + 1, cells);
  }
  return hj;
}

// --- key-value artifacts -------------------------------------------------

// Small "key=value" files (stats, mixer params). Keys must appear exactly
// once and nothing else is allowed.
std::map<std::string, std::pair<std::size_t, std::string>> read_kv_body(
    const std::string& path, const std::vector<std::string>& lines,
    const std::set<std::string>& allowed) {
  std::map<std::string, std::pair<std::size_t, std::string>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      if (i + 1 == lines.size()) {
        continue;
      }
      throw ParseError(path, i + 1, "blank line inside artifact body");
    }
    std::size_t eq = lines[i].find('=');
    if (eq == std::string::npos) {
      throw ParseError(path, i + 1, "expected key=value");
    }
    std::string key = lines[i].substr(0, eq);
    std::string value = lines[i].substr(eq + 1);
    if (allowed.find(key) == allowed.end()) {
      throw ParseError(path, i + 1, "unknown key \"" + key + "\"");
    }
    if (!out.emplace(key, std::make_pair(i + 1, value)).second) {
      throw ParseError(path, i + 1, "duplicate key \"" + key + "\"");
    }
  }
  return out;
}

const std::pair<std::size_t, std::string>& require_kv(
    const std::map<std::string, std::pair<std::size_t, std::string>>& kv,
    const std::string& key, const std::string& path,
    std::size_t total_lines) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    throw ParseError(path, total_lines, "missing key \"" + key + "\"");
  }
  return it->second;
}

// --- binary helpers ------------------------------------------------------

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  put_u32(out, bits);
}

void put_sized_string(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

struct ByteCursor {
  const std::string& bytes;
  const std::string& path;
  std::size_t offset = 0;

  void need(std::size_t n) const {
    if (offset + n > bytes.size()) {
      throw ParseError::at_offset(path, offset, "truncated record");
    }
  }

  std::uint32_t u32() {
    need(4);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
    std::uint32_t v = static_cast<std::uint32_t>(p[0]) |
                      (static_cast<std::uint32_t>(p[1]) << 8) |
                      (static_cast<std::uint32_t>(p[2]) << 16) |
                      (static_cast<std::uint32_t>(p[3]) << 24);
    offset += 4;
    return v;
  }

  float f32() {
    std::uint32_t bits = u32();
    float v = 0.0f;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }

  std::string sized_string(std::size_t limit = 1u << 20) {
    std::size_t at = offset;
    std::uint32_t n = u32();
    if (n > limit) {
      throw ParseError::at_offset(path, at, "string length out of range");
    }
    need(n);
    std::string s = bytes.substr(offset, n);
    offset += n;
    return s;
  }
};

void check_score_in_unit(double v, const char* key, const std::string& path,
                         std::size_t line_no) {
  if (v < 0.0 || v > 1.0) {
    throw ParseError(path, line_no,
                     std::string("key \"") + key + "\" must lie in [0, 1]");
  }
}

void check_mech_value(double v, const std::string& path, std::size_t line_no) {
  if (v != 0.0 && v != 0.5 && v != 1.0) {
    throw ParseError(path, line_no, "key \"s_mech\" must be one of 0, 0.5, 1");
  }
}

}  // namespace

ArtifactHeader make_header(const std::string& format_name,
                           const std::string& corpus_id) {
  ArtifactHeader h;
  h.format_name = format_name;
  h.corpus_id = corpus_id;
  return h;
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

// ---------------------------------------------------------------------------
// Embeddings

void write_embeddings_binary(const EmbeddingFile& file, const std::string& path) {
  std::string out;
  out.append(kEmbeddingMagic, sizeof kEmbeddingMagic);
  put_u32(out, static_cast<std::uint32_t>(kFormatVersion));
  put_sized_string(out, file.header.corpus_id);
  put_sized_string(out, file.header.created_by);
  put_u32(out, static_cast<std::uint32_t>(file.sequences.size()));
  for (const auto& seq : file.sequences) {
    score_core::validate_sequence(seq);
    put_sized_string(out, seq.video_id);
    put_u32(out, static_cast<std::uint32_t>(seq.frame_count()));
    put_u32(out, static_cast<std::uint32_t>(seq.dim()));
    for (const auto& frame : seq.frames) {
      for (float v : frame) {
        put_f32(out, v);
      }
    }
  }
  write_file_bytes(path, out);
}

void write_embeddings_text(const EmbeddingFile& file, const std::string& path) {
  std::ostringstream os;
  ArtifactHeader h = file.header;
  h.format_name = kFmtEmbeddings;
  os << header_line(h, "") << '\n';
  for (const auto& seq : file.sequences) {
    score_core::validate_sequence(seq);
    os << "{\"video_id\":" << quote(seq.video_id) << ",\"frames\":[";
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
      if (f > 0) {
        os << ',';
      }
      os << '[';
      for (std::size_t k = 0; k < seq.frames[f].size(); ++k) {
        if (k > 0) {
          os << ',';
        }
        os << format_double(static_cast<double>(seq.frames[f][k]));
      }
      os << ']';
    }
    os << "]}\n";
  }
  write_file_bytes(path, os.str());
}

namespace {

EmbeddingFile read_embeddings_binary(const std::string& path,
                                     const std::string& bytes) {
  EmbeddingFile file;
  ByteCursor cur{bytes, path, sizeof kEmbeddingMagic};
  std::size_t version_at = cur.offset;
  std::uint32_t version = cur.u32();
  if (version != static_cast<std::uint32_t>(kFormatVersion)) {
    throw ParseError::at_offset(path, version_at,
                                "unsupported format version " +
                                    std::to_string(version) + " (supported: " +
                                    std::to_string(kFormatVersion) + ")");
  }
  file.header.format_name = kFmtEmbeddings;
  file.header.format_version = static_cast<int>(version);
  file.header.corpus_id = cur.sized_string();
  file.header.created_by = cur.sized_string();
  std::uint32_t count = cur.u32();
  std::set<std::string> seen;
  file.sequences.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    score_core::EmbeddingSequence seq;
    std::size_t id_at = cur.offset;
    seq.video_id = cur.sized_string();
    if (seq.video_id.empty()) {
      throw ParseError::at_offset(path, id_at, "empty video_id");
    }
    if (!seen.insert(seq.video_id).second) {
      throw ParseError::at_offset(path, id_at,
                                  "duplicate video_id \"" + seq.video_id + "\"");
    }
    std::size_t shape_at = cur.offset;
    std::uint32_t frames = cur.u32();
    std::uint32_t dim = cur.u32();
    if (frames < 2 || dim < 1) {
      throw ParseError::at_offset(path, shape_at,
                                  "sequence shape out of range (frames >= 2, dim >= 1)");
    }
    seq.frames.assign(frames, std::vector<float>(dim, 0.0f));
    for (std::uint32_t f = 0; f < frames; ++f) {
      for (std::uint32_t k = 0; k < dim; ++k) {
        seq.frames[f][k] = cur.f32();
      }
    }
    file.sequences.push_back(std::move(seq));
  }
  if (cur.offset != bytes.size()) {
    throw ParseError::at_offset(path, cur.offset, "trailing bytes after last record");
  }
  return file;
}

EmbeddingFile read_embeddings_text(const std::string& path) {
  EmbeddingFile file;
  std::set<std::string> seen;
  read_jsonl(path, kFmtEmbeddings, {}, &file.header,
             [&](std::size_t line_no, const json& row) {
               check_keys(row, {"video_id", "frames"}, path, line_no);
               score_core::EmbeddingSequence seq;
               seq.video_id = get_string(row, "video_id", path, line_no);
               require_nonempty(seq.video_id, "video_id", path, line_no);
               if (!seen.insert(seq.video_id).second) {
                 throw ParseError(path, line_no,
                                  "duplicate video_id \"" + seq.video_id + "\"");
               }
               const json& frames = require_field(row, "frames", path, line_no);
               if (!frames.is_array()) {
                 throw ParseError(path, line_no, "key \"frames\" must be an array");
               }
               for (const json& frame : frames) {
                 if (!frame.is_array()) {
                   throw ParseError(path, line_no, "each frame must be an array");
                 }
                 std::vector<float> values;
                 values.reserve(frame.size());
                 for (const json& v : frame) {
                   if (!v.is_number()) {
                     throw ParseError(path, line_no,
                                      "frame components must be numbers");
                   }
                   double d = v.get<double>();
                   if (!std::isfinite(d)) {
                     throw ParseError(path, line_no,
                                      "frame components must be finite");
                   }
                   values.push_back(static_cast<float>(d));
                 }
                 seq.frames.push_back(std::move(values));
               }
               try {
                 score_core::validate_sequence(seq);
               } catch (const Error& e) {
                 throw ParseError(path, line_no, e.what());
               }
               file.sequences.push_back(std::move(seq));
             });
  return file;
}

}  // namespace

EmbeddingFile read_embeddings(const std::string& path) {
  std::string bytes = read_file_bytes(path);
  if (bytes.size() >= sizeof kEmbeddingMagic &&
      std::memcmp(bytes.data(), kEmbeddingMagic, sizeof kEmbeddingMagic) == 0) {
    return read_embeddings_binary(path, bytes);
  }
  return read_embeddings_text(path);
}

// ---------------------------------------------------------------------------
// Subject stats and mixer params

void write_subject_stats(const SubjectStatsFile& file, const std::string& path) {
  ArtifactHeader h = file.header;
  h.format_name = kFmtSubjectStats;
  h.corpus_id = file.stats.corpus_id;
  std::ostringstream os;
  os << header_line(h, "") << '\n';
  os << "mu=" << format_double(file.stats.mu) << '\n';
  os << "sigma=" << format_double(file.stats.sigma) << '\n';
  os << "std_convention=" << file.std_convention << '\n';
  write_file_bytes(path, os.str());
}

SubjectStatsFile read_subject_stats(const std::string& path) {
  std::vector<std::string> lines = read_file_lines(path);
  if (lines.empty()) {
    throw ParseError(path, 1, "empty file, expected a header line");
  }
  SubjectStatsFile file;
  json hj = parse_json_object(path, 1, lines[0]);
  file.header = parse_header_object(hj, path, kFmtSubjectStats, {});
  auto kv = read_kv_body(path, lines, {"mu", "sigma", "std_convention"});
  const auto& mu = require_kv(kv, "mu", path, lines.size());
  const auto& sigma = require_kv(kv, "sigma", path, lines.size());
  const auto& conv = require_kv(kv, "std_convention", path, lines.size());
  file.stats.corpus_id = file.header.corpus_id;
  file.stats.mu = parse_double_token(path, mu.first, mu.second);
  file.stats.sigma = parse_double_token(path, sigma.first, sigma.second);
  if (file.stats.sigma <= 0.0) {
    throw ParseError(path, sigma.first, "sigma must be > 0");
  }
  file.std_convention = conv.second;
  if (file.std_convention != "population") {
    throw ParseError(path, conv.first,
                     "std_convention must be \"population\", found \"" +
                         file.std_convention + "\"");
  }
  return file;
}

void write_mixer_params(const MixerParamsFile& file, const std::string& path) {
  ArtifactHeader h = file.header;
  h.format_name = kFmtMixerParams;
  std::ostringstream os;
  os << header_line(h, "") << '\n';
  os << "lambda=" << format_double(file.params.lambda) << '\n';
  write_file_bytes(path, os.str());
}

MixerParamsFile read_mixer_params(const std::string& path) {
  std::vector<std::string> lines = read_file_lines(path);
  if (lines.empty()) {
    throw ParseError(path, 1, "empty file, expected a header line");
  }
  MixerParamsFile file;
  json hj = parse_json_object(path, 1, lines[0]);
  file.header = parse_header_object(hj, path, kFmtMixerParams, {});
  auto kv = read_kv_body(path, lines, {"lambda"});
  const auto& lambda = require_kv(kv, "lambda", path, lines.size());
  file.params.lambda = parse_double_token(path, lambda.first, lambda.second);
  return file;
}

// ---------------------------------------------------------------------------
// Verdict cache

void write_verdict_cache(const VerdictCacheFile& file, const std::string& path) {
  ArtifactHeader h = file.header;
  h.format_name = kFmtVerdictCache;
  std::ostringstream os;
  os << header_line(h, "") << '\n';
  for (const auto& r : file.records) {
    os << "{\"video_id\":" << quote(r.video_id)
       << ",\"question_id\":" << quote(r.question_id)
       << ",\"question_text\":" << quote(r.question_text)
       << ",\"answer_text\":" << quote(r.answer_text)
       << ",\"correct\":" << (r.correct ? "true" : "false") << "}\n";
  }
  write_file_bytes(path, os.str());
}

VerdictCacheFile read_verdict_cache(const std::string& path) {
  VerdictCacheFile file;
  std::set<std::pair<std::string, std::string>> seen;
  read_jsonl(path, kFmtVerdictCache, {}, &file.header,
             [&](std::size_t line_no, const json& row) {
               check_keys(row,
                          {"video_id", "question_id", "question_text",
                           "answer_text", "correct"},
                          path, line_no);
               mechanics::CachedVerdict r;
               r.video_id = get_string(row, "video_id", path, line_no);
               r.question_id = get_string(row, "question_id", path, line_no);
               require_nonempty(r.video_id, "video_id", path, line_no);
               require_nonempty(r.question_id, "question_id", path, line_no);
               r.question_text = get_string(row, "question_text", path, line_no);
               r.answer_text = get_string(row, "answer_text", path, line_no);
               r.correct = get_bool(row, "correct", path, line_no);
               if (!seen.insert({r.video_id, r.question_id}).second) {
                 throw ParseError(path, line_no,
                                  "duplicate verdict for video \"" + r.video_id +
                                      "\", question \"" + r.question_id + "\"");
               }
               file.records.push_back(std::move(r));
             });
  return file;
}

// ---------------------------------------------------------------------------
// Questions

void write_questions(const QuestionFile& file, const std::string& path) {
  ArtifactHeader h = file.header;
  h.format_name = kFmtQuestions;
  std::ostringstream os;
  os << header_line(h, "") << '\n';
  for (const auto& q : file.questions) {
    os << "{\"question_id\":" << quote(q.question_id)
       << ",\"prompt_id\":" << quote(q.prompt_id)
       << ",\"text\":" << quote(q.text)
       << ",\"difficulty\":" << q.difficulty
       << ",\"domain_tag\":" << quote(q.domain_tag)
       << ",\"relevance\":" << format_double(q.relevance)
       << ",\"level\":" << q.level << "}\n";
  }
  write_file_bytes(path, os.str());
}

QuestionFile read_questions(const std::string& path) {
  QuestionFile file;
  std::set<std::string> seen;
  read_jsonl(path, kFmtQuestions, {}, &file.header,
             [&](std::size_t line_no, const json& row) {
               check_keys(row,
                          {"question_id", "prompt_id", "text", "difficulty",
                           "domain_tag", "relevance", "level"},
                          path, line_no);
               mechanics::PhysicsQuestion q;
               q.question_id = get_string(row, "question_id", path, line_no);
               require_nonempty(q.question_id, "question_id", path, line_no);
               if (!seen.insert(q.question_id).second) {
                 throw ParseError(path, line_no, "duplicate question_id \"" +
                                                     q.question_id + "\"");
               }
               q.prompt_id = get_string(row, "prompt_id", path, line_no);
               require_nonempty(q.prompt_id, "prompt_id", path, line_no);
               q.text = get_string(row, "text", path, line_no);
               long long difficulty = get_integer(row, "difficulty", path, line_no);
               if (difficulty < 1 || difficulty > 1000000) {
                 throw ParseError(path, line_no, "key \"difficulty\" must be >= 1");
               }
               q.difficulty = static_cast<int>(difficulty);
               q.domain_tag = get_string(row, "domain_tag", path, line_no);
               q.relevance = get_double(row, "relevance", path, line_no);
               check_score_in_unit(q.relevance, "relevance", path, line_no);
               long long level = get_integer(row, "level", path, line_no);
               if (level != 1 && level != 2) {
                 throw ParseError(path, line_no, "key \"level\" must be 1 or 2");
               }
               q.level = static_cast<int>(level);
               file.questions.push_back(std::move(q));
             });
  return file;
}

// ---------------------------------------------------------------------------
// Prompts

void write_prompts(const PromptFile& file, const std::string& path) {
  ArtifactHeader h = file.header;
  h.format_name = kFmtPrompts;
  std::ostringstream os;
  os << header_line(h, "") << '\n';
  for (const auto& p : file.prompts) {
    os << "{\"prompt_id\":" << quote(p.prompt_id)
       << ",\"text\":" << quote(p.text)
       << ",\"category\":" << quote(p.category)
       << ",\"source\":" << quote(p.source) << "}\n";
  }
  write_file_bytes(path, os.str());
}

PromptFile read_prompts(const std::string& path) {
  PromptFile file;
  std::set<std::string> seen;
  read_jsonl(path, kFmtPrompts, {}, &file.header,
             [&](std::size_t line_no, const json& row) {
               check_keys(row, {"prompt_id", "text", "category", "source"}, path,
                          line_no);
               curation::PromptRecord p;
               p.prompt_id = get_string(row, "prompt_id", path, line_no);
               require_nonempty(p.prompt_id, "prompt_id", path, line_no);
               if (!seen.insert(p.prompt_id).second) {
                 throw ParseError(path, line_no,
                                  "duplicate prompt_id \"" + p.prompt_id + "\"");
               }
               p.text = get_string(row, "text", path, line_no);
               p.category = get_string(row, "category", path, line_no);
               require_nonempty(p.category, "category", path, line_no);
               p.source = get_string(row, "source", path, line_no);
               file.prompts.push_back(std::move(p));
             });
  return file;
}

// ---------------------------------------------------------------------------
// Video manifest

void write_manifest(const ManifestFile& file, const std::string& path) {
  ArtifactHeader h = file.header;
  h.format_name = kFmtManifest;
  std::ostringstream os;
  os << header_line(h, "") << '\n';
  for (const auto& r : file.rows) {
    os << "{\"prompt_id\":" << quote(r.prompt_id)
       << ",\"video_id\":" << quote(r.video_id)
       << ",\"video_ref\":" << quote(r.video_ref) << "}\n";
  }
  write_file_bytes(path, os.str());
}

ManifestFile read_manifest(const std::string& path) {
  ManifestFile file;
  std::set<std::string> seen;
  read_jsonl(path, kFmtManifest, {}, &file.header,
             [&](std::size_t line_no, const json& row) {
               check_keys(row, {"prompt_id", "video_id", "video_ref"}, path,
                          line_no);
               ManifestRow r;
               r.prompt_id = get_string(row, "prompt_id", path, line_no);
               require_nonempty(r.prompt_id, "prompt_id", path, line_no);
               r.video_id = get_string(row, "video_id", path, line_no);
               require_nonempty(r.video_id, "video_id", path, line_no);
               if (!seen.insert(r.video_id).second) {
                 throw ParseError(path, line_no,
                                  "duplicate video_id \"" + r.video_id + "\"");
               }
               r.video_ref = get_string(row, "video_ref", path, line_no);
               file.rows.push_back(std::move(r));
             });
  return file;
}

// ---------------------------------------------------------------------------
// Annotations

void write_annotations(const AnnotationFile& file, const std::string& path) {
  ArtifactHeader h = file.header;
  h.format_name = kFmtAnnotations;
  std::ostringstream os;
  os << header_line(h, "") << '\n';
  for (const auto& r : file.rows) {
    os << "{\"prompt_id\":" << quote(r.prompt_id)
       << ",\"video_id\":" << quote(r.video_id)
       << ",\"s_subj_raw\":" << format_double(r.s_subj_raw)
       << ",\"s_mech\":" << format_double(r.s_mech)
       << ",\"human_score\":" << format_double(r.human_score) << "}\n";
  }
  write_file_bytes(path, os.str());
}

AnnotationFile read_annotations(const std::string& path) {
  AnnotationFile file;
  std::set<std::pair<std::string, std::string>> seen;
  read_jsonl(path, kFmtAnnotations, {}, &file.header,
             [&](std::size_t line_no, const json& row) {
               check_keys(row,
                          {"prompt_id", "video_id", "s_subj_raw", "s_mech",
                           "human_score"},
                          path, line_no);
               AnnotationRow r;
               r.prompt_id = get_string(row, "prompt_id", path, line_no);
               require_nonempty(r.prompt_id, "prompt_id", path, line_no);
               r.video_id = get_string(row, "video_id", path, line_no);
               require_nonempty(r.video_id, "video_id", path, line_no);
               if (!seen.insert({r.prompt_id, r.video_id}).second) {
                 throw ParseError(path, line_no,
                                  "duplicate annotation for prompt \"" +
                                      r.prompt_id + "\", video \"" + r.video_id +
                                      "\"");
               }
               r.s_subj_raw = get_double(row, "s_subj_raw", path, line_no);
               if (r.s_subj_raw < -1.0 || r.s_subj_raw > 1.0) {
                 throw ParseError(path, line_no,
                                  "key \"s_subj_raw\" must lie in [-1, 1]");
               }
               r.s_mech = get_double(row, "s_mech", path, line_no);
               check_mech_value(r.s_mech, path, line_no);
               r.human_score = get_double(row, "human_score", path, line_no);
               check_score_in_unit(r.human_score, "human_score", path, line_no);
               file.rows.push_back(std::move(r));
             });
  return file;
}

// ---------------------------------------------------------------------------
// Qualities

void write_qualities(const QualityFile& file, const std::string& path) {
  ArtifactHeader h = file.header;
  h.format_name = kFmtQualities;
  std::ostringstream os;
  os << header_line(h, "") << '\n';
  for (const auto& r : file.rows) {
    os << "{\"prompt_id\":" << quote(r.prompt_id)
       << ",\"video_id\":" << quote(r.video_id)
       << ",\"quality\":" << format_double(r.quality) << "}\n";
  }
  write_file_bytes(path, os.str());
}

QualityFile read_qualities(const std::string& path) {
  QualityFile file;
  std::set<std::pair<std::string, std::string>> seen;
  read_jsonl(path, kFmtQualities, {}, &file.header,
             [&](std::size_t line_no, const json& row) {
               check_keys(row, {"prompt_id", "video_id", "quality"}, path,
                          line_no);
               QualityRow r;
               r.prompt_id = get_string(row, "prompt_id", path, line_no);
               require_nonempty(r.prompt_id, "prompt_id", path, line_no);
               r.video_id = get_string(row, "video_id", path, line_no);
               require_nonempty(r.video_id, "video_id", path, line_no);
               if (!seen.insert({r.prompt_id, r.video_id}).second) {
                 throw ParseError(path, line_no,
                                  "duplicate quality for prompt \"" + r.prompt_id +
                                      "\", video \"" + r.video_id + "\"");
               }
               r.quality = get_double(row, "quality", path, line_no);
               check_score_in_unit(r.quality, "quality", path, line_no);
               file.rows.push_back(std::move(r));
             });
  return file;
}

// ---------------------------------------------------------------------------
// Score table

void write_score_table(const ScoreTableFile& file, const std::string& path) {
  ArtifactHeader h = file.header;
  h.format_name = kFmtScoreTable;
  std::ostringstream os;
  os << header_line(h, "") << '\n';
  for (const auto& r : file.rows) {
    os << "{\"prompt_id\":" << quote(r.prompt_id)
       << ",\"video_id\":" << quote(r.video_id)
       << ",\"s_subj_raw\":" << format_double(r.s_subj_raw)
       << ",\"s_subj_norm\":" << format_double(r.s_subj_norm)
       << ",\"s_mech\":" << format_double(r.s_mech)
       << ",\"s_phy\":" << format_double(r.s_phy) << "}\n";
  }
  write_file_bytes(path, os.str());
}

ScoreTableFile read_score_table(const std::string& path) {
  ScoreTableFile file;
  std::set<std::string> seen;
  read_jsonl(path, kFmtScoreTable, {}, &file.header,
             [&](std::size_t line_no, const json& row) {
               check_keys(row,
                          {"prompt_id", "video_id", "s_subj_raw", "s_subj_norm",
                           "s_mech", "s_phy"},
                          path, line_no);
               ScoreRow r;
               r.prompt_id = get_string(row, "prompt_id", path, line_no);
               require_nonempty(r.prompt_id, "prompt_id", path, line_no);
               r.video_id = get_string(row, "video_id", path, line_no);
               require_nonempty(r.video_id, "video_id", path, line_no);
               if (!seen.insert(r.video_id).second) {
                 throw ParseError(path, line_no,
                                  "duplicate video_id \"" + r.video_id + "\"");
               }
               r.s_subj_raw = get_double(row, "s_subj_raw", path, line_no);
               if (r.s_subj_raw < -1.0 || r.s_subj_raw > 1.0) {
                 throw ParseError(path, line_no,
                                  "key \"s_subj_raw\" must lie in [-1, 1]");
               }
               r.s_subj_norm = get_double(row, "s_subj_norm", path, line_no);
               check_score_in_unit(r.s_subj_norm, "s_subj_norm", path, line_no);
               r.s_mech = get_double(row, "s_mech", path, line_no);
               check_mech_value(r.s_mech, path, line_no);
               r.s_phy = get_double(row, "s_phy", path, line_no);
               check_score_in_unit(r.s_phy, "s_phy", path, line_no);
               file.rows.push_back(std::move(r));
             });
  return file;
}

// ---------------------------------------------------------------------------
// Preference pairs

void write_preference_pairs(const PreferenceFile& file, const std::string& path) {
  ArtifactHeader h = file.header;
  h.format_name = kFmtPreferencePairs;
  std::string extras;
  if (file.reweight.has_value()) {
    const ReweightMetadata& m = *file.reweight;
    std::ostringstream ex;
    ex << "\"alpha\":" << format_double(m.alpha)
       << ",\"beta_mode\":" << quote(m.beta_mode)
       << ",\"beta_value\":" << format_double(m.beta_value)
       << ",\"bin_width\":" << format_double(m.bin_width)
       << ",\"total\":" << m.total;
    extras = ex.str();
  }
  std::ostringstream os;
  os << header_line(h, extras) << '\n';
  for (const auto& p : file.pairs) {
    os << "{\"prompt_id\":" << quote(p.prompt_id)
       << ",\"win_video_id\":" << quote(p.win_video_id)
       << ",\"lose_video_id\":" << quote(p.lose_video_id)
       << ",\"s_win\":" << format_double(p.s_win)
       << ",\"s_lose\":" << format_double(p.s_lose)
       << ",\"delta\":" << format_double(p.delta)
       << ",\"weight\":" << format_double(p.weight) << "}\n";
  }
  write_file_bytes(path, os.str());
}

PreferenceFile read_preference_pairs(const std::string& path) {
  PreferenceFile file;
  std::set<std::string> seen;
  json hj = read_jsonl(
      path, kFmtPreferencePairs,
      {"alpha", "beta_mode", "beta_value", "bin_width", "total"}, &file.header,
      [&](std::size_t line_no, const json& row) {
        check_keys(row,
                   {"prompt_id", "win_video_id", "lose_video_id", "s_win",
                    "s_lose", "delta", "weight"},
                   path, line_no);
        curation::PreferencePair p;
        p.prompt_id = get_string(row, "prompt_id", path, line_no);
        require_nonempty(p.prompt_id, "prompt_id", path, line_no);
        if (!seen.insert(p.prompt_id).second) {
          throw ParseError(path, line_no,
                           "duplicate pair for prompt \"" + p.prompt_id + "\"");
        }
        p.win_video_id = get_string(row, "win_video_id", path, line_no);
        p.lose_video_id = get_string(row, "lose_video_id", path, line_no);
        require_nonempty(p.win_video_id, "win_video_id", path, line_no);
        require_nonempty(p.lose_video_id, "lose_video_id", path, line_no);
        if (p.win_video_id == p.lose_video_id) {
          throw ParseError(path, line_no, "win and lose video must differ");
        }
        p.s_win = get_double(row, "s_win", path, line_no);
        p.s_lose = get_double(row, "s_lose", path, line_no);
        check_score_in_unit(p.s_win, "s_win", path, line_no);
        check_score_in_unit(p.s_lose, "s_lose", path, line_no);
        if (p.s_win < p.s_lose) {
          throw ParseError(path, line_no, "s_win must be >= s_lose");
        }
        p.delta = get_double(row, "delta", path, line_no);
        if (std::fabs(p.delta - (p.s_win - p.s_lose)) > 1e-8) {
          throw ParseError(path, line_no,
                           "delta is inconsistent with s_win - s_lose");
        }
        p.weight = get_double(row, "weight", path, line_no);
        if (p.weight <= 0.0) {
          throw ParseError(path, line_no, "key \"weight\" must be > 0");
        }
        file.pairs.push_back(std::move(p));
      });
  // The five reweighting keys travel together: all present or all absent.
  const std::initializer_list<const char*> meta_keys = {
      "alpha", "beta_mode", "beta_value", "bin_width", "total"};
  std::size_t present = 0;
  for (const char* k : meta_keys) {
    if (hj.contains(k)) {
      ++present;
    }
  }
  if (present > 0) {
    if (present != meta_keys.size()) {
      throw ParseError(path, 1, "incomplete reweighting metadata in header");
    }
    ReweightMetadata m;
    m.alpha = get_double(hj, "alpha", path, 1);
    if (m.alpha < 0.0) {
      throw ParseError(path, 1, "key \"alpha\" must be >= 0");
    }
    m.beta_mode = get_string(hj, "beta_mode", path, 1);
    if (m.beta_mode != "computed_max_density" && m.beta_mode != "fixed") {
      throw ParseError(path, 1,
                       "key \"beta_mode\" must be \"computed_max_density\" or "
                       "\"fixed\"");
    }
    m.beta_value = get_double(hj, "beta_value", path, 1);
    if (m.beta_value <= 0.0) {
      throw ParseError(path, 1, "key \"beta_value\" must be > 0");
    }
    m.bin_width = get_double(hj, "bin_width", path, 1);
    if (m.bin_width <= 0.0 || m.bin_width > 1.0) {
      throw ParseError(path, 1, "key \"bin_width\" must lie in (0, 1]");
    }
    long long total = get_integer(hj, "total", path, 1);
    if (total < 1) {
      throw ParseError(path, 1, "key \"total\" must be >= 1");
    }
    m.total = static_cast<std::uint64_t>(total);
    file.reweight = m;
  }
  return file;
}

// ---------------------------------------------------------------------------
// Histogram report

HistogramReportFile make_histogram_report(const phydpo::ScoreHistogram& hist,
                                          const std::string& corpus_id) {
  HistogramReportFile file;
  file.header = make_header(kFmtHistogramReport, corpus_id);
  file.bin_width = hist.bin_width;
  file.total = hist.total;
  for (std::size_t k = 0; k < hist.counts.size(); ++k) {
    if (hist.counts[k] == 0) {
      continue;
    }
    HistogramRow row;
    row.bin_start = static_cast<double>(k) * hist.bin_width;
    row.count = hist.counts[k];
    row.density = static_cast<double>(hist.counts[k]) /
                  (static_cast<double>(hist.total) * hist.bin_width);
    file.rows.push_back(row);
  }
  return file;
}

void write_histogram_report(const HistogramReportFile& file,
                            const std::string& path) {
  ArtifactHeader h = file.header;
  h.format_name = kFmtHistogramReport;
  std::ostringstream ex;
  ex << "\"bin_width\":" << format_double(file.bin_width)
     << ",\"total\":" << file.total;
  std::ostringstream os;
  os << "# " << header_line(h, ex.str()) << '\n';
  os << "# bin_start\tcount\tdensity\n";
  for (const auto& row : file.rows) {
    os << format_double(row.bin_start) << '\t' << row.count << '\t'
       << format_double(row.density) << '\n';
  }
  write_file_bytes(path, os.str());
}

HistogramReportFile read_histogram_report(const std::string& path) {
  std::vector<std::string> lines = read_file_lines(path);
  if (lines.empty() || lines[0].rfind("# ", 0) != 0) {
    throw ParseError(path, 1, "expected a \"# \" header line");
  }
  HistogramReportFile file;
  json hj = parse_json_object(path, 1, lines[0].substr(2));
  file.header =
      parse_header_object(hj, path, kFmtHistogramReport, {"bin_width", "total"});
  file.bin_width = get_double(hj, "bin_width", path, 1);
  if (file.bin_width <= 0.0 || file.bin_width > 1.0) {
    throw ParseError(path, 1, "key \"bin_width\" must lie in (0, 1]");
  }
  long long total = get_integer(hj, "total", path, 1);
  if (total < 1) {
    throw ParseError(path, 1, "key \"total\" must be >= 1");
  }
  file.total = static_cast<std::uint64_t>(total);

  std::uint64_t count_sum = 0;
  double last_start = -1.0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      if (i + 1 == lines.size()) {
        continue;
      }
      throw ParseError(path, i + 1, "blank line inside artifact body");
    }
    if (lines[i].rfind("# ", 0) == 0) {
      continue;  // column comment
    }
    std::vector<std::string> cells = split_tabs(lines[i]);
    if (cells.size() != 3) {
      throw ParseError(path, i + 1, "expected 3 columns, found " +
                                        std::to_string(cells.size()));
    }
    HistogramRow row;
    row.bin_start = parse_double_token(path, i + 1, cells[0]);
    if (row.bin_start < 0.0 || row.bin_start >= 1.0) {
      throw ParseError(path, i + 1, "bin_start must lie in [0, 1)");
    }
    if (row.bin_start <= last_start) {
      throw ParseError(path, i + 1, "bin_start values must be increasing");
    }
    last_start = row.bin_start;
    long long count = parse_int_token(path, i + 1, cells[1]);
    if (count < 1) {
      throw ParseError(path, i + 1, "count must be >= 1");
    }
    row.count = static_cast<std::uint64_t>(count);
    row.density = parse_double_token(path, i + 1, cells[2]);
    double expected = static_cast<double>(row.count) /
                      (static_cast<double>(file.total) * file.bin_width);
    if (std::fabs(row.density - expected) > 1e-6 * std::max(1.0, expected)) {
      throw ParseError(path, i + 1, "density is inconsistent with count/total");
    }
    count_sum += row.count;
    file.rows.push_back(row);
  }
  if (count_sum != file.total) {
    throw ParseError(path, lines.size(),
                     "bin counts sum to " + std::to_string(count_sum) +
                         " but the header total is " + std::to_string(file.total));
  }
  return file;
}

// ---------------------------------------------------------------------------
// Training trace

TraceFile make_trace(const std::vector<double>& losses,
                     const std::string& corpus_id) {
  TraceFile file;
  file.header = make_header(kFmtTrainingTrace, corpus_id);
  file.rows.reserve(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    file.rows.push_back({static_cast<int>(i), losses[i]});
  }
  return file;
}

void write_trace(const TraceFile& file, const std::string& path) {
  ArtifactHeader h = file.header;
  h.format_name = kFmtTrainingTrace;
  std::ostringstream os;
  os << "# " << header_line(h, "") << '\n';
  os << "# step\tloss\n";
  for (const auto& row : file.rows) {
    os << row.step << '\t' << format_double(row.loss) << '\n';
  }
  write_file_bytes(path, os.str());
}

TraceFile read_trace(const std::string& path) {
  TraceFile file;
  int expected_step = 0;
  read_tsv(path, kFmtTrainingTrace, {}, &file.header, 2,
           [&](std::size_t line_no, const std::vector<std::string>& cells) {
             TraceRow row;
             long long step = parse_int_token(path, line_no, cells[0]);
             if (step != expected_step) {
               throw ParseError(path, line_no,
                                "expected step " + std::to_string(expected_step) +
                                    ", found " + std::to_string(step));
             }
             row.step = static_cast<int>(step);
             ++expected_step;
             row.loss = parse_double_token(path, line_no, cells[1]);
             file.rows.push_back(row);
           });
  return file;
}

// ---------------------------------------------------------------------------
// Toy policy

void write_policy(const PolicyFile& file, const std::string& path) {
  ArtifactHeader h = file.header;
  h.format_name = kFmtToyPolicy;
  std::ostringstream os;
  os << header_line(h, "") << '\n';
  const phydpo::ToyPolicy& policy = file.policy;
  for (std::size_t p = 0; p < policy.prompt_count(); ++p) {
    os << "{\"prompt_id\":" << quote(policy.prompt_ids()[p]) << ",\"items\":[";
    const auto& items = policy.items(p);
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i > 0) {
        os << ',';
      }
      os << quote(items[i]);
    }
    os << "],\"logits\":[";
    const auto& logits = policy.logits(p);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      if (i > 0) {
        os << ',';
      }
      os << format_double(logits[i]);
    }
    os << "],\"ref_logits\":[";
    const auto& ref = policy.reference_logits(p);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (i > 0) {
        os << ',';
      }
      os << format_double(ref[i]);
    }
    os << "]}\n";
  }
  write_file_bytes(path, os.str());
}

PolicyFile read_policy(const std::string& path) {
  PolicyFile file;
  std::vector<std::string> prompt_ids;
  std::vector<std::vector<std::string>> items;
  std::vector<std::vector<double>> logits;
  std::vector<std::vector<double>> ref_logits;
  std::set<std::string> seen;
  read_jsonl(
      path, kFmtToyPolicy, {}, &file.header,
      [&](std::size_t line_no, const json& row) {
        check_keys(row, {"prompt_id", "items", "logits", "ref_logits"}, path,
                   line_no);
        std::string prompt_id = get_string(row, "prompt_id", path, line_no);
        require_nonempty(prompt_id, "prompt_id", path, line_no);
        if (!seen.insert(prompt_id).second) {
          throw ParseError(path, line_no,
                           "duplicate prompt_id \"" + prompt_id + "\"");
        }
        const json& jitems = require_field(row, "items", path, line_no);
        const json& jlogits = require_field(row, "logits", path, line_no);
        const json& jref = require_field(row, "ref_logits", path, line_no);
        if (!jitems.is_array() || !jlogits.is_array() || !jref.is_array()) {
          throw ParseError(path, line_no,
                           "items, logits and ref_logits must be arrays");
        }
        if (jitems.size() < 2 || jlogits.size() != jitems.size() ||
            jref.size() != jitems.size()) {
          throw ParseError(path, line_no,
                           "items, logits and ref_logits must have equal length >= 2");
        }
        std::vector<std::string> row_items;
        std::set<std::string> item_seen;
        for (const json& v : jitems) {
          if (!v.is_string()) {
            throw ParseError(path, line_no, "items must be strings");
          }
          std::string id = v.get<std::string>();
          require_nonempty(id, "items", path, line_no);
          if (!item_seen.insert(id).second) {
            throw ParseError(path, line_no, "duplicate item \"" + id + "\"");
          }
          row_items.push_back(std::move(id));
        }
        auto parse_numbers = [&](const json& arr, const char* key) {
          std::vector<double> out;
          for (const json& v : arr) {
            if (!v.is_number()) {
              throw ParseError(path, line_no,
                               std::string(key) + " entries must be numbers");
            }
            double d = v.get<double>();
            if (!std::isfinite(d)) {
              throw ParseError(path, line_no,
                               std::string(key) + " entries must be finite");
            }
            out.push_back(d);
          }
          return out;
        };
        prompt_ids.push_back(std::move(prompt_id));
        items.push_back(std::move(row_items));
        logits.push_back(parse_numbers(jlogits, "logits"));
        ref_logits.push_back(parse_numbers(jref, "ref_logits"));
      });
  if (prompt_ids.empty()) {
    throw ParseError(path, 2, "policy file holds no prompts");
  }
  file.policy = phydpo::ToyPolicy::from_logits(
      std::move(prompt_ids), std::move(items), std::move(logits),
      std::move(ref_logits));
  return file;
}

}  // namespace physcorr::io
