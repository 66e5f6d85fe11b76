// sttkit/evaluation.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Word error rate: tokenization, minimum-edit-distance alignment, WER
// accounting, plus the benchmark harness that aggregates per-domain WER,
// per-sample accuracy, and the dataset format histogram.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sttkit/audio.hpp"
#include "sttkit/errors.hpp"

namespace sttkit {

/// Lowercase, strip leading/trailing punctuation (.,!?;:"'() ) from each
/// whitespace-separated token, and drop tokens that become empty.
/// Interior punctuation (it's, 16khz) is preserved.
inline std::vector<std::string> normalize_tokens(const std::string& text) {
  static const std::string kStrip = ".,!?;:\"'()";
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    size_t begin = 0, end = tok.size();
    while (begin < end && kStrip.find(tok[begin]) != std::string::npos) ++begin;
    while (end > begin && kStrip.find(tok[end - 1]) != std::string::npos) --end;
    if (begin == end) continue;
    std::string word = tok.substr(begin, end - begin);
    for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(std::move(word));
  }
  return out;
}

enum class EditOp { MATCH, SUB, DEL, INS };

inline const char* edit_op_name(EditOp op) {
  switch (op) {
    case EditOp::MATCH: return "MATCH";
    case EditOp::SUB: return "SUB";
    case EditOp::DEL: return "DEL";
    case EditOp::INS: return "INS";
  }
  return "?";
}

/// Unit-cost minimum edit distance alignment. Backtrace ties prefer
/// MATCH/SUB over DEL over INS, which makes the op sequence deterministic
/// (the distance itself is tie-independent).
inline std::vector<EditOp> align(const std::vector<std::string>& ref,
                                 const std::vector<std::string>& hyp) {
  const size_t R = ref.size(), H = hyp.size();
  std::vector<std::vector<uint32_t>> d(R + 1, std::vector<uint32_t>(H + 1, 0));
  for (size_t i = 1; i <= R; ++i) d[i][0] = static_cast<uint32_t>(i);
  for (size_t j = 1; j <= H; ++j) d[0][j] = static_cast<uint32_t>(j);
  for (size_t i = 1; i <= R; ++i) {
    for (size_t j = 1; j <= H; ++j) {
      const uint32_t sub_cost = ref[i - 1] == hyp[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j - 1] + sub_cost, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }

  std::vector<EditOp> ops;
  ops.reserve(std::max(R, H));
  size_t i = R, j = H;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const uint32_t sub_cost = ref[i - 1] == hyp[j - 1] ? 0 : 1;
      if (d[i][j] == d[i - 1][j - 1] + sub_cost) {
        ops.push_back(sub_cost == 0 ? EditOp::MATCH : EditOp::SUB);
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ops.push_back(EditOp::DEL);
      --i;
      continue;
    }
    ops.push_back(EditOp::INS);
    --j;
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

struct WerReport {
  uint64_t substitutions = 0;
  uint64_t deletions = 0;
  uint64_t insertions = 0;
  uint64_t ref_len = 0;
  double wer = 0.0;

  bool operator==(const WerReport&) const = default;
};

/// WER = (S + D + I) / N over the minimum-edit alignment. Empty reference
/// with empty hypothesis is a zero report; empty reference against a
/// non-empty hypothesis has no defined rate.
inline WerReport wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  if (ref.empty() && hyp.empty()) return {};
  if (ref.empty()) fail(Err::UndefinedWer, "empty reference with non-empty hypothesis");
  WerReport report;
  report.ref_len = ref.size();
  for (EditOp op : align(ref, hyp)) {
    switch (op) {
      case EditOp::SUB: ++report.substitutions; break;
      case EditOp::DEL: ++report.deletions; break;
      case EditOp::INS: ++report.insertions; break;
      case EditOp::MATCH: break;
    }
  }
  report.wer = static_cast<double>(report.substitutions + report.deletions + report.insertions) /
               static_cast<double>(report.ref_len);
  return report;
}

enum class Domain { Technical, Educational, Business, Media };

inline const char* domain_name(Domain d) {
  switch (d) {
    case Domain::Technical: return "Technical";
    case Domain::Educational: return "Educational";
    case Domain::Business: return "Business";
    case Domain::Media: return "Media";
  }
  return "?";
}

inline Domain parse_domain(const std::string& s) {
  for (Domain d : {Domain::Technical, Domain::Educational, Domain::Business, Domain::Media})
    if (s == domain_name(d)) return d;
  fail(Err::ManifestError, "unknown domain tag: " + s);
}

struct BenchEntry {
  std::string audio;
  std::string reference;
  Domain domain = Domain::Technical;
  Container format = Container::UNKNOWN;
};

namespace detail {

/// RFC-4180-style field splitting with double-quote escaping.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline Container parse_container_tag(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (Container c : {Container::WAV, Container::MP3, Container::FLAC, Container::OGG,
                      Container::UNKNOWN})
    if (s == container_name(c)) return c;
  fail(Err::ManifestError, "unknown container format: " + s);
}

}  // namespace detail

/// Load a benchmark manifest: CSV with header `audio,reference,domain,format`.
/// Domain tags come from the closed four-domain set; empty audio paths or
/// references are rejected.
inline std::vector<BenchEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::ManifestError, "cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(Err::ManifestError, "manifest is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "audio,reference,domain,format")
    fail(Err::ManifestError, "manifest header must be audio,reference,domain,format");

  std::vector<BenchEntry> entries;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 4)
      fail(Err::ManifestError, "line " + std::to_string(line_no) + ": expected 4 fields");
    BenchEntry e;
    e.audio = fields[0];
    e.reference = fields[1];
    e.domain = parse_domain(fields[2]);
    e.format = detail::parse_container_tag(fields[3]);
    if (e.audio.empty())
      fail(Err::ManifestError, "line " + std::to_string(line_no) + ": empty audio path");
    if (e.reference.empty())
      fail(Err::ManifestError, "line " + std::to_string(line_no) + ": empty reference");
    entries.push_back(std::move(e));
  }
  return entries;
}

struct BenchPipeline {
  std::string model_id;
  /// Returns the hypothesis transcript text for one audio file; may throw.
  std::function<std::string(const std::string& audio_path)> transcribe;
};

struct BenchError {
  size_t sample_index = 0;
  std::string model_id;  // empty for file-level problems
  std::string message;
};

struct DomainReport {
  std::vector<std::string> model_ids;
  /// mean_wer[domain][model_id], only for domains present in the manifest.
  std::map<Domain, std::map<std::string, double>> mean_wer;
  /// accuracy[model][sample] = 1 - WER, in manifest order; length always
  /// equals the manifest entry count.
  std::vector<std::vector<double>> accuracy;
  std::map<Container, size_t> format_histogram;
  std::vector<BenchError> errors;
};

/// Run every pipeline over every manifest entry. A failing entry is
/// recorded (and scored as an empty hypothesis, WER 1) without aborting
/// the rest. Results depend only on manifest order, not evaluation order.
inline DomainReport bench_run(const std::vector<BenchEntry>& manifest,
                              const std::vector<BenchPipeline>& pipelines) {
  if (pipelines.empty()) fail(Err::InvalidParameter, "need at least one pipeline");
  DomainReport report;
  for (const auto& p : pipelines) report.model_ids.push_back(p.model_id);
  report.accuracy.assign(pipelines.size(), {});
  for (Container c : {Container::WAV, Container::MP3, Container::FLAC, Container::OGG,
                      Container::UNKNOWN})
    report.format_histogram[c] = 0;

  std::map<Domain, std::map<std::string, std::pair<double, size_t>>> sums;

  for (size_t idx = 0; idx < manifest.size(); ++idx) {
    const auto& entry = manifest[idx];
    Container detected = Container::UNKNOWN;
    try {
      const auto bytes = read_file_bytes(entry.audio);
      if (bytes.size() >= 12) detected = detect_format(bytes).container;
    } catch (const std::exception& e) {
      report.errors.push_back({idx, "", std::string("format detection: ") + e.what()});
    }
    ++report.format_histogram[detected];

    const auto ref_tokens = normalize_tokens(entry.reference);
    for (size_t m = 0; m < pipelines.size(); ++m) {
      std::vector<std::string> hyp_tokens;
      try {
        hyp_tokens = normalize_tokens(pipelines[m].transcribe(entry.audio));
      } catch (const std::exception& e) {
        report.errors.push_back({idx, pipelines[m].model_id, e.what()});
        hyp_tokens.clear();  // scored as an empty hypothesis
      }
      double sample_wer = 1.0;
      try {
        sample_wer = wer(ref_tokens, hyp_tokens).wer;
      } catch (const SttError& e) {
        report.errors.push_back({idx, pipelines[m].model_id, e.what()});
      }
      report.accuracy[m].push_back(1.0 - sample_wer);
      auto& [sum, count] = sums[entry.domain][pipelines[m].model_id];
      sum += sample_wer;
      ++count;
    }
  }

  for (const auto& [domain, per_model] : sums)
    for (const auto& [model_id, acc] : per_model)
      report.mean_wer[domain][model_id] = acc.first / static_cast<double>(acc.second);
  return report;
}

namespace detail {

inline std::string format_fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail

/// Write the three report CSVs (plus errors.csv) into out_dir.
inline void write_bench_reports(const DomainReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);

  auto open = [&](const char* name) {
    std::ofstream out(out_dir / name, std::ios::binary);
    if (!out) fail(Err::OutputError, std::string("cannot write ") + name);
    return out;
  };

  {
    auto out = open("domain_wer.csv");
    out << "domain";
    for (const auto& id : report.model_ids) out << "," << detail::csv_escape(id);
    out << "\n";
    for (const auto& [domain, per_model] : report.mean_wer) {
      out << domain_name(domain);
      for (const auto& id : report.model_ids) {
        const auto it = per_model.find(id);
        out << ",";
        if (it != per_model.end()) out << detail::format_fixed6(it->second);
      }
      out << "\n";
    }
  }
  {
    auto out = open("accuracy_trend.csv");
    out << "sample_index,model_id,accuracy\n";
    for (size_t m = 0; m < report.model_ids.size(); ++m)
      for (size_t i = 0; i < report.accuracy[m].size(); ++i)
        out << i << "," << detail::csv_escape(report.model_ids[m]) << ","
            << detail::format_fixed6(report.accuracy[m][i]) << "\n";
  }
  {
    auto out = open("format_histogram.csv");
    out << "format,count\n";
    for (Container c : {Container::WAV, Container::MP3, Container::FLAC, Container::OGG,
                        Container::UNKNOWN}) {
      const auto it = report.format_histogram.find(c);
      out << container_name(c) << "," << (it == report.format_histogram.end() ? 0 : it->second)
          << "\n";
    }
  }
  {
    auto out = open("errors.csv");
    out << "sample_index,model_id,error\n";
    for (const auto& e : report.errors)
      out << e.sample_index << "," << detail::csv_escape(e.model_id) << ","
          << detail::csv_escape(e.message) << "\n";
  }
}

}  // namespace sttkit
