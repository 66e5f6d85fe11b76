// sttkit/export.hpp
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
// Transcript serialization: minimal OOXML (.docx) package, plain text,
// and JSON. All three are byte-deterministic functions of their inputs.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sttkit/recognizer.hpp"
#include "sttkit/zip.hpp"

namespace sttkit {

enum class ExportFormat { DOCX, TXT, JSON };

struct ExportOptions {
  ExportFormat format = ExportFormat::DOCX;
  bool include_timestamps = false;
  std::optional<std::string> title;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string timestamp_prefix(double seconds) {
  const int total = static_cast<int>(seconds);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "[%d:%02d] ", total / 60, total % 60);
  return buf;
}

inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace detail

/// One line per segment, words joined by single spaces, optional
/// `[m:ss] ` prefixes, trailing newline iff there is any content.
inline std::string to_txt(const Transcript& t, const ExportOptions& opts = {}) {
  std::string out;
  for (const auto& seg : t.segments) {
    if (opts.include_timestamps) out += detail::timestamp_prefix(seg.t_start);
    out += seg.text();
    out += '\n';
  }
  return out;
}

/// Minimal three-part OOXML package: [Content_Types].xml, _rels/.rels,
/// word/document.xml. Each segment becomes one paragraph; entry order and
/// archive timestamps are fixed, so output bytes are stable.
inline std::vector<uint8_t> to_docx(const Transcript& t, const ExportOptions& opts = {}) {
  static const char* kContentTypes =
      "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>"
      "<Types xmlns=\"http://schemas.openxmlformats.org/package/2006/content-types\">"
      "<Default Extension=\"rels\" "
      "ContentType=\"application/vnd.openxmlformats-package.relationships+xml\"/>"
      "<Override PartName=\"/word/document.xml\" "
      "ContentType=\"application/"
      "vnd.openxmlformats-officedocument.wordprocessingml.document.main+xml\"/>"
      "</Types>";
  static const char* kRels =
      "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>"
      "<Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">"
      "<Relationship Id=\"rId1\" "
      "Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument\" "
      "Target=\"word/document.xml\"/>"
      "</Relationships>";

  auto paragraph = [](const std::string& text) {
    return "<w:p><w:r><w:t xml:space=\"preserve\">" + detail::xml_escape(text) +
           "</w:t></w:r></w:p>";
  };

  std::string body;
  if (opts.title && !opts.title->empty()) body += paragraph(*opts.title);
  for (const auto& seg : t.segments) {
    std::string line;
    if (opts.include_timestamps) line += detail::timestamp_prefix(seg.t_start);
    line += seg.text();
    body += paragraph(line);
  }

  const std::string document =
      "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>"
      "<w:document "
      "xmlns:w=\"http://schemas.openxmlformats.org/wordprocessingml/2006/main\">"
      "<w:body>" +
      body + "</w:body></w:document>";

  ZipWriter zip;
  zip.add("[Content_Types].xml", std::string(kContentTypes));
  zip.add("_rels/.rels", std::string(kRels));
  zip.add("word/document.xml", document);
  return zip.finish();
}

/// JSON schema: {source, model_id, segments: [{t_start, t_end, text,
/// words: [{word, start, end, conf}]}]} with fixed key order and numbers
/// rounded to six decimals.
inline std::string to_json(const Transcript& t) {
  nlohmann::ordered_json root;
  root["source"] = t.source;
  root["model_id"] = t.model_id;
  root["segments"] = nlohmann::ordered_json::array();
  for (const auto& seg : t.segments) {
    nlohmann::ordered_json s;
    s["t_start"] = detail::round6(seg.t_start);
    s["t_end"] = detail::round6(seg.t_end);
    s["text"] = seg.text();
    s["words"] = nlohmann::ordered_json::array();
    for (const auto& word : seg.words) {
      nlohmann::ordered_json w;
      w["word"] = word.text;
      w["start"] = detail::round6(word.t_start);
      w["end"] = detail::round6(word.t_end);
      w["conf"] = detail::round6(word.confidence);
      s["words"].push_back(std::move(w));
    }
    root["segments"].push_back(std::move(s));
  }
  return root.dump();
}

}  // namespace sttkit
