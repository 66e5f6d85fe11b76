// sttkit/engine_adapter.hpp
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
// Adapter for real recognition engines: parses the line-delimited JSON
// word records that Kaldi-style recognizers emit, so their output flows
// through the same rescoring, export, evaluation, and diagnostics paths
// as the built-in backend.

#pragma once

#include <algorithm>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sttkit/errors.hpp"
#include "sttkit/recognizer.hpp"

namespace sttkit {

/// Parse engine output where each line is a JSON object. Lines with a
/// `partial` key (or without a `result` array, e.g. empty finals) carry
/// no transcript content and are skipped. Every final line must hold
/// `result`: [{word, start, end, conf}, ...] and `text`; confidences
/// outside [0, 1] are clamped with a note appended to `warnings`.
inline Transcript parse_engine_jsonl(std::istream& in, const std::string& source = "",
                                     const std::string& model_id = "engine",
                                     std::vector<std::string>* warnings = nullptr) {
  Transcript transcript;
  transcript.source = source;
  transcript.model_id = model_id;

  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    nlohmann::json record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object())
      fail(Err::MalformedEngineOutput, "line " + std::to_string(line_no) + ": not a JSON object");
    if (!record.contains("result")) continue;  // partials and empty finals

    const auto& result = record["result"];
    if (!result.is_array())
      fail(Err::MalformedEngineOutput, "line " + std::to_string(line_no) + ": result is not an array");
    if (result.empty()) continue;

    FinalSegment segment;
    NBestHypothesis hyp;
    for (const auto& item : result) {
      if (!item.is_object() || !item.contains("word") || !item.contains("start") ||
          !item.contains("end") || !item.contains("conf") || !item["word"].is_string() ||
          !item["start"].is_number() || !item["end"].is_number() || !item["conf"].is_number())
        fail(Err::MalformedEngineOutput,
             "line " + std::to_string(line_no) + ": word record missing word/start/end/conf");
      WordResult word;
      word.text = item["word"].get<std::string>();
      word.t_start = item["start"].get<double>();
      word.t_end = item["end"].get<double>();
      word.confidence = item["conf"].get<double>();
      if (word.t_start > word.t_end)
        fail(Err::MalformedEngineOutput,
             "line " + std::to_string(line_no) + ": word start exceeds end");
      if (word.confidence < 0.0 || word.confidence > 1.0) {
        if (warnings)
          warnings->push_back("line " + std::to_string(line_no) + ": confidence " +
                              std::to_string(word.confidence) + " clamped for word " + word.text);
        word.confidence = std::clamp(word.confidence, 0.0, 1.0);
      }
      hyp.tokens.push_back(word.text);
      hyp.token_confidences.push_back(word.confidence);
      segment.words.push_back(std::move(word));
    }
    segment.t_start = segment.words.front().t_start;
    segment.t_end = segment.words.back().t_end;
    hyp.acoustic_logscore = 0.0;  // single-hypothesis n-best
    segment.nbest.push_back(std::move(hyp));
    transcript.segments.push_back(std::move(segment));
  }

  std::stable_sort(transcript.segments.begin(), transcript.segments.end(),
                   [](const FinalSegment& a, const FinalSegment& b) { return a.t_start < b.t_start; });
  return transcript;
}

inline Transcript parse_engine_jsonl(const std::string& text, const std::string& source = "",
                                     const std::string& model_id = "engine",
                                     std::vector<std::string>* warnings = nullptr) {
  std::istringstream in(text);
  return parse_engine_jsonl(in, source, model_id, warnings);
}

/// Session whose finalize() replays a parsed engine stream; accept_frames
/// accepts and discards audio. Parsing happens eagerly so malformed input
/// surfaces at open time.
inline RecognizerSession open_adapter_session(const std::string& jsonl_text, SessionConfig cfg = {},
                                              const std::string& model_id = "engine") {
  Transcript parsed = parse_engine_jsonl(jsonl_text, cfg.source, model_id);
  return RecognizerSession::adapter_replay([parsed]() { return parsed; }, std::move(cfg));
}

}  // namespace sttkit
