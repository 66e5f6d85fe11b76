// sttkit/pipeline.hpp
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
// Pipeline orchestration shared by the CLI subcommands: input validation,
// decode + normalize, streaming recognition, optional n-best rescoring,
// and diagnostics emission. Also the key=value config file reader.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sttkit/audio.hpp"
#include "sttkit/diagnostics.hpp"
#include "sttkit/engine_adapter.hpp"
#include "sttkit/errors.hpp"
#include "sttkit/evaluation.hpp"
#include "sttkit/export.hpp"
#include "sttkit/lang_model.hpp"
#include "sttkit/recognizer.hpp"

namespace sttkit {

struct PipelineConfig {
  std::string model_dir;
  std::string lm_path;
  double lm_weight = 1.0;
  std::string decoder_cmd;  // template with {in}/{out} placeholders
  int chunk_samples = 4000;
  EndpointConfig endpoint;
  double temperature = 1.0;
  ExportFormat format = ExportFormat::DOCX;
  bool include_timestamps = false;
  std::optional<std::string> title;
};

inline ExportFormat parse_export_format(const std::string& s) {
  if (s == "docx") return ExportFormat::DOCX;
  if (s == "txt") return ExportFormat::TXT;
  if (s == "json") return ExportFormat::JSON;
  fail(Err::InvalidParameter, "unknown export format: " + s + " (expected docx|txt|json)");
}

/// Plain `key = value` lines; `#` starts a comment. Whitespace around
/// keys and values is trimmed.
inline std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::FileNotFound, "cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto begin = s.find_first_not_of(" \t\r");
    const auto end = s.find_last_not_of(" \t\r");
    return begin == std::string::npos ? std::string() : s.substr(begin, end - begin + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(Err::InvalidParameter,
           "config line " + std::to_string(line_no) + ": expected key = value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

/// Apply config-file keys onto a config struct. Unknown keys are
/// rejected so typos fail loudly.
inline void apply_config_map(PipelineConfig& cfg, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    try {
      if (key == "model") cfg.model_dir = value;
      else if (key == "lm") cfg.lm_path = value;
      else if (key == "lm_weight") cfg.lm_weight = std::stod(value);
      else if (key == "decoder") cfg.decoder_cmd = value;
      else if (key == "chunk_samples") cfg.chunk_samples = std::stoi(value);
      else if (key == "format") cfg.format = parse_export_format(value);
      else if (key == "timestamps") cfg.include_timestamps = value == "true" || value == "1";
      else if (key == "title") cfg.title = value;
      else if (key == "rms_threshold") cfg.endpoint.rms_threshold = std::stod(value);
      else if (key == "hangover_ms") cfg.endpoint.hangover_samples = static_cast<int>(std::stod(value) * kPipelineRate / 1000.0);
      else if (key == "min_segment_ms") cfg.endpoint.min_segment_samples = static_cast<int>(std::stod(value) * kPipelineRate / 1000.0);
      else if (key == "temperature") cfg.temperature = std::stod(value);
      else fail(Err::InvalidParameter, "unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      fail(Err::InvalidParameter, "bad numeric value for config key " + key);
    }
  }
}

/// Decoder command resolution order: explicit config, then the
/// TRANSCRIBE_DECODER environment variable.
inline std::string resolve_decoder_command(const PipelineConfig& cfg) {
  if (!cfg.decoder_cmd.empty()) return cfg.decoder_cmd;
  const char* env = std::getenv("TRANSCRIBE_DECODER");
  return env ? env : "";
}

/// Validate, detect, decode (natively or via the external decoder), and
/// normalize one input file to 16 kHz mono.
inline AudioClip load_audio(const std::filesystem::path& path, const PipelineConfig& cfg) {
  if (!std::filesystem::exists(path)) fail(Err::FileNotFound, "input file not found: " + path.string());
  const auto bytes = read_file_bytes(path);
  if (bytes.size() < 12) fail(Err::TruncatedInput, path.string() + " is too short to classify");
  const FormatInfo info = detect_format(bytes);
  AudioClip clip;
  switch (info.container) {
    case Container::WAV:
      clip = decode_wav(bytes);
      break;
    case Container::MP3:
    case Container::FLAC:
    case Container::OGG:
      clip = decode_via_external(path, info, resolve_decoder_command(cfg));
      break;
    case Container::UNKNOWN:
      fail(Err::UnsupportedEncoding, path.string() + ": unrecognized container format");
  }
  return normalize_to_pipeline(clip);
}

/// Stream a normalized clip through a recognizer session in
/// chunk_samples pieces. The transcript is chunk-size independent.
inline Transcript transcribe_clip(const AudioClip& clip, const VocabularyModel& model,
                                  const PipelineConfig& cfg, const std::string& source) {
  if (cfg.chunk_samples < 1) fail(Err::InvalidParameter, "chunk_samples must be >= 1");
  SessionConfig session_cfg;
  session_cfg.endpoint = cfg.endpoint;
  session_cfg.temperature = cfg.temperature;
  session_cfg.source = source;
  auto session = open_session(model, session_cfg);
  const auto& samples = clip.mono();
  for (size_t off = 0; off < samples.size(); off += static_cast<size_t>(cfg.chunk_samples)) {
    const size_t len = std::min(static_cast<size_t>(cfg.chunk_samples), samples.size() - off);
    session.accept_frames({samples.data() + off, len});
  }
  return session.finalize();
}

/// Rescore every segment's n-best and promote the new top hypothesis to
/// the chosen words. Stored logscores become the combined scores, so the
/// non-increasing invariant keeps holding; word confidences keep their
/// acoustic calibration.
inline Transcript rescore_transcript(const Transcript& transcript, const NGramModel& lm,
                                     double lm_weight) {
  Transcript out = transcript;
  for (auto& seg : out.segments) {
    if (seg.nbest.empty()) continue;
    std::vector<std::pair<std::vector<std::string>, double>> nbest;
    nbest.reserve(seg.nbest.size());
    for (const auto& hyp : seg.nbest) nbest.emplace_back(hyp.tokens, hyp.acoustic_logscore);
    const auto scored = rescore(nbest, lm, {lm_weight, 1.0});

    std::vector<NBestHypothesis> reordered;
    std::vector<bool> used(seg.nbest.size(), false);
    for (const auto& s : scored) {
      for (size_t i = 0; i < seg.nbest.size(); ++i) {
        if (used[i] || seg.nbest[i].tokens != s.tokens ||
            seg.nbest[i].acoustic_logscore != s.acoustic_logscore)
          continue;
        used[i] = true;
        NBestHypothesis hyp = seg.nbest[i];
        hyp.acoustic_logscore = s.combined;
        reordered.push_back(std::move(hyp));
        break;
      }
    }
    const auto& top = reordered.front();

    std::vector<std::string> old_tokens;
    for (const auto& w : seg.words) old_tokens.push_back(w.text);
    if (top.tokens != old_tokens) {
      std::vector<WordResult> words;
      const double span = seg.t_end - seg.t_start;
      const double step = span / static_cast<double>(top.tokens.size());
      for (size_t i = 0; i < top.tokens.size(); ++i) {
        WordResult w;
        w.text = top.tokens[i];
        w.t_start = seg.t_start + step * static_cast<double>(i);
        w.t_end = seg.t_start + step * static_cast<double>(i + 1);
        w.confidence = i < top.token_confidences.size() ? top.token_confidences[i] : 0.0;
        words.push_back(std::move(w));
      }
      seg.words = std::move(words);
    }
    seg.nbest = std::move(reordered);
  }
  return out;
}

/// The full file-to-transcript path used by transcribe, diagnose, and
/// bench: decode + normalize, recognize, optionally rescore.
inline Transcript run_pipeline(const std::filesystem::path& input, const VocabularyModel& model,
                               const PipelineConfig& cfg,
                               const NGramModel* lm = nullptr) {
  const AudioClip clip = load_audio(input, cfg);
  Transcript transcript = transcribe_clip(clip, model, cfg, input.string());
  if (lm) transcript = rescore_transcript(transcript, *lm, cfg.lm_weight);
  return transcript;
}

/// Write a transcript in the configured format.
inline void export_transcript(const Transcript& transcript, const PipelineConfig& cfg,
                              const std::filesystem::path& output) {
  ExportOptions opts;
  opts.format = cfg.format;
  opts.include_timestamps = cfg.include_timestamps;
  opts.title = cfg.title;
  switch (cfg.format) {
    case ExportFormat::DOCX: {
      write_file_bytes(output, to_docx(transcript, opts));
      break;
    }
    case ExportFormat::TXT: {
      const std::string text = to_txt(transcript, opts);
      write_file_bytes(output, {reinterpret_cast<const uint8_t*>(text.data()), text.size()});
      break;
    }
    case ExportFormat::JSON: {
      const std::string text = to_json(transcript);
      write_file_bytes(output, {reinterpret_cast<const uint8_t*>(text.data()), text.size()});
      break;
    }
  }
}

/// Emit the diagnostic bundle. The posterior heatmap needs the reference
/// backend's model; engine-replay transcripts skip it.
inline void emit_diagnostics(const AudioClip& clip, const Transcript& transcript,
                             const VocabularyModel* model, const PipelineConfig& cfg,
                             const std::filesystem::path& out_dir) {
  emit_spectrogram(clip, out_dir);
  if (model) {
    const auto features = mfcc(clip.mono());
    emit_posterior_heatmap(posteriorgram(features, *model, cfg.temperature), out_dir);
  }
  emit_candles_csv(build_candles(transcript), out_dir);
}

/// Exit-code taxonomy used by the CLI: 2 missing inputs, 3 format
/// problems, 4 model loading, 5 external decoder, 6 output writing, 7
/// undefined WER, 1 anything else.
inline int exit_code_for(Err code) {
  switch (code) {
    case Err::FileNotFound:
    case Err::ManifestError:
      return 2;
    case Err::TruncatedInput:
    case Err::MalformedContainer:
    case Err::UnsupportedEncoding:
    case Err::MalformedEngineOutput:
    case Err::EmptyAudio:
    case Err::InsufficientAudio:
      return 3;
    case Err::InvalidModel:
      return 4;
    case Err::ExternalDecoderFailure:
      return 5;
    case Err::OutputError:
      return 6;
    case Err::UndefinedWer:
      return 7;
    case Err::InvalidParameter:
    case Err::InvalidCorpus:
    case Err::SessionClosed:
      return 1;
  }
  return 1;
}

}  // namespace sttkit
