// sttkit/recognizer.hpp
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
// Streaming recognition: energy endpointing, DTW template matching over a
// small vocabulary, n-best lists with softmax confidences, per-frame unit
// posteriors, and the incremental session that turns audio chunks into
// partial results and a final transcript.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sttkit/dsp.hpp"
#include "sttkit/errors.hpp"

namespace sttkit {

struct WordResult {
  std::string text;
  double t_start = 0.0;
  double t_end = 0.0;
  double confidence = 0.0;

  bool operator==(const WordResult&) const = default;
};

struct PartialResult {
  std::string text;
  bool stable = false;

  bool operator==(const PartialResult&) const = default;
};

/// One ranked hypothesis. token_confidences runs parallel to tokens when
/// the backend can attribute a confidence to each token position; it may
/// be empty for engines that only report a hypothesis-level score.
struct NBestHypothesis {
  std::vector<std::string> tokens;
  double acoustic_logscore = 0.0;
  std::vector<double> token_confidences;

  bool operator==(const NBestHypothesis&) const = default;
};

struct FinalSegment {
  std::vector<WordResult> words;
  std::vector<NBestHypothesis> nbest;  // best first, logscores non-increasing
  double t_start = 0.0;
  double t_end = 0.0;

  bool operator==(const FinalSegment&) const = default;

  std::string text() const {
    std::string out;
    for (size_t i = 0; i < words.size(); ++i) {
      if (i) out += ' ';
      out += words[i].text;
    }
    return out;
  }
};

struct Transcript {
  std::vector<FinalSegment> segments;
  std::string source;
  std::string model_id;

  bool operator==(const Transcript&) const = default;

  std::string text() const {
    std::string out;
    for (size_t i = 0; i < segments.size(); ++i) {
      if (i) out += ' ';
      out += segments[i].text();
    }
    return out;
  }
};

/// Word templates plus the ordered unit inventory used as the posterior
/// axis. Units keep their manifest order; entries are keyed by word.
struct VocabularyModel {
  std::vector<std::string> units;
  std::map<std::string, FeatureMatrix> entries;
  std::string model_id;
};

struct PosteriorGram {
  std::vector<std::string> units;
  std::vector<std::vector<double>> frames;  // each row sums to 1
  double frame_duration = 0.0;
};

struct EndpointConfig {
  double rms_threshold = 0.02;
  int window_len = 400;          // 25 ms at 16 kHz
  int hop = 160;                 // 10 ms
  int hangover_samples = 3200;   // 200 ms: shorter silences merge runs
  int min_segment_samples = 1600;  // 100 ms: shorter segments are dropped
};

namespace detail {

struct FrameRun {
  size_t first = 0;
  size_t last = 0;  // inclusive
};

/// Merge speech-frame runs separated by less than the hangover. No
/// minimum-length filtering here; callers apply it when materializing.
inline std::vector<FrameRun> merge_speech_runs(const std::vector<uint8_t>& speech,
                                               const EndpointConfig& cfg) {
  std::vector<FrameRun> runs;
  for (size_t f = 0; f < speech.size(); ++f) {
    if (!speech[f]) continue;
    if (!runs.empty()) {
      const size_t gap = f - runs.back().last - 1;
      if (static_cast<long long>(gap) * cfg.hop < cfg.hangover_samples) {
        runs.back().last = f;
        continue;
      }
    }
    if (!runs.empty() && runs.back().last == f - 1) {
      runs.back().last = f;
    } else {
      runs.push_back({f, f});
    }
  }
  return runs;
}

inline std::pair<int64_t, int64_t> run_sample_bounds(const FrameRun& run,
                                                     const EndpointConfig& cfg) {
  return {static_cast<int64_t>(run.first) * cfg.hop,
          static_cast<int64_t>(run.last) * cfg.hop + cfg.window_len};
}

inline double frame_rms(std::span<const double> samples, size_t start, int window_len) {
  double acc = 0.0;
  for (int i = 0; i < window_len; ++i) {
    const double v = samples[start + static_cast<size_t>(i)];
    acc += v * v;
  }
  return std::sqrt(acc / window_len);
}

/// Frames of observed silence needed after a run before no future audio
/// can merge with it.
inline size_t closing_silence_frames(const EndpointConfig& cfg) {
  return static_cast<size_t>((cfg.hangover_samples + cfg.hop - 1) / cfg.hop);
}

}  // namespace detail

/// Energy endpointing: RMS over 25 ms / 10 ms frames, speech where RMS
/// exceeds the threshold, runs separated by less than the hangover merged,
/// and segments shorter than the minimum dropped. Returns [start, end)
/// sample ranges.
inline std::vector<std::pair<int64_t, int64_t>> endpoint_segments(
    std::span<const double> samples, const EndpointConfig& cfg = {}) {
  std::vector<std::pair<int64_t, int64_t>> out;
  if (samples.size() < static_cast<size_t>(cfg.window_len)) return out;
  const size_t frames = (samples.size() - static_cast<size_t>(cfg.window_len)) /
                            static_cast<size_t>(cfg.hop) +
                        1;
  std::vector<uint8_t> speech(frames, 0);
  for (size_t f = 0; f < frames; ++f)
    speech[f] =
        detail::frame_rms(samples, f * static_cast<size_t>(cfg.hop), cfg.window_len) >
        cfg.rms_threshold;
  for (const auto& run : detail::merge_speech_runs(speech, cfg)) {
    auto [start, end] = detail::run_sample_bounds(run, cfg);
    end = std::min<int64_t>(end, static_cast<int64_t>(samples.size()));
    if (end - start >= cfg.min_segment_samples) out.emplace_back(start, end);
  }
  return out;
}

/// DTW with steps (1,1), (1,0), (0,1) over Euclidean frame distances,
/// returning accumulated cost divided by the number of cells on the
/// optimal path. Cost ties prefer the shorter path, then the diagonal,
/// which keeps the result symmetric in its arguments.
inline double dtw_distance(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.rows == 0 || b.rows == 0) fail(Err::InvalidParameter, "dtw inputs must be non-empty");
  if (a.cols != b.cols) fail(Err::InvalidParameter, "dtw inputs must share column count");

  const size_t n = a.rows, m = b.rows;
  std::vector<double> cost(n * m);
  std::vector<uint32_t> cells(n * m);
  auto dist = [&](size_t i, size_t j) {
    double acc = 0.0;
    const auto ra = a.row(i), rb = b.row(j);
    for (size_t c = 0; c < a.cols; ++c) {
      const double d = ra[c] - rb[c];
      acc += d * d;
    }
    return std::sqrt(acc);
  };

  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < m; ++j) {
      const double d = dist(i, j);
      const size_t idx = i * m + j;
      if (i == 0 && j == 0) {
        cost[idx] = d;
        cells[idx] = 1;
        continue;
      }
      double best_cost = std::numeric_limits<double>::infinity();
      uint32_t best_cells = 0;
      auto consider = [&](size_t pi, size_t pj) {
        const size_t p = pi * m + pj;
        if (cost[p] < best_cost || (cost[p] == best_cost && cells[p] < best_cells)) {
          best_cost = cost[p];
          best_cells = cells[p];
        }
      };
      if (i > 0 && j > 0) consider(i - 1, j - 1);
      if (i > 0) consider(i - 1, j);
      if (j > 0) consider(i, j - 1);
      cost[idx] = best_cost + d;
      cells[idx] = best_cells + 1;
    }
  }
  return cost[n * m - 1] / static_cast<double>(cells[n * m - 1]);
}

namespace detail {

/// softmax(values / tau), numerically stable.
inline std::vector<double> softmax(std::span<const double> values, double tau) {
  const double peak = *std::max_element(values.begin(), values.end());
  std::vector<double> out(values.size());
  double total = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp((values[i] - peak) / tau);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

inline double frame_to_template_distance(std::span<const double> frame,
                                         const FeatureMatrix& tmpl) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < tmpl.rows; ++j) {
    const auto row = tmpl.row(j);
    double acc = 0.0;
    for (size_t c = 0; c < frame.size(); ++c) {
      const double d = frame[c] - row[c];
      acc += d * d;
    }
    best = std::min(best, std::sqrt(acc));
  }
  return best;
}

}  // namespace detail

struct ClassifyResult {
  std::vector<NBestHypothesis> nbest;  // ascending DTW distance
  std::vector<std::vector<double>> posterior_rows;
};

/// Match features against every vocabulary template. The n-best carries
/// acoustic logscore -d and confidence softmax(-d/tau) per hypothesis;
/// posterior rows use the same softmax over per-frame nearest-template
/// distances, so each row sums to one.
inline ClassifyResult classify_segment(const FeatureMatrix& features, const VocabularyModel& model,
                                       double temperature = 1.0) {
  if (features.rows == 0) fail(Err::InvalidParameter, "cannot classify empty features");
  if (temperature <= 0.0) fail(Err::InvalidParameter, "temperature must be positive");
  if (model.units.empty()) fail(Err::InvalidModel, "model has no templates");

  const size_t n_units = model.units.size();
  std::vector<double> neg_dist(n_units);
  for (size_t u = 0; u < n_units; ++u)
    neg_dist[u] = -dtw_distance(features, model.entries.at(model.units[u]));
  const auto conf = detail::softmax(neg_dist, temperature);

  std::vector<size_t> order(n_units);
  for (size_t u = 0; u < n_units; ++u) order[u] = u;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t x, size_t y) { return neg_dist[x] > neg_dist[y]; });

  ClassifyResult result;
  for (size_t u : order) {
    NBestHypothesis hyp;
    hyp.tokens = {model.units[u]};
    hyp.acoustic_logscore = neg_dist[u];
    hyp.token_confidences = {conf[u]};
    result.nbest.push_back(std::move(hyp));
  }

  std::vector<double> frame_scores(n_units);
  for (size_t t = 0; t < features.rows; ++t) {
    for (size_t u = 0; u < n_units; ++u)
      frame_scores[u] =
          -detail::frame_to_template_distance(features.row(t), model.entries.at(model.units[u]));
    result.posterior_rows.push_back(detail::softmax(frame_scores, temperature));
  }
  return result;
}

/// Unit posteriors for a whole feature matrix (the heatmap data).
inline PosteriorGram posteriorgram(const FeatureMatrix& features, const VocabularyModel& model,
                                   double temperature = 1.0) {
  PosteriorGram pg;
  pg.units = model.units;
  pg.frame_duration = features.frame_duration;
  if (features.rows == 0) return pg;
  pg.frames = classify_segment(features, model, temperature).posterior_rows;
  return pg;
}

struct SessionConfig {
  EndpointConfig endpoint;
  double temperature = 1.0;
  std::string source;
  MfccConfig mfcc;
};

/// Incremental recognition session. Audio arrives in arbitrary chunk
/// sizes; a segment is recognized as soon as enough trailing silence has
/// been observed to prove no future audio can extend it, which makes the
/// final transcript independent of the chunking.
class RecognizerSession {
 public:
  static RecognizerSession open(VocabularyModel model, SessionConfig cfg) {
    if (model.units.size() < 2) fail(Err::InvalidModel, "need at least 2 vocabulary entries");
    for (const auto& unit : model.units) {
      const auto it = model.entries.find(unit);
      if (it == model.entries.end() || it->second.rows == 0)
        fail(Err::InvalidModel, "missing or empty template for unit " + unit);
    }
    RecognizerSession s;
    s.model_ = std::move(model);
    s.cfg_ = std::move(cfg);
    return s;
  }

  /// Replay-mode session fed by a pre-parsed transcript producer (the
  /// external-engine adapter). Audio chunks are accepted and ignored.
  static RecognizerSession adapter_replay(std::function<Transcript()> replay, SessionConfig cfg) {
    RecognizerSession s;
    s.replay_ = std::move(replay);
    s.cfg_ = std::move(cfg);
    return s;
  }

  std::optional<PartialResult> accept_frames(std::span<const double> chunk) {
    if (closed_) fail(Err::SessionClosed, "accept_frames after finalize");
    if (chunk.empty()) fail(Err::InvalidParameter, "chunk must contain at least one sample");
    if (replay_) return std::nullopt;

    buffer_.insert(buffer_.end(), chunk.begin(), chunk.end());
    ingest_new_frames();

    const auto runs = detail::merge_speech_runs(speech_, cfg_.endpoint);
    const size_t closing = detail::closing_silence_frames(cfg_.endpoint);
    bool changed = false;
    while (processed_runs_ < runs.size()) {
      const auto& run = runs[processed_runs_];
      if (run.last + closing + 1 > speech_.size()) break;  // may still grow or merge
      changed |= commit_run(run);
      ++processed_runs_;
    }
    if (!changed) return std::nullopt;
    return PartialResult{joined_text(), true};
  }

  Transcript finalize() {
    if (closed_) fail(Err::SessionClosed, "finalize called twice");
    closed_ = true;
    if (replay_) return replay_();

    const auto runs = detail::merge_speech_runs(speech_, cfg_.endpoint);
    for (size_t r = processed_runs_; r < runs.size(); ++r) commit_run(runs[r]);
    processed_runs_ = runs.size();

    Transcript t;
    t.segments = segments_;
    t.source = cfg_.source;
    t.model_id = model_.model_id;
    return t;
  }

 private:
  RecognizerSession() = default;

  void ingest_new_frames() {
    const auto& ep = cfg_.endpoint;
    while (next_frame_start_ + static_cast<size_t>(ep.window_len) <= buffer_.size()) {
      speech_.push_back(detail::frame_rms(buffer_, next_frame_start_, ep.window_len) >
                        ep.rms_threshold);
      next_frame_start_ += static_cast<size_t>(ep.hop);
    }
  }

  /// Classify one closed run; returns whether a segment was added.
  bool commit_run(const detail::FrameRun& run) {
    const auto& ep = cfg_.endpoint;
    auto [start, end] = detail::run_sample_bounds(run, ep);
    end = std::min<int64_t>(end, static_cast<int64_t>(buffer_.size()));
    if (end - start < ep.min_segment_samples) return false;

    std::span<const double> samples(buffer_.data() + start, static_cast<size_t>(end - start));
    const FeatureMatrix features = mfcc(samples, cfg_.mfcc);
    auto result = classify_segment(features, model_, cfg_.temperature);

    FinalSegment seg;
    seg.t_start = static_cast<double>(start) / cfg_.mfcc.sample_rate;
    seg.t_end = static_cast<double>(end) / cfg_.mfcc.sample_rate;
    const auto& top = result.nbest.front();
    seg.words.push_back(
        {top.tokens.front(), seg.t_start, seg.t_end, top.token_confidences.front()});
    seg.nbest = std::move(result.nbest);
    segments_.push_back(std::move(seg));
    return true;
  }

  std::string joined_text() const {
    std::string out;
    for (const auto& seg : segments_) {
      if (!out.empty()) out += ' ';
      out += seg.text();
    }
    return out;
  }

  VocabularyModel model_;
  SessionConfig cfg_;
  std::function<Transcript()> replay_;
  std::vector<double> buffer_;
  std::vector<uint8_t> speech_;
  size_t next_frame_start_ = 0;
  size_t processed_runs_ = 0;
  std::vector<FinalSegment> segments_;
  bool closed_ = false;
};

inline RecognizerSession open_session(VocabularyModel model, SessionConfig cfg = {}) {
  return RecognizerSession::open(std::move(model), std::move(cfg));
}

namespace detail {

inline std::string sanitize_filename(const std::string& word) {
  std::string out;
  for (char c : word)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

}  // namespace detail

/// Model directory layout: manifest.txt holds an optional `model_id <id>`
/// line plus one `<word> <template-file>` line per unit; templates are
/// numeric CSV matrices next to the manifest.
inline void save_vocabulary_model(const VocabularyModel& model,
                                  const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream manifest(dir / "manifest.txt", std::ios::binary);
  if (!manifest) fail(Err::OutputError, "cannot write manifest in " + dir.string());
  manifest << "model_id " << model.model_id << "\n";
  for (size_t u = 0; u < model.units.size(); ++u) {
    const std::string file =
        std::to_string(u) + "_" + detail::sanitize_filename(model.units[u]) + ".csv";
    manifest << model.units[u] << " " << file << "\n";
    std::ofstream tmpl(dir / file, std::ios::binary);
    if (!tmpl) fail(Err::OutputError, "cannot write template " + file);
    tmpl << matrix_to_csv(model.entries.at(model.units[u]));
  }
}

inline VocabularyModel load_vocabulary_model(const std::filesystem::path& dir,
                                             double frame_duration = 0.01) {
  std::ifstream manifest(dir / "manifest.txt", std::ios::binary);
  if (!manifest) fail(Err::InvalidModel, "no manifest.txt in " + dir.string());
  VocabularyModel model;
  model.model_id = dir.filename().string();
  std::string line;
  size_t line_no = 0;
  std::optional<size_t> cols;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string first, second;
    if (!(row >> first >> second))
      fail(Err::InvalidModel, "manifest line " + std::to_string(line_no) + " is malformed");
    if (first == "model_id") {
      model.model_id = second;
      continue;
    }
    if (model.entries.count(first))
      fail(Err::InvalidModel, "duplicate vocabulary word " + first);
    std::ifstream tmpl_file(dir / second, std::ios::binary);
    if (!tmpl_file)
      fail(Err::InvalidModel, "missing template file " + second + " for word " + first);
    std::string csv((std::istreambuf_iterator<char>(tmpl_file)),
                    std::istreambuf_iterator<char>());
    FeatureMatrix tmpl;
    try {
      tmpl = matrix_from_csv(csv, frame_duration);
    } catch (const SttError&) {
      fail(Err::InvalidModel, "template " + second + " is not a numeric CSV matrix");
    }
    if (tmpl.rows == 0) fail(Err::InvalidModel, "template " + second + " is empty");
    if (cols && tmpl.cols != *cols)
      fail(Err::InvalidModel, "template " + second + " has inconsistent column count");
    cols = tmpl.cols;
    model.units.push_back(first);
    model.entries.emplace(first, std::move(tmpl));
  }
  if (model.units.empty()) fail(Err::InvalidModel, "manifest lists no vocabulary entries");
  return model;
}

}  // namespace sttkit
