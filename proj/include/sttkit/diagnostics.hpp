// sttkit/diagnostics.hpp
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
// Diagnostic emitters: spectrogram image + matrix, unit posterior heatmap,
// and per-word confidence candle data. Every emitter writes data CSV next
// to any image so external plotting tools can reproduce the figures.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "sttkit/dsp.hpp"
#include "sttkit/errors.hpp"
#include "sttkit/evaluation.hpp"
#include "sttkit/recognizer.hpp"

namespace sttkit {

struct ConfidenceCandle {
  std::string word;
  double t_start = 0.0;
  double low = 0.0;
  double high = 0.0;
  double mean = 0.0;
  double close = 0.0;

  bool operator==(const ConfidenceCandle&) const = default;
};

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Err::OutputError, "cannot write " + path.string());
  out << text;
  if (!out) fail(Err::OutputError, "short write to " + path.string());
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    fail(Err::OutputError, "cannot create output directory " + dir.string());
}

inline std::string shortest_repr(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

struct SpectrogramConfig {
  FrameSpec frame{400, 160, Window::HANN, 512};
  double floor_db = -80.0;
};

/// Write spectrogram.pgm and spectrogram.csv (dB matrix, one row per
/// frame) for a normalized 16 kHz mono clip.
inline void emit_spectrogram(const AudioClip& clip, const std::filesystem::path& out_dir,
                             const SpectrogramConfig& cfg = {}) {
  detail::ensure_directory(out_dir);
  const auto db =
      power_to_db(stft_magnitude(clip.mono(), cfg.frame, clip.sample_rate), cfg.floor_db);
  write_file_bytes(out_dir / "spectrogram.pgm", spectrogram_pgm(db, cfg.floor_db));
  detail::write_text_file(out_dir / "spectrogram.csv", matrix_to_csv(db));
}

/// Write posteriors.csv (header row of unit labels, one row per frame)
/// and posteriors.pgm (rows = units, columns = time, gray = round(255 p)).
inline void emit_posterior_heatmap(const PosteriorGram& pg, const std::filesystem::path& out_dir) {
  detail::ensure_directory(out_dir);

  std::string csv;
  for (size_t u = 0; u < pg.units.size(); ++u) {
    if (u) csv += ',';
    csv += detail::csv_escape(pg.units[u]);
  }
  csv += '\n';
  for (const auto& row : pg.frames) {
    for (size_t u = 0; u < row.size(); ++u) {
      if (u) csv += ',';
      csv += detail::shortest_repr(row[u]);
    }
    csv += '\n';
  }
  detail::write_text_file(out_dir / "posteriors.csv", csv);

  const size_t width = pg.frames.size();
  const size_t height = pg.units.size();
  std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<uint8_t> pgm(header.begin(), header.end());
  for (size_t u = 0; u < height; ++u)
    for (size_t t = 0; t < width; ++t) {
      const double g = std::floor(255.0 * pg.frames[t][u] + 0.5);
      pgm.push_back(static_cast<uint8_t>(std::clamp(g, 0.0, 255.0)));
    }
  write_file_bytes(out_dir / "posteriors.pgm", pgm);
}

namespace detail {

/// Hypothesis-level confidences for one segment. Stored per-token values
/// win; hypotheses without them get softmax over the n-best logscores.
inline std::vector<double> hypothesis_confidences(const FinalSegment& seg) {
  std::vector<double> scores;
  scores.reserve(seg.nbest.size());
  for (const auto& hyp : seg.nbest) scores.push_back(hyp.acoustic_logscore);
  return softmax(scores, 1.0);
}

}  // namespace detail

/// Candle per chosen word: close is the chosen word's confidence; low,
/// high, and mean summarize the confidences assigned to that position
/// across all n-best hypotheses long enough to reach it (low/high always
/// cover close).
inline std::vector<ConfidenceCandle> build_candles(const Transcript& transcript) {
  std::vector<ConfidenceCandle> candles;
  for (const auto& seg : transcript.segments) {
    std::vector<double> fallback;
    for (size_t pos = 0; pos < seg.words.size(); ++pos) {
      std::vector<double> pool;
      for (size_t h = 0; h < seg.nbest.size(); ++h) {
        const auto& hyp = seg.nbest[h];
        if (hyp.tokens.size() <= pos) continue;
        if (pos < hyp.token_confidences.size()) {
          pool.push_back(hyp.token_confidences[pos]);
        } else {
          if (fallback.empty()) fallback = detail::hypothesis_confidences(seg);
          pool.push_back(fallback[h]);
        }
      }
      ConfidenceCandle candle;
      candle.word = seg.words[pos].text;
      candle.t_start = seg.words[pos].t_start;
      candle.close = seg.words[pos].confidence;
      if (pool.empty()) pool.push_back(candle.close);
      candle.low = std::min(*std::min_element(pool.begin(), pool.end()), candle.close);
      candle.high = std::max(*std::max_element(pool.begin(), pool.end()), candle.close);
      candle.mean = std::accumulate(pool.begin(), pool.end(), 0.0) /
                    static_cast<double>(pool.size());
      candles.push_back(std::move(candle));
    }
  }
  return candles;
}

/// confidence_candles.csv with header word,t_start,low,mean,close,high
/// and six-decimal fixed formatting.
inline void emit_candles_csv(const std::vector<ConfidenceCandle>& candles,
                             const std::filesystem::path& out_dir) {
  detail::ensure_directory(out_dir);
  std::string csv = "word,t_start,low,mean,close,high\n";
  char buf[160];
  for (const auto& c : candles) {
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.6f,%.6f,%.6f\n", c.t_start, c.low, c.mean,
                  c.close, c.high);
    csv += detail::csv_escape(c.word);
    csv += buf;
  }
  detail::write_text_file(out_dir / "confidence_candles.csv", csv);
}

}  // namespace sttkit
