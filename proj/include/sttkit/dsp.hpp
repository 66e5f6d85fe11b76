// sttkit/dsp.hpp
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
// Frame-based spectral analysis: STFT magnitudes, mel filterbank, MFCCs,
// and the grayscale PGM spectrogram rendering.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sttkit/audio.hpp"
#include "sttkit/errors.hpp"

namespace sttkit {

enum class Window { HANN, RECT };

struct FrameSpec {
  int window_len = 400;
  int hop = 160;
  Window window = Window::HANN;
  int fft_size = 512;

  void validate() const {
    if (!(0 < hop && hop <= window_len && window_len <= fft_size))
      fail(Err::InvalidParameter, "need 0 < hop <= window_len <= fft_size");
    if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0)
      fail(Err::InvalidParameter, "fft_size must be a power of two");
  }
};

/// Row-major frames-by-coefficients grid. frame_duration is the hop
/// period in seconds (0 when the matrix has no time axis).
struct FeatureMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> values;
  double frame_duration = 0.0;

  bool operator==(const FeatureMatrix&) const = default;

  static FeatureMatrix zeros(size_t rows, size_t cols, double frame_duration = 0.0) {
    FeatureMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.values.assign(rows * cols, 0.0);
    m.frame_duration = frame_duration;
    return m;
  }

  double& at(size_t r, size_t c) { return values[r * cols + c]; }
  double at(size_t r, size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(size_t r) const { return {values.data() + r * cols, cols}; }
  std::span<double> row(size_t r) { return {values.data() + r * cols, cols}; }
};

namespace detail {

/// Iterative radix-2 Cooley-Tukey, in place. Size must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  if (n < 2) return;
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

inline std::vector<double> make_window(Window w, int len) {
  std::vector<double> win(static_cast<size_t>(len), 1.0);
  if (w == Window::HANN && len > 1) {
    for (int i = 0; i < len; ++i)
      win[static_cast<size_t>(i)] =
          0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (len - 1));
  }
  return win;
}

}  // namespace detail

inline size_t stft_frame_count(size_t n_samples, const FrameSpec& spec) {
  if (n_samples < static_cast<size_t>(spec.window_len)) return 0;
  return (n_samples - static_cast<size_t>(spec.window_len)) / static_cast<size_t>(spec.hop) + 1;
}

/// Magnitude STFT. Frame t covers samples [t*hop, t*hop + window_len); a
/// trailing partial frame is dropped, never zero-padded. Columns are the
/// fft_size/2 + 1 non-negative frequency bins.
inline FeatureMatrix stft_magnitude(std::span<const double> samples, const FrameSpec& spec,
                                    int sample_rate = kPipelineRate) {
  spec.validate();
  if (samples.size() < static_cast<size_t>(spec.window_len))
    fail(Err::InsufficientAudio, "input shorter than one analysis window");

  const size_t frames = stft_frame_count(samples.size(), spec);
  const size_t bins = static_cast<size_t>(spec.fft_size) / 2 + 1;
  const auto win = detail::make_window(spec.window, spec.window_len);

  FeatureMatrix m = FeatureMatrix::zeros(frames, bins,
                                         static_cast<double>(spec.hop) / sample_rate);
  std::vector<std::complex<double>> buf(static_cast<size_t>(spec.fft_size));
  for (size_t t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    const size_t base = t * static_cast<size_t>(spec.hop);
    for (int i = 0; i < spec.window_len; ++i)
      buf[static_cast<size_t>(i)] = samples[base + static_cast<size_t>(i)] * win[static_cast<size_t>(i)];
    detail::fft_inplace(buf);
    for (size_t b = 0; b < bins; ++b) m.at(t, b) = std::abs(buf[b]);
  }
  return m;
}

/// Convert magnitudes to dB relative to the matrix maximum, clamped to
/// [floor_db, 0]. An all-zero matrix maps every cell to floor_db.
inline FeatureMatrix power_to_db(const FeatureMatrix& m, double floor_db = -80.0) {
  for (double v : m.values)
    if (v < 0.0) fail(Err::InvalidParameter, "power_to_db input must be non-negative");
  FeatureMatrix out = m;
  const double peak = m.values.empty() ? 0.0 : *std::max_element(m.values.begin(), m.values.end());
  for (double& v : out.values) {
    if (peak <= 0.0 || v <= 0.0) {
      v = floor_db;
    } else {
      v = std::clamp(20.0 * std::log10(v / peak), floor_db, 0.0);
    }
  }
  return out;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular mel filterbank: n_filters rows by fft_size/2 + 1 bins, with
/// centers equally spaced on the mel scale and adjacent triangles
/// overlapping by half.
inline FeatureMatrix mel_filterbank(int n_filters, int fft_size, int sample_rate,
                                    double f_min = 0.0, double f_max = -1.0) {
  if (f_max < 0.0) f_max = sample_rate / 2.0;
  if (n_filters < 2) fail(Err::InvalidParameter, "need at least 2 mel filters");
  if (f_max > sample_rate / 2.0) fail(Err::InvalidParameter, "f_max above Nyquist");
  if (f_min < 0.0 || f_min >= f_max) fail(Err::InvalidParameter, "need 0 <= f_min < f_max");
  if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0)
    fail(Err::InvalidParameter, "fft_size must be a power of two");

  const size_t bins = static_cast<size_t>(fft_size) / 2 + 1;
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(static_cast<size_t>(n_filters) + 2);
  for (size_t j = 0; j < edges.size(); ++j)
    edges[j] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(j) /
                                      static_cast<double>(n_filters + 1));

  FeatureMatrix fb = FeatureMatrix::zeros(static_cast<size_t>(n_filters), bins);
  for (int f = 0; f < n_filters; ++f) {
    const double left = edges[static_cast<size_t>(f)];
    const double center = edges[static_cast<size_t>(f) + 1];
    const double right = edges[static_cast<size_t>(f) + 2];
    for (size_t b = 0; b < bins; ++b) {
      const double hz = static_cast<double>(b) * sample_rate / fft_size;
      double w = 0.0;
      if (hz > left && hz < center) {
        w = (hz - left) / (center - left);
      } else if (hz == center) {
        w = 1.0;
      } else if (hz > center && hz < right) {
        w = (right - hz) / (right - center);
      }
      fb.at(static_cast<size_t>(f), b) = w;
    }
  }
  return fb;
}

struct MfccConfig {
  int sample_rate = kPipelineRate;
  double pre_emphasis = 0.97;
  int window_len = 400;  // 25 ms at 16 kHz
  int hop = 160;         // 10 ms
  int fft_size = 512;
  int n_mels = 26;
  int n_ceps = 13;
  double log_floor = 1e-10;
};

/// MFCC pipeline: pre-emphasis, Hann STFT, power spectrum, mel energies,
/// floored log, DCT-II keeping the first n_ceps coefficients.
inline FeatureMatrix mfcc(std::span<const double> samples, const MfccConfig& cfg = {}) {
  if (samples.size() < static_cast<size_t>(cfg.window_len))
    fail(Err::InsufficientAudio, "need at least one analysis window of audio");

  std::vector<double> emphasized(samples.size());
  if (!samples.empty()) emphasized[0] = samples[0];
  for (size_t i = 1; i < samples.size(); ++i)
    emphasized[i] = samples[i] - cfg.pre_emphasis * samples[i - 1];

  FrameSpec spec{cfg.window_len, cfg.hop, Window::HANN, cfg.fft_size};
  const FeatureMatrix mag = stft_magnitude(emphasized, spec, cfg.sample_rate);
  const FeatureMatrix fb = mel_filterbank(cfg.n_mels, cfg.fft_size, cfg.sample_rate);

  const size_t n_mels = static_cast<size_t>(cfg.n_mels);
  const size_t n_ceps = static_cast<size_t>(cfg.n_ceps);
  FeatureMatrix out = FeatureMatrix::zeros(mag.rows, n_ceps, mag.frame_duration);
  std::vector<double> log_mel(n_mels);
  for (size_t t = 0; t < mag.rows; ++t) {
    for (size_t f = 0; f < n_mels; ++f) {
      double e = 0.0;
      for (size_t b = 0; b < mag.cols; ++b) {
        const double v = mag.at(t, b);
        e += fb.at(f, b) * v * v;
      }
      log_mel[f] = std::log(std::max(e, cfg.log_floor));
    }
    for (size_t k = 0; k < n_ceps; ++k) {
      double c = 0.0;
      for (size_t f = 0; f < n_mels; ++f)
        c += log_mel[f] * std::cos(std::numbers::pi * static_cast<double>(k) *
                                   (2.0 * static_cast<double>(f) + 1.0) /
                                   (2.0 * static_cast<double>(n_mels)));
      out.at(t, k) = c;
    }
  }
  return out;
}

/// Render a dB matrix as binary PGM (P5). Width is the time axis (matrix
/// rows), height the frequency axis with the lowest bin at the bottom.
/// Gray levels use round-half-up.
inline std::vector<uint8_t> spectrogram_pgm(const FeatureMatrix& m, double floor_db = -80.0) {
  for (double v : m.values)
    if (v < floor_db || v > 0.0)
      fail(Err::InvalidParameter, "matrix values must lie in [floor_db, 0]");
  const size_t width = m.rows;
  const size_t height = m.cols;
  std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + width * height);
  for (size_t y = 0; y < height; ++y) {
    const size_t freq = height - 1 - y;  // low frequencies at the bottom
    for (size_t x = 0; x < width; ++x) {
      const double v = m.at(x, freq);
      const double g = std::floor(255.0 * (v - floor_db) / (0.0 - floor_db) + 0.5);
      out.push_back(static_cast<uint8_t>(std::clamp(g, 0.0, 255.0)));
    }
  }
  return out;
}

/// Plain numeric CSV used for stored templates and matrix dumps: one row
/// per line, shortest round-trip formatting.
inline std::string matrix_to_csv(const FeatureMatrix& m) {
  std::string out;
  char buf[64];
  for (size_t r = 0; r < m.rows; ++r) {
    for (size_t c = 0; c < m.cols; ++c) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), m.at(r, c));
      if (c) out += ',';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

inline FeatureMatrix matrix_from_csv(const std::string& text, double frame_duration = 0.0) {
  FeatureMatrix m;
  m.frame_duration = frame_duration;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string_view line(text.data() + pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    std::vector<double> row;
    size_t start = 0;
    while (start <= line.size()) {
      size_t comma = line.find(',', start);
      if (comma == std::string::npos) comma = line.size();
      double v = 0.0;
      const auto res = std::from_chars(line.data() + start, line.data() + comma, v);
      if (res.ec != std::errc{} || res.ptr != line.data() + comma)
        fail(Err::InvalidParameter, "bad numeric cell in matrix CSV");
      row.push_back(v);
      if (comma == line.size()) break;
      start = comma + 1;
    }
    if (m.cols == 0) m.cols = row.size();
    if (row.size() != m.cols) fail(Err::InvalidParameter, "ragged rows in matrix CSV");
    m.values.insert(m.values.end(), row.begin(), row.end());
    ++m.rows;
  }
  return m;
}

}  // namespace sttkit
