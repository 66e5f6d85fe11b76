// tests/support/fixtures.hpp
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
// Audio fixture builders for recognizer-level tests: enveloped tone
// "words", utterances assembled from them, and deterministic noise. Tones
// fade in and out so endpointing sees silence gaps at their nominal
// width.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "sttkit/dsp.hpp"
#include "sttkit/recognizer.hpp"

namespace testutil {

/// Snap samples to the 16-bit PCM grid, so fixtures survive a WAV
/// round-trip bit-exactly and in-memory runs match file-based runs.
inline std::vector<double> quantize16(std::vector<double> samples) {
  for (double& v : samples) {
    const double q = std::round(v * 32768.0);
    v = std::clamp(q, -32768.0, 32767.0) / 32768.0;
  }
  return samples;
}

/// Tone burst with raised-cosine fade-in/out, on the 16-bit grid.
/// Multiple harmonics give each word a distinct spectral envelope.
inline std::vector<double> enveloped_tone(const std::vector<double>& freqs_hz, double seconds,
                                          double peak, int sample_rate = 16000,
                                          double fade_seconds = 0.05) {
  const size_t n = static_cast<size_t>(seconds * sample_rate);
  const size_t fade = static_cast<size_t>(fade_seconds * sample_rate);
  std::vector<double> out(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double v = 0.0;
    for (size_t h = 0; h < freqs_hz.size(); ++h)
      v += std::sin(2.0 * std::numbers::pi * freqs_hz[h] * static_cast<double>(i) / sample_rate) /
           static_cast<double>(h + 1);
    double env = 1.0;
    if (i < fade)
      env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(fade));
    else if (i + fade >= n)
      env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(n - 1 - i) /
                                 static_cast<double>(fade));
    out[i] = peak * env * v;
  }
  return quantize16(std::move(out));
}

struct ToneVocabulary {
  sttkit::VocabularyModel model;
  std::map<std::string, std::vector<double>> waveforms;
};

/// Five clearly separated tone words. Templates are the MFCCs of the
/// exact waveforms, so a clean utterance built from them plays back
/// through the recognizer with zero distance to the right template.
inline ToneVocabulary tone_vocabulary(double peak = 0.25, double word_seconds = 0.4) {
  const std::vector<std::pair<std::string, std::vector<double>>> words = {
      {"alpha", {300.0}},          {"bravo", {620.0, 1240.0}}, {"charlie", {950.0}},
      {"delta", {1400.0, 2800.0}}, {"echo", {2000.0}},
  };
  ToneVocabulary v;
  v.model.model_id = "tone-five";
  for (const auto& [word, freqs] : words) {
    auto wave = enveloped_tone(freqs, word_seconds, peak);
    v.model.units.push_back(word);
    v.model.entries.emplace(word, sttkit::mfcc(wave));
    v.waveforms.emplace(word, std::move(wave));
  }
  return v;
}

/// Silence, then the given words separated by gap_seconds of silence,
/// then trailing silence.
inline std::vector<double> build_utterance(const ToneVocabulary& vocab,
                                           const std::vector<std::string>& words,
                                           double gap_seconds = 0.2, double lead_seconds = 0.3,
                                           double tail_seconds = 0.5, int sample_rate = 16000) {
  std::vector<double> out(static_cast<size_t>(lead_seconds * sample_rate), 0.0);
  for (size_t w = 0; w < words.size(); ++w) {
    if (w) out.insert(out.end(), static_cast<size_t>(gap_seconds * sample_rate), 0.0);
    const auto& wave = vocab.waveforms.at(words[w]);
    out.insert(out.end(), wave.begin(), wave.end());
  }
  out.insert(out.end(), static_cast<size_t>(tail_seconds * sample_rate), 0.0);
  return out;
}

/// Vocabulary with an acoustically confusable pair: "send" and "sand"
/// share a frequency and differ only slightly in level, so audio built
/// from the sand waveform lands near both templates (nearest: sand) while
/// an office-domain corpus strongly prefers send. The measured DTW gap
/// (~0.8) sits well inside the corpus log10 preference (~2.2), so
/// lambda = 1 rescoring flips the pair without disturbing clean words.
struct AmbiguousFixture {
  sttkit::VocabularyModel model;
  std::map<std::string, std::vector<double>> waveforms;
  std::vector<double> confusable_send_wave;  // plays as "sand" without an LM
  std::vector<std::string> corpus_lines;
};

inline AmbiguousFixture ambiguous_fixture() {
  AmbiguousFixture f;
  f.model.model_id = "office";
  const std::vector<std::tuple<std::string, double, double>> words = {
      {"send", 500.0, 0.25}, {"sand", 500.0, 0.245}, {"the", 900.0, 0.25},
      {"file", 1300.0, 0.25}, {"report", 1700.0, 0.25},
  };
  for (const auto& [word, freq, peak] : words) {
    auto wave = enveloped_tone({freq}, 0.4, peak);
    f.model.units.push_back(word);
    f.model.entries.emplace(word, sttkit::mfcc(wave));
    f.waveforms.emplace(word, std::move(wave));
  }
  f.confusable_send_wave = f.waveforms.at("sand");
  for (int i = 0; i < 15; ++i) {
    f.corpus_lines.push_back("send the file");
    f.corpus_lines.push_back("send the report");
  }
  return f;
}

/// Utterance where chosen slots play the confusable waveform instead of
/// the real word; the intended transcript still reads `words`.
inline std::vector<double> build_ambiguous_utterance(const AmbiguousFixture& f,
                                                     const std::vector<std::string>& words,
                                                     const std::vector<size_t>& confusable_slots,
                                                     int sample_rate = 16000) {
  std::vector<double> out(static_cast<size_t>(0.3 * sample_rate), 0.0);
  for (size_t w = 0; w < words.size(); ++w) {
    if (w) out.insert(out.end(), static_cast<size_t>(0.3 * sample_rate), 0.0);
    const bool confuse =
        std::find(confusable_slots.begin(), confusable_slots.end(), w) != confusable_slots.end();
    const auto& wave = confuse ? f.confusable_send_wave : f.waveforms.at(words[w]);
    out.insert(out.end(), wave.begin(), wave.end());
  }
  out.insert(out.end(), static_cast<size_t>(0.5 * sample_rate), 0.0);
  return out;
}

/// Add Gaussian noise at the given SNR relative to the non-silent part of
/// the signal. Deterministic for a fixed seed.
inline std::vector<double> add_noise_snr(const std::vector<double>& signal, double snr_db,
                                         uint32_t seed) {
  double power = 0.0;
  size_t active = 0;
  for (double v : signal) {
    if (v != 0.0) {
      power += v * v;
      ++active;
    }
  }
  if (active == 0) return signal;
  power /= static_cast<double>(active);
  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  std::mt19937 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  auto out = signal;
  for (double& v : out) v += noise(rng);
  return out;
}

}  // namespace testutil
