// sttkit/audio.hpp
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
// Container detection, native WAV decode/encode, external-decoder bridge
// for compressed formats, and normalization to the pipeline's canonical
// 16 kHz mono representation.

#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sttkit/errors.hpp"

namespace sttkit {

inline constexpr int kPipelineRate = 16000;

/// Decoded PCM audio. Samples are clamped to [-1, 1] on decode; all
/// channels hold the same number of samples.
struct AudioClip {
  std::vector<std::vector<double>> channels;
  int sample_rate = 0;

  bool operator==(const AudioClip&) const = default;

  size_t channel_count() const { return channels.size(); }
  size_t sample_count() const { return channels.empty() ? 0 : channels[0].size(); }
  const std::vector<double>& mono() const {
    if (channels.size() != 1) fail(Err::InvalidParameter, "clip is not mono");
    return channels[0];
  }
  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(sample_count()) / sample_rate : 0.0;
  }
};

enum class Container { WAV, MP3, FLAC, OGG, UNKNOWN };

inline const char* container_name(Container c) {
  switch (c) {
    case Container::WAV: return "WAV";
    case Container::MP3: return "MP3";
    case Container::FLAC: return "FLAC";
    case Container::OGG: return "OGG";
    case Container::UNKNOWN: return "UNKNOWN";
  }
  return "UNKNOWN";
}

struct FormatInfo {
  Container container = Container::UNKNOWN;
  std::optional<int> declared_sample_rate;
  std::optional<int> declared_channels;
  std::optional<int> bits_per_sample;
};

/// Classify a file by magic bytes alone. Needs at least the first 12
/// bytes; anything that matches no rule is UNKNOWN.
inline FormatInfo detect_format(std::span<const uint8_t> prefix) {
  if (prefix.size() < 12) fail(Err::TruncatedInput, "need at least 12 bytes to detect format");
  FormatInfo info;
  auto eq = [&](size_t off, const char* tag) {
    return std::equal(tag, tag + 4, prefix.begin() + off);
  };
  if (eq(0, "RIFF") && eq(8, "WAVE")) {
    info.container = Container::WAV;
  } else if (eq(0, "fLaC")) {
    info.container = Container::FLAC;
  } else if (eq(0, "OggS")) {
    info.container = Container::OGG;
  } else if (prefix[0] == 'I' && prefix[1] == 'D' && prefix[2] == '3') {
    info.container = Container::MP3;
  } else if (prefix[0] == 0xFF && (prefix[1] & 0xE0) == 0xE0) {
    info.container = Container::MP3;
  }
  return info;
}

namespace detail {

inline uint32_t read_u32le(std::span<const uint8_t> d, size_t off) {
  return static_cast<uint32_t>(d[off]) | (static_cast<uint32_t>(d[off + 1]) << 8) |
         (static_cast<uint32_t>(d[off + 2]) << 16) | (static_cast<uint32_t>(d[off + 3]) << 24);
}

inline uint16_t read_u16le(std::span<const uint8_t> d, size_t off) {
  return static_cast<uint16_t>(d[off] | (d[off + 1] << 8));
}

inline double clamp_sample(double v) {
  if (std::isnan(v)) return 0.0;
  return std::clamp(v, -1.0, 1.0);
}

}  // namespace detail

/// Parse a RIFF/WAVE byte buffer. Accepts PCM (format tag 1, 16 or 24
/// bit) and IEEE float (tag 3, 32 bit). Chunk order is flexible: fmt and
/// data may appear anywhere after the RIFF header, with unknown chunks
/// skipped. Integer samples scale by 1/2^(bits-1); everything is clamped
/// to [-1, 1].
inline AudioClip decode_wav(std::span<const uint8_t> data) {
  if (data.size() < 12) fail(Err::TruncatedInput, "WAV shorter than RIFF header");
  auto eq = [&](size_t off, const char* tag) {
    return std::equal(tag, tag + 4, data.begin() + off);
  };
  if (!eq(0, "RIFF") || !eq(8, "WAVE")) fail(Err::MalformedContainer, "missing RIFF/WAVE magic");

  struct FmtChunk {
    uint16_t tag = 0;
    uint16_t channels = 0;
    uint32_t sample_rate = 0;
    uint16_t bits = 0;
  };
  std::optional<FmtChunk> fmt;
  std::optional<std::pair<size_t, size_t>> data_span;  // offset, length

  size_t off = 12;
  while (off < data.size()) {
    if (off + 8 > data.size()) fail(Err::TruncatedInput, "truncated chunk header");
    const size_t chunk_size = detail::read_u32le(data, off + 4);
    const size_t body = off + 8;
    if (body + chunk_size > data.size())
      fail(Err::TruncatedInput, "chunk length exceeds file size");
    if (eq(off, "fmt ")) {
      if (chunk_size < 16) fail(Err::MalformedContainer, "fmt chunk too small");
      FmtChunk f;
      f.tag = detail::read_u16le(data, body);
      f.channels = detail::read_u16le(data, body + 2);
      f.sample_rate = detail::read_u32le(data, body + 4);
      f.bits = detail::read_u16le(data, body + 14);
      fmt = f;
    } else if (eq(off, "data")) {
      data_span = {body, chunk_size};
    }
    off = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!fmt) fail(Err::MalformedContainer, "no fmt chunk");
  if (!data_span) fail(Err::MalformedContainer, "no data chunk");
  if (fmt->channels == 0) fail(Err::MalformedContainer, "fmt declares zero channels");
  if (fmt->sample_rate == 0) fail(Err::MalformedContainer, "fmt declares zero sample rate");

  const bool pcm16 = fmt->tag == 1 && fmt->bits == 16;
  const bool pcm24 = fmt->tag == 1 && fmt->bits == 24;
  const bool f32 = fmt->tag == 3 && fmt->bits == 32;
  if (!pcm16 && !pcm24 && !f32)
    fail(Err::UnsupportedEncoding, "format tag " + std::to_string(fmt->tag) + " with " +
                                       std::to_string(fmt->bits) + " bits");

  const size_t bytes_per_sample = fmt->bits / 8;
  const size_t block = bytes_per_sample * fmt->channels;
  const size_t frames = data_span->second / block;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt->sample_rate);
  clip.channels.assign(fmt->channels, {});
  for (auto& ch : clip.channels) ch.reserve(frames);

  const uint8_t* p = data.data() + data_span->first;
  for (size_t i = 0; i < frames; ++i) {
    for (size_t c = 0; c < fmt->channels; ++c) {
      const uint8_t* s = p + i * block + c * bytes_per_sample;
      double v = 0.0;
      if (pcm16) {
        const int16_t raw = static_cast<int16_t>(s[0] | (s[1] << 8));
        v = raw / 32768.0;
      } else if (pcm24) {
        int32_t raw = s[0] | (s[1] << 8) | (s[2] << 16);
        if (raw & 0x800000) raw |= ~0xFFFFFF;  // sign-extend
        v = raw / 8388608.0;
      } else {
        uint32_t bits = detail::read_u32le({s, 4}, 0);
        float f;
        static_assert(sizeof(f) == 4);
        std::memcpy(&f, &bits, 4);
        v = f;
      }
      clip.channels[c].push_back(detail::clamp_sample(v));
    }
  }
  return clip;
}

/// Serialize a clip as 16-bit PCM WAV (the fixture/interchange writer).
/// Samples are rounded to the nearest representable 16-bit value.
inline std::vector<uint8_t> encode_wav_pcm16(const AudioClip& clip) {
  if (clip.channels.empty()) fail(Err::EmptyAudio, "no channels to encode");
  if (clip.sample_rate <= 0) fail(Err::InvalidParameter, "sample rate must be positive");
  const uint16_t channels = static_cast<uint16_t>(clip.channel_count());
  const uint32_t frames = static_cast<uint32_t>(clip.sample_count());
  const uint32_t data_bytes = frames * channels * 2;

  std::vector<uint8_t> out;
  out.reserve(44 + data_bytes);
  auto put_u16 = [&](uint16_t v) {
    out.push_back(v & 0xFF);
    out.push_back(v >> 8);
  };
  auto put_u32 = [&](uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
  };
  auto put_tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };

  put_tag("RIFF");
  put_u32(36 + data_bytes);
  put_tag("WAVE");
  put_tag("fmt ");
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(channels);
  put_u32(static_cast<uint32_t>(clip.sample_rate));
  put_u32(static_cast<uint32_t>(clip.sample_rate) * channels * 2);
  put_u16(channels * 2);
  put_u16(16);
  put_tag("data");
  put_u32(data_bytes);
  for (uint32_t i = 0; i < frames; ++i) {
    for (uint16_t c = 0; c < channels; ++c) {
      const double scaled = std::lround(clip.channels[c][i] * 32768.0);
      const int32_t q = static_cast<int32_t>(std::clamp(scaled, -32768.0, 32767.0));
      put_u16(static_cast<uint16_t>(static_cast<int16_t>(q)));
    }
  }
  return out;
}

inline std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::FileNotFound, "cannot open " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Err::OutputError, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Err::OutputError, "short write to " + path.string());
}

namespace detail {

inline std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) {
    if (c == '\'')
      q += "'\\''";
    else
      q += c;
  }
  q += "'";
  return q;
}

/// Run a command through the shell, capturing combined stdout/stderr.
/// Returns {exit_status, output}.
inline std::pair<int, std::string> run_command(const std::string& cmd) {
  const std::string full = cmd + " 2>&1";
  FILE* pipe = ::popen(full.c_str(), "r");
  if (!pipe) return {-1, "popen failed"};
  std::string output;
  char buf[4096];
  size_t n;
  while ((n = ::fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, n);
  const int rc = ::pclose(pipe);
  return {rc, output};
}

struct TempFileGuard {
  std::filesystem::path path;
  ~TempFileGuard() {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
};

inline std::filesystem::path make_temp_wav_path() {
  static std::atomic<uint64_t> counter{0};
  const auto n = counter.fetch_add(1);
  return std::filesystem::temp_directory_path() /
         ("sttkit-dec-" + std::to_string(::getpid()) + "-" + std::to_string(n) + ".wav");
}

}  // namespace detail

/// Decode a compressed file by invoking a user-configured converter
/// command. The template must contain {in} and {out} placeholders; the
/// command is expected to write a WAV file at {out}. The temporary WAV is
/// removed whether or not decoding succeeds.
inline AudioClip decode_via_external(const std::filesystem::path& path, const FormatInfo& info,
                                     const std::string& command_template) {
  if (info.container != Container::MP3 && info.container != Container::FLAC &&
      info.container != Container::OGG)
    fail(Err::InvalidParameter, "external decoder only handles MP3/FLAC/OGG");
  if (command_template.empty())
    fail(Err::ExternalDecoderFailure, "no decoder command configured");

  detail::TempFileGuard tmp{detail::make_temp_wav_path()};
  std::string cmd = command_template;
  auto replace_all = [](std::string& s, const std::string& from, const std::string& to) {
    for (size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
      s.replace(pos, from.size(), to);
  };
  replace_all(cmd, "{in}", detail::shell_quote(path.string()));
  replace_all(cmd, "{out}", detail::shell_quote(tmp.path.string()));

  const auto [status, output] = detail::run_command(cmd);
  if (status != 0)
    fail(Err::ExternalDecoderFailure,
         "decoder exited with status " + std::to_string(status) + ": " + output);
  if (!std::filesystem::exists(tmp.path))
    fail(Err::ExternalDecoderFailure, "decoder produced no output file");

  const auto bytes = read_file_bytes(tmp.path);
  try {
    return decode_wav(bytes);  // guard removes the temp file on all paths
  } catch (const SttError& e) {
    fail(Err::MalformedContainer, std::string("decoder output is not usable WAV (") + e.what() + ")");
  }
}

/// Average all channels into one. Mono input passes through unchanged.
inline AudioClip downmix_mono(const AudioClip& clip) {
  if (clip.channels.empty()) fail(Err::EmptyAudio, "clip has no channels");
  if (clip.channels.size() == 1) return clip;
  const size_t n = clip.sample_count();
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.channels.resize(1);
  out.channels[0].resize(n);
  const double scale = 1.0 / static_cast<double>(clip.channels.size());
  for (size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& ch : clip.channels) sum += ch[i];
    out.channels[0][i] = sum * scale;
  }
  return out;
}

/// Band-limited sample rate conversion: Hann-windowed sinc kernel with 32
/// zero crossings per side, cut off at the lower of the two Nyquist
/// frequencies. Kernel phases are normalized to unity DC gain. Output
/// length is floor(n * target / source).
inline AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) fail(Err::InvalidParameter, "target rate must be positive");
  if (clip.channels.size() != 1) fail(Err::InvalidParameter, "resample expects mono input");
  if (clip.sample_rate <= 0) fail(Err::InvalidParameter, "source rate must be positive");
  if (clip.sample_rate == target_rate) return clip;

  const auto& x = clip.channels[0];
  const int64_t n = static_cast<int64_t>(x.size());
  const int64_t out_len = n * target_rate / clip.sample_rate;

  const double cutoff = std::min(1.0, static_cast<double>(target_rate) / clip.sample_rate);
  const double support = 32.0 / cutoff;  // 32 sinc zero crossings per side
  constexpr double pi = std::numbers::pi;

  AudioClip out;
  out.sample_rate = target_rate;
  out.channels.resize(1);
  out.channels[0].resize(static_cast<size_t>(out_len));

  for (int64_t j = 0; j < out_len; ++j) {
    const double t = static_cast<double>(j) * clip.sample_rate / target_rate;
    const int64_t i0 = static_cast<int64_t>(std::ceil(t - support));
    const int64_t i1 = static_cast<int64_t>(std::floor(t + support));
    double num = 0.0, den = 0.0;
    for (int64_t i = i0; i <= i1; ++i) {
      const double u = static_cast<double>(i) - t;
      const double a = cutoff * u;
      const double sinc = a == 0.0 ? 1.0 : std::sin(pi * a) / (pi * a);
      const double window = 0.5 + 0.5 * std::cos(pi * u / support);
      const double k = sinc * window;
      den += k;
      if (i >= 0 && i < n) num += x[static_cast<size_t>(i)] * k;
    }
    out.channels[0][static_cast<size_t>(j)] = den != 0.0 ? num / den : 0.0;
  }
  return out;
}

/// Downmix then resample to the pipeline's 16 kHz mono form. Idempotent.
inline AudioClip normalize_to_pipeline(const AudioClip& clip) {
  return resample(downmix_mono(clip), kPipelineRate);
}

}  // namespace sttkit
