// sttkit/zip.hpp
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
// Minimal deterministic ZIP writer: stored (uncompressed) entries, fixed
// order, fixed timestamps. Output bytes depend only on the entries, which
// makes archive-level golden tests possible.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sttkit/errors.hpp"

namespace sttkit {

namespace detail {

inline const std::array<uint32_t, 256>& crc32_table() {
  static const std::array<uint32_t, 256> table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  return table;
}

}  // namespace detail

inline uint32_t crc32(std::span<const uint8_t> data) {
  const auto& table = detail::crc32_table();
  uint32_t c = 0xFFFFFFFFu;
  for (uint8_t b : data) c = table[(c ^ b) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

class ZipWriter {
 public:
  void add(const std::string& name, std::span<const uint8_t> data) {
    Entry e;
    e.name = name;
    e.crc = crc32(data);
    e.size = static_cast<uint32_t>(data.size());
    e.offset = static_cast<uint32_t>(bytes_.size());
    write_local_header(e);
    bytes_.insert(bytes_.end(), data.begin(), data.end());
    entries_.push_back(std::move(e));
  }

  void add(const std::string& name, const std::string& text) {
    add(name, std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
  }

  /// Append the central directory and return the finished archive.
  std::vector<uint8_t> finish() {
    const uint32_t central_start = static_cast<uint32_t>(bytes_.size());
    for (const auto& e : entries_) write_central_header(e);
    const uint32_t central_size = static_cast<uint32_t>(bytes_.size()) - central_start;

    u32(0x06054b50);  // end of central directory
    u16(0);
    u16(0);
    u16(static_cast<uint16_t>(entries_.size()));
    u16(static_cast<uint16_t>(entries_.size()));
    u32(central_size);
    u32(central_start);
    u16(0);
    return std::move(bytes_);
  }

 private:
  struct Entry {
    std::string name;
    uint32_t crc = 0;
    uint32_t size = 0;
    uint32_t offset = 0;
  };

  // 1980-01-01 00:00:00 in DOS date/time fields.
  static constexpr uint16_t kDosTime = 0;
  static constexpr uint16_t kDosDate = (1 << 5) | 1;

  void u16(uint16_t v) {
    bytes_.push_back(v & 0xFF);
    bytes_.push_back(v >> 8);
  }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back((v >> (8 * i)) & 0xFF);
  }

  void write_local_header(const Entry& e) {
    u32(0x04034b50);
    u16(20);  // version needed
    u16(0);   // flags
    u16(0);   // stored
    u16(kDosTime);
    u16(kDosDate);
    u32(e.crc);
    u32(e.size);
    u32(e.size);
    u16(static_cast<uint16_t>(e.name.size()));
    u16(0);
    bytes_.insert(bytes_.end(), e.name.begin(), e.name.end());
  }

  void write_central_header(const Entry& e) {
    u32(0x02014b50);
    u16(20);  // version made by
    u16(20);  // version needed
    u16(0);
    u16(0);
    u16(kDosTime);
    u16(kDosDate);
    u32(e.crc);
    u32(e.size);
    u32(e.size);
    u16(static_cast<uint16_t>(e.name.size()));
    u16(0);
    u16(0);
    u16(0);
    u16(0);
    u32(0);
    u32(e.offset);
    bytes_.insert(bytes_.end(), e.name.begin(), e.name.end());
  }

  std::vector<uint8_t> bytes_;
  std::vector<Entry> entries_;
};

}  // namespace sttkit
