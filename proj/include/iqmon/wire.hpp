// Copyright 2026 The iqmon Authors
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

// Fixed-length summary record, little-endian throughout:
//
//   offset  size  field
//        0     4  magic "IQSR"
//        4     1  version (1)
//        5     1  flags (bit 0 set: agent resets its summary every interval)
//        6     2  grid size M
//        8     8  agent id
//       16     8  epoch
//       24     8  count
//       32     8  min   (binary64)
//       40     8  max   (binary64)
//       48   8*M  probabilities (binary64)
//   48+8*M   8*M  quantile values (binary64)
//
// A record is exactly 48 + 16*M bytes. Decoding re-validates every summary
// invariant, so anything decode_record returns is well-formed.

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "iqmon/core.hpp"

namespace iqmon {

inline constexpr std::uint8_t record_magic[4] = {'I', 'Q', 'S', 'R'};
inline constexpr std::uint8_t record_version = 1;
inline constexpr std::size_t record_header_size = 48;
inline constexpr std::size_t max_grid_size = 65535;

namespace record_flags {
inline constexpr std::uint8_t reset_mode = 0x01;
}

constexpr std::size_t record_size(std::size_t grid_size) noexcept {
  return record_header_size + 16 * grid_size;
}

struct DecodedRecord {
  QuantileSummary summary;
  std::uint64_t agent_id;
  std::uint8_t flags;
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline std::uint16_t get_u16(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<std::uint16_t>(in[at] | (in[at + 1] << 8));
}

inline std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | in[at + static_cast<std::size_t>(i)];
  return v;
}

inline double get_f64(std::span<const std::uint8_t> in, std::size_t at) {
  return std::bit_cast<double>(get_u64(in, at));
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_record(const QuantileSummary& s, std::uint64_t agent_id,
                                               std::uint8_t flags = 0) {
  if (s.empty()) throw Error(Errc::no_data);
  const std::size_t m = s.grid().size();
  if (m > max_grid_size) throw Error(Errc::invalid_argument, "grid too large for a record");
  // Summaries cannot hold non-finite values; this guards the format itself.
  detail::require_finite(s.min(), "min");
  detail::require_finite(s.max(), "max");
  for (double v : s.values()) detail::require_finite(v, "quantile value");

  std::vector<std::uint8_t> out;
  out.reserve(record_size(m));
  for (std::uint8_t b : record_magic) out.push_back(b);
  out.push_back(record_version);
  out.push_back(flags);
  detail::put_u16(out, static_cast<std::uint16_t>(m));
  detail::put_u64(out, agent_id);
  detail::put_u64(out, s.epoch());
  detail::put_u64(out, s.count());
  detail::put_f64(out, s.min());
  detail::put_f64(out, s.max());
  for (double p : s.grid().levels()) detail::put_f64(out, p);
  for (double v : s.values()) detail::put_f64(out, v);
  return out;
}

/// Length of the record starting at `bytes`, read from its header. Used to
/// walk a log of concatenated records.
inline std::size_t peek_record_size(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < record_header_size) throw Error(Errc::bad_length, "short header");
  if (!std::equal(std::begin(record_magic), std::end(record_magic), bytes.begin())) {
    throw Error(Errc::not_a_record);
  }
  return record_size(detail::get_u16(bytes, 6));
}

inline DecodedRecord decode_record(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(record_magic)) throw Error(Errc::bad_length, "short header");
  if (!std::equal(std::begin(record_magic), std::end(record_magic), bytes.begin())) {
    throw Error(Errc::not_a_record);
  }
  if (bytes.size() < 8) throw Error(Errc::bad_length, "short header");
  if (bytes[4] != record_version) throw Error(Errc::unsupported_version, std::to_string(bytes[4]));
  const std::uint8_t flags = bytes[5];
  const std::size_t m = detail::get_u16(bytes, 6);
  if (bytes.size() != record_size(m)) {
    throw Error(Errc::bad_length, "expected " + std::to_string(record_size(m)) + " bytes, got " +
                                      std::to_string(bytes.size()));
  }
  const std::uint64_t agent_id = detail::get_u64(bytes, 8);
  const std::uint64_t epoch = detail::get_u64(bytes, 16);
  const std::uint64_t count = detail::get_u64(bytes, 24);
  const double min = detail::get_f64(bytes, 32);
  const double max = detail::get_f64(bytes, 40);
  std::vector<double> levels(m);
  std::vector<double> values(m);
  for (std::size_t j = 0; j < m; ++j) {
    levels[j] = detail::get_f64(bytes, record_header_size + 8 * j);
    values[j] = detail::get_f64(bytes, record_header_size + 8 * (m + j));
  }
  try {
    return DecodedRecord{QuantileSummary(ProbabilityGrid(std::move(levels)), std::move(values), count, min,
                                         max, epoch),
                         agent_id, flags};
  } catch (const Error& e) {
    throw Error(Errc::corrupt_record, e.what());
  }
}

/// Splits a log of concatenated records and decodes each one.
inline std::vector<DecodedRecord> decode_record_log(std::span<const std::uint8_t> log) {
  std::vector<DecodedRecord> out;
  std::size_t at = 0;
  while (at < log.size()) {
    const auto rest = log.subspan(at);
    const std::size_t n = peek_record_size(rest);
    if (n > rest.size()) throw Error(Errc::bad_length, "log ends mid-record");
    out.push_back(decode_record(rest.first(n)));
    at += n;
  }
  return out;
}

}  // namespace iqmon
