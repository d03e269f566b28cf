// Copyright 2026 The semrel Authors.
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

#pragma once

// File formats.
//
// FMAP1 feature maps (little-endian):
//   bytes 0-3   magic "FMAP"
//   byte  4     version, 1
//   bytes 5-16  uint32 H, W, C
//   then        H*W*C IEEE-754 binary32 values in [h][w][c] order
// Values are widened to double on read and narrowed to float on write.
//
// CSV: header row, '.' decimal separator, 17 significant digits.
// PGM: binary P5, 8 bits, linear min-max scaling.

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "semrel/embedding.hpp"
#include "semrel/error.hpp"
#include "semrel/numerics.hpp"

namespace semrel {

inline constexpr std::array<char, 4> kFmapMagic{'F', 'M', 'A', 'P'};
inline constexpr std::uint8_t kFmapVersion = 1;
inline constexpr std::size_t kFmapHeaderBytes = 17;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::kIo, 0, "cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::kIo, 0, "cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::kIo, 0, "write to '" + path + "' failed");
}

}  // namespace detail

inline std::string encode_fmap(const FeatureMap& fm) {
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  require(fm.height() <= kMax && fm.width() <= kMax && fm.channels() <= kMax, "encode_fmap: dimension exceeds 32 bits");
  std::string out(kFmapMagic.begin(), kFmapMagic.end());
  out.push_back(static_cast<char>(kFmapVersion));
  detail::put_u32(out, static_cast<std::uint32_t>(fm.height()));
  detail::put_u32(out, static_cast<std::uint32_t>(fm.width()));
  detail::put_u32(out, static_cast<std::uint32_t>(fm.channels()));
  out.reserve(out.size() + 4 * fm.values().size());
  for (std::size_t i = 0; i < fm.values().size(); ++i) {
    const auto f = static_cast<float>(fm.values()[i]);
    require(std::isfinite(f), "encode_fmap: value at flat index " + std::to_string(i) + " is not finite as float32");
    detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

inline FeatureMap decode_fmap(std::string_view bytes) {
  using Kind = FormatError::Kind;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4) throw FormatError(Kind::kTruncated, bytes.size(), "FMAP header truncated");
  if (std::memcmp(p, kFmapMagic.data(), 4) != 0) throw FormatError(Kind::kBadMagic, 0, "bad magic, expected \"FMAP\"");
  if (bytes.size() < kFmapHeaderBytes) throw FormatError(Kind::kTruncated, bytes.size(), "FMAP header truncated");
  if (p[4] != kFmapVersion)
    throw FormatError(Kind::kBadVersion, 4, "unsupported FMAP version " + std::to_string(p[4]));
  const std::uint64_t h = detail::get_u32(p + 5), w = detail::get_u32(p + 9), c = detail::get_u32(p + 13);
  // Three 32-bit factors fit in 96 bits; check the product stays addressable.
  const std::uint64_t limit = std::numeric_limits<std::size_t>::max() / 8;
  if (h != 0 && w != 0 && c != 0 && (h * w > limit / c || h * w * c > limit))
    throw FormatError(Kind::kDimensionOverflow, 5, "FMAP dimensions overflow");
  const std::uint64_t count = h * w * c;
  const std::uint64_t expected = kFmapHeaderBytes + 4 * count;
  if (bytes.size() < expected)
    throw FormatError(Kind::kTruncated, bytes.size(),
                      "FMAP body truncated: expected " + std::to_string(expected) + " bytes");
  if (bytes.size() > expected) throw FormatError(Kind::kParse, expected, "trailing bytes after FMAP body");
  std::vector<double> values(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t off = kFmapHeaderBytes + 4 * i;
    const auto f = std::bit_cast<float>(detail::get_u32(p + off));
    if (!std::isfinite(f)) throw FormatError(Kind::kParse, off, "non-finite value in FMAP body");
    values[i] = f;
  }
  return FeatureMap(h, w, c, std::move(values));
}

inline FeatureMap read_fmap(const std::string& path) { return decode_fmap(detail::read_file(path)); }
inline void write_fmap(const std::string& path, const FeatureMap& fm) { detail::write_file(path, encode_fmap(fm)); }

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return {buf.data(), end};
}

inline double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    throw FormatError(FormatError::Kind::kParse, 0, "CSV line " + std::to_string(line) + ": bad number '" +
                                                        std::string(s) + "'");
  return v;
}

/// Quotes a field when it contains a separator, quote or line break.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

/// Grid as CSV: header "row,c0,c1,...", then one line per grid row.
inline void write_grid_csv(std::ostream& os, const Matrix& grid) {
  os << "row";
  for (std::size_t c = 0; c < grid.cols(); ++c) os << ",c" << c;
  os << "\r\n";
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    os << r;
    for (std::size_t c = 0; c < grid.cols(); ++c) os << ',' << format_double(grid(r, c));
    os << "\r\n";
  }
}

inline Matrix parse_grid_csv(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t cols = 0;
  while (!text.empty()) {
    std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (line_no == 1) {
      for (char ch : line) cols += ch == ',';
      continue;
    }
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t field = 0;
    while (true) {
      std::size_t comma = line.find(',');
      std::string_view f = line.substr(0, comma);
      if (field++ > 0) row.push_back(parse_double(f, line_no));
      if (comma == std::string_view::npos) break;
      line = line.substr(comma + 1);
    }
    if (row.size() != cols)
      throw FormatError(FormatError::Kind::kParse, 0, "CSV line " + std::to_string(line_no) + ": expected " +
                                                          std::to_string(cols) + " values");
    rows.push_back(std::move(row));
  }
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return Matrix(rows.size(), cols, std::move(flat));
}

// ---------------------------------------------------------------------------
// PGM

/// 8-bit grayscale; min maps to 0 and max to 255. A constant grid maps to 0.
inline std::string encode_pgm(const Matrix& grid) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : grid.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::string out = "P5\n" + std::to_string(grid.cols()) + " " + std::to_string(grid.rows()) + "\n255\n";
  for (double v : grid.data()) {
    double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
  }
  return out;
}

}  // namespace semrel
