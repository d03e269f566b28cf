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


#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <sstream>

#include "semrel/gradcheck.hpp"
#include "semrel/io.hpp"

using namespace semrel;

namespace {

FeatureMap random_fmap(Rng& rng, std::size_t h, std::size_t w, std::size_t c) {
  std::vector<double> v(h * w * c);
  // Values representable in float32 so the round trip is exact.
  for (double& x : v) x = static_cast<float>(rng.normal());
  return FeatureMap(h, w, c, v);
}

FormatError::Kind decode_error(std::string_view bytes, std::size_t* offset = nullptr) {
  try {
    decode_fmap(bytes);
  } catch (const FormatError& e) {
    if (offset) *offset = e.offset();
    return e.kind();
  }
  ADD_FAILURE() << "decode succeeded";
  return FormatError::Kind::kIo;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("semrel_io_test_" + name);
}

}  // namespace

TEST(Fmap, RoundTripInMemoryAndOnDisk) {
  Rng rng(1);
  FeatureMap fm = random_fmap(rng, 3, 5, 4);
  std::string bytes = encode_fmap(fm);
  EXPECT_EQ(bytes.size(), 17u + 4 * 60);
  EXPECT_EQ(bytes.substr(0, 4), "FMAP");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(decode_fmap(bytes), fm);

  auto path = temp_path("rt.fmap").string();
  write_fmap(path, fm);
  EXPECT_EQ(read_fmap(path), fm);
  std::filesystem::remove(path);
}

TEST(Fmap, LittleEndianLayout) {
  FeatureMap fm(1, 2, 1, std::vector<double>{1.0, -2.0});
  std::string b = encode_fmap(fm);
  const unsigned char header[] = {'F', 'M', 'A', 'P', 1, 1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0};
  EXPECT_EQ(std::memcmp(b.data(), header, sizeof header), 0);
  // 1.0f = 0x3f800000, -2.0f = 0xc0000000
  const unsigned char body[] = {0, 0, 0x80, 0x3f, 0, 0, 0, 0xc0};
  EXPECT_EQ(std::memcmp(b.data() + 17, body, sizeof body), 0);
}

TEST(Fmap, DistinctErrors) {
  Rng rng(2);
  std::string good = encode_fmap(random_fmap(rng, 2, 2, 3));
  std::size_t off = 99;

  std::string magic = good;
  magic.replace(0, 4, "XXXX");
  EXPECT_EQ(decode_error(magic, &off), FormatError::Kind::kBadMagic);
  EXPECT_EQ(off, 0u);

  std::string version = good;
  version[4] = 2;
  EXPECT_EQ(decode_error(version, &off), FormatError::Kind::kBadVersion);
  EXPECT_EQ(off, 4u);

  std::string short_body = good.substr(0, good.size() - 3);
  EXPECT_EQ(decode_error(short_body, &off), FormatError::Kind::kTruncated);
  EXPECT_EQ(off, short_body.size());
  EXPECT_EQ(decode_error(good.substr(0, 10), &off), FormatError::Kind::kTruncated);
  EXPECT_EQ(decode_error("FM", &off), FormatError::Kind::kTruncated);

  std::string huge = good;
  for (int i = 5; i < 17; ++i) huge[i] = static_cast<char>(0xff);
  EXPECT_EQ(decode_error(huge, &off), FormatError::Kind::kDimensionOverflow);
  EXPECT_EQ(off, 5u);

  EXPECT_EQ(decode_error(good + "x", &off), FormatError::Kind::kParse);

  std::string nan = good;
  const unsigned char qnan[] = {0, 0, 0xc0, 0x7f};
  std::memcpy(nan.data() + 17, qnan, 4);
  EXPECT_EQ(decode_error(nan, &off), FormatError::Kind::kParse);
  EXPECT_EQ(off, 17u);
}

TEST(Fmap, MissingFileIsIoError) {
  try {
    read_fmap("/nonexistent/dir/x.fmap");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatError::Kind::kIo);
  }
}

TEST(Csv, FormatDoubleRoundTrips) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    double v = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
    EXPECT_EQ(parse_double(format_double(v), 1), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(1.0), "1");
}

TEST(Csv, GridRoundTrip) {
  Rng rng(4);
  Matrix g = random_matrix(rng, 5, 7);
  std::ostringstream os;
  write_grid_csv(os, g);
  Matrix back = parse_grid_csv(os.str());
  EXPECT_TRUE(back.same_shape(g));
  EXPECT_LE(max_abs_diff(back, g), 1e-9);
  EXPECT_EQ(back, g);
  EXPECT_EQ(os.str().substr(0, 22), "row,c0,c1,c2,c3,c4,c5,");
}

TEST(Csv, ParseErrors) {
  EXPECT_THROW(parse_grid_csv("row,c0,c1\r\n0,1\r\n"), FormatError);
  EXPECT_THROW(parse_grid_csv("row,c0\r\n0,abc\r\n"), FormatError);
}

TEST(Csv, FieldQuoting) {
  EXPECT_EQ(csv_field("DCE+SRC"), "DCE+SRC");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
}

TEST(Pgm, MinMaxScaling) {
  Matrix g = Matrix::from_rows({{-1, 0}, {1, 3}});
  std::string p = encode_pgm(g);
  const std::string header = "P5\n2 2\n255\n";
  ASSERT_EQ(p.substr(0, header.size()), header);
  const auto* px = reinterpret_cast<const unsigned char*>(p.data() + header.size());
  EXPECT_EQ(px[0], 0);
  EXPECT_EQ(px[1], 64);
  EXPECT_EQ(px[2], 128);
  EXPECT_EQ(px[3], 255);
  std::string flat = encode_pgm(Matrix(2, 3, 4.0));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(flat[flat.size() - 1 - i], 0);
}
