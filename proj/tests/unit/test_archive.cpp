// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>

#include "oracles.hpp"
#include "qixai/archive.hpp"
#include "qixai/error.hpp"
#include "temp_dir.hpp"

namespace qixai {
namespace {

using testing::TempDir;

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

TEST(Archive, SmallestRoundTrip) {
  TempDir dir;
  TensorArchive a;
  a.add("a", Tensor({1}, {0.0}));
  write_archive(a, dir / "a.qixt");
  EXPECT_EQ(read_archive(dir / "a.qixt"), a);
}

TEST(Archive, PreservesOrderAndBits) {
  oracle::Rng rng(3);
  TensorArchive a;
  a.add("zeta", oracle::random_tensor({2, 3}, rng));
  a.add("alpha", Tensor({4}, {-0.0, 1e-310, 1.0 / 3.0, -7.25}));
  const TensorArchive b = decode_archive(encode_archive(a));
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b.entries()[0].first, "zeta");
  EXPECT_EQ(b.entries()[1].first, "alpha");
  std::size_t values = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_TRUE(bitwise_equal(a.entries()[i].second, b.entries()[i].second));
    values += b.entries()[i].second.size();
  }
  EXPECT_EQ(values, 10u);
}

TEST(Archive, HeaderLayoutIsLittleEndian) {
  TensorArchive a;
  a.add("x", Tensor({1}, {1.0}));
  const std::string bytes = encode_archive(a);
  // magic, version, count, name length, name, rank, extent, value
  ASSERT_EQ(bytes.size(), 4u + 4 + 8 + 4 + 1 + 4 + 8 + 8);
  EXPECT_EQ(bytes.substr(0, 4), "QIXT");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[16], 1);
  EXPECT_EQ(bytes[20], 'x');
  double v;
  std::memcpy(&v, bytes.data() + bytes.size() - 8, 8);
  EXPECT_EQ(v, 1.0);
}

TEST(Archive, NonFiniteNamesEntryAndIndex) {
  TensorArchive a;
  a.add("ok", Tensor({1}));
  a.add("bad", Tensor({3}, {0.0, 0.0, std::nan("")}));
  const std::string msg = error_of([&] { encode_archive(a); });
  EXPECT_NE(msg.find("'bad'"), std::string::npos) << msg;
  EXPECT_NE(msg.find("flat index 2"), std::string::npos) << msg;
}

TEST(Archive, TruncatedPayload) {
  TensorArchive a;
  a.add("t", Tensor({6}, 1.0));
  std::string bytes = encode_archive(a);
  bytes.resize(bytes.size() - 8);  // declared 6 values, 5 present
  const std::string msg = error_of([&] { decode_archive(bytes); });
  EXPECT_NE(msg.find("truncated"), std::string::npos) << msg;
}

TEST(Archive, EmptyArchiveIsValid) {
  TempDir dir;
  write_archive(TensorArchive{}, dir / "e.qixt");
  EXPECT_TRUE(read_archive(dir / "e.qixt").empty());
}

TEST(Archive, CorruptInputReportsOffset) {
  EXPECT_NE(error_of([] { decode_archive("JUNKJUNKJUNK"); }).find("offset 0"), std::string::npos);
  TensorArchive a;
  a.add("x", Tensor({1}));
  std::string bytes = encode_archive(a);
  bytes[4] = 9;  // version
  EXPECT_NE(error_of([&] { decode_archive(bytes); }).find("offset 4"), std::string::npos);
  EXPECT_THROW(decode_archive(encode_archive(a) + "x"), DataError);
}

TEST(Archive, NameRulesAndLookup) {
  TensorArchive a;
  EXPECT_THROW(a.add("", Tensor({1})), DataError);
  EXPECT_THROW(a.add("a/b", Tensor({1})), DataError);
  a.add("w", Tensor({1}));
  EXPECT_THROW(a.add("w", Tensor({1})), DataError);
  a.set("w", Tensor({2}));
  EXPECT_EQ(a.at("w").size(), 2u);
  EXPECT_EQ(error_of([&] { a.at("nope"); }), "missing archive entry 'nope'");
}

TEST(Archive, MissingFileIsIoError) {
  TempDir dir;
  EXPECT_THROW(read_archive(dir / "absent.qixt"), IoError);
}

// Random archives survive encode/decode bit-exactly.
TEST(Archive, RandomRoundTripProperty) {
  oracle::Rng rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    TensorArchive a;
    const auto entries = std::uniform_int_distribution<int>(0, 4)(rng);
    for (int e = 0; e < entries; ++e) {
      Shape shape;
      const auto rank = std::uniform_int_distribution<int>(1, 4)(rng);
      for (int r = 0; r < rank; ++r) shape.push_back(std::uniform_int_distribution<std::size_t>(1, 4)(rng));
      a.add("e" + std::to_string(e), oracle::random_tensor(shape, rng, -1e6, 1e6));
    }
    const std::string bytes = encode_archive(a);
    EXPECT_EQ(encode_archive(decode_archive(bytes)), bytes);
  }
}

}  // namespace
}  // namespace qixai
