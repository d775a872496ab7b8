#include <gtest/gtest.h>

#include <cstring>

#include "rite/container.hpp"
#include "rite/error.hpp"
#include "test_support.hpp"

using namespace rite;
using rite::testing::TempDir;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an exception";
  return ErrorCode::InvariantViolation;
}

VectorContainer sample() {
  VectorContainer c;
  c.dim = 3;
  c.ids = {"alpha", "b\xC3\xA9ta", ""};
  c.values = {1.5f, -2.0f, 0.0f, 1e-30f, 3.25f, -0.0f, 7, 8, 9};
  return c;
}

}  // namespace

TEST(Crc64, XzCheckValue) {
  EXPECT_EQ(crc64("123456789"), 0x995DC9BBDF1939FAULL);
  EXPECT_EQ(crc64(""), 0u);
}

TEST(Container, LayoutIsLittleEndianWithHeader) {
  const auto bytes = encode_container(sample());
  EXPECT_EQ(bytes.substr(0, 8), "RITEVEC1");
  std::uint32_t version, dim, role;
  std::uint64_t count;
  std::memcpy(&version, bytes.data() + 8, 4);
  std::memcpy(&dim, bytes.data() + 12, 4);
  std::memcpy(&count, bytes.data() + 16, 8);
  std::memcpy(&role, bytes.data() + 24, 4);
  EXPECT_EQ(version, 1u);
  EXPECT_EQ(dim, 3u);
  EXPECT_EQ(count, 3u);
  EXPECT_EQ(role, 0u);
  // header 28 + ids (4+5, 4+5, 4+0) + 9 floats + crc
  EXPECT_EQ(bytes.size(), 28u + 22u + 36u + 8u);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  EXPECT_EQ(stored, crc64(std::string_view(bytes).substr(0, bytes.size() - 8)));
}

TEST(Container, RoundTripIsBitwise) {
  const TempDir dir;
  const auto c = sample();
  write_container(dir / "c.bin", c);
  const auto back = read_container(dir / "c.bin");
  EXPECT_EQ(back.ids, c.ids);
  ASSERT_EQ(back.values.size(), c.values.size());
  EXPECT_EQ(std::memcmp(back.values.data(), c.values.data(), c.values.size() * sizeof(float)), 0);
  write_container(dir / "d.bin", back);
  EXPECT_EQ(rite::testing::slurp(dir / "c.bin"), rite::testing::slurp(dir / "d.bin"));
}

TEST(Container, EmptyContainerRoundTrips) {
  VectorContainer c;
  c.role = ContainerRole::Weights;
  c.dim = 5;
  EXPECT_EQ(decode_container(encode_container(c)), c);
}

TEST(Container, RejectsTruncation) {
  const auto bytes = encode_container(sample());
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    const auto code = code_of([&] { decode_container(std::string_view(bytes).substr(0, n)); });
    EXPECT_TRUE(code == ErrorCode::FormatError || code == ErrorCode::ChecksumError) << "length " << n;
  }
}

TEST(Container, RejectsCorruption) {
  const auto bytes = encode_container(sample());
  for (std::size_t i = 8; i < bytes.size(); ++i) {
    auto bad = bytes;
    bad[i] = static_cast<char>(bad[i] ^ 0x10);
    const auto code = code_of([&] { decode_container(bad); });
    EXPECT_TRUE(code == ErrorCode::FormatError || code == ErrorCode::ChecksumError) << "byte " << i;
  }
  auto payload = bytes;
  payload[60] = static_cast<char>(payload[60] ^ 1);
  EXPECT_EQ(code_of([&] { decode_container(payload); }), ErrorCode::ChecksumError);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(code_of([&] { decode_container(magic); }), ErrorCode::FormatError);
  EXPECT_EQ(code_of([&] { decode_container(bytes + "extra"); }), ErrorCode::FormatError);
}

TEST(Container, MissingFileIsIoError) {
  const TempDir dir;
  EXPECT_EQ(code_of([&] { read_container(dir / "nope.bin"); }), ErrorCode::IoError);
}
