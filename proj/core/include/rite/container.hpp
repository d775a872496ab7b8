#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rite {

// Binary vector container, little-endian throughout:
//
//   "RITEVEC1"                 8 bytes magic
//   u32 version = 1
//   u32 dim
//   u64 count
//   u32 role                   0 = index, 1 = weights
//   count x (u32 len, bytes)   UTF-8 ids
//   count x dim x f32          row-major payload
//   u64 checksum               CRC-64/XZ of every preceding byte
enum class ContainerRole : std::uint32_t { Index = 0, Weights = 1 };

inline constexpr std::string_view kContainerMagic = "RITEVEC1";
inline constexpr std::uint32_t kContainerVersion = 1;

struct VectorContainer {
  ContainerRole role = ContainerRole::Index;
  std::uint32_t dim = 0;
  std::vector<std::string> ids;
  std::vector<float> values;  // ids.size() * dim

  friend bool operator==(const VectorContainer&, const VectorContainer&) = default;
};

// CRC-64/XZ (ECMA-182 polynomial, reflected, init and xorout all ones).
// Check value for "123456789" is 0x995DC9BBDF1939FA.
std::uint64_t crc64(std::span<const std::byte> bytes) noexcept;
std::uint64_t crc64(std::string_view bytes) noexcept;

std::string encode_container(const VectorContainer& container);
// FormatError on bad magic/version/role/lengths, ChecksumError on mismatch.
VectorContainer decode_container(std::string_view bytes);

void write_container(const std::filesystem::path& path, const VectorContainer& container);
VectorContainer read_container(const std::filesystem::path& path);

}  // namespace rite
