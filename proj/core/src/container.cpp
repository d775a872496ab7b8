#include "rite/container.hpp"

#include <bit>
#include <boost/crc.hpp>
#include <cstring>

#include "rite/error.hpp"
#include "rite/io.hpp"

namespace rite {
namespace {

static_assert(std::endian::native == std::endian::little,
              "container encoding assumes a little-endian host");

using Crc64Xz = boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true>;

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw Error(ErrorCode::FormatError, std::string("truncated container while reading ") + what);
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t crc64(std::span<const std::byte> bytes) noexcept {
  Crc64Xz crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::uint64_t crc64(std::string_view bytes) noexcept {
  return crc64(std::as_bytes(std::span(bytes.data(), bytes.size())));
}

std::string encode_container(const VectorContainer& c) {
  if (c.values.size() != c.ids.size() * static_cast<std::size_t>(c.dim)) {
    throw Error(ErrorCode::InvalidArgument, "container payload does not match count x dim");
  }
  std::string out;
  out.reserve(40 + c.values.size() * sizeof(float));
  out.append(kContainerMagic);
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint32_t>(out, c.dim);
  put<std::uint64_t>(out, c.ids.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.role));
  for (const auto& id : c.ids) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.append(id);
  }
  out.append(reinterpret_cast<const char*>(c.values.data()), c.values.size() * sizeof(float));
  put<std::uint64_t>(out, crc64(out));
  return out;
}

VectorContainer decode_container(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(kContainerMagic.size(), "magic") != kContainerMagic) {
    throw Error(ErrorCode::FormatError, "bad magic");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kContainerVersion) {
    throw Error(ErrorCode::FormatError, "unsupported version " + std::to_string(version));
  }
  VectorContainer c;
  c.dim = r.get<std::uint32_t>("dim");
  const auto count = r.get<std::uint64_t>("count");
  const auto role = r.get<std::uint32_t>("role");
  if (role > 1) throw Error(ErrorCode::FormatError, "unknown role tag " + std::to_string(role));
  c.role = static_cast<ContainerRole>(role);
  if (count > 0 && c.dim == 0) throw Error(ErrorCode::FormatError, "dim 0 with non-empty payload");

  // Each id record is at least 4 bytes; reject absurd counts before allocating.
  if (count > r.remaining() / 4) throw Error(ErrorCode::FormatError, "count exceeds file size");
  c.ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>("id length");
    c.ids.emplace_back(r.take(len, "id bytes"));
  }
  const std::size_t payload = static_cast<std::size_t>(count) * c.dim * sizeof(float);
  if (r.remaining() != payload + sizeof(std::uint64_t)) {
    throw Error(ErrorCode::FormatError,
                "payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                    std::to_string(payload + sizeof(std::uint64_t)));
  }
  const auto raw = r.take(payload, "payload");
  c.values.resize(static_cast<std::size_t>(count) * c.dim);
  std::memcpy(c.values.data(), raw.data(), payload);

  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  const auto stored = r.get<std::uint64_t>("checksum");
  if (stored != crc64(bytes.substr(0, body))) {
    throw Error(ErrorCode::ChecksumError, "container checksum mismatch");
  }
  return c;
}

void write_container(const std::filesystem::path& path, const VectorContainer& container) {
  write_file_atomic(path, encode_container(container));
}

VectorContainer read_container(const std::filesystem::path& path) {
  return decode_container(read_file(path));
}

}  // namespace rite
