#include "clusterprobe/hash.hpp"

#include <openssl/evp.h>

#include <array>

#include "clusterprobe/binary_io.hpp"
#include "clusterprobe/error.hpp"

namespace clusterprobe {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length,
                 EVP_sha256(), nullptr) != 1) {
    throw Error("hash", "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  const auto bytes = io::read_file_bytes(path);
  return sha256_hex(bytes);
}

}  // namespace clusterprobe
