#include "spdmark/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include "spdmark/error.hpp"

namespace spdmark {

Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    fail(Errc::internal, "SHA-256 failed");
  }
  return out;
}

Digest hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> message) {
  Digest out{};
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), message.data(), message.size(),
           out.data(), &len) == nullptr ||
      len != out.size()) {
    fail(Errc::internal, "HMAC-SHA256 failed");
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::array<std::uint8_t, 16> buf{};
  for (int i = 0; i < 8; ++i) {
    buf[i] = static_cast<std::uint8_t>(base >> (56 - 8 * i));
    buf[8 + i] = static_cast<std::uint8_t>(index >> (56 - 8 * i));
  }
  const Digest d = sha256(buf);
  std::uint64_t s = 0;
  for (int i = 0; i < 8; ++i) s = (s << 8) | d[i];
  return s;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xf]);
  }
  return s;
}

}  // namespace spdmark
