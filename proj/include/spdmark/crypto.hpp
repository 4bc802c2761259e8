#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

namespace spdmark {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> data);
Digest hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> message);

// Named sub-seed: first 8 bytes (big-endian) of SHA-256(be64(base) || be64(index)).
// Every per-trial / per-frame stream is derived this way so parallel and
// serial execution see the same numbers.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

std::string to_hex(std::span<const std::uint8_t> bytes);

}  // namespace spdmark
