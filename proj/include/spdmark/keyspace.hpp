#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spdmark {

// One byte per bit, each 0 or 1.
using Bits = std::vector<std::uint8_t>;

struct KeyConfig {
  std::size_t num_layers = 14;       // L
  std::size_t bases_per_layer = 4;   // P, power of two

  std::size_t bits_per_layer() const;  // log2(P)
  std::size_t message_bits() const;    // M = L * log2(P)

  // Throws Errc::invalid_argument when P < 2, P not a power of two, or L == 0.
  void validate() const;

  bool operator==(const KeyConfig&) const = default;
};

struct WatermarkKey {
  Bits bits;
};

struct FrameMessage {
  std::uint64_t frame_index = 0;  // 1-based
  Bits bits;
};

using Schedule = std::vector<FrameMessage>;

struct BaseSecret {
  std::vector<std::uint8_t> key_bytes;

  static constexpr std::size_t kMinBytes = 16;
};

// L x P binary matrix, row-major. A valid mask has exactly one 1 per row,
// but compose_displacement also accepts the general multi-hot form.
class SelectionMask {
 public:
  SelectionMask() = default;
  SelectionMask(std::size_t layers, std::size_t bases);

  std::size_t layers() const { return layers_; }
  std::size_t bases() const { return bases_; }

  std::uint8_t at(std::size_t layer, std::size_t basis) const;
  void set(std::size_t layer, std::size_t basis, std::uint8_t value);

  // Index of the single active basis in `layer`; throws unless the row is one-hot.
  std::size_t selected(std::size_t layer) const;
  bool is_one_hot() const;

  bool operator==(const SelectionMask&) const = default;

 private:
  std::size_t layers_ = 0;
  std::size_t bases_ = 0;
  std::vector<std::uint8_t> cells_;
};

// Chunk l (bits [l*log2P, (l+1)*log2P), MSB first) selects basis bin2dec(chunk).
SelectionMask key_to_mask(const WatermarkKey& key, const KeyConfig& cfg);
WatermarkKey mask_to_key(const SelectionMask& mask, const KeyConfig& cfg);

// kappa_t = first M bits of HMAC-SHA256(secret, pack(kappa) || 0x7C || be64(t)), t = 1..T.
Schedule derive_frame_messages(const BaseSecret& secret, const WatermarkKey& key,
                               std::size_t num_frames);

// The exact HMAC input for frame t; exposed so the byte layout can be checked.
std::vector<std::uint8_t> frame_hash_input(const WatermarkKey& key, std::uint64_t t);

std::size_t hamming(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

// MSB-first packing into ceil(n/8) bytes, low bits of the last byte zero.
std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits);
Bits unpack_bits(std::span<const std::uint8_t> bytes, std::size_t num_bits);

std::string bits_to_hex(std::span<const std::uint8_t> bits);
Bits bits_from_hex(std::string_view hex, std::size_t num_bits);
std::vector<std::uint8_t> bytes_from_hex(std::string_view hex);

// Uniform random key from a seed (mt19937_64).
WatermarkKey random_key(const KeyConfig& cfg, std::uint64_t seed);

}  // namespace spdmark
