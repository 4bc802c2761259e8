#include "spdmark/keyspace.hpp"

#include <bit>
#include <random>

#include "spdmark/crypto.hpp"
#include "spdmark/error.hpp"

namespace spdmark {

std::size_t KeyConfig::bits_per_layer() const {
  validate();
  return static_cast<std::size_t>(std::countr_zero(bases_per_layer));
}

std::size_t KeyConfig::message_bits() const { return num_layers * bits_per_layer(); }

void KeyConfig::validate() const {
  require(num_layers >= 1, Errc::invalid_argument, "key config: num_layers must be >= 1");
  require(bases_per_layer >= 2 && std::has_single_bit(bases_per_layer), Errc::invalid_argument,
          "key config: bases_per_layer must be a power of two >= 2");
}

SelectionMask::SelectionMask(std::size_t layers, std::size_t bases)
    : layers_(layers), bases_(bases), cells_(layers * bases, 0) {}

std::uint8_t SelectionMask::at(std::size_t layer, std::size_t basis) const {
  require(layer < layers_ && basis < bases_, Errc::dimension_mismatch, "mask index out of range");
  return cells_[layer * bases_ + basis];
}

void SelectionMask::set(std::size_t layer, std::size_t basis, std::uint8_t value) {
  require(layer < layers_ && basis < bases_, Errc::dimension_mismatch, "mask index out of range");
  require(value <= 1, Errc::invalid_argument, "mask entries are binary");
  cells_[layer * bases_ + basis] = value;
}

std::size_t SelectionMask::selected(std::size_t layer) const {
  require(layer < layers_, Errc::dimension_mismatch, "mask layer out of range");
  std::size_t count = 0;
  std::size_t idx = 0;
  for (std::size_t p = 0; p < bases_; ++p) {
    if (cells_[layer * bases_ + p]) {
      ++count;
      idx = p;
    }
  }
  if (count != 1) {
    fail(Errc::invalid_argument, "mask row " + std::to_string(layer) + " has " +
                                     std::to_string(count) + " active bases, expected exactly 1");
  }
  return idx;
}

bool SelectionMask::is_one_hot() const {
  for (std::size_t l = 0; l < layers_; ++l) {
    std::size_t count = 0;
    for (std::size_t p = 0; p < bases_; ++p) count += cells_[l * bases_ + p];
    if (count != 1) return false;
  }
  return true;
}

SelectionMask key_to_mask(const WatermarkKey& key, const KeyConfig& cfg) {
  const std::size_t chunk = cfg.bits_per_layer();
  require(key.bits.size() == cfg.message_bits(), Errc::dimension_mismatch,
          "key length does not equal L*log2(P)");
  SelectionMask mask(cfg.num_layers, cfg.bases_per_layer);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    std::size_t idx = 0;
    for (std::size_t j = 0; j < chunk; ++j) {
      const auto bit = key.bits[l * chunk + j];
      require(bit <= 1, Errc::invalid_argument, "key bits must be 0 or 1");
      idx = (idx << 1) | bit;
    }
    mask.set(l, idx, 1);
  }
  return mask;
}

WatermarkKey mask_to_key(const SelectionMask& mask, const KeyConfig& cfg) {
  const std::size_t chunk = cfg.bits_per_layer();
  require(mask.layers() == cfg.num_layers && mask.bases() == cfg.bases_per_layer,
          Errc::dimension_mismatch, "mask shape does not match key config");
  WatermarkKey key;
  key.bits.resize(cfg.message_bits());
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const std::size_t idx = mask.selected(l);
    for (std::size_t j = 0; j < chunk; ++j) {
      key.bits[l * chunk + j] = static_cast<std::uint8_t>((idx >> (chunk - 1 - j)) & 1U);
    }
  }
  return key;
}

std::vector<std::uint8_t> frame_hash_input(const WatermarkKey& key, std::uint64_t t) {
  auto msg = pack_bits(key.bits);
  msg.push_back(0x7C);
  for (int i = 0; i < 8; ++i) msg.push_back(static_cast<std::uint8_t>(t >> (56 - 8 * i)));
  return msg;
}

Schedule derive_frame_messages(const BaseSecret& secret, const WatermarkKey& key,
                               std::size_t num_frames) {
  require(num_frames >= 1, Errc::invalid_argument, "schedule needs at least one frame");
  require(secret.key_bytes.size() >= BaseSecret::kMinBytes, Errc::invalid_argument,
          "base secret must be at least 16 bytes");
  const std::size_t m = key.bits.size();
  require(m >= 1 && m <= 256, Errc::invalid_argument, "message length must be in [1, 256] bits");

  Schedule out;
  out.reserve(num_frames);
  for (std::uint64_t t = 1; t <= num_frames; ++t) {
    const Digest mac = hmac_sha256(secret.key_bytes, frame_hash_input(key, t));
    out.push_back(FrameMessage{t, unpack_bits(mac, m)});
  }
  return out;
}

std::size_t hamming(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  require(a.size() == b.size(), Errc::dimension_mismatch, "hamming: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]);
  return d;
}

std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> bits) {
  std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
  }
  return out;
}

Bits unpack_bits(std::span<const std::uint8_t> bytes, std::size_t num_bits) {
  require(num_bits <= bytes.size() * 8, Errc::dimension_mismatch, "not enough bytes to unpack");
  Bits out(num_bits);
  for (std::size_t i = 0; i < num_bits; ++i) out[i] = (bytes[i / 8] >> (7 - i % 8)) & 1U;
  return out;
}

std::string bits_to_hex(std::span<const std::uint8_t> bits) { return to_hex(pack_bits(bits)); }

std::vector<std::uint8_t> bytes_from_hex(std::string_view hex) {
  require(hex.size() % 2 == 0, Errc::parse, "hex string has odd length");
  auto nibble = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    fail(Errc::parse, std::string("invalid hex digit '") + c + "'");
  };
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
  }
  return out;
}

Bits bits_from_hex(std::string_view hex, std::size_t num_bits) {
  const auto bytes = bytes_from_hex(hex);
  require(bytes.size() == (num_bits + 7) / 8, Errc::parse, "hex length does not match bit count");
  Bits bits = unpack_bits(bytes, num_bits);
  // Padding bits must be zero for the packed form to be canonical.
  require(pack_bits(bits) == bytes, Errc::parse, "non-zero padding bits in hex message");
  return bits;
}

WatermarkKey random_key(const KeyConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  WatermarkKey key;
  key.bits.resize(cfg.message_bits());
  for (auto& b : key.bits) b = static_cast<std::uint8_t>(rng() >> 63);
  return key;
}

}  // namespace spdmark
