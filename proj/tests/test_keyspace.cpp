#include "doctest.h"

#include <sodium.h>

#include <random>
#include <set>
#include <string>

#include "spdmark/crypto.hpp"
#include "spdmark/error.hpp"
#include "spdmark/keyspace.hpp"

using namespace spdmark;

namespace {

std::vector<std::uint8_t> ascii(const std::string& s) { return {s.begin(), s.end()}; }

std::string hex(const Digest& d) { return to_hex(d); }

// Reference HMAC from libsodium's streaming API (arbitrary key length).
Digest sodium_hmac(const std::vector<std::uint8_t>& key, const std::vector<std::uint8_t>& msg) {
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  crypto_auth_hmacsha256_update(&st, msg.data(), msg.size());
  Digest out{};
  crypto_auth_hmacsha256_final(&st, out.data());
  return out;
}

// pack(kappa) || '|' || be64(t), written out bit by bit.
std::vector<std::uint8_t> reference_input(const Bits& key, std::uint64_t t) {
  std::vector<std::uint8_t> out((key.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < key.size(); ++i)
    if (key[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  out.push_back(0x7C);
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(t >> shift));
  return out;
}

Bits first_bits(const Digest& d, std::size_t m) {
  Bits b(m);
  for (std::size_t i = 0; i < m; ++i) b[i] = (d[i / 8] >> (7 - i % 8)) & 1u;
  return b;
}

BaseSecret test_secret() {
  BaseSecret s;
  for (int i = 0; i < 20; ++i) s.key_bytes.push_back(static_cast<std::uint8_t>(0x30 + i));
  return s;
}

}  // namespace

TEST_CASE("sha256 and hmac match published vectors") {
  CHECK(hex(sha256(ascii("abc"))) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // RFC 4231 cases 1, 2 and 6.
  CHECK(hex(hmac_sha256(std::vector<std::uint8_t>(20, 0x0b), ascii("Hi There"))) ==
        "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7");
  CHECK(hex(hmac_sha256(ascii("Jefe"), ascii("what do ya want for nothing?"))) ==
        "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
  CHECK(hex(hmac_sha256(std::vector<std::uint8_t>(131, 0xaa),
                        ascii("Test Using Larger Than Block-Size Key - Hash Key First"))) ==
        "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54");
}

TEST_CASE("derive_seed is deterministic and index sensitive") {
  CHECK(derive_seed(7, 0) == derive_seed(7, 0));
  CHECK(derive_seed(7, 0) != derive_seed(7, 1));
  CHECK(derive_seed(7, 0) != derive_seed(8, 0));
  const Digest d = sha256(std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 0, 7, 0, 0, 0, 0, 0, 0, 0, 3});
  std::uint64_t expect = 0;
  for (int i = 0; i < 8; ++i) expect = (expect << 8) | d[i];
  CHECK(derive_seed(7, 3) == expect);
}

TEST_CASE("key config arithmetic") {
  KeyConfig cfg;
  CHECK(cfg.num_layers == 14);
  CHECK(cfg.bases_per_layer == 4);
  CHECK(cfg.message_bits() == 28);
  CHECK(KeyConfig{3, 8}.message_bits() == 9);
  CHECK_THROWS_AS(KeyConfig({2, 3}).validate(), Error);
  CHECK_THROWS_AS(KeyConfig({2, 1}).validate(), Error);
  CHECK_THROWS_AS(KeyConfig({0, 4}).validate(), Error);
}

TEST_CASE("key_to_mask reads chunks most significant bit first") {
  const KeyConfig cfg{2, 4};
  const SelectionMask m = key_to_mask({{1, 0, 0, 1}}, cfg);
  CHECK(m.selected(0) == 2);
  CHECK(m.selected(1) == 1);
  CHECK(m.is_one_hot());

  const SelectionMask zero = key_to_mask({Bits(28, 0)}, KeyConfig{});
  for (std::size_t l = 0; l < 14; ++l) CHECK(zero.selected(l) == 0);
  CHECK(mask_to_key(zero, KeyConfig{}).bits == Bits(28, 0));

  CHECK_THROWS_AS(key_to_mask({{1, 0, 0}}, cfg), Error);
  CHECK_THROWS_AS(key_to_mask({{1, 0, 2, 1}}, cfg), Error);
}

TEST_CASE("mask_to_key rejects rows that are not one-hot") {
  const KeyConfig cfg{2, 4};
  SelectionMask m(2, 4);
  m.set(0, 1, 1);
  CHECK_THROWS_AS(mask_to_key(m, cfg), Error);  // row 1 is [0,0,0,0]
  m.set(1, 0, 1);
  m.set(1, 3, 1);
  CHECK_THROWS_AS(mask_to_key(m, cfg), Error);
  CHECK_THROWS_AS(mask_to_key(SelectionMask(3, 4), cfg), Error);
}

TEST_CASE("key and mask are inverse bijections") {
  for (const KeyConfig cfg : {KeyConfig{14, 4}, KeyConfig{5, 8}, KeyConfig{9, 2}, KeyConfig{3, 16}}) {
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
      const WatermarkKey k = random_key(cfg, seed);
      const SelectionMask m = key_to_mask(k, cfg);
      REQUIRE(m.is_one_hot());
      REQUIRE(mask_to_key(m, cfg).bits == k.bits);
    }
  }
  // Exhaustive at L=4, P=4: 256 keys map onto 256 distinct masks.
  const KeyConfig small{4, 4};
  std::set<std::vector<std::size_t>> seen;
  for (unsigned v = 0; v < 256; ++v) {
    Bits b(8);
    for (int i = 0; i < 8; ++i) b[i] = (v >> (7 - i)) & 1u;
    const SelectionMask m = key_to_mask({b}, small);
    std::vector<std::size_t> rows;
    for (std::size_t l = 0; l < 4; ++l) rows.push_back(m.selected(l));
    seen.insert(rows);
  }
  CHECK(seen.size() == 256);
}

TEST_CASE("frame messages match an independent HMAC") {
  const BaseSecret secret = test_secret();
  for (const KeyConfig cfg : {KeyConfig{14, 4}, KeyConfig{5, 8}, KeyConfig{64, 16}}) {
    const WatermarkKey key = random_key(cfg, 99);
    const Schedule s = derive_frame_messages(secret, key, 12);
    REQUIRE(s.size() == 12);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::uint64_t t = i + 1;
      CHECK(s[i].frame_index == t);
      CHECK(frame_hash_input(key, t) == reference_input(key.bits, t));
      CHECK(s[i].bits == first_bits(sodium_hmac(secret.key_bytes, reference_input(key.bits, t)),
                                    cfg.message_bits()));
    }
  }
}

TEST_CASE("frame messages: determinism, length, prefix and separation") {
  const BaseSecret secret = test_secret();
  const WatermarkKey key = random_key(KeyConfig{}, 5);
  const Schedule a = derive_frame_messages(secret, key, 25);
  const Schedule b = derive_frame_messages(secret, key, 25);
  const Schedule prefix = derive_frame_messages(secret, key, 10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].bits == b[i].bits);
    CHECK(a[i].bits.size() == 28);
  }
  for (std::size_t i = 0; i < prefix.size(); ++i) CHECK(prefix[i].bits == a[i].bits);
  CHECK(hamming(a[0].bits, a[1].bits) >= 1);

  WatermarkKey other = key;
  other.bits[27] ^= 1u;
  CHECK(derive_frame_messages(secret, other, 1)[0].bits != a[0].bits);
  BaseSecret other_secret = secret;
  other_secret.key_bytes[0] ^= 1u;
  CHECK(derive_frame_messages(other_secret, key, 1)[0].bits != a[0].bits);
}

TEST_CASE("frame messages reject bad inputs") {
  const WatermarkKey key = random_key(KeyConfig{}, 5);
  CHECK_THROWS_AS(derive_frame_messages(BaseSecret{std::vector<std::uint8_t>(15, 1)}, key, 3), Error);
  CHECK_THROWS_AS(derive_frame_messages(test_secret(), key, 0), Error);
  CHECK_THROWS_AS(derive_frame_messages(test_secret(), WatermarkKey{Bits(257, 0)}, 3), Error);
}

TEST_CASE("hamming distance") {
  CHECK(hamming(Bits{1, 0, 1, 0}, Bits{1, 0, 0, 0}) == 1);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Bits x(28), y(28), z(28);
    for (std::size_t i = 0; i < 28; ++i) {
      x[i] = rng() & 1u;
      y[i] = rng() & 1u;
      z[i] = rng() & 1u;
    }
    Bits nx = x;
    for (auto& v : nx) v ^= 1u;
    CHECK(hamming(x, x) == 0);
    CHECK(hamming(x, nx) == 28);
    CHECK(hamming(x, y) == hamming(y, x));
    CHECK(hamming(x, z) <= hamming(x, y) + hamming(y, z));
  }
  CHECK_THROWS_AS(hamming(Bits{1, 0}, Bits{1}), Error);
}

TEST_CASE("bit packing and hex codecs") {
  const Bits b{1, 0, 1, 1, 0, 0, 0, 1, 1, 1};
  const auto packed = pack_bits(b);
  REQUIRE(packed.size() == 2);
  CHECK(packed[0] == 0xB1);
  CHECK(packed[1] == 0xC0);
  CHECK(unpack_bits(packed, b.size()) == b);
  CHECK(bits_to_hex(b) == "b1c0");
  CHECK(bits_from_hex("b1c0", 10) == b);
  CHECK(bits_from_hex("B1C0", 10) == b);
  CHECK_THROWS_AS(bits_from_hex("b1c1", 10), Error);
  CHECK_THROWS_AS(bits_from_hex("b1", 10), Error);
  CHECK_THROWS_AS(bytes_from_hex("abc"), Error);
  CHECK_THROWS_AS(bytes_from_hex("zz"), Error);
  CHECK(bytes_from_hex("00ff10") == std::vector<std::uint8_t>{0x00, 0xff, 0x10});
}

TEST_CASE("random keys") {
  const KeyConfig cfg;
  CHECK(random_key(cfg, 1).bits == random_key(cfg, 1).bits);
  CHECK(random_key(cfg, 1).bits.size() == 28);
  // 10^4 seeds over a 2^28 key space: the birthday bound expects ~0.19
  // collisions, so more than a handful would point at correlated seeds.
  std::set<std::string> keys;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) keys.insert(bits_to_hex(random_key(cfg, seed).bits));
  CHECK(10000 - keys.size() <= 3);
  for (std::uint64_t seed = 0; seed < 1000; ++seed)
    CHECK(random_key(cfg, seed).bits != random_key(cfg, seed + 1).bits);
}
