#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "spdmark/keyspace.hpp"
#include "spdmark/spd_core.hpp"

namespace spdmark {

struct ExtractedSequence {
  std::vector<Bits> messages;

  std::size_t size() const { return messages.size(); }
};

// Ground truth for one temporal edit. Indices are 0-based: `dropped` and the
// first element of each `positions` pair refer to the original sequence,
// `inserted` and the second element to the attacked one.
struct TamperRecord {
  std::size_t original_length = 0;
  std::size_t output_length = 0;
  std::vector<std::size_t> dropped;
  std::vector<std::size_t> inserted;
  std::vector<std::pair<std::size_t, std::size_t>> positions;  // survivors, sorted by original
  std::size_t trim_head = 0;
  std::size_t trim_tail = 0;

  // Originals absent from the output: dropped plus trimmed, sorted.
  std::vector<std::size_t> missing() const;
  // T_r == T - |dropped| - trimmed + |inserted| and positions cover the survivors.
  bool reconciles() const;
  // Adjacent descents among survivors ordered by original index, reported as
  // (original_i, original_i+1) where the output order is inverted.
  std::vector<std::pair<std::size_t, std::size_t>> adjacent_inversions() const;

  static TamperRecord identity(std::size_t length);
};

enum class ChannelKind { ideal, bitflip };

struct ChannelSpec {
  ChannelKind kind = ChannelKind::ideal;
  double flip_probability = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Simulated extraction straight from the message schedule: an exact copy, or
// every bit flipped independently with probability q.
ExtractedSequence channel_extract(const Schedule& schedule, const ChannelSpec& spec);
ExtractedSequence channel_extract(const ExtractedSequence& messages, const ChannelSpec& spec);
ExtractedSequence as_sequence(const Schedule& schedule);

enum class AttackKind { none, drop, swap_random, swap_adjacent, insert, trim, pixel_noise, rescale };
enum class InsertMode { duplicate, noise };

struct AttackSpec {
  AttackKind kind = AttackKind::none;
  double fraction = 0.0;       // drop / insert
  double pair_fraction = 0.3;  // swap_adjacent
  InsertMode insert_mode = InsertMode::duplicate;
  double head_fraction = 0.2;  // trim
  double tail_fraction = 0.2;
  double sigma = 0.05;   // pixel_noise
  double factor = 0.5;   // rescale
  std::uint64_t seed = 0;

  bool is_temporal() const;
  void validate() const;
};

std::string attack_name(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);

// Index-level description of a temporal edit: each output slot is either an
// original item or an inserted one (copy of an original, or fresh noise).
struct TemporalPlan {
  struct Slot {
    enum class Source { original, duplicate, noise } source = Source::original;
    std::size_t index = 0;  // original index for original/duplicate, insert ordinal for noise
  };
  std::vector<Slot> slots;
  TamperRecord record;
};

// Rounds half to even.
std::size_t round_frame_count(double value);

TemporalPlan plan_drop(std::size_t length, double fraction, std::uint64_t seed);
TemporalPlan plan_swap_random(std::size_t length, std::uint64_t seed);
TemporalPlan plan_swap_adjacent(std::size_t length, double pair_fraction, std::uint64_t seed);
TemporalPlan plan_insert(std::size_t length, double fraction, InsertMode mode, std::uint64_t seed);
TemporalPlan plan_trim(std::size_t length, double head_fraction, double tail_fraction);
TemporalPlan plan_temporal(std::size_t length, const AttackSpec& spec);

template <class Item, class NoiseFn>
std::vector<Item> apply_plan(const std::vector<Item>& items, const TemporalPlan& plan,
                             NoiseFn&& make_noise) {
  std::vector<Item> out;
  out.reserve(plan.slots.size());
  for (const auto& slot : plan.slots) {
    if (slot.source == TemporalPlan::Slot::Source::noise) {
      out.push_back(make_noise(slot.index));
    } else {
      out.push_back(items.at(slot.index));
    }
  }
  return out;
}

struct AttackedSequence {
  ExtractedSequence sequence;
  TamperRecord record;
};

struct AttackedVideo {
  Video video;
  TamperRecord record;
};

// Temporal attacks on message sequences; noise inserts are uniform random bits.
AttackedSequence attack_sequence(const ExtractedSequence& seq, const AttackSpec& spec);
// Temporal and photometric attacks on toy videos; noise inserts are Gaussian frames.
AttackedVideo attack_video(const Video& video, const AttackSpec& spec);

AttackedSequence attack_drop(const ExtractedSequence& seq, double fraction, std::uint64_t seed);
AttackedSequence attack_swap_random(const ExtractedSequence& seq, std::uint64_t seed);
AttackedSequence attack_swap_adjacent(const ExtractedSequence& seq, double pair_fraction,
                                      std::uint64_t seed);
AttackedSequence attack_insert(const ExtractedSequence& seq, double fraction, InsertMode mode,
                               std::uint64_t seed);
AttackedSequence attack_trim(const ExtractedSequence& seq, double head_fraction,
                             double tail_fraction);

// Additive N(0, sigma^2) per pixel, clamped to [0, 1].
Video attack_pixel_noise(const Video& video, double sigma, std::uint64_t seed);
// Bilinear downsample to round(H*factor) x round(W*factor), then back up.
Video attack_rescale(const Video& video, double factor);
ToyFrame resize_bilinear(const ToyFrame& frame, std::size_t height, std::size_t width);

}  // namespace spdmark
