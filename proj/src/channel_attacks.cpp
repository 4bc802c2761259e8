#include "spdmark/channel_attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include "spdmark/crypto.hpp"
#include "spdmark/error.hpp"

namespace spdmark {
namespace {

// Stream tag so inserted noise never shares draws with the position sampling.
constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;

std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count,
                                                    std::mt19937_64& rng) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

TemporalPlan from_order(std::size_t length, const std::vector<std::size_t>& order) {
  TemporalPlan plan;
  plan.record.original_length = length;
  plan.record.output_length = order.size();
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    plan.slots.push_back({TemporalPlan::Slot::Source::original, order[pos]});
    plan.record.positions.emplace_back(order[pos], pos);
  }
  std::sort(plan.record.positions.begin(), plan.record.positions.end());
  return plan;
}

void check_fraction(double f, const char* what) {
  require(std::isfinite(f) && f >= 0.0 && f < 1.0, Errc::invalid_argument, what);
}

}  // namespace

std::vector<std::size_t> TamperRecord::missing() const {
  std::vector<std::size_t> out = dropped;
  for (std::size_t i = 0; i < trim_head; ++i) out.push_back(i);
  for (std::size_t i = 0; i < trim_tail; ++i) out.push_back(original_length - 1 - i);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool TamperRecord::reconciles() const {
  const std::size_t removed = dropped.size() + trim_head + trim_tail;
  if (removed > original_length) return false;
  if (output_length != original_length - removed + inserted.size()) return false;
  if (positions.size() != original_length - removed) return false;
  std::set<std::size_t> outs(inserted.begin(), inserted.end());
  if (outs.size() != inserted.size()) return false;
  const auto gone = missing();
  for (const auto& [orig, out] : positions) {
    if (orig >= original_length || out >= output_length) return false;
    if (std::binary_search(gone.begin(), gone.end(), orig)) return false;
    if (!outs.insert(out).second) return false;
  }
  return outs.size() == output_length;
}

std::vector<std::pair<std::size_t, std::size_t>> TamperRecord::adjacent_inversions() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i + 1 < positions.size(); ++i)
    if (positions[i].second > positions[i + 1].second)
      out.emplace_back(positions[i].first, positions[i + 1].first);
  return out;
}

TamperRecord TamperRecord::identity(std::size_t length) {
  TamperRecord r;
  r.original_length = length;
  r.output_length = length;
  for (std::size_t i = 0; i < length; ++i) r.positions.emplace_back(i, i);
  return r;
}

void ChannelSpec::validate() const {
  require(std::isfinite(flip_probability) && flip_probability >= 0.0 && flip_probability <= 1.0,
          Errc::invalid_argument, "channel: flip probability must lie in [0, 1]");
}

ExtractedSequence as_sequence(const Schedule& schedule) {
  ExtractedSequence seq;
  seq.messages.reserve(schedule.size());
  for (const auto& m : schedule) seq.messages.push_back(m.bits);
  return seq;
}

ExtractedSequence channel_extract(const ExtractedSequence& messages, const ChannelSpec& spec) {
  spec.validate();
  ExtractedSequence out = messages;
  if (spec.kind == ChannelKind::ideal || spec.flip_probability == 0.0) return out;
  std::mt19937_64 rng(spec.seed);
  std::bernoulli_distribution flip(spec.flip_probability);
  for (auto& msg : out.messages)
    for (auto& b : msg)
      if (flip(rng)) b ^= 1U;
  return out;
}

ExtractedSequence channel_extract(const Schedule& schedule, const ChannelSpec& spec) {
  return channel_extract(as_sequence(schedule), spec);
}

bool AttackSpec::is_temporal() const {
  switch (kind) {
    case AttackKind::drop:
    case AttackKind::swap_random:
    case AttackKind::swap_adjacent:
    case AttackKind::insert:
    case AttackKind::trim:
      return true;
    default:
      return false;
  }
}

void AttackSpec::validate() const {
  switch (kind) {
    case AttackKind::drop:
      check_fraction(fraction, "drop: fraction must lie in [0, 1)");
      break;
    case AttackKind::insert:
      require(std::isfinite(fraction) && fraction >= 0.0, Errc::invalid_argument,
              "insert: fraction must be >= 0");
      break;
    case AttackKind::swap_adjacent:
      require(std::isfinite(pair_fraction) && pair_fraction >= 0.0 && pair_fraction <= 1.0,
              Errc::invalid_argument, "swap_adjacent: pair_fraction must lie in [0, 1]");
      break;
    case AttackKind::trim:
      check_fraction(head_fraction, "trim: head fraction must lie in [0, 1)");
      check_fraction(tail_fraction, "trim: tail fraction must lie in [0, 1)");
      break;
    case AttackKind::pixel_noise:
      require(std::isfinite(sigma) && sigma >= 0.0, Errc::invalid_argument,
              "noise: sigma must be >= 0");
      break;
    case AttackKind::rescale:
      require(std::isfinite(factor) && factor > 0.0, Errc::invalid_argument,
              "rescale: factor must be > 0");
      break;
    default:
      break;
  }
}

std::string attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::none: return "none";
    case AttackKind::drop: return "drop";
    case AttackKind::swap_random: return "swap_random";
    case AttackKind::swap_adjacent: return "swap_adjacent";
    case AttackKind::insert: return "insert";
    case AttackKind::trim: return "trim";
    case AttackKind::pixel_noise: return "noise";
    case AttackKind::rescale: return "rescale";
  }
  return "none";
}

AttackKind parse_attack_kind(const std::string& name) {
  for (auto k : {AttackKind::none, AttackKind::drop, AttackKind::swap_random,
                 AttackKind::swap_adjacent, AttackKind::insert, AttackKind::trim,
                 AttackKind::pixel_noise, AttackKind::rescale}) {
    if (attack_name(k) == name) return k;
  }
  fail(Errc::invalid_argument, "unknown attack '" + name + "'");
}

std::size_t round_frame_count(double value) {
  require(std::isfinite(value) && value >= 0.0, Errc::invalid_argument,
          "frame count must be finite and >= 0");
  // std::nearbyint honours the default FE_TONEAREST mode: ties go to even.
  return static_cast<std::size_t>(std::nearbyint(value));
}

TemporalPlan plan_drop(std::size_t length, double fraction, std::uint64_t seed) {
  check_fraction(fraction, "drop: fraction must lie in [0, 1)");
  const std::size_t count = round_frame_count(static_cast<double>(length) * fraction);
  require(count < length, Errc::invalid_argument, "drop: fraction would remove every frame");
  std::mt19937_64 rng(seed);
  const auto dropped = sample_without_replacement(length, count, rng);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < length; ++i)
    if (!std::binary_search(dropped.begin(), dropped.end(), i)) order.push_back(i);
  TemporalPlan plan = from_order(length, order);
  plan.record.dropped = dropped;
  return plan;
}

TemporalPlan plan_swap_random(std::size_t length, std::uint64_t seed) {
  std::vector<std::size_t> order(length);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = length; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return from_order(length, order);
}

TemporalPlan plan_swap_adjacent(std::size_t length, double pair_fraction, std::uint64_t seed) {
  require(std::isfinite(pair_fraction) && pair_fraction >= 0.0 && pair_fraction <= 1.0,
          Errc::invalid_argument, "swap_adjacent: pair_fraction must lie in [0, 1]");
  const std::size_t count =
      static_cast<std::size_t>(std::floor(pair_fraction * static_cast<double>(length / 2) + 1e-9));
  std::vector<std::size_t> order(length);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (count > 0) {
    // k disjoint dominoes in a row of T cells <-> k of the T-k blocks chosen as
    // dominoes; the i-th chosen block c_i starts at cell c_i + i.
    std::mt19937_64 rng(seed);
    const auto blocks = sample_without_replacement(length - count, count, rng);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t start = blocks[i] + i;
      std::swap(order[start], order[start + 1]);
    }
  }
  return from_order(length, order);
}

TemporalPlan plan_insert(std::size_t length, double fraction, InsertMode mode,
                         std::uint64_t seed) {
  require(std::isfinite(fraction) && fraction >= 0.0, Errc::invalid_argument,
          "insert: fraction must be >= 0");
  require(length >= 1, Errc::invalid_argument, "insert: empty input");
  const std::size_t count = round_frame_count(static_cast<double>(length) * fraction);
  const std::size_t total = length + count;
  std::mt19937_64 rng(seed);
  const auto inserted = sample_without_replacement(total, count, rng);

  TemporalPlan plan;
  plan.record.original_length = length;
  plan.record.output_length = total;
  plan.record.inserted = inserted;
  std::size_t next_original = 0;
  std::size_t next_insert = 0;
  std::uniform_int_distribution<std::size_t> source(0, length - 1);
  for (std::size_t pos = 0; pos < total; ++pos) {
    if (next_insert < inserted.size() && inserted[next_insert] == pos) {
      if (mode == InsertMode::duplicate) {
        plan.slots.push_back({TemporalPlan::Slot::Source::duplicate, source(rng)});
      } else {
        plan.slots.push_back({TemporalPlan::Slot::Source::noise, next_insert});
      }
      ++next_insert;
    } else {
      plan.slots.push_back({TemporalPlan::Slot::Source::original, next_original});
      plan.record.positions.emplace_back(next_original, pos);
      ++next_original;
    }
  }
  return plan;
}

TemporalPlan plan_trim(std::size_t length, double head_fraction, double tail_fraction) {
  check_fraction(head_fraction, "trim: head fraction must lie in [0, 1)");
  check_fraction(tail_fraction, "trim: tail fraction must lie in [0, 1)");
  const auto n = static_cast<double>(length);
  const auto head = static_cast<std::size_t>(std::floor(n * head_fraction + 1e-9));
  const auto tail = static_cast<std::size_t>(std::floor(n * tail_fraction + 1e-9));
  require(head + tail < length, Errc::invalid_argument, "trim: would remove every frame");
  std::vector<std::size_t> order;
  for (std::size_t i = head; i < length - tail; ++i) order.push_back(i);
  TemporalPlan plan = from_order(length, order);
  plan.record.trim_head = head;
  plan.record.trim_tail = tail;
  return plan;
}

TemporalPlan plan_temporal(std::size_t length, const AttackSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case AttackKind::drop: return plan_drop(length, spec.fraction, spec.seed);
    case AttackKind::swap_random: return plan_swap_random(length, spec.seed);
    case AttackKind::swap_adjacent: return plan_swap_adjacent(length, spec.pair_fraction, spec.seed);
    case AttackKind::insert: return plan_insert(length, spec.fraction, spec.insert_mode, spec.seed);
    case AttackKind::trim: return plan_trim(length, spec.head_fraction, spec.tail_fraction);
    case AttackKind::none: {
      std::vector<std::size_t> order(length);
      std::iota(order.begin(), order.end(), std::size_t{0});
      return from_order(length, order);
    }
    default:
      fail(Errc::invalid_argument, "attack '" + attack_name(spec.kind) + "' is not temporal");
  }
}

AttackedSequence attack_sequence(const ExtractedSequence& seq, const AttackSpec& spec) {
  require(spec.kind == AttackKind::none || spec.is_temporal(), Errc::invalid_argument,
          "attack '" + attack_name(spec.kind) + "' needs a video, not a message sequence");
  require(!seq.messages.empty(), Errc::invalid_argument, "attack: empty sequence");
  const TemporalPlan plan = plan_temporal(seq.size(), spec);
  const std::size_t bits = seq.messages.front().size();
  std::mt19937_64 noise_rng(derive_seed(spec.seed, kNoiseStream));
  AttackedSequence out;
  out.sequence.messages = apply_plan(seq.messages, plan, [&](std::size_t) {
    Bits b(bits);
    for (auto& v : b) v = static_cast<std::uint8_t>(noise_rng() >> 63);
    return b;
  });
  out.record = plan.record;
  return out;
}

AttackedVideo attack_video(const Video& video, const AttackSpec& spec) {
  spec.validate();
  require(!video.empty(), Errc::invalid_argument, "attack: empty video");
  AttackedVideo out;
  if (spec.kind == AttackKind::pixel_noise) {
    out.video = attack_pixel_noise(video, spec.sigma, spec.seed);
    out.record = TamperRecord::identity(video.size());
    return out;
  }
  if (spec.kind == AttackKind::rescale) {
    out.video = attack_rescale(video, spec.factor);
    out.record = TamperRecord::identity(video.size());
    return out;
  }
  const TemporalPlan plan = plan_temporal(video.size(), spec);
  std::mt19937_64 noise_rng(derive_seed(spec.seed, kNoiseStream));
  const auto& shape = video.front();
  out.video = apply_plan(video, plan, [&](std::size_t) {
    std::normal_distribution<double> gauss(0.5, 0.25);
    ToyFrame f(0, shape.height, shape.width);
    for (auto& p : f.pixels) p = std::clamp(gauss(noise_rng), 0.0, 1.0);
    return f;
  });
  for (std::size_t i = 0; i < out.video.size(); ++i) out.video[i].frame_index = i + 1;
  out.record = plan.record;
  return out;
}

AttackedSequence attack_drop(const ExtractedSequence& seq, double fraction, std::uint64_t seed) {
  AttackSpec s;
  s.kind = AttackKind::drop;
  s.fraction = fraction;
  s.seed = seed;
  return attack_sequence(seq, s);
}

AttackedSequence attack_swap_random(const ExtractedSequence& seq, std::uint64_t seed) {
  AttackSpec s;
  s.kind = AttackKind::swap_random;
  s.seed = seed;
  return attack_sequence(seq, s);
}

AttackedSequence attack_swap_adjacent(const ExtractedSequence& seq, double pair_fraction,
                                      std::uint64_t seed) {
  AttackSpec s;
  s.kind = AttackKind::swap_adjacent;
  s.pair_fraction = pair_fraction;
  s.seed = seed;
  return attack_sequence(seq, s);
}

AttackedSequence attack_insert(const ExtractedSequence& seq, double fraction, InsertMode mode,
                               std::uint64_t seed) {
  AttackSpec s;
  s.kind = AttackKind::insert;
  s.fraction = fraction;
  s.insert_mode = mode;
  s.seed = seed;
  return attack_sequence(seq, s);
}

AttackedSequence attack_trim(const ExtractedSequence& seq, double head_fraction,
                             double tail_fraction) {
  AttackSpec s;
  s.kind = AttackKind::trim;
  s.head_fraction = head_fraction;
  s.tail_fraction = tail_fraction;
  return attack_sequence(seq, s);
}

Video attack_pixel_noise(const Video& video, double sigma, std::uint64_t seed) {
  require(std::isfinite(sigma) && sigma >= 0.0, Errc::invalid_argument,
          "noise: sigma must be >= 0");
  Video out = video;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (auto& f : out)
    for (auto& p : f.pixels) p = std::clamp(p + gauss(rng), 0.0, 1.0);
  return out;
}

ToyFrame resize_bilinear(const ToyFrame& frame, std::size_t height, std::size_t width) {
  require(height >= 1 && width >= 1, Errc::invalid_argument, "resize: target must be >= 1x1");
  require(frame.height >= 1 && frame.width >= 1 &&
              frame.pixels.size() == ToyFrame::kChannels * frame.height * frame.width,
          Errc::dimension_mismatch, "resize: malformed frame");
  ToyFrame out(frame.frame_index, height, width);
  const double sy = static_cast<double>(frame.height) / static_cast<double>(height);
  const double sx = static_cast<double>(frame.width) / static_cast<double>(width);
  // Half-pixel centres; the source coordinate is clamped to the raster.
  auto coord = [](std::size_t dst, double scale, std::size_t src_len) {
    double s = (static_cast<double>(dst) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(s));
    const std::size_t i1 = std::min(i0 + 1, src_len - 1);
    return std::tuple{i0, i1, s - static_cast<double>(i0)};
  };
  for (std::size_t c = 0; c < ToyFrame::kChannels; ++c) {
    for (std::size_t y = 0; y < height; ++y) {
      const auto [y0, y1, wy] = coord(y, sy, frame.height);
      for (std::size_t x = 0; x < width; ++x) {
        const auto [x0, x1, wx] = coord(x, sx, frame.width);
        const double top = (1 - wx) * frame.at(c, y0, x0) + wx * frame.at(c, y0, x1);
        const double bot = (1 - wx) * frame.at(c, y1, x0) + wx * frame.at(c, y1, x1);
        out.at(c, y, x) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

Video attack_rescale(const Video& video, double factor) {
  require(std::isfinite(factor) && factor > 0.0, Errc::invalid_argument,
          "rescale: factor must be > 0");
  Video out;
  out.reserve(video.size());
  for (const auto& f : video) {
    const auto h = std::max<std::size_t>(1, round_frame_count(static_cast<double>(f.height) * factor));
    const auto w = std::max<std::size_t>(1, round_frame_count(static_cast<double>(f.width) * factor));
    out.push_back(resize_bilinear(resize_bilinear(f, h, w), f.height, f.width));
  }
  return out;
}

}  // namespace spdmark
