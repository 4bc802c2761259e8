#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "spdmark/channel_attacks.hpp"
#include "spdmark/error.hpp"
#include "spdmark/pipeline.hpp"
#include "spdmark/verifier.hpp"

using namespace spdmark;

namespace {

std::vector<Bits> random_messages(std::mt19937_64& rng, std::size_t n, std::size_t bits) {
  std::vector<Bits> out(n, Bits(bits));
  for (auto& m : out)
    for (auto& b : m) b = rng() & 1u;
  return out;
}

std::vector<std::ptrdiff_t> to_rows(const Assignment& a, std::size_t rows) {
  std::vector<std::ptrdiff_t> out(rows, -1);
  for (const auto& p : a.pairs) out[p.pi] = static_cast<std::ptrdiff_t>(p.rho);
  return out;
}

std::vector<FrameRow> rows_from_rho(const std::vector<std::size_t>& rho) {
  std::vector<FrameRow> q;
  for (std::size_t i = 0; i < rho.size(); ++i) q.push_back({i, rho[i], 28, true});
  return q;
}

}  // namespace

TEST_CASE("similarity values") {
  const auto s = similarity_matrix(std::vector<Bits>{{1, 0, 1, 0}}, std::vector<Bits>{{1, 0, 1, 0}, {1, 0, 0, 0}, {0, 1, 0, 1}});
  CHECK(s.at(0, 0) == 1.0);
  CHECK(s.at(0, 1) == 0.75);
  CHECK(s.at(0, 2) == 0.0);
  CHECK(s.matched_bits == std::vector<std::int64_t>{4, 3, 0});
  CHECK_THROWS_AS(similarity_matrix(std::vector<Bits>{{1, 0}}, std::vector<Bits>{{1, 0, 1}}), Error);
}

TEST_CASE("hungarian examples") {
  const auto a = hungarian_match(SimilarityMatrix::from_values(2, 2, {0.9, 0.1, 0.2, 0.8}));
  CHECK(a.pairs == std::vector<MatchedPair>{{0, 0}, {1, 1}});
  CHECK(a.total_similarity == doctest::Approx(1.7));

  std::vector<double> diag(25, 0.3);
  for (std::size_t i = 0; i < 5; ++i) diag[i * 5 + i] = 1.0;
  const auto id = hungarian_match(SimilarityMatrix::from_values(5, 5, diag));
  for (std::size_t i = 0; i < 5; ++i) CHECK(id.pairs[i] == MatchedPair{i, i});

  // Constant matrices: every assignment ties, identity order wins.
  for (auto [r, c] : {std::pair<std::size_t, std::size_t>{4, 4}, {3, 6}, {6, 3}}) {
    const auto k = hungarian_match(SimilarityMatrix::from_values(r, c, std::vector<double>(r * c, 0.5)));
    REQUIRE(k.pairs.size() == std::min(r, c));
    for (std::size_t i = 0; i < k.pairs.size(); ++i) CHECK(k.pairs[i] == MatchedPair{i, i});
    CHECK(k.total_similarity == doctest::Approx(0.5 * static_cast<double>(std::min(r, c))));
  }
}

TEST_CASE("hungarian agrees with brute force, including tie-break") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> dim(1, 7);
  std::uniform_int_distribution<std::size_t> bits(1, 12);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t r = dim(rng), c = dim(rng), m = bits(rng);
    // Small M forces plenty of ties.
    const auto s = similarity_matrix(random_messages(rng, r, m), random_messages(rng, c, m));
    const auto got = to_rows(hungarian_match(s), r);
    const auto ref = oracle::brute_force(r, c, s.matched_bits);
    CHECK(oracle::assignment_total(c, s.matched_bits, got) == static_cast<std::int64_t>(ref.best));
    CHECK(got == ref.row_to_col);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t r = dim(rng), c = dim(rng);
    std::vector<double> w(r * c);
    for (auto& v : w) v = u(rng);
    const auto got = to_rows(hungarian_match(SimilarityMatrix::from_values(r, c, w)), r);
    const auto ref = oracle::brute_force(r, c, w);
    CHECK(oracle::assignment_total(c, w, got) == ref.best);
  }
}

TEST_CASE("hungarian handles negative and large integer weights") {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<std::int64_t> big(-1000000000, 1000000000);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t r = 1 + rng() % 6, c = 1 + rng() % 6;
    std::vector<std::int64_t> w(r * c);
    for (auto& v : w) v = big(rng);
    const auto got = max_weight_assignment(r, c, std::span<const std::int64_t>(w));
    CHECK(oracle::assignment_total(c, w, got) == static_cast<std::int64_t>(oracle::brute_force(r, c, w).best));
  }
}

TEST_CASE("binomial tail against the exact oracle") {
  CHECK(binomial_tail(28, 0) == 1.0);
  CHECK(binomial_tail(2, 2) == 0.25);
  CHECK(binomial_tail(28, 29) == 0.0);
  CHECK(oracle::upper_count(28, 23) == 122438);
  CHECK(binomial_tail(28, 23) == doctest::Approx(122438.0 / 268435456.0).epsilon(1e-12));
  double worst = 0.0;
  for (unsigned n = 1; n <= 64; ++n)
    for (unsigned k = 0; k <= n; ++k) {
      const double want = oracle::tail_half(n, k);
      worst = std::max(worst, std::abs(binomial_tail(n, k) - want) / want);
    }
  CHECK(worst <= 1e-12);
  for (double p : {1e-4, 4.56e-4, 0.02, 0.3})
    for (unsigned n : {1u, 7u, 25u, 64u})
      for (unsigned k = 0; k <= n; ++k) {
        const double want = oracle::tail_p(n, k, p);
        if (want < 1e-290) continue;
        CHECK(std::abs(binomial_tail(n, k, p) - want) / want <= 1e-11);
      }
  CHECK(binomial_tail(10, 3, 0.0) == 0.0);
  CHECK(binomial_tail(10, 0, 0.0) == 1.0);
  CHECK_THROWS_AS(binomial_tail(5, 7), Error);
}

TEST_CASE("frame and video thresholds") {
  const auto f = frame_threshold(28, 1e-3);
  CHECK(f.tau == 23);
  CHECK(f.tau == oracle::threshold_half(28, 1e-3));
  CHECK(f.tail == doctest::Approx(4.56117e-4).epsilon(1e-5));
  CHECK(binomial_tail(28, 22) > 1e-3);
  CHECK(frame_threshold(28, 0.5).tau == 15);
  CHECK(frame_threshold(28, 0.5).tau == oracle::threshold_half(28, 0.5));
  CHECK(frame_threshold(28, 1.0).tau == 0);
  for (unsigned m : {1u, 8u, 28u, 64u})
    for (double g : {1e-9, 1e-6, 1e-3, 0.05, 0.5, 0.999})
      CHECK(frame_threshold(m, g).tau == oracle::threshold_half(m, g));

  CHECK(video_threshold(25, f.tail, 1e-6) == 3);
  CHECK(oracle::tail_p(25, 2, f.tail) > 1e-6);
  CHECK(oracle::tail_p(25, 3, f.tail) <= 1e-6);
  CHECK(video_threshold(25, 0.0, 1e-6) == 1);
  CHECK(video_threshold(25, f.tail, 1.0) == 0);
  CHECK_THROWS_AS(frame_threshold(28, 0.0), Error);
  CHECK_THROWS_AS(video_threshold(25, 0.1, 2.0), Error);
}

TEST_CASE("order accuracy") {
  CHECK(order_accuracy(rows_from_rho({0, 1, 2, 3})) == 1.0);
  CHECK(order_accuracy(rows_from_rho({3, 2, 1, 0})) == 0.0);
  std::vector<std::size_t> one_swap(16);
  std::iota(one_swap.begin(), one_swap.end(), std::size_t{0});
  std::swap(one_swap[6], one_swap[7]);
  CHECK(order_accuracy(rows_from_rho(one_swap)) == doctest::Approx(14.0 / 15.0));
  CHECK(order_accuracy(rows_from_rho({4})) == 1.0);
  CHECK(order_accuracy(std::vector<FrameRow>{}) == 1.0);
}

TEST_CASE("verify under clean, permuted and random inputs") {
  std::mt19937_64 rng(23);
  const auto expected = random_messages(rng, 25, 28);
  const Verdict clean = verify(expected, expected, 1e-3, 1e-6);
  CHECK(clean.valid);
  CHECK(clean.num_valid == 25);
  CHECK(clean.bit_acc == 1.0);
  CHECK(clean.order_acc == 1.0);
  CHECK(clean.thresholds.tau_f == 23);
  CHECK(clean.thresholds.tau_v == 3);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ExtractedSequence seq{expected};
    const auto a = attack_swap_random(seq, seed);
    const Verdict v = verify(expected, a.sequence.messages, 1e-3, 1e-6);
    CHECK(v.valid);
    CHECK(v.bit_acc == 1.0);
    if (!a.record.adjacent_inversions().empty()) CHECK(v.order_acc < 1.0);
  }

  const Verdict noise = verify(expected, random_messages(rng, 25, 28), 1e-3, 1e-6);
  CHECK(noise.frames.size() == 25);
  CHECK_FALSE(noise.valid);

  // Empty Q: accuracy 0 by convention, order trivially 1.
  std::vector<Bits> complement = expected;
  for (auto& m : complement)
    for (auto& b : m) b ^= 1u;
  const Verdict none = verify(expected, complement, 1e-3, 1e-6);
  CHECK(none.num_valid == 0);
  CHECK(none.bit_acc == 0.0);
  CHECK(none.order_acc == 1.0);
  CHECK_FALSE(none.valid);
}

TEST_CASE("set scores and diagnosis") {
  CHECK(score_sets(std::vector<std::size_t>{}, std::vector<std::size_t>{}).f1 == 1.0);
  CHECK(score_sets(std::vector<std::size_t>{1}, std::vector<std::size_t>{}).f1 == 0.0);
  CHECK(score_sets(std::vector<std::size_t>{}, std::vector<std::size_t>{1}).f1 == 0.0);
  const auto s = score_sets(std::vector<std::size_t>{1, 2, 3, 4}, std::vector<std::size_t>{2, 3, 5});
  CHECK(s.precision == 0.5);
  CHECK(s.recall == doctest::Approx(2.0 / 3.0));
  CHECK(s.f1 == doctest::Approx(4.0 / 7.0));

  std::mt19937_64 rng(24);
  const auto expected = random_messages(rng, 25, 28);
  ExtractedSequence seq{expected};
  const auto ident = TamperRecord::identity(25);
  const Verdict v0 = verify(expected, expected, 1e-3, 1e-6);
  const auto d0 = diagnose_tampering(v0, 25, 25, &ident);
  CHECK(d0.predicted_dropped.empty());
  CHECK(d0.predicted_inserted.empty());
  CHECK(d0.predicted_inversions.empty());
  CHECK(d0.dropped_score->f1 == 1.0);
  CHECK(d0.inversion_score->f1 == 1.0);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = attack_drop(seq, 0.5, seed);
    const Verdict v = verify(expected, a.sequence.messages, 1e-3, 1e-6);
    const auto d = diagnose_tampering(v, 25, a.sequence.size(), &a.record);
    CHECK(d.predicted_dropped == a.record.dropped);
    CHECK(d.dropped_score->f1 == 1.0);
    CHECK(d.recovered_positions == a.record.positions);

    const auto t = attack_trim(seq, 0.2, 0.2);
    const auto dt = diagnose_tampering(verify(expected, t.sequence.messages, 1e-3, 1e-6), 25, 15, &t.record);
    CHECK(dt.predicted_dropped == t.record.missing());

    const auto sw = attack_swap_adjacent(seq, 0.3, seed);
    const auto ds = diagnose_tampering(verify(expected, sw.sequence.messages, 1e-3, 1e-6), 25, 25, &sw.record,
                                       true);
    CHECK(ds.predicted_inversions == sw.record.adjacent_inversions());
    CHECK(ds.all_inversions.size() == 3);
    CHECK(ds.inversion_score->f1 == 1.0);
  }
  CHECK_THROWS_AS(diagnose_tampering(v0, 24, 25), Error);
}
