#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "spdmark/channel_attacks.hpp"
#include "spdmark/keyspace.hpp"

namespace spdmark {

// rows = expected frames (pi), cols = received frames (rho). When built from
// messages, `matched_bits` carries the exact integer S = M - psi and the
// matcher runs on it, so ties are resolved exactly.
struct SimilarityMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t message_bits = 0;  // 0 for a free-standing real matrix
  std::vector<double> values;    // row-major, 1 - psi/M
  std::vector<std::int64_t> matched_bits;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  static SimilarityMatrix from_values(std::size_t rows, std::size_t cols, std::vector<double> values);
};

SimilarityMatrix similarity_matrix(std::span<const Bits> expected, std::span<const Bits> received);
SimilarityMatrix similarity_matrix(const Schedule& expected, const ExtractedSequence& received);

struct MatchedPair {
  std::size_t pi = 0;
  std::size_t rho = 0;
  bool operator==(const MatchedPair&) const = default;
};

struct Assignment {
  std::vector<MatchedPair> pairs;  // sorted by pi, |pairs| = min(rows, cols)
  double total_similarity = 0.0;
};

// Maximum-weight one-to-one assignment on a rectangular matrix. Among optimal
// assignments the lexicographically smallest (pi, rho) sequence is returned.
Assignment hungarian_match(const SimilarityMatrix& s);

// Row -> column (or -1) for a row-major weight matrix; the generic core of hungarian_match.
std::vector<std::ptrdiff_t> max_weight_assignment(std::size_t rows, std::size_t cols,
                                                  std::span<const double> weights);
std::vector<std::ptrdiff_t> max_weight_assignment(std::size_t rows, std::size_t cols,
                                                  std::span<const std::int64_t> weights);

double log_binomial_coefficient(std::uint64_t n, std::uint64_t k);
// Pr(X >= k), X ~ Binomial(n, 1/2). Requires k <= n + 1.
double binomial_tail(std::uint64_t n, std::uint64_t k);
// Pr(X >= k), X ~ Binomial(n, p).
double binomial_tail(std::uint64_t n, std::uint64_t k, double p);

struct FrameThreshold {
  std::uint64_t tau = 0;
  double tail = 1.0;  // p_f
};

// tau_f = min{tau : Pr(S >= tau) <= gamma_f}, S ~ Binomial(M, 1/2).
FrameThreshold frame_threshold(std::uint64_t message_bits, double gamma_f);
// tau_v = min{tau : Pr(|Q| >= tau) <= gamma_v}, |Q| ~ Binomial(count, p_f).
std::uint64_t video_threshold(std::uint64_t assignment_count, double p_f, double gamma_v);

struct Thresholds {
  std::uint64_t tau_f = 0;
  double p_f = 1.0;
  std::uint64_t tau_v = 0;
  double gamma_f = 0.0;
  double gamma_v = 0.0;
};

struct FrameRow {
  std::size_t pi = 0;
  std::size_t rho = 0;
  std::uint64_t matched_bits = 0;
  bool valid = false;
};

struct Verdict {
  bool valid = false;
  std::size_t expected_length = 0;  // T
  std::size_t received_length = 0;  // T_r
  std::size_t message_bits = 0;     // M
  Thresholds thresholds;
  std::vector<FrameRow> frames;  // every assigned pair, sorted by pi
  std::size_t num_valid = 0;     // |Q|
  double bit_acc = 0.0;          // over Q; 0 when Q is empty
  double order_acc = 1.0;        // over Q sorted by pi
  double video_p_value = 1.0;    // Pr(Binomial(|M|, p_f) >= |Q|)
  double total_similarity = 0.0;

  std::vector<FrameRow> valid_set() const;
};

Verdict verify(const Schedule& expected, const ExtractedSequence& received, double gamma_f,
               double gamma_v);
Verdict verify(std::span<const Bits> expected, std::span<const Bits> received, double gamma_f,
               double gamma_v);

// Fraction of adjacent ascents of rho over Q sorted by pi; 1.0 when |Q| <= 1.
double order_accuracy(std::span<const FrameRow> valid_sorted_by_pi);

struct ClassScore {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
};

// Empty-set conventions: both empty -> 1, exactly one empty -> 0.
ClassScore score_sets(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

struct TamperDiagnosis {
  std::vector<std::size_t> predicted_dropped;   // expected indices missing from Q
  std::vector<std::size_t> predicted_inserted;  // received positions missing from Q
  std::vector<std::pair<std::size_t, std::size_t>> predicted_inversions;  // (pi_i, pi_i+1)
  std::vector<std::pair<std::size_t, std::size_t>> all_inversions;  // only when requested
  std::vector<std::pair<std::size_t, std::size_t>> recovered_positions;  // Q as (pi, rho)
  std::optional<ClassScore> dropped_score;
  std::optional<ClassScore> inserted_score;
  std::optional<ClassScore> inversion_score;
};

TamperDiagnosis diagnose_tampering(const Verdict& verdict, std::size_t expected_length,
                                   std::size_t received_length,
                                   const TamperRecord* ground_truth = nullptr,
                                   bool list_all_inversions = false);

}  // namespace spdmark
