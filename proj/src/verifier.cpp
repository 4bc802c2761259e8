#include "spdmark/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>

#include "spdmark/error.hpp"

namespace spdmark {
namespace {

// Relative slack when comparing a computed tail against its target rate, so a
// tail that equals gamma exactly is not rejected by one ulp of log-space error.
constexpr double kTailSlack = 1e-12;

template <class W>
struct Dual {
  std::vector<W> u;  // rows, 1-based
  std::vector<W> v;  // cols, 1-based
  std::vector<std::size_t> col_owner;  // col j -> row (1-based), 0 = none
};

// Shortest augmenting path Hungarian method on an n x n cost matrix (min-cost).
// On return u_i + v_j <= c_ij everywhere, with equality on matched edges.
template <class W>
Dual<W> solve_min_cost(std::size_t n, const std::vector<W>& cost) {
  const W inf = std::is_floating_point_v<W> ? std::numeric_limits<W>::infinity()
                                             : std::numeric_limits<W>::max() / 4;
  Dual<W> d{std::vector<W>(n + 1, W{0}), std::vector<W>(n + 1, W{0}),
            std::vector<std::size_t>(n + 1, 0)};
  std::vector<std::size_t> way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    d.col_owner[0] = i;
    std::size_t j0 = 0;
    std::vector<W> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = d.col_owner[j0];
      W delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const W cur = cost[(i0 - 1) * n + (j - 1)] - d.u[i0] - d.v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          d.u[d.col_owner[j]] += delta;
          d.v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (d.col_owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      d.col_owner[j0] = d.col_owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  return d;
}

// Lexicographically smallest perfect matching inside the tight-edge graph of
// an optimal dual. Every optimal assignment uses tight edges only, so this is
// the lexicographically smallest optimal assignment.
class LexMinMatcher {
 public:
  LexMinMatcher(std::size_t n, std::vector<std::vector<std::size_t>> tight,
                std::vector<std::size_t> row_to_col)
      : n_(n), tight_(std::move(tight)), row_to_col_(std::move(row_to_col)), col_to_row_(n) {
    for (std::size_t r = 0; r < n_; ++r) col_to_row_[row_to_col_[r]] = r;
  }

  std::vector<std::size_t> run() {
    fixed_row_.assign(n_, 0);
    fixed_col_.assign(n_, 0);
    for (std::size_t r = 0; r < n_; ++r) {
      for (std::size_t c : tight_[r]) {  // ascending
        if (fixed_col_[c]) continue;
        if (row_to_col_[r] == c || reroute(r, c)) {
          fixed_row_[r] = 1;
          fixed_col_[c] = 1;
          break;
        }
      }
      if (!fixed_row_[r]) fail(Errc::internal, "assignment: tight graph lost its perfect matching");
    }
    return row_to_col_;
  }

 private:
  // Force (r, c) into the matching by finding an alternating path from the row
  // that loses c to the column r gives up, avoiding fixed rows/columns.
  bool reroute(std::size_t r, std::size_t c) {
    const std::size_t displaced_row = col_to_row_[c];
    const std::size_t freed_col = row_to_col_[r];
    visited_.assign(n_, 0);
    visited_[c] = 1;
    std::vector<std::size_t> row_path;
    std::vector<std::size_t> col_path;
    if (!augment(displaced_row, freed_col, r, row_path, col_path)) return false;
    // Apply: displaced_row takes col_path[0], the row that owned it takes col_path[1], ...
    for (std::size_t k = 0; k < row_path.size(); ++k) {
      row_to_col_[row_path[k]] = col_path[k];
      col_to_row_[col_path[k]] = row_path[k];
    }
    row_to_col_[r] = c;
    col_to_row_[c] = r;
    return true;
  }

  bool augment(std::size_t row, std::size_t target, std::size_t banned_row,
               std::vector<std::size_t>& row_path, std::vector<std::size_t>& col_path) {
    for (std::size_t k : tight_[row]) {
      if (visited_[k] || fixed_col_[k]) continue;
      visited_[k] = 1;
      row_path.push_back(row);
      col_path.push_back(k);
      if (k == target) return true;
      const std::size_t next = col_to_row_[k];
      if (next != banned_row && !fixed_row_[next] &&
          augment(next, target, banned_row, row_path, col_path))
        return true;
      row_path.pop_back();
      col_path.pop_back();
    }
    return false;
  }

  std::size_t n_;
  std::vector<std::vector<std::size_t>> tight_;
  std::vector<std::size_t> row_to_col_;
  std::vector<std::size_t> col_to_row_;
  std::vector<char> fixed_row_;
  std::vector<char> fixed_col_;
  std::vector<char> visited_;
};

template <class W>
std::vector<std::ptrdiff_t> assign_impl(std::size_t rows, std::size_t cols,
                                        std::span<const W> weights) {
  require(rows >= 1 && cols >= 1, Errc::invalid_argument, "assignment: empty matrix");
  require(weights.size() == rows * cols, Errc::dimension_mismatch,
          "assignment: weight count does not match shape");
  const std::size_t n = std::max(rows, cols);
  // Pad to square with zero-weight dummies; min-cost on negated weights.
  std::vector<W> cost(n * n, W{0});
  W scale{0};
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const W w = weights[r * cols + c];
      if constexpr (std::is_floating_point_v<W>) {
        require(std::isfinite(w), Errc::invalid_argument, "assignment: non-finite weight");
        scale = std::max(scale, std::abs(w));
      }
      cost[r * n + c] = -w;
    }

  const Dual<W> dual = solve_min_cost(n, cost);
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[dual.col_owner[j] - 1] = j - 1;

  W tol{0};
  if constexpr (std::is_floating_point_v<W>) tol = 1e-9 * (1.0 + scale) * static_cast<W>(n);
  std::vector<std::vector<std::size_t>> tight(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      if (cost[r * n + c] - dual.u[r + 1] - dual.v[c + 1] <= tol) tight[r].push_back(c);

  row_to_col = LexMinMatcher(n, std::move(tight), std::move(row_to_col)).run();
  std::vector<std::ptrdiff_t> out(rows, -1);
  for (std::size_t r = 0; r < rows; ++r)
    if (row_to_col[r] < cols) out[r] = static_cast<std::ptrdiff_t>(row_to_col[r]);
  return out;
}

double log_sum_exp(const std::vector<double>& terms) {
  if (terms.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(peak)) return peak;
  // Sum smallest first.
  std::vector<double> scaled;
  scaled.reserve(terms.size());
  for (double t : terms) scaled.push_back(std::exp(t - peak));
  std::sort(scaled.begin(), scaled.end());
  double acc = 0.0;
  for (double s : scaled) acc += s;
  return peak + std::log(acc);
}

}  // namespace

SimilarityMatrix SimilarityMatrix::from_values(std::size_t rows, std::size_t cols,
                                               std::vector<double> values) {
  require(values.size() == rows * cols, Errc::dimension_mismatch,
          "similarity matrix: value count does not match shape");
  SimilarityMatrix s;
  s.rows = rows;
  s.cols = cols;
  s.values = std::move(values);
  return s;
}

SimilarityMatrix similarity_matrix(std::span<const Bits> expected, std::span<const Bits> received) {
  require(!expected.empty() && !received.empty(), Errc::invalid_argument,
          "similarity matrix: empty message list");
  const std::size_t m = expected.front().size();
  require(m >= 1, Errc::invalid_argument, "similarity matrix: zero-length messages");
  for (const auto& e : expected)
    require(e.size() == m, Errc::dimension_mismatch, "similarity matrix: message length mismatch");
  for (const auto& r : received)
    require(r.size() == m, Errc::dimension_mismatch, "similarity matrix: message length mismatch");

  SimilarityMatrix s;
  s.rows = expected.size();
  s.cols = received.size();
  s.message_bits = m;
  s.values.resize(s.rows * s.cols);
  s.matched_bits.resize(s.rows * s.cols);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) {
      const std::size_t psi = hamming(expected[i], received[j]);
      s.matched_bits[i * s.cols + j] = static_cast<std::int64_t>(m - psi);
      s.values[i * s.cols + j] = 1.0 - static_cast<double>(psi) / static_cast<double>(m);
    }
  return s;
}

SimilarityMatrix similarity_matrix(const Schedule& expected, const ExtractedSequence& received) {
  std::vector<Bits> exp;
  exp.reserve(expected.size());
  for (const auto& m : expected) exp.push_back(m.bits);
  return similarity_matrix(exp, received.messages);
}

std::vector<std::ptrdiff_t> max_weight_assignment(std::size_t rows, std::size_t cols,
                                                  std::span<const double> weights) {
  return assign_impl<double>(rows, cols, weights);
}

std::vector<std::ptrdiff_t> max_weight_assignment(std::size_t rows, std::size_t cols,
                                                  std::span<const std::int64_t> weights) {
  return assign_impl<std::int64_t>(rows, cols, weights);
}

Assignment hungarian_match(const SimilarityMatrix& s) {
  require(s.rows >= 1 && s.cols >= 1, Errc::invalid_argument, "hungarian_match: empty matrix");
  require(s.values.size() == s.rows * s.cols, Errc::dimension_mismatch,
          "hungarian_match: malformed matrix");
  const auto row_to_col = s.matched_bits.size() == s.values.size()
                              ? max_weight_assignment(s.rows, s.cols, s.matched_bits)
                              : max_weight_assignment(s.rows, s.cols, s.values);
  Assignment a;
  for (std::size_t r = 0; r < s.rows; ++r) {
    if (row_to_col[r] < 0) continue;
    const auto c = static_cast<std::size_t>(row_to_col[r]);
    a.pairs.push_back({r, c});
    a.total_similarity += s.at(r, c);
  }
  return a;
}

double log_binomial_coefficient(std::uint64_t n, std::uint64_t k) {
  require(k <= n, Errc::invalid_argument, "binomial coefficient: k > n");
  const auto nd = static_cast<double>(n);
  const auto kd = static_cast<double>(k);
  return std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0);
}

double binomial_tail(std::uint64_t n, std::uint64_t k) { return binomial_tail(n, k, 0.5); }

double binomial_tail(std::uint64_t n, std::uint64_t k, double p) {
  require(k <= n + 1, Errc::invalid_argument, "binomial_tail: need 0 <= k <= n + 1");
  require(std::isfinite(p) && p >= 0.0 && p <= 1.0, Errc::invalid_argument,
          "binomial_tail: p must lie in [0, 1]");
  if (k == 0) return 1.0;
  if (k == n + 1) return 0.0;
  if (p == 0.0) return 0.0;  // k >= 1
  if (p == 1.0) return 1.0;  // k <= n
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  std::vector<double> terms;
  terms.reserve(n - k + 1);
  for (std::uint64_t j = k; j <= n; ++j) {
    terms.push_back(log_binomial_coefficient(n, j) + static_cast<double>(j) * lp +
                    static_cast<double>(n - j) * lq);
  }
  return std::min(1.0, std::exp(log_sum_exp(terms)));
}

FrameThreshold frame_threshold(std::uint64_t message_bits, double gamma_f) {
  require(std::isfinite(gamma_f) && gamma_f > 0.0 && gamma_f <= 1.0, Errc::invalid_argument,
          "frame_threshold: gamma_f must lie in (0, 1]");
  require(message_bits >= 1, Errc::invalid_argument, "frame_threshold: M must be >= 1");
  for (std::uint64_t tau = 0; tau <= message_bits + 1; ++tau) {
    const double tail = binomial_tail(message_bits, tau);
    if (tail <= gamma_f * (1.0 + kTailSlack)) return {tau, tail};
  }
  return {message_bits + 1, 0.0};
}

std::uint64_t video_threshold(std::uint64_t assignment_count, double p_f, double gamma_v) {
  require(std::isfinite(gamma_v) && gamma_v > 0.0 && gamma_v <= 1.0, Errc::invalid_argument,
          "video_threshold: gamma_v must lie in (0, 1]");
  require(std::isfinite(p_f) && p_f >= 0.0 && p_f <= 1.0, Errc::invalid_argument,
          "video_threshold: p_f must lie in [0, 1]");
  for (std::uint64_t tau = 0; tau <= assignment_count + 1; ++tau) {
    if (binomial_tail(assignment_count, tau, p_f) <= gamma_v * (1.0 + kTailSlack)) return tau;
  }
  return assignment_count + 1;
}

std::vector<FrameRow> Verdict::valid_set() const {
  std::vector<FrameRow> q;
  for (const auto& f : frames)
    if (f.valid) q.push_back(f);
  return q;
}

double order_accuracy(std::span<const FrameRow> valid_sorted_by_pi) {
  if (valid_sorted_by_pi.size() <= 1) return 1.0;
  std::size_t ascents = 0;
  for (std::size_t i = 0; i + 1 < valid_sorted_by_pi.size(); ++i)
    ascents += valid_sorted_by_pi[i].rho < valid_sorted_by_pi[i + 1].rho;
  return static_cast<double>(ascents) / static_cast<double>(valid_sorted_by_pi.size() - 1);
}

Verdict verify(std::span<const Bits> expected, std::span<const Bits> received, double gamma_f,
               double gamma_v) {
  const SimilarityMatrix s = similarity_matrix(expected, received);
  const Assignment a = hungarian_match(s);
  const FrameThreshold ft = frame_threshold(s.message_bits, gamma_f);

  Verdict v;
  v.expected_length = s.rows;
  v.received_length = s.cols;
  v.message_bits = s.message_bits;
  v.thresholds.tau_f = ft.tau;
  v.thresholds.p_f = ft.tail;
  v.thresholds.gamma_f = gamma_f;
  v.thresholds.gamma_v = gamma_v;
  v.thresholds.tau_v = video_threshold(a.pairs.size(), ft.tail, gamma_v);
  v.total_similarity = a.total_similarity;

  std::uint64_t matched_sum = 0;
  for (const auto& p : a.pairs) {
    const auto bits = static_cast<std::uint64_t>(s.matched_bits[p.pi * s.cols + p.rho]);
    const bool ok = bits >= ft.tau;
    v.frames.push_back({p.pi, p.rho, bits, ok});
    if (ok) {
      ++v.num_valid;
      matched_sum += bits;
    }
  }
  v.valid = v.num_valid >= v.thresholds.tau_v;
  if (v.num_valid > 0) {
    v.bit_acc = static_cast<double>(matched_sum) /
                (static_cast<double>(v.num_valid) * static_cast<double>(s.message_bits));
  }
  const auto q = v.valid_set();
  v.order_acc = order_accuracy(q);
  v.video_p_value = binomial_tail(a.pairs.size(), v.num_valid, ft.tail);
  return v;
}

Verdict verify(const Schedule& expected, const ExtractedSequence& received, double gamma_f,
               double gamma_v) {
  std::vector<Bits> exp;
  exp.reserve(expected.size());
  for (const auto& m : expected) exp.push_back(m.bits);
  return verify(exp, received.messages, gamma_f, gamma_v);
}

ClassScore score_sets(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  std::vector<std::size_t> p(predicted.begin(), predicted.end());
  std::vector<std::size_t> t(truth.begin(), truth.end());
  std::sort(p.begin(), p.end());
  std::sort(t.begin(), t.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  ClassScore s;
  if (p.empty() && t.empty()) return s;
  if (p.empty() || t.empty()) return {0.0, 0.0, 0.0};
  std::vector<std::size_t> both;
  std::set_intersection(p.begin(), p.end(), t.begin(), t.end(), std::back_inserter(both));
  s.precision = static_cast<double>(both.size()) / static_cast<double>(p.size());
  s.recall = static_cast<double>(both.size()) / static_cast<double>(t.size());
  s.f1 = (s.precision + s.recall) > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

TamperDiagnosis diagnose_tampering(const Verdict& verdict, std::size_t expected_length,
                                   std::size_t received_length, const TamperRecord* ground_truth,
                                   bool list_all_inversions) {
  require(verdict.expected_length == expected_length && verdict.received_length == received_length,
          Errc::invalid_argument, "diagnose: verdict lengths do not match T / T_r");
  for (const auto& f : verdict.frames)
    require(f.pi < expected_length && f.rho < received_length, Errc::invalid_argument,
            "diagnose: verdict pair out of range");

  const auto q = verdict.valid_set();
  TamperDiagnosis d;
  std::vector<char> seen_pi(expected_length, 0);
  std::vector<char> seen_rho(received_length, 0);
  for (const auto& f : q) {
    seen_pi[f.pi] = 1;
    seen_rho[f.rho] = 1;
    d.recovered_positions.emplace_back(f.pi, f.rho);
  }
  for (std::size_t m = 0; m < expected_length; ++m)
    if (!seen_pi[m]) d.predicted_dropped.push_back(m);
  for (std::size_t n = 0; n < received_length; ++n)
    if (!seen_rho[n]) d.predicted_inserted.push_back(n);
  for (std::size_t i = 0; i + 1 < q.size(); ++i)
    if (q[i].rho > q[i + 1].rho) d.predicted_inversions.emplace_back(q[i].pi, q[i + 1].pi);
  if (list_all_inversions) {
    for (std::size_t i = 0; i < q.size(); ++i)
      for (std::size_t j = i + 1; j < q.size(); ++j)
        if (q[i].rho > q[j].rho) d.all_inversions.emplace_back(q[i].pi, q[j].pi);
  }

  if (ground_truth != nullptr) {
    require(ground_truth->original_length == expected_length &&
                ground_truth->output_length == received_length,
            Errc::invalid_argument, "diagnose: ground truth lengths do not match T / T_r");
    const auto missing = ground_truth->missing();
    d.dropped_score = score_sets(d.predicted_dropped, missing);
    d.inserted_score = score_sets(d.predicted_inserted, ground_truth->inserted);
    // Inversions are compared by their leading expected index.
    std::vector<std::size_t> pred_inv;
    std::vector<std::size_t> true_inv;
    for (const auto& [a, b] : d.predicted_inversions) pred_inv.push_back(a);
    for (const auto& [a, b] : ground_truth->adjacent_inversions()) true_inv.push_back(a);
    d.inversion_score = score_sets(pred_inv, true_inv);
  }
  return d;
}

}  // namespace spdmark
