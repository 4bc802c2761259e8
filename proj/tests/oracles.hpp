// Independent reference implementations shared by the unit tests and the
// acceptance runner. Nothing here calls the code it is checking.
#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "spdmark/objective.hpp"
#include "spdmark/spd_core.hpp"

namespace oracle {

using boost::multiprecision::cpp_int;
using BigFloat = boost::multiprecision::cpp_bin_float_100;

inline cpp_int choose(unsigned n, unsigned k) {
  cpp_int c = 1;
  for (unsigned j = 1; j <= k; ++j) c = c * (n - k + j) / j;
  return c;
}

// sum_{j >= k} C(n, j), exactly.
inline cpp_int upper_count(unsigned n, unsigned k) {
  cpp_int s = 0;
  for (unsigned j = k; j <= n; ++j) s += choose(n, j);
  return s;
}

// Pr(Binomial(n, 1/2) >= k) rounded once from the exact rational.
inline double tail_half(unsigned n, unsigned k) {
  if (k > n) return 0.0;
  const BigFloat num(upper_count(n, k));
  const BigFloat den(cpp_int(1) << n);
  return static_cast<double>(num / den);
}

// Pr(Binomial(n, p) >= k) in 100-digit arithmetic.
inline double tail_p(unsigned n, unsigned k, double p) {
  const BigFloat bp(p);
  const BigFloat bq = BigFloat(1) - bp;
  BigFloat s = 0;
  for (unsigned j = k; j <= n; ++j)
    s += BigFloat(choose(n, j)) * boost::multiprecision::pow(bp, j) * boost::multiprecision::pow(bq, n - j);
  return static_cast<double>(s);
}

// min{tau : tail(tau) <= gamma} by exact comparison.
inline unsigned threshold_half(unsigned n, double gamma) {
  for (unsigned tau = 0; tau <= n + 1; ++tau) {
    if (tau > n) return tau;
    if (BigFloat(upper_count(n, tau)) <= BigFloat(gamma) * BigFloat(cpp_int(1) << n)) return tau;
  }
  return n + 1;
}

struct BruteAssignment {
  std::vector<std::ptrdiff_t> row_to_col;  // lexicographically smallest optimum
  double best = -std::numeric_limits<double>::infinity();
};

// Enumerates every maximal one-to-one assignment; totals are summed in row
// order. Ties keep the first one found, which is the lexicographic minimum
// of the (row, col) pair list because columns are tried in increasing order.
template <class W>
BruteAssignment brute_force(std::size_t rows, std::size_t cols, const std::vector<W>& w) {
  BruteAssignment out;
  const std::size_t k = std::min(rows, cols);
  std::vector<std::ptrdiff_t> cur(rows, -1);
  std::vector<bool> used(cols, false);
  W best_int{};
  bool have = false;
  std::function<void(std::size_t, std::size_t, W)> go = [&](std::size_t r, std::size_t placed, W total) {
    if (placed == k) {
      if (!have || total > best_int) {
        have = true;
        best_int = total;
        out.row_to_col = cur;
      }
      return;
    }
    if (r == rows) return;
    // Rows may stay unmatched only when rows > cols.
    if (rows - r > k - placed) {
      // Try matching first so lexicographic order prefers earlier rows.
      for (std::size_t c = 0; c < cols; ++c) {
        if (used[c]) continue;
        used[c] = true;
        cur[r] = static_cast<std::ptrdiff_t>(c);
        go(r + 1, placed + 1, total + w[r * cols + c]);
        used[c] = false;
        cur[r] = -1;
      }
      go(r + 1, placed, total);
    } else {
      for (std::size_t c = 0; c < cols; ++c) {
        if (used[c]) continue;
        used[c] = true;
        cur[r] = static_cast<std::ptrdiff_t>(c);
        go(r + 1, placed + 1, total + w[r * cols + c]);
        used[c] = false;
        cur[r] = -1;
      }
    }
  };
  go(0, 0, W{});
  out.best = static_cast<double>(best_int);
  return out;
}

// Sum of chosen weights in row order.
template <class W>
W assignment_total(std::size_t cols, const std::vector<W>& w, const std::vector<std::ptrdiff_t>& row_to_col) {
  W total{};
  for (std::size_t r = 0; r < row_to_col.size(); ++r)
    if (row_to_col[r] >= 0) total += w[r * cols + static_cast<std::size_t>(row_to_col[r])];
  return total;
}

// Dense reference for the displaced layer: materialises A*B on purpose.
inline Eigen::VectorXd dense_forward(const spdmark::AffineLayer& layer, const spdmark::BasisShift& s,
                                     double alpha, const Eigen::VectorXd& h) {
  const Eigen::MatrixXd zeta = s.a * s.b;
  return layer.weight * h + layer.offset + alpha * (zeta * h);
}

// A small random objective instance whose temporal residuals all stay at
// least `margin` away from zero so finite differences never straddle a kink.
struct GradientInstance {
  spdmark::Video clean;
  spdmark::Video marked;
  spdmark::LinearExtractor extractor;
  spdmark::Schedule schedule;
  spdmark::LossWeights weights;
};

inline double min_temporal_residual(const spdmark::Video& clean, const spdmark::Video& marked) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t t = 1; t < clean.size(); ++t) {
    const auto y0 = spdmark::luminance(clean[t - 1]);
    const auto y1 = spdmark::luminance(clean[t]);
    const auto m0 = spdmark::luminance(marked[t - 1]);
    const auto m1 = spdmark::luminance(marked[t]);
    for (std::size_t i = 0; i < y0.size(); ++i) m = std::min(m, std::abs((y1[i] - y0[i]) - (m1[i] - m0[i])));
  }
  return m;
}

inline GradientInstance random_instance(std::uint64_t seed, std::size_t frames = 3, std::size_t height = 4,
                                        std::size_t width = 4, std::size_t bits = 8, double margin = 1e-3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  std::uniform_real_distribution<double> weight(0.1, 3.0);
  std::normal_distribution<double> n01;
  GradientInstance g;
  g.weights = {weight(rng), weight(rng)};
  const std::size_t features = 3 * height * width;
  do {
    g.clean.clear();
    g.marked.clear();
    for (std::size_t t = 0; t < frames; ++t) {
      spdmark::ToyFrame c(t + 1, height, width), m(t + 1, height, width);
      for (std::size_t i = 0; i < features; ++i) {
        c.pixels[i] = u(rng);
        m.pixels[i] = c.pixels[i] + 0.05 * n01(rng);
      }
      g.clean.push_back(std::move(c));
      g.marked.push_back(std::move(m));
    }
  } while (min_temporal_residual(g.clean, g.marked) < margin);
  g.extractor.weight = Eigen::MatrixXd(static_cast<Eigen::Index>(bits), static_cast<Eigen::Index>(features));
  for (Eigen::Index i = 0; i < g.extractor.weight.size(); ++i)
    g.extractor.weight.data()[i] = 2.0 * n01(rng) / std::sqrt(static_cast<double>(features));
  g.extractor.bias = Eigen::VectorXd(static_cast<Eigen::Index>(bits));
  for (Eigen::Index i = 0; i < g.extractor.bias.size(); ++i) g.extractor.bias(i) = 0.3 * n01(rng);
  g.extractor.height = height;
  g.extractor.width = width;
  for (std::size_t t = 0; t < frames; ++t) {
    spdmark::FrameMessage msg{t + 1, spdmark::Bits(bits)};
    for (auto& b : msg.bits) b = static_cast<std::uint8_t>(rng() & 1u);
    g.schedule.push_back(std::move(msg));
  }
  return g;
}

inline double instance_loss(const GradientInstance& g, const spdmark::Video& marked) {
  return spdmark::total_loss(g.clean, marked, g.extractor, g.schedule, g.weights).total;
}

// Central differences of the full objective w.r.t. every marked pixel.
inline std::vector<std::vector<double>> finite_difference(const GradientInstance& g, double step = 1e-4) {
  std::vector<std::vector<double>> out(g.marked.size());
  spdmark::Video probe = g.marked;
  for (std::size_t t = 0; t < probe.size(); ++t) {
    out[t].resize(probe[t].pixels.size());
    for (std::size_t i = 0; i < probe[t].pixels.size(); ++i) {
      const double orig = probe[t].pixels[i];
      probe[t].pixels[i] = orig + step;
      const double up = instance_loss(g, probe);
      probe[t].pixels[i] = orig - step;
      const double down = instance_loss(g, probe);
      probe[t].pixels[i] = orig;
      out[t][i] = (up - down) / (2.0 * step);
    }
  }
  return out;
}

// ||a - b|| / ||b|| over all frames.
inline double relative_error(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a[t].size(); ++i) {
      num += (a[t][i] - b[t][i]) * (a[t][i] - b[t][i]);
      den += b[t][i] * b[t][i];
    }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

// Ridge with an unpenalised intercept, solved by plain gradient descent on
// the centred problem.
inline Eigen::MatrixXd ridge_by_descent(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda,
                                        int iterations) {
  const Eigen::RowVectorXd xm = x.colwise().mean();
  const Eigen::RowVectorXd ym = y.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - xm;
  const Eigen::MatrixXd yc = y.rowwise() - ym;
  const Eigen::MatrixXd gram = xc.transpose() * xc;
  // Step 1/L with L bounded by the Frobenius norm.
  const double lip = gram.norm() + lambda;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(x.cols(), y.cols());
  const Eigen::MatrixXd xty = xc.transpose() * yc;
  for (int it = 0; it < iterations; ++it) w -= (gram * w + lambda * w - xty) / lip;
  return w;  // features x outputs
}

}  // namespace oracle
