#include "spdmark/objective.hpp"

#include <cmath>
#include <string>

#include "spdmark/error.hpp"

namespace spdmark {
namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;
constexpr double kLuma[3] = {kLumaR, kLumaG, kLumaB};

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

void check_same_shape(const Video& a, const Video& b) {
  require(a.size() == b.size(), Errc::dimension_mismatch, "videos have different frame counts");
  for (std::size_t t = 0; t < a.size(); ++t) {
    require(a[t].height == b[t].height && a[t].width == b[t].width &&
                a[t].pixels.size() == b[t].pixels.size(),
            Errc::dimension_mismatch, "videos have different frame shapes");
  }
}

Eigen::Map<const Eigen::VectorXd> as_vector(const ToyFrame& f) {
  return {f.pixels.data(), static_cast<Eigen::Index>(f.pixels.size())};
}

}  // namespace

void LossWeights::validate() const {
  require(perceptual >= 0.0 && temporal >= 0.0 && std::isfinite(perceptual) &&
              std::isfinite(temporal),
          Errc::invalid_argument, "loss weights must be finite and >= 0");
}

double MeanSquaredDistance::distance(const ToyFrame& reference, const ToyFrame& candidate) const {
  require(reference.pixels.size() == candidate.pixels.size() && !reference.pixels.empty(),
          Errc::dimension_mismatch, "perceptual distance: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < reference.pixels.size(); ++i) {
    const double diff = candidate.pixels[i] - reference.pixels[i];
    acc += diff * diff;
  }
  return acc / static_cast<double>(reference.pixels.size());
}

void MeanSquaredDistance::accumulate_gradient(const ToyFrame& reference, const ToyFrame& candidate,
                                              double scale, std::span<double> grad) const {
  const double k = 2.0 * scale / static_cast<double>(reference.pixels.size());
  for (std::size_t i = 0; i < grad.size(); ++i)
    grad[i] += k * (candidate.pixels[i] - reference.pixels[i]);
}

Eigen::VectorXd LinearExtractor::logits(const ToyFrame& frame) const {
  require(static_cast<Eigen::Index>(frame.pixels.size()) == weight.cols(),
          Errc::dimension_mismatch, "extractor: frame size does not match weight columns");
  return weight * as_vector(frame) + bias;
}

Bits LinearExtractor::decode(const ToyFrame& frame) const {
  const Eigen::VectorXd s = logits(frame);
  Bits bits(static_cast<std::size_t>(s.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) bits[static_cast<std::size_t>(i)] = s(i) > 0.0;
  return bits;
}

double bce_logits(std::span<const double> logits, std::span<const std::uint8_t> target) {
  require(logits.size() == target.size() && !logits.empty(), Errc::dimension_mismatch,
          "bce_logits: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double s = logits[i];
    require(std::isfinite(s), Errc::invalid_argument, "bce_logits: non-finite logit");
    acc += std::max(s, 0.0) - s * target[i] + std::log1p(std::exp(-std::abs(s)));
  }
  return acc / static_cast<double>(logits.size());
}

double recovery_loss(const Video& marked, const LinearExtractor& extractor,
                     const Schedule& schedule) {
  require(marked.size() == schedule.size() && !marked.empty(), Errc::dimension_mismatch,
          "recovery_loss: schedule length must equal frame count");
  double acc = 0.0;
  for (std::size_t t = 0; t < marked.size(); ++t) {
    const Eigen::VectorXd s = extractor.logits(marked[t]);
    acc += bce_logits({s.data(), static_cast<std::size_t>(s.size())}, schedule[t].bits);
  }
  return acc / static_cast<double>(marked.size());
}

std::vector<double> luminance(std::span<const double> pixels, std::size_t channels,
                              std::size_t height, std::size_t width) {
  require(channels == 3, Errc::invalid_argument,
          "luminance: expected 3 channels, got " + std::to_string(channels));
  require(pixels.size() == channels * height * width, Errc::dimension_mismatch,
          "luminance: raster size mismatch");
  const std::size_t plane = height * width;
  std::vector<double> y(plane);
  for (std::size_t i = 0; i < plane; ++i)
    y[i] = kLumaR * pixels[i] + kLumaG * pixels[plane + i] + kLumaB * pixels[2 * plane + i];
  return y;
}

std::vector<double> luminance(const ToyFrame& frame) {
  const std::size_t plane = frame.height * frame.width;
  require(plane > 0 && frame.pixels.size() % plane == 0, Errc::dimension_mismatch,
          "luminance: raster size mismatch");
  return luminance(frame.pixels, frame.pixels.size() / plane, frame.height, frame.width);
}

ImperceptibilityTerms imperceptibility_terms(const Video& clean, const Video& marked,
                                             const LossWeights& w, const PerceptualDistance& pd) {
  w.validate();
  check_same_shape(clean, marked);
  require(clean.size() >= 2, Errc::invalid_argument, "imperceptibility loss needs T >= 2");
  const std::size_t frames = clean.size();

  ImperceptibilityTerms out;
  for (std::size_t t = 0; t < frames; ++t) out.perceptual += pd.distance(clean[t], marked[t]);
  out.perceptual /= static_cast<double>(frames);

  std::vector<double> y_prev = luminance(clean[0]);
  std::vector<double> ym_prev = luminance(marked[0]);
  for (std::size_t t = 1; t < frames; ++t) {
    const auto y = luminance(clean[t]);
    const auto ym = luminance(marked[t]);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
      acc += std::abs((y[i] - y_prev[i]) - (ym[i] - ym_prev[i]));
    out.temporal += acc / static_cast<double>(y.size());
    y_prev = y;
    ym_prev = ym;
  }
  out.temporal /= static_cast<double>(frames - 1);
  out.total = w.perceptual * out.perceptual + w.temporal * out.temporal;
  return out;
}

double imperceptibility_loss(const Video& clean, const Video& marked, const LossWeights& w,
                             const PerceptualDistance& pd) {
  return imperceptibility_terms(clean, marked, w, pd).total;
}

LossReport total_loss(const Video& clean, const Video& marked, const LinearExtractor& extractor,
                      const Schedule& schedule, const LossWeights& w,
                      const PerceptualDistance& pd) {
  const auto imp = imperceptibility_terms(clean, marked, w, pd);
  LossReport r;
  r.perceptual = imp.perceptual;
  r.temporal = imp.temporal;
  r.recovery = recovery_loss(marked, extractor, schedule);
  r.total = imp.total + r.recovery;
  return r;
}

std::vector<std::vector<double>> LossGradients::total() const {
  auto out = recovery;
  for (std::size_t t = 0; t < out.size(); ++t)
    for (std::size_t i = 0; i < out[t].size(); ++i)
      out[t][i] += perceptual[t][i] + temporal[t][i];
  return out;
}

LossGradients loss_gradients(const Video& clean, const Video& marked,
                             const LinearExtractor& extractor, const Schedule& schedule,
                             const LossWeights& w, const PerceptualDistance& pd) {
  w.validate();
  check_same_shape(clean, marked);
  require(clean.size() >= 2, Errc::invalid_argument, "loss_gradients: need T >= 2");
  require(schedule.size() == marked.size(), Errc::dimension_mismatch,
          "loss_gradients: schedule length must equal frame count");
  const std::size_t frames = marked.size();
  const std::size_t n = marked[0].pixels.size();
  const std::size_t plane = marked[0].height * marked[0].width;
  require(n == 3 * plane, Errc::invalid_argument, "loss_gradients: frames must have 3 channels");

  LossGradients g;
  g.recovery.assign(frames, std::vector<double>(n, 0.0));
  g.perceptual.assign(frames, std::vector<double>(n, 0.0));
  g.temporal.assign(frames, std::vector<double>(n, 0.0));

  const double m = static_cast<double>(extractor.message_bits());
  for (std::size_t t = 0; t < frames; ++t) {
    const Eigen::VectorXd s = extractor.logits(marked[t]);
    require(schedule[t].bits.size() == extractor.message_bits(), Errc::dimension_mismatch,
            "loss_gradients: message length mismatch");
    Eigen::VectorXd residual(s.size());
    for (Eigen::Index k = 0; k < s.size(); ++k)
      residual(k) = sigmoid(s(k)) - schedule[t].bits[static_cast<std::size_t>(k)];
    const Eigen::VectorXd gx =
        extractor.weight.transpose() * residual / (m * static_cast<double>(frames));
    for (std::size_t i = 0; i < n; ++i) g.recovery[t][i] = gx(static_cast<Eigen::Index>(i));

    pd.accumulate_gradient(clean[t], marked[t], w.perceptual / static_cast<double>(frames),
                           g.perceptual[t]);
  }

  // TC: e_t = dy_t - dy~_t, d|e_t|/dy~_t = -sign(e_t), d|e_t|/dy~_{t-1} = +sign(e_t).
  const double k = w.temporal / (static_cast<double>(frames - 1) * static_cast<double>(plane));
  std::vector<double> y_prev = luminance(clean[0]);
  std::vector<double> ym_prev = luminance(marked[0]);
  for (std::size_t t = 1; t < frames; ++t) {
    const auto y = luminance(clean[t]);
    const auto ym = luminance(marked[t]);
    for (std::size_t i = 0; i < plane; ++i) {
      const double sg = sign0((y[i] - y_prev[i]) - (ym[i] - ym_prev[i]));
      if (sg == 0.0) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        g.temporal[t][c * plane + i] -= k * sg * kLuma[c];
        g.temporal[t - 1][c * plane + i] += k * sg * kLuma[c];
      }
    }
    y_prev = y;
    ym_prev = ym;
  }
  return g;
}

LinearExtractor fit_extractor(std::span<const Video> videos, std::span<const Schedule> schedules,
                              double ridge) {
  require(!videos.empty(), Errc::invalid_argument, "fit_extractor: need at least one video");
  require(videos.size() == schedules.size(), Errc::dimension_mismatch,
          "fit_extractor: one schedule per video required");
  require(ridge >= 0.0 && std::isfinite(ridge), Errc::invalid_argument,
          "fit_extractor: ridge must be finite and >= 0");
  require(!videos[0].empty() && !schedules[0].empty(), Errc::invalid_argument,
          "fit_extractor: empty video");
  const std::size_t features = videos[0][0].pixels.size();
  const std::size_t bits = schedules[0][0].bits.size();
  require(features > 0 && bits > 0, Errc::invalid_argument, "fit_extractor: degenerate dims");

  std::size_t rows = 0;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    require(videos[v].size() == schedules[v].size(), Errc::dimension_mismatch,
            "fit_extractor: schedule length must equal frame count");
    rows += videos[v].size();
  }
  const auto nf = static_cast<Eigen::Index>(features);
  const auto nb = static_cast<Eigen::Index>(bits);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), nf);
  Eigen::MatrixXd y(static_cast<Eigen::Index>(rows), nb);
  Eigen::Index row = 0;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    for (std::size_t t = 0; t < videos[v].size(); ++t, ++row) {
      const auto& frame = videos[v][t];
      const auto& msg = schedules[v][t].bits;
      require(frame.pixels.size() == features && msg.size() == bits, Errc::dimension_mismatch,
              "fit_extractor: inconsistent frame or message size");
      x.row(row) = as_vector(frame).transpose();
      for (Eigen::Index k = 0; k < nb; ++k) y(row, k) = 2.0 * msg[static_cast<std::size_t>(k)] - 1.0;
    }
  }

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  x.rowwise() -= x_mean;
  y.rowwise() -= y_mean;

  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += ridge;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  require(ldlt.info() == Eigen::Success, Errc::internal, "fit_extractor: factorization failed");
  const Eigen::MatrixXd coef = ldlt.solve(x.transpose() * y);  // features x bits

  LinearExtractor ex;
  ex.weight = coef.transpose();
  ex.bias = (y_mean - x_mean * coef).transpose();
  ex.ridge = ridge;
  ex.height = videos[0][0].height;
  ex.width = videos[0][0].width;
  require(ex.weight.allFinite() && ex.bias.allFinite(), Errc::internal,
          "fit_extractor: non-finite solution");
  return ex;
}

double bit_accuracy(const LinearExtractor& extractor, std::span<const Video> videos,
                    std::span<const Schedule> schedules) {
  require(videos.size() == schedules.size(), Errc::dimension_mismatch,
          "bit_accuracy: one schedule per video required");
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    require(videos[v].size() == schedules[v].size(), Errc::dimension_mismatch,
            "bit_accuracy: schedule length must equal frame count");
    for (std::size_t t = 0; t < videos[v].size(); ++t) {
      const Bits decoded = extractor.decode(videos[v][t]);
      total += decoded.size();
      correct += decoded.size() - hamming(decoded, schedules[v][t].bits);
    }
  }
  require(total > 0, Errc::invalid_argument, "bit_accuracy: no frames");
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace spdmark
