#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "spdmark/keyspace.hpp"
#include "spdmark/spd_core.hpp"

namespace spdmark {

struct LossWeights {
  double perceptual = 1.0;  // lambda_ps
  double temporal = 1.0;    // lambda_tc

  void validate() const;
};

// Frame-level perceptual distance. The default is mean squared pixel error;
// a learned metric can be dropped in behind the same interface.
class PerceptualDistance {
 public:
  virtual ~PerceptualDistance() = default;
  virtual double distance(const ToyFrame& reference, const ToyFrame& candidate) const = 0;
  // d distance / d candidate, accumulated (scaled) into `grad`.
  virtual void accumulate_gradient(const ToyFrame& reference, const ToyFrame& candidate,
                                   double scale, std::span<double> grad) const = 0;
};

class MeanSquaredDistance final : public PerceptualDistance {
 public:
  double distance(const ToyFrame& reference, const ToyFrame& candidate) const override;
  void accumulate_gradient(const ToyFrame& reference, const ToyFrame& candidate, double scale,
                           std::span<double> grad) const override;
};

// logits = weight * vec(frame) + bias. Bits decode as logit > 0 (a tie decodes to 0).
struct LinearExtractor {
  Eigen::MatrixXd weight;  // M x (3*H*W)
  Eigen::VectorXd bias;    // M
  double ridge = 1e-3;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t message_bits() const { return static_cast<std::size_t>(weight.rows()); }
  Eigen::VectorXd logits(const ToyFrame& frame) const;
  Bits decode(const ToyFrame& frame) const;
};

double bce_logits(std::span<const double> logits, std::span<const std::uint8_t> target);

double recovery_loss(const Video& marked, const LinearExtractor& extractor, const Schedule& schedule);

// y = 0.299 R + 0.587 G + 0.114 B, H*W row-major.
std::vector<double> luminance(const ToyFrame& frame);
std::vector<double> luminance(std::span<const double> pixels, std::size_t channels,
                              std::size_t height, std::size_t width);

struct ImperceptibilityTerms {
  double perceptual = 0.0;  // mean_t PD(x_t, x~_t), unweighted
  double temporal = 0.0;    // mean_t mean_pixels |dy_t - dy~_t|, unweighted
  double total = 0.0;       // weighted sum
};

ImperceptibilityTerms imperceptibility_terms(const Video& clean, const Video& marked,
                                             const LossWeights& w,
                                             const PerceptualDistance& pd = MeanSquaredDistance{});
double imperceptibility_loss(const Video& clean, const Video& marked, const LossWeights& w,
                             const PerceptualDistance& pd = MeanSquaredDistance{});

struct LossReport {
  double perceptual = 0.0;
  double temporal = 0.0;
  double recovery = 0.0;
  double total = 0.0;
};

LossReport total_loss(const Video& clean, const Video& marked, const LinearExtractor& extractor,
                      const Schedule& schedule, const LossWeights& w,
                      const PerceptualDistance& pd = MeanSquaredDistance{});

// Per-frame gradient rasters of L_rec + L_imp w.r.t. the marked pixels,
// split by term so each component can be checked on its own.
struct LossGradients {
  std::vector<std::vector<double>> recovery;
  std::vector<std::vector<double>> perceptual;
  std::vector<std::vector<double>> temporal;

  std::vector<std::vector<double>> total() const;
};

LossGradients loss_gradients(const Video& clean, const Video& marked,
                             const LinearExtractor& extractor, const Schedule& schedule,
                             const LossWeights& w,
                             const PerceptualDistance& pd = MeanSquaredDistance{});

// Ridge regression of flattened frames onto 2*kappa_t - 1; intercept unpenalized.
LinearExtractor fit_extractor(std::span<const Video> videos, std::span<const Schedule> schedules,
                              double ridge = 1e-3);

// Mean fraction of correctly decoded bits over all frames.
double bit_accuracy(const LinearExtractor& extractor, std::span<const Video> videos,
                    std::span<const Schedule> schedules);

}  // namespace spdmark
