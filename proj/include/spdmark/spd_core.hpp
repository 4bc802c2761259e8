#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "spdmark/keyspace.hpp"

namespace spdmark {

// zeta = A * B, A: d x r, B: r x d. Never multiplied out on the forward path.
struct BasisShift {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;

  std::size_t dim() const { return static_cast<std::size_t>(a.rows()); }
  std::size_t rank() const { return static_cast<std::size_t>(a.cols()); }
  Eigen::MatrixXd materialize() const { return a * b; }
};

class BasisDictionary {
 public:
  BasisDictionary(KeyConfig cfg, std::size_t dim, std::size_t rank, double alpha,
                  std::vector<BasisShift> shifts);

  const KeyConfig& config() const { return cfg_; }
  std::size_t dim() const { return dim_; }
  std::size_t rank() const { return rank_; }
  double alpha() const { return alpha_; }
  const BasisShift& at(std::size_t layer, std::size_t basis) const;

 private:
  KeyConfig cfg_;
  std::size_t dim_;
  std::size_t rank_;
  double alpha_;
  std::vector<BasisShift> shifts_;  // layer-major, L * P
};

// Factors i.i.d. N(0, init_scale^2 / d). Throws when rank > dim.
BasisDictionary init_dictionary(const KeyConfig& cfg, std::size_t dim, std::size_t rank, double alpha,
                                std::uint64_t seed, double init_scale);

// Sum of the selected basis shifts for one layer, kept in factored form.
struct LayerDisplacement {
  std::vector<const BasisShift*> terms;

  bool empty() const { return terms.empty(); }
  Eigen::MatrixXd materialize(std::size_t dim) const;
};

std::vector<LayerDisplacement> compose_displacement(const BasisDictionary& dict,
                                                    const SelectionMask& mask);

struct AffineLayer {
  Eigen::MatrixXd weight;  // d x d
  Eigen::VectorXd offset;  // d
};

// Work accounting for the forward pass. `max_lowrank_intermediate` is the
// largest temporary the displacement path allocates; the factored path keeps
// it at r, a materialized product would need d*d.
struct ForwardCounters {
  std::size_t dense_macs = 0;
  std::size_t lowrank_macs = 0;
  std::size_t max_lowrank_intermediate = 0;
  std::size_t calls = 0;
};

// (W h + c) + alpha * A (B h)
Eigen::VectorXd displaced_layer_forward(const AffineLayer& layer, const BasisShift& shift,
                                        double alpha, const Eigen::VectorXd& h,
                                        ForwardCounters* counters = nullptr);
Eigen::VectorXd displaced_layer_forward(const AffineLayer& layer, const LayerDisplacement& shift,
                                        double alpha, const Eigen::VectorXd& h,
                                        ForwardCounters* counters = nullptr);

struct DecoderSpec {
  std::size_t dim = 64;
  std::size_t layers = 14;
  std::size_t height = 8;
  std::size_t width = 8;
  double latent_scale = 0.02;
  double offset_scale = 10.0;
  double projection_scale = 0.025;
  std::uint64_t seed = 2;
};

// h_0 = latent_scale * z_t + condition + input_bias; h_l = layer_l(h_{l-1}) [+ displacement];
// pixels = clamp(0.5 + projection * h_L, 0, 1).
struct ToyDecoder {
  DecoderSpec spec;
  std::vector<AffineLayer> layers;  // orthogonal weights
  Eigen::VectorXd input_bias;
  Eigen::MatrixXd projection;  // (3*H*W) x d
};

ToyDecoder init_decoder(const DecoderSpec& spec);

// 3 x H x W raster, channel-major then row-major.
struct ToyFrame {
  std::uint64_t frame_index = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  static constexpr std::size_t kChannels = 3;

  ToyFrame() = default;
  ToyFrame(std::uint64_t index, std::size_t h, std::size_t w, double fill = 0.0)
      : frame_index(index), height(h), width(w), pixels(kChannels * h * w, fill) {}

  std::size_t size() const { return pixels.size(); }
  double& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }
};

using Video = std::vector<ToyFrame>;

ToyFrame generate_frame(const ToyDecoder& decoder, const BasisDictionary* dict,
                        const FrameMessage* message, std::uint64_t latent_seed, std::uint64_t t,
                        const Eigen::VectorXd& condition, ForwardCounters* counters = nullptr);

// Frame t runs latent z_t through every layer, displaced by key_to_mask(kappa_t).
Video generate_video(const ToyDecoder& decoder, const BasisDictionary& dict,
                     const Schedule& schedule, std::uint64_t latent_seed,
                     const Eigen::VectorXd& condition, ForwardCounters* counters = nullptr);

// Same latents and condition, no displacement.
Video generate_clean_video(const ToyDecoder& decoder, std::size_t num_frames,
                           std::uint64_t latent_seed, const Eigen::VectorXd& condition);

Eigen::VectorXd random_condition(std::size_t dim, double scale, std::uint64_t seed);

// Everything needed to rebuild a decoder + dictionary pair; factors are
// regenerated from the seeds rather than stored.
struct GeneratorSpec {
  KeyConfig key;
  DecoderSpec decoder;
  std::size_t rank = 32;
  double alpha = 1.0;
  double init_scale = 0.3;
  double condition_scale = 0.3;
  std::uint64_t dictionary_seed = 1;

  void validate() const;
};

struct Generator {
  GeneratorSpec spec;
  ToyDecoder decoder;
  BasisDictionary dictionary;
};

Generator build_generator(const GeneratorSpec& spec);

}  // namespace spdmark
