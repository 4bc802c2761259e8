#include "spdmark/spd_core.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spdmark/crypto.hpp"
#include "spdmark/error.hpp"

namespace spdmark {
namespace {

Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                                double stddev) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  // Column-major fill order is part of the seed contract.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = stddev * dist(rng);
  return m;
}

Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, Eigen::Index d) {
  const Eigen::MatrixXd g = gaussian_matrix(rng, d, d, 1.0);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix makes the draw Haar-uniform.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

void check_finite(const Eigen::VectorXd& h) {
  require(h.allFinite(), Errc::invalid_argument, "layer input contains non-finite values");
}

}  // namespace

BasisDictionary::BasisDictionary(KeyConfig cfg, std::size_t dim, std::size_t rank, double alpha,
                                 std::vector<BasisShift> shifts)
    : cfg_(cfg), dim_(dim), rank_(rank), alpha_(alpha), shifts_(std::move(shifts)) {
  cfg_.validate();
  require(rank_ >= 1 && rank_ <= dim_, Errc::invalid_argument, "dictionary: need 1 <= r <= d");
  require(shifts_.size() == cfg_.num_layers * cfg_.bases_per_layer, Errc::dimension_mismatch,
          "dictionary: shift grid does not match L x P");
  for (const auto& s : shifts_) {
    require(s.a.rows() == static_cast<Eigen::Index>(dim_) &&
                s.a.cols() == static_cast<Eigen::Index>(rank_) &&
                s.b.rows() == static_cast<Eigen::Index>(rank_) &&
                s.b.cols() == static_cast<Eigen::Index>(dim_),
            Errc::dimension_mismatch, "dictionary: basis shift factor shapes disagree");
  }
}

const BasisShift& BasisDictionary::at(std::size_t layer, std::size_t basis) const {
  require(layer < cfg_.num_layers && basis < cfg_.bases_per_layer, Errc::dimension_mismatch,
          "dictionary index out of range");
  return shifts_[layer * cfg_.bases_per_layer + basis];
}

BasisDictionary init_dictionary(const KeyConfig& cfg, std::size_t dim, std::size_t rank,
                                double alpha, std::uint64_t seed, double init_scale) {
  cfg.validate();
  require(rank <= dim, Errc::invalid_argument, "init_dictionary: rank exceeds layer dimension");
  require(rank >= 1, Errc::invalid_argument, "init_dictionary: rank must be >= 1");
  require(init_scale >= 0.0 && std::isfinite(init_scale), Errc::invalid_argument,
          "init_dictionary: init_scale must be finite and >= 0");
  std::mt19937_64 rng(seed);
  const double stddev = init_scale / std::sqrt(static_cast<double>(dim));
  const auto d = static_cast<Eigen::Index>(dim);
  const auto r = static_cast<Eigen::Index>(rank);
  std::vector<BasisShift> shifts;
  shifts.reserve(cfg.num_layers * cfg.bases_per_layer);
  for (std::size_t i = 0; i < cfg.num_layers * cfg.bases_per_layer; ++i) {
    BasisShift s;
    s.a = gaussian_matrix(rng, d, r, stddev);
    s.b = gaussian_matrix(rng, r, d, stddev);
    shifts.push_back(std::move(s));
  }
  return BasisDictionary(cfg, dim, rank, alpha, std::move(shifts));
}

Eigen::MatrixXd LayerDisplacement::materialize(std::size_t dim) const {
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d, d);
  for (const auto* t : terms) sum += t->materialize();
  return sum;
}

std::vector<LayerDisplacement> compose_displacement(const BasisDictionary& dict,
                                                    const SelectionMask& mask) {
  const auto& cfg = dict.config();
  require(mask.layers() == cfg.num_layers && mask.bases() == cfg.bases_per_layer,
          Errc::dimension_mismatch, "mask shape does not match dictionary");
  std::vector<LayerDisplacement> out(cfg.num_layers);
  for (std::size_t l = 0; l < cfg.num_layers; ++l)
    for (std::size_t p = 0; p < cfg.bases_per_layer; ++p)
      if (mask.at(l, p)) out[l].terms.push_back(&dict.at(l, p));
  return out;
}

namespace {

Eigen::VectorXd base_forward(const AffineLayer& layer, const Eigen::VectorXd& h,
                             ForwardCounters* counters) {
  require(layer.weight.cols() == h.size() && layer.weight.rows() == layer.offset.size(),
          Errc::dimension_mismatch, "layer input dimension mismatch");
  check_finite(h);
  if (counters) {
    counters->dense_macs += static_cast<std::size_t>(layer.weight.size());
    ++counters->calls;
  }
  return layer.weight * h + layer.offset;
}

void add_lowrank(Eigen::VectorXd& out, const BasisShift& shift, double alpha,
                 const Eigen::VectorXd& h, ForwardCounters* counters) {
  require(shift.b.cols() == h.size() && shift.a.rows() == out.size() &&
              shift.a.cols() == shift.b.rows(),
          Errc::dimension_mismatch, "basis shift dimension mismatch");
  const Eigen::VectorXd projected = shift.b * h;  // r
  out.noalias() += alpha * (shift.a * projected);
  if (counters) {
    counters->lowrank_macs += static_cast<std::size_t>(shift.b.size() + shift.a.size());
    counters->max_lowrank_intermediate = std::max<std::size_t>(
        counters->max_lowrank_intermediate, static_cast<std::size_t>(projected.size()));
  }
}

}  // namespace

Eigen::VectorXd displaced_layer_forward(const AffineLayer& layer, const BasisShift& shift,
                                        double alpha, const Eigen::VectorXd& h,
                                        ForwardCounters* counters) {
  Eigen::VectorXd out = base_forward(layer, h, counters);
  if (alpha != 0.0) add_lowrank(out, shift, alpha, h, counters);
  return out;
}

Eigen::VectorXd displaced_layer_forward(const AffineLayer& layer, const LayerDisplacement& shift,
                                        double alpha, const Eigen::VectorXd& h,
                                        ForwardCounters* counters) {
  Eigen::VectorXd out = base_forward(layer, h, counters);
  if (alpha != 0.0)
    for (const auto* term : shift.terms) add_lowrank(out, *term, alpha, h, counters);
  return out;
}

ToyDecoder init_decoder(const DecoderSpec& spec) {
  require(spec.dim >= 1 && spec.layers >= 1 && spec.height >= 1 && spec.width >= 1,
          Errc::invalid_argument, "decoder dimensions must be positive");
  std::mt19937_64 rng(spec.seed);
  const auto d = static_cast<Eigen::Index>(spec.dim);
  const double offset_sd = spec.offset_scale / std::sqrt(static_cast<double>(spec.dim));
  ToyDecoder dec;
  dec.spec = spec;
  dec.layers.reserve(spec.layers);
  for (std::size_t l = 0; l < spec.layers; ++l) {
    AffineLayer layer;
    layer.weight = random_orthogonal(rng, d);
    layer.offset = gaussian_matrix(rng, d, 1, offset_sd).col(0);
    dec.layers.push_back(std::move(layer));
  }
  dec.input_bias = gaussian_matrix(rng, d, 1, offset_sd).col(0);
  const auto pixels = static_cast<Eigen::Index>(ToyFrame::kChannels * spec.height * spec.width);
  dec.projection = gaussian_matrix(rng, pixels, d,
                                   spec.projection_scale / std::sqrt(static_cast<double>(spec.dim)));
  return dec;
}

ToyFrame generate_frame(const ToyDecoder& decoder, const BasisDictionary* dict,
                        const FrameMessage* message, std::uint64_t latent_seed, std::uint64_t t,
                        const Eigen::VectorXd& condition, ForwardCounters* counters) {
  const auto d = static_cast<Eigen::Index>(decoder.spec.dim);
  require(condition.size() == d, Errc::dimension_mismatch, "condition vector has wrong dimension");

  std::vector<LayerDisplacement> displacement;
  double alpha = 0.0;
  if (dict != nullptr && message != nullptr) {
    require(dict->dim() == decoder.spec.dim && dict->config().num_layers == decoder.layers.size(),
            Errc::dimension_mismatch, "dictionary does not fit decoder");
    displacement = compose_displacement(*dict, key_to_mask(WatermarkKey{message->bits}, dict->config()));
    alpha = dict->alpha();
  }

  std::mt19937_64 rng(derive_seed(latent_seed, t));
  Eigen::VectorXd h = gaussian_matrix(rng, d, 1, decoder.spec.latent_scale).col(0);
  h += condition + decoder.input_bias;
  for (std::size_t l = 0; l < decoder.layers.size(); ++l) {
    h = displacement.empty()
            ? displaced_layer_forward(decoder.layers[l], LayerDisplacement{}, 0.0, h, counters)
            : displaced_layer_forward(decoder.layers[l], displacement[l], alpha, h, counters);
  }
  const Eigen::VectorXd raster = (decoder.projection * h).array() + 0.5;
  ToyFrame frame(t, decoder.spec.height, decoder.spec.width);
  for (Eigen::Index i = 0; i < raster.size(); ++i)
    frame.pixels[static_cast<std::size_t>(i)] = std::clamp(raster(i), 0.0, 1.0);
  return frame;
}

Video generate_video(const ToyDecoder& decoder, const BasisDictionary& dict,
                     const Schedule& schedule, std::uint64_t latent_seed,
                     const Eigen::VectorXd& condition, ForwardCounters* counters) {
  require(!schedule.empty(), Errc::invalid_argument, "generate_video: empty schedule");
  Video video;
  video.reserve(schedule.size());
  for (const auto& msg : schedule) {
    require(msg.bits.size() == dict.config().message_bits(), Errc::dimension_mismatch,
            "schedule message length does not match dictionary key config");
    video.push_back(
        generate_frame(decoder, &dict, &msg, latent_seed, msg.frame_index, condition, counters));
  }
  return video;
}

Video generate_clean_video(const ToyDecoder& decoder, std::size_t num_frames,
                           std::uint64_t latent_seed, const Eigen::VectorXd& condition) {
  require(num_frames >= 1, Errc::invalid_argument, "generate_clean_video: need >= 1 frame");
  Video video;
  video.reserve(num_frames);
  for (std::uint64_t t = 1; t <= num_frames; ++t)
    video.push_back(generate_frame(decoder, nullptr, nullptr, latent_seed, t, condition));
  return video;
}

Eigen::VectorXd random_condition(std::size_t dim, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return gaussian_matrix(rng, static_cast<Eigen::Index>(dim), 1,
                         scale / std::sqrt(static_cast<double>(dim)))
      .col(0);
}

void GeneratorSpec::validate() const {
  key.validate();
  require(decoder.layers == key.num_layers, Errc::invalid_argument,
          "generator: decoder layer count must equal key config L");
  require(rank >= 1 && rank <= decoder.dim, Errc::invalid_argument, "generator: need 1 <= r <= d");
  require(std::isfinite(alpha) && std::isfinite(init_scale) && init_scale >= 0.0,
          Errc::invalid_argument, "generator: alpha/init_scale must be finite");
}

Generator build_generator(const GeneratorSpec& spec) {
  spec.validate();
  return Generator{spec, init_decoder(spec.decoder),
                   init_dictionary(spec.key, spec.decoder.dim, spec.rank, spec.alpha,
                                   spec.dictionary_seed, spec.init_scale)};
}

}  // namespace spdmark
