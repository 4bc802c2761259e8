#include "spdmark/serialization.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "spdmark/error.hpp"

namespace spdmark {
namespace {

template <class T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(Errc::parse, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get<T>(j, key);
}

std::vector<std::size_t> one_based(const std::vector<std::size_t>& v) {
  std::vector<std::size_t> out;
  out.reserve(v.size());
  for (auto x : v) out.push_back(x + 1);
  return out;
}

std::vector<std::size_t> zero_based(const std::vector<std::size_t>& v) {
  std::vector<std::size_t> out;
  out.reserve(v.size());
  for (auto x : v) {
    require(x >= 1, Errc::parse, "frame indices are 1-based");
    out.push_back(x - 1);
  }
  return out;
}

Json pairs_one_based(const std::vector<std::pair<std::size_t, std::size_t>>& v) {
  Json arr = Json::array();
  for (const auto& [a, b] : v) arr.push_back({a + 1, b + 1});
  return arr;
}

void put_u32_be(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b, 4);
}

std::uint32_t get_u32_be(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(static_cast<bool>(in), Errc::parse, "SPDF: truncated header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

void put_f32_le(std::ostream& out, double value) {
  const auto f = static_cast<float>(value);
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  const char b[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8),
                     static_cast<char>(bits >> 16), static_cast<char>(bits >> 24)};
  out.write(b, 4);
}

double get_f32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(static_cast<bool>(in), Errc::parse, "truncated float32 payload");
  const std::uint32_t bits = std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) |
                             (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return static_cast<double>(f);
}

std::string channel_kind_name(ChannelKind k) { return k == ChannelKind::ideal ? "ideal" : "bitflip"; }

}  // namespace

Json key_config_to_json(const KeyConfig& cfg) {
  return Json{{"L", cfg.num_layers}, {"P", cfg.bases_per_layer}, {"M", cfg.message_bits()}};
}

KeyConfig key_config_from_json(const Json& j) {
  KeyConfig cfg;
  cfg.num_layers = get<std::size_t>(j, "L");
  cfg.bases_per_layer = get<std::size_t>(j, "P");
  cfg.validate();
  if (j.contains("M")) {
    require(get<std::size_t>(j, "M") == cfg.message_bits(), Errc::invalid_argument,
            "config: M must equal L*log2(P)");
  }
  return cfg;
}

Json key_to_json(const KeyConfig& cfg, const WatermarkKey& key) {
  return Json{{"config", key_config_to_json(cfg)}, {"key_hex", bits_to_hex(key.bits)}};
}

WatermarkKey key_from_json(const Json& j, KeyConfig* cfg_out) {
  const KeyConfig cfg = key_config_from_json(get<Json>(j, "config"));
  WatermarkKey key{bits_from_hex(get<std::string>(j, "key_hex"), cfg.message_bits())};
  if (cfg_out) *cfg_out = cfg;
  return key;
}

Json schedule_to_json(const ScheduleFile& s) {
  Json frames = Json::array();
  for (const auto& f : s.frames)
    frames.push_back(Json{{"t", f.frame_index}, {"bits_hex", bits_to_hex(f.bits)}});
  return Json{{"config", key_config_to_json(s.config)},
              {"key_hex", bits_to_hex(s.key.bits)},
              {"frames", frames}};
}

ScheduleFile schedule_from_json(const Json& j) {
  ScheduleFile s;
  s.key = key_from_json(j, &s.config);
  const std::size_t m = s.config.message_bits();
  for (const auto& f : get<Json>(j, "frames")) {
    FrameMessage msg;
    msg.frame_index = get<std::uint64_t>(f, "t");
    msg.bits = bits_from_hex(get<std::string>(f, "bits_hex"), m);
    s.frames.push_back(std::move(msg));
  }
  require(!s.frames.empty(), Errc::parse, "schedule: no frames");
  return s;
}

Json sequence_to_json(const ExtractedSequence& seq) {
  Json msgs = Json::array();
  for (const auto& m : seq.messages) msgs.push_back(bits_to_hex(m));
  const std::size_t m = seq.messages.empty() ? 0 : seq.messages.front().size();
  return Json{{"M", m}, {"length", seq.size()}, {"messages", msgs}};
}

ExtractedSequence sequence_from_json(const Json& j) {
  const auto m = get<std::size_t>(j, "M");
  ExtractedSequence seq;
  for (const auto& h : get<Json>(j, "messages")) {
    require(h.is_string(), Errc::parse, "sequence: messages must be hex strings");
    seq.messages.push_back(bits_from_hex(h.get<std::string>(), m));
  }
  return seq;
}

Json tamper_record_to_json(const TamperRecord& r) {
  return Json{{"original_length", r.original_length},
              {"output_length", r.output_length},
              {"dropped", one_based(r.dropped)},
              {"inserted", one_based(r.inserted)},
              {"permutation", pairs_one_based(r.positions)},
              {"trim", Json{{"head", r.trim_head}, {"tail", r.trim_tail}}}};
}

TamperRecord tamper_record_from_json(const Json& j) {
  TamperRecord r;
  r.original_length = get<std::size_t>(j, "original_length");
  r.output_length = get<std::size_t>(j, "output_length");
  r.dropped = zero_based(get<std::vector<std::size_t>>(j, "dropped"));
  r.inserted = zero_based(get<std::vector<std::size_t>>(j, "inserted"));
  for (const auto& p : get<Json>(j, "permutation")) {
    require(p.is_array() && p.size() == 2, Errc::parse, "tamper record: bad permutation entry");
    const auto a = p[0].get<std::size_t>();
    const auto b = p[1].get<std::size_t>();
    require(a >= 1 && b >= 1, Errc::parse, "frame indices are 1-based");
    r.positions.emplace_back(a - 1, b - 1);
  }
  const Json trim = get_or<Json>(j, "trim", Json::object());
  r.trim_head = get_or<std::size_t>(trim, "head", 0);
  r.trim_tail = get_or<std::size_t>(trim, "tail", 0);
  require(r.reconciles(), Errc::parse, "tamper record does not reconcile T and T_r");
  return r;
}

Json channel_spec_to_json(const ChannelSpec& s) {
  return Json{{"kind", channel_kind_name(s.kind)}, {"q", s.flip_probability}, {"seed", s.seed}};
}

ChannelSpec channel_spec_from_json(const Json& j) {
  ChannelSpec s;
  const auto kind = get_or<std::string>(j, "kind", "ideal");
  if (kind == "ideal") {
    s.kind = ChannelKind::ideal;
  } else if (kind == "bitflip") {
    s.kind = ChannelKind::bitflip;
  } else {
    fail(Errc::invalid_argument, "channel: unknown kind '" + kind + "'");
  }
  s.flip_probability = get_or<double>(j, "q", 0.0);
  s.seed = get_or<std::uint64_t>(j, "seed", 0);
  s.validate();
  return s;
}

Json attack_spec_to_json(const AttackSpec& s) {
  Json j{{"attack", attack_name(s.kind)}};
  switch (s.kind) {
    case AttackKind::drop:
      j["fraction"] = s.fraction;
      break;
    case AttackKind::insert:
      j["fraction"] = s.fraction;
      j["mode"] = s.insert_mode == InsertMode::duplicate ? "duplicate" : "noise";
      break;
    case AttackKind::swap_adjacent:
      j["pair_fraction"] = s.pair_fraction;
      break;
    case AttackKind::trim:
      j["head_fraction"] = s.head_fraction;
      j["tail_fraction"] = s.tail_fraction;
      break;
    case AttackKind::pixel_noise:
      j["sigma"] = s.sigma;
      break;
    case AttackKind::rescale:
      j["factor"] = s.factor;
      break;
    default:
      break;
  }
  j["seed"] = s.seed;
  return j;
}

AttackSpec attack_spec_from_json(const Json& j) {
  AttackSpec s;
  s.kind = parse_attack_kind(get<std::string>(j, "attack"));
  switch (s.kind) {
    case AttackKind::drop: s.fraction = get_or<double>(j, "fraction", 0.5); break;
    case AttackKind::insert: s.fraction = get_or<double>(j, "fraction", 0.2); break;
    default: break;
  }
  s.pair_fraction = get_or<double>(j, "pair_fraction", s.pair_fraction);
  const auto mode = get_or<std::string>(j, "mode", "duplicate");
  if (mode == "duplicate") {
    s.insert_mode = InsertMode::duplicate;
  } else if (mode == "noise") {
    s.insert_mode = InsertMode::noise;
  } else {
    fail(Errc::invalid_argument, "insert: unknown mode '" + mode + "'");
  }
  s.head_fraction = get_or<double>(j, "head_fraction", s.head_fraction);
  s.tail_fraction = get_or<double>(j, "tail_fraction", s.tail_fraction);
  s.sigma = get_or<double>(j, "sigma", s.sigma);
  s.factor = get_or<double>(j, "factor", s.factor);
  s.seed = get_or<std::uint64_t>(j, "seed", 0);
  s.validate();
  return s;
}

Json diagnosis_to_json(const TamperDiagnosis& d) {
  Json j{{"predicted_dropped", one_based(d.predicted_dropped)},
         {"predicted_inserted", one_based(d.predicted_inserted)},
         {"predicted_inversions", pairs_one_based(d.predicted_inversions)},
         {"recovered_permutation", pairs_one_based(d.recovered_positions)}};
  if (!d.all_inversions.empty()) j["all_inversions"] = pairs_one_based(d.all_inversions);
  auto score = [](const std::optional<ClassScore>& s) {
    return Json{{"precision", s->precision}, {"recall", s->recall}, {"f1", s->f1}};
  };
  if (d.dropped_score) j["dropped_score"] = score(d.dropped_score);
  if (d.inserted_score) j["inserted_score"] = score(d.inserted_score);
  if (d.inversion_score) j["inversion_score"] = score(d.inversion_score);
  return j;
}

Json verdict_to_json(const Verdict& v, const TamperDiagnosis* tamper) {
  Json frames = Json::array();
  for (const auto& f : v.frames) {
    frames.push_back(Json{{"pi", f.pi + 1},
                          {"rho", f.rho + 1},
                          {"matched_bits", f.matched_bits},
                          {"valid", f.valid}});
  }
  Json j{{"valid", v.valid},
         {"tau_f", v.thresholds.tau_f},
         {"p_f", v.thresholds.p_f},
         {"tau_v", v.thresholds.tau_v},
         {"num_valid", v.num_valid},
         {"bit_acc", v.bit_acc},
         {"order_acc", v.order_acc},
         {"frames", frames},
         {"tamper", tamper ? diagnosis_to_json(*tamper) : Json::object()},
         {"gamma_f", v.thresholds.gamma_f},
         {"gamma_v", v.thresholds.gamma_v},
         {"T", v.expected_length},
         {"T_r", v.received_length},
         {"M", v.message_bits},
         {"video_p_value", v.video_p_value},
         {"total_similarity", v.total_similarity}};
  return j;
}

Verdict verdict_from_json(const Json& j) {
  Verdict v;
  v.valid = get<bool>(j, "valid");
  v.thresholds.tau_f = get<std::uint64_t>(j, "tau_f");
  v.thresholds.p_f = get<double>(j, "p_f");
  v.thresholds.tau_v = get<std::uint64_t>(j, "tau_v");
  v.thresholds.gamma_f = get_or<double>(j, "gamma_f", 0.0);
  v.thresholds.gamma_v = get_or<double>(j, "gamma_v", 0.0);
  v.num_valid = get<std::size_t>(j, "num_valid");
  v.bit_acc = get<double>(j, "bit_acc");
  v.order_acc = get<double>(j, "order_acc");
  v.expected_length = get<std::size_t>(j, "T");
  v.received_length = get<std::size_t>(j, "T_r");
  v.message_bits = get<std::size_t>(j, "M");
  v.video_p_value = get_or<double>(j, "video_p_value", 1.0);
  v.total_similarity = get_or<double>(j, "total_similarity", 0.0);
  std::size_t valid_count = 0;
  for (const auto& f : get<Json>(j, "frames")) {
    FrameRow row;
    const auto pi = get<std::size_t>(f, "pi");
    const auto rho = get<std::size_t>(f, "rho");
    require(pi >= 1 && rho >= 1, Errc::parse, "verdict: frame indices are 1-based");
    row.pi = pi - 1;
    row.rho = rho - 1;
    row.matched_bits = get<std::uint64_t>(f, "matched_bits");
    row.valid = get<bool>(f, "valid");
    valid_count += row.valid;
    v.frames.push_back(row);
  }
  require(valid_count == v.num_valid, Errc::invalid_argument,
          "verdict: num_valid disagrees with frame table");
  require(v.valid == (v.num_valid >= v.thresholds.tau_v), Errc::invalid_argument,
          "verdict: validity flag disagrees with tau_v");
  return v;
}

Json loss_report_to_json(const LossReport& r) {
  return Json{{"ps", r.perceptual}, {"tc", r.temporal}, {"rec", r.recovery}, {"total", r.total}};
}

Json generator_spec_to_json(const GeneratorSpec& s) {
  return Json{{"config", key_config_to_json(s.key)},
              {"d", s.decoder.dim},
              {"H", s.decoder.height},
              {"W", s.decoder.width},
              {"rank", s.rank},
              {"alpha", s.alpha},
              {"init_scale", s.init_scale},
              {"condition_scale", s.condition_scale},
              {"latent_scale", s.decoder.latent_scale},
              {"offset_scale", s.decoder.offset_scale},
              {"projection_scale", s.decoder.projection_scale},
              {"dictionary_seed", s.dictionary_seed},
              {"decoder_seed", s.decoder.seed}};
}

GeneratorSpec generator_spec_from_json(const Json& j) {
  GeneratorSpec s;
  if (j.contains("config")) s.key = key_config_from_json(j.at("config"));
  s.decoder.layers = s.key.num_layers;
  s.decoder.dim = get_or<std::size_t>(j, "d", s.decoder.dim);
  s.decoder.height = get_or<std::size_t>(j, "H", s.decoder.height);
  s.decoder.width = get_or<std::size_t>(j, "W", s.decoder.width);
  s.rank = get_or<std::size_t>(j, "rank", s.rank);
  s.alpha = get_or<double>(j, "alpha", s.alpha);
  s.init_scale = get_or<double>(j, "init_scale", s.init_scale);
  s.condition_scale = get_or<double>(j, "condition_scale", s.condition_scale);
  s.decoder.latent_scale = get_or<double>(j, "latent_scale", s.decoder.latent_scale);
  s.decoder.offset_scale = get_or<double>(j, "offset_scale", s.decoder.offset_scale);
  s.decoder.projection_scale = get_or<double>(j, "projection_scale", s.decoder.projection_scale);
  s.dictionary_seed = get_or<std::uint64_t>(j, "dictionary_seed", s.dictionary_seed);
  s.decoder.seed = get_or<std::uint64_t>(j, "decoder_seed", s.decoder.seed);
  s.validate();
  return s;
}

void write_spdf(std::ostream& out, const Video& video) {
  require(!video.empty(), Errc::invalid_argument, "SPDF: empty video");
  const auto& f0 = video.front();
  out.write("SPDF", 4);
  out.put(static_cast<char>(kSpdfVersion));
  put_u32_be(out, static_cast<std::uint32_t>(video.size()));
  put_u32_be(out, static_cast<std::uint32_t>(f0.height));
  put_u32_be(out, static_cast<std::uint32_t>(f0.width));
  put_u32_be(out, static_cast<std::uint32_t>(ToyFrame::kChannels));
  for (const auto& f : video) {
    require(f.height == f0.height && f.width == f0.width &&
                f.pixels.size() == ToyFrame::kChannels * f0.height * f0.width,
            Errc::dimension_mismatch, "SPDF: frames must share one shape");
    for (double p : f.pixels) put_f32_le(out, p);
  }
  require(static_cast<bool>(out), Errc::io, "SPDF: write failed");
}

Video read_spdf(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  require(in && std::memcmp(magic, "SPDF", 4) == 0, Errc::parse, "SPDF: bad magic");
  const int version = in.get();
  require(version == kSpdfVersion, Errc::parse, "SPDF: unsupported version");
  const std::uint32_t t = get_u32_be(in);
  const std::uint32_t h = get_u32_be(in);
  const std::uint32_t w = get_u32_be(in);
  const std::uint32_t c = get_u32_be(in);
  require(c == ToyFrame::kChannels, Errc::parse, "SPDF: expected 3 channels");
  require(t >= 1 && h >= 1 && w >= 1, Errc::parse, "SPDF: empty dimensions");
  Video video;
  video.reserve(t);
  for (std::uint32_t i = 0; i < t; ++i) {
    ToyFrame f(i + 1, h, w);
    for (auto& p : f.pixels) p = get_f32_le(in);
    video.push_back(std::move(f));
  }
  return video;
}

void save_spdf(const std::string& path, const Video& video) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot open '" + path + "' for writing");
  write_spdf(out, video);
}

Video load_spdf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io, "cannot open '" + path + "'");
  return read_spdf(in);
}

void write_extractor(std::ostream& out, const LinearExtractor& ex) {
  const Json header{{"format", "spdmark-extractor"},
                    {"version", 1},
                    {"M", ex.weight.rows()},
                    {"features", ex.weight.cols()},
                    {"H", ex.height},
                    {"W", ex.width},
                    {"lambda_reg", ex.ridge}};
  out << header.dump() << '\n';
  for (Eigen::Index i = 0; i < ex.weight.rows(); ++i)
    for (Eigen::Index k = 0; k < ex.weight.cols(); ++k) put_f32_le(out, ex.weight(i, k));
  for (Eigen::Index i = 0; i < ex.bias.size(); ++i) put_f32_le(out, ex.bias(i));
  require(static_cast<bool>(out), Errc::io, "extractor: write failed");
}

LinearExtractor read_extractor(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Errc::parse, "extractor: missing header");
  Json header;
  try {
    header = Json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, std::string("extractor header: ") + e.what());
  }
  require(get<std::string>(header, "format") == "spdmark-extractor", Errc::parse,
          "extractor: wrong format tag");
  const auto m = get<Eigen::Index>(header, "M");
  const auto n = get<Eigen::Index>(header, "features");
  require(m >= 1 && n >= 1, Errc::parse, "extractor: degenerate dims");
  LinearExtractor ex;
  ex.height = get<std::size_t>(header, "H");
  ex.width = get<std::size_t>(header, "W");
  ex.ridge = get<double>(header, "lambda_reg");
  ex.weight.resize(m, n);
  ex.bias.resize(m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = 0; k < n; ++k) ex.weight(i, k) = get_f32_le(in);
  for (Eigen::Index i = 0; i < m; ++i) ex.bias(i) = get_f32_le(in);
  return ex;
}

void save_extractor(const std::string& path, const LinearExtractor& ex) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), Errc::io, "cannot open '" + path + "' for writing");
  write_extractor(out, ex);
}

LinearExtractor load_extractor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io, "cannot open '" + path + "'");
  return read_extractor(in);
}

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, "'" + path + "': " + e.what());
  }
}

void save_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  require(static_cast<bool>(out), Errc::io, "cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  require(static_cast<bool>(out), Errc::io, "write to '" + path + "' failed");
}

}  // namespace spdmark
