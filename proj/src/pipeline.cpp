#include "spdmark/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <random>
#include <thread>

#include "spdmark/crypto.hpp"
#include "spdmark/error.hpp"

namespace spdmark {
namespace {

// Sub-seed tags within one trial.
enum SeedTag : std::uint64_t {
  kKeySeed = 1,
  kSecretSeed = 2,
  kAttackSeed = 3,
  kChannelSeed = 4,
  kLatentSeed = 5,
  kConditionSeed = 6,
};

constexpr std::uint64_t kNullCalibrationStream = 999;
constexpr std::uint64_t kTrainingStream = 998;

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("[") + name + "] " + e.what());
  } catch (const std::exception& e) {
    throw Error(Errc::internal, std::string("[") + name + "] " + e.what());
  }
}

std::string embed_name(EmbedMode m) { return m == EmbedMode::channel ? "channel" : "toy"; }

Bits random_bits(std::mt19937_64& rng, std::size_t n) {
  Bits b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng() >> 63);
  return b;
}

Json score_json(const ClassScore& s) {
  return Json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

Json interval_json(const Interval& i) { return Json::array({i.lower, i.upper}); }

}  // namespace

void RunConfig::validate() const {
  generator.validate();
  loss.validate();
  channel.validate();
  for (const auto& a : attacks) a.validate();
  require(gamma_f > 0.0 && gamma_f <= 1.0 && gamma_v > 0.0 && gamma_v <= 1.0,
          Errc::invalid_argument, "config: gamma_f and gamma_v must lie in (0, 1]");
  require(frames >= 2, Errc::invalid_argument, "config: frames must be >= 2");
  require(trials >= 1, Errc::invalid_argument, "config: trials must be >= 1");
  require(null_trials == 0 || null_trials >= 1000, Errc::invalid_argument,
          "config: null_trials must be 0 (skip) or >= 1000");
  require(train_videos >= 1 && train_frames >= 1, Errc::invalid_argument,
          "config: training set must be non-empty");
  if (!secret_hex.empty()) {
    require(bytes_from_hex(secret_hex).size() >= BaseSecret::kMinBytes, Errc::invalid_argument,
            "config: secret must be at least 16 bytes");
  }
}

Json run_config_to_json(const RunConfig& c) {
  Json attacks = Json::array();
  for (const auto& a : c.attacks) attacks.push_back(attack_spec_to_json(a));
  return Json{{"generator", generator_spec_to_json(c.generator)},
              {"loss", Json{{"lambda_ps", c.loss.perceptual}, {"lambda_tc", c.loss.temporal}}},
              {"channel", channel_spec_to_json(c.channel)},
              {"attacks", attacks},
              {"gamma_f", c.gamma_f},
              {"gamma_v", c.gamma_v},
              {"frames", c.frames},
              {"trials", c.trials},
              {"null_trials", c.null_trials},
              {"seed", c.seed},
              {"embed", embed_name(c.embed)},
              {"train_videos", c.train_videos},
              {"train_frames", c.train_frames},
              {"ridge", c.ridge},
              {"secret_hex", c.secret_hex}};
}

RunConfig run_config_from_json(const Json& j) {
  require(j.is_object(), Errc::parse, "config must be a JSON object");
  RunConfig c;
  try {
    if (j.contains("generator")) c.generator = generator_spec_from_json(j.at("generator"));
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      c.loss.perceptual = l.value("lambda_ps", c.loss.perceptual);
      c.loss.temporal = l.value("lambda_tc", c.loss.temporal);
    }
    if (j.contains("channel")) c.channel = channel_spec_from_json(j.at("channel"));
    if (j.contains("attacks"))
      for (const auto& a : j.at("attacks")) c.attacks.push_back(attack_spec_from_json(a));
    c.gamma_f = j.value("gamma_f", c.gamma_f);
    c.gamma_v = j.value("gamma_v", c.gamma_v);
    c.frames = j.value("frames", c.frames);
    c.trials = j.value("trials", c.trials);
    c.null_trials = j.value("null_trials", c.null_trials);
    c.seed = j.value("seed", c.seed);
    const std::string embed = j.value("embed", std::string("channel"));
    if (embed == "channel") {
      c.embed = EmbedMode::channel;
    } else if (embed == "toy") {
      c.embed = EmbedMode::toy;
    } else {
      fail(Errc::invalid_argument, "config: embed must be 'channel' or 'toy'");
    }
    c.train_videos = j.value("train_videos", c.train_videos);
    c.train_frames = j.value("train_frames", c.train_frames);
    c.ridge = j.value("ridge", c.ridge);
    c.secret_hex = j.value("secret_hex", c.secret_hex);
    c.threads = j.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_hash(const RunConfig& c) {
  RunConfig filled = c;
  if (filled.attacks.empty()) filled.attacks = default_attack_suite(filled.embed);
  const std::string canonical = run_config_to_json(filled).dump();
  const Digest d = sha256({reinterpret_cast<const std::uint8_t*>(canonical.data()), canonical.size()});
  return to_hex(std::span<const std::uint8_t>(d.data(), 8));
}

std::vector<AttackSpec> default_attack_suite(EmbedMode mode) {
  std::vector<AttackSpec> suite;
  auto add = [&](AttackKind k) -> AttackSpec& {
    suite.emplace_back();
    suite.back().kind = k;
    return suite.back();
  };
  add(AttackKind::none);
  add(AttackKind::drop).fraction = 0.5;
  {
    auto& ins = add(AttackKind::insert);
    ins.fraction = 0.2;
    ins.insert_mode = InsertMode::noise;
  }
  {
    auto& ins = add(AttackKind::insert);
    ins.fraction = 0.2;
    ins.insert_mode = InsertMode::duplicate;
  }
  add(AttackKind::swap_random);
  add(AttackKind::swap_adjacent).pair_fraction = 0.3;
  {
    auto& trim = add(AttackKind::trim);
    trim.head_fraction = 0.2;
    trim.tail_fraction = 0.2;
  }
  if (mode == EmbedMode::toy) {
    add(AttackKind::pixel_noise).sigma = 0.05;
    add(AttackKind::rescale).factor = 0.5;
  }
  return suite;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

BaseSecret secret_from_seed(std::uint64_t seed) {
  std::array<std::uint8_t, 8> buf{};
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<std::uint8_t>(seed >> (56 - 8 * i));
  const Digest d = sha256(buf);
  return BaseSecret{std::vector<std::uint8_t>(d.begin(), d.begin() + 16)};
}

Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double CalibrationReport::identity_pass_rate() const {
  return identity_pairs ? static_cast<double>(identity_passes) / static_cast<double>(identity_pairs) : 0.0;
}
double CalibrationReport::matched_pass_rate() const {
  return matched_pairs ? static_cast<double>(matched_passes) / static_cast<double>(matched_pairs) : 0.0;
}
double CalibrationReport::video_fpr() const {
  return trials ? static_cast<double>(valid_videos) / static_cast<double>(trials) : 0.0;
}
double CalibrationReport::identity_standard_error() const {
  return identity_pairs ? std::sqrt(p_f * (1.0 - p_f) / static_cast<double>(identity_pairs)) : 0.0;
}

CalibrationReport calibrate(std::uint64_t message_bits, double gamma_f, double gamma_v,
                            std::size_t frames, std::size_t trials, std::uint64_t seed,
                            std::size_t threads) {
  require(trials >= 1000, Errc::invalid_argument, "calibrate: need at least 1000 trials");
  require(frames >= 1 && message_bits >= 1, Errc::invalid_argument,
          "calibrate: frames and message bits must be >= 1");
  CalibrationReport r;
  r.message_bits = message_bits;
  r.gamma_f = gamma_f;
  r.gamma_v = gamma_v;
  r.frames = frames;
  r.trials = trials;
  r.seed = seed;
  const FrameThreshold ft = frame_threshold(message_bits, gamma_f);
  r.tau_f = ft.tau;
  r.p_f = ft.tail;
  r.tau_v = video_threshold(frames, ft.tail, gamma_v);
  if (gamma_v < 10.0 / static_cast<double>(trials)) {
    r.warnings.push_back("gamma_v below 10/trials: the video-level false positive rate is not "
                         "resolved by this many trials");
  }

  struct PerTrial {
    std::uint64_t identity = 0;
    std::uint64_t matched = 0;
    std::uint64_t pairs = 0;
    bool valid = false;
  };
  std::vector<PerTrial> out(trials);
  parallel_for(trials, threads, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(seed, i));
    std::vector<Bits> expected(frames);
    std::vector<Bits> received(frames);
    for (auto& m : expected) m = random_bits(rng, message_bits);
    for (auto& m : received) m = random_bits(rng, message_bits);
    PerTrial t;
    for (std::size_t k = 0; k < frames; ++k)
      t.identity += message_bits - hamming(expected[k], received[k]) >= ft.tau;
    const Verdict v = verify(expected, received, gamma_f, gamma_v);
    t.matched = v.num_valid;
    t.pairs = v.frames.size();
    t.valid = v.valid;
    out[i] = t;
  });
  for (const auto& t : out) {
    r.identity_passes += t.identity;
    r.identity_pairs += frames;
    r.matched_passes += t.matched;
    r.matched_pairs += t.pairs;
    r.valid_videos += t.valid;
  }
  return r;
}

Json calibration_to_json(const CalibrationReport& r) {
  const double se = r.identity_standard_error();
  return Json{
      {"M", r.message_bits},
      {"gamma_f", r.gamma_f},
      {"gamma_v", r.gamma_v},
      {"T", r.frames},
      {"trials", r.trials},
      {"seed", r.seed},
      {"tau_f", r.tau_f},
      {"p_f", r.p_f},
      {"tau_v", r.tau_v},
      {"identity_alignment",
       Json{{"passes", r.identity_passes},
            {"pairs", r.identity_pairs},
            {"rate", r.identity_pass_rate()},
            {"wilson95", interval_json(wilson_interval(r.identity_passes, r.identity_pairs))},
            {"standard_error", se},
            {"z_vs_p_f", se > 0 ? (r.identity_pass_rate() - r.p_f) / se : 0.0}}},
      {"matched_alignment",
       Json{{"passes", r.matched_passes},
            {"pairs", r.matched_pairs},
            {"rate", r.matched_pass_rate()},
            {"wilson95", interval_json(wilson_interval(r.matched_passes, r.matched_pairs))},
            {"inflation_vs_p_f", r.p_f > 0 ? r.matched_pass_rate() / r.p_f : 0.0}}},
      {"video_level",
       Json{{"valid_videos", r.valid_videos},
            {"fpr", r.video_fpr()},
            {"wilson95", interval_json(wilson_interval(r.valid_videos, r.trials))},
            {"invalid_rate", 1.0 - r.video_fpr()}}},
      {"warnings", r.warnings}};
}

LinearExtractor train_toy_extractor(const Generator& gen, std::size_t videos, std::size_t frames,
                                    double ridge, std::uint64_t seed, double* train_acc) {
  std::vector<Video> train;
  std::vector<Schedule> schedules;
  train.reserve(videos);
  schedules.reserve(videos);
  for (std::size_t v = 0; v < videos; ++v) {
    const std::uint64_t s = derive_seed(seed, v);
    const WatermarkKey key = random_key(gen.spec.key, derive_seed(s, kKeySeed));
    schedules.push_back(derive_frame_messages(secret_from_seed(derive_seed(s, kSecretSeed)), key, frames));
    const auto cond = random_condition(gen.spec.decoder.dim, gen.spec.condition_scale,
                                       derive_seed(s, kConditionSeed));
    train.push_back(generate_video(gen.decoder, gen.dictionary, schedules.back(),
                                   derive_seed(s, kLatentSeed), cond));
  }
  LinearExtractor ex = fit_extractor(train, schedules, ridge);
  if (train_acc) *train_acc = bit_accuracy(ex, train, schedules);
  return ex;
}

ExtractedSequence extract_sequence(const LinearExtractor& extractor, const Video& video) {
  ExtractedSequence seq;
  seq.messages.reserve(video.size());
  for (const auto& f : video) seq.messages.push_back(extractor.decode(f));
  return seq;
}

TrialOutcome run_trial(const RunConfig& cfg, const Generator* gen, const LinearExtractor* extractor,
                       const AttackSpec& attack_in, std::uint64_t trial_seed,
                       const std::string& artifact_dir) {
  const KeyConfig& kc = cfg.generator.key;
  const WatermarkKey key = random_key(kc, derive_seed(trial_seed, kKeySeed));
  const BaseSecret secret = cfg.secret_hex.empty()
                                ? secret_from_seed(derive_seed(trial_seed, kSecretSeed))
                                : BaseSecret{bytes_from_hex(cfg.secret_hex)};
  AttackSpec attack = attack_in;
  attack.seed = derive_seed(trial_seed, kAttackSeed);

  const Schedule schedule =
      stage("schedule", [&] { return derive_frame_messages(secret, key, cfg.frames); });

  ExtractedSequence extracted;
  TamperRecord record;
  Video clean_video;
  Video attacked_video;
  if (cfg.embed == EmbedMode::channel) {
    const ExtractedSequence embedded = stage("embed", [&] { return as_sequence(schedule); });
    const AttackedSequence attacked = stage("attack", [&] { return attack_sequence(embedded, attack); });
    record = attacked.record;
    ChannelSpec ch = cfg.channel;
    ch.seed = derive_seed(trial_seed, kChannelSeed);
    extracted = stage("extract", [&] { return channel_extract(attacked.sequence, ch); });
  } else {
    require(gen != nullptr && extractor != nullptr, Errc::internal,
            "toy embedding needs a generator and an extractor");
    clean_video = stage("embed", [&] {
      const auto cond = random_condition(gen->spec.decoder.dim, gen->spec.condition_scale,
                                         derive_seed(trial_seed, kConditionSeed));
      return generate_video(gen->decoder, gen->dictionary, schedule,
                            derive_seed(trial_seed, kLatentSeed), cond);
    });
    const AttackedVideo attacked = stage("attack", [&] { return attack_video(clean_video, attack); });
    record = attacked.record;
    attacked_video = attacked.video;
    extracted = stage("extract", [&] { return extract_sequence(*extractor, attacked_video); });
  }

  TrialOutcome out;
  out.record = record;
  out.verdict = stage("verify", [&] { return verify(schedule, extracted, cfg.gamma_f, cfg.gamma_v); });
  out.diagnosis = stage("diagnose", [&] {
    return diagnose_tampering(out.verdict, schedule.size(), extracted.size(), &record);
  });
  out.permutation_recovered = out.diagnosis.recovered_positions == record.positions;

  if (!artifact_dir.empty()) {
    stage("write", [&] {
      std::filesystem::create_directories(artifact_dir);
      save_json_file(artifact_dir + "/key.json", key_to_json(kc, key));
      save_json_file(artifact_dir + "/schedule.json", schedule_to_json({kc, key, schedule}));
      save_json_file(artifact_dir + "/extracted.json", sequence_to_json(extracted));
      save_json_file(artifact_dir + "/tamper.json", tamper_record_to_json(record));
      save_json_file(artifact_dir + "/verdict.json", verdict_to_json(out.verdict, &out.diagnosis));
      if (cfg.embed == EmbedMode::toy) {
        save_spdf(artifact_dir + "/video.spdf", clean_video);
        save_spdf(artifact_dir + "/attacked.spdf", attacked_video);
      }
      return 0;
    });
  }
  return out;
}

ExperimentReport run_pipeline(const RunConfig& cfg_in, const std::string& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  stage("config", [&] {
    cfg_in.validate();
    return 0;
  });
  RunConfig cfg = cfg_in;
  if (cfg.attacks.empty()) cfg.attacks = default_attack_suite(cfg.embed);

  ExperimentReport report;
  report.config = cfg;
  report.config_hash = config_hash(cfg);

  std::optional<Generator> gen;
  LinearExtractor extractor;
  if (cfg.embed == EmbedMode::toy) {
    gen.emplace(stage("generator", [&] { return build_generator(cfg.generator); }));
    double acc = 0.0;
    extractor = stage("fit-extractor", [&] {
      return train_toy_extractor(*gen, cfg.train_videos, cfg.train_frames, cfg.ridge,
                                 derive_seed(cfg.seed, kTrainingStream), &acc);
    });
    report.toy_train_bit_acc = acc;
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      save_extractor(out_dir + "/extractor.bin", extractor);
    }
  }

  for (std::size_t row_index = 0; row_index < cfg.attacks.size(); ++row_index) {
    const AttackSpec& attack = cfg.attacks[row_index];
    AttackRow row;
    row.attack = attack;
    row.seed = derive_seed(derive_seed(cfg.seed, row_index), attack.seed);
    row.trials = cfg.trials;
    std::vector<TrialOutcome> outcomes(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t i) {
      std::string dir;
      if (!out_dir.empty() && i == 0)
        dir = out_dir + "/" + std::to_string(row_index) + "_" + attack_name(attack.kind);
      outcomes[i] = run_trial(cfg, gen ? &*gen : nullptr, gen ? &extractor : nullptr, attack,
                              derive_seed(row.seed, i), dir);
    });
    ClassScore dropped{0, 0, 0};
    ClassScore inserted{0, 0, 0};
    ClassScore inversions{0, 0, 0};
    double detect = 0.0;
    double recovered = 0.0;
    for (const auto& o : outcomes) {
      row.bit_acc += o.verdict.bit_acc;
      row.order_acc += o.verdict.order_acc;
      row.valid_rate += o.verdict.valid;
      auto acc = [](ClassScore& a, const std::optional<ClassScore>& s) {
        a.precision += s->precision;
        a.recall += s->recall;
        a.f1 += s->f1;
      };
      acc(dropped, o.diagnosis.dropped_score);
      acc(inserted, o.diagnosis.inserted_score);
      acc(inversions, o.diagnosis.inversion_score);
      detect += o.verdict.order_acc < 1.0;
      recovered += o.permutation_recovered;
    }
    const double n = static_cast<double>(cfg.trials);
    auto mean = [n](ClassScore s) { return ClassScore{s.precision / n, s.recall / n, s.f1 / n}; };
    row.bit_acc /= n;
    row.order_acc /= n;
    row.valid_rate /= n;
    row.dropped = mean(dropped);
    row.inserted = mean(inserted);
    row.inversions = mean(inversions);
    row.order_detect_rate = detect / n;
    row.permutation_recovered_rate = recovered / n;
    report.rows.push_back(row);
  }

  if (cfg.null_trials > 0) {
    report.null_calibration = stage("calibrate", [&] {
      return calibrate(cfg.generator.key.message_bits(), cfg.gamma_f, cfg.gamma_v, cfg.frames,
                       cfg.null_trials, derive_seed(cfg.seed, kNullCalibrationStream), cfg.threads);
    });
  }
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!out_dir.empty()) {
    stage("write", [&] {
      std::filesystem::create_directories(out_dir);
      save_json_file(out_dir + "/config.json", run_config_to_json(cfg));
      save_json_file(out_dir + "/report.json", experiment_report_to_json(report));
      return 0;
    });
  }
  return report;
}

Json experiment_report_to_json(const ExperimentReport& r, bool include_runtime) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back(Json{{"attack", attack_spec_to_json(row.attack)},
                        {"seed", row.seed},
                        {"config_hash", r.config_hash},
                        {"trials", row.trials},
                        {"bit_acc", row.bit_acc},
                        {"order_acc", row.order_acc},
                        {"valid_rate", row.valid_rate},
                        {"dropped", score_json(row.dropped)},
                        {"inserted", score_json(row.inserted)},
                        {"inversions", score_json(row.inversions)},
                        {"order_detect_rate", row.order_detect_rate},
                        {"permutation_recovered_rate", row.permutation_recovered_rate}});
  }
  Json j{{"config_hash", r.config_hash},
         {"embed", embed_name(r.config.embed)},
         {"rows", rows},
         {"null_calibration", r.config.null_trials > 0 ? calibration_to_json(r.null_calibration)
                                                       : Json(nullptr)}};
  if (r.toy_train_bit_acc >= 0.0) j["toy_train_bit_acc"] = r.toy_train_bit_acc;
  if (include_runtime) j["runtime"] = Json{{"seconds", r.runtime_seconds}};
  return j;
}

}  // namespace spdmark
