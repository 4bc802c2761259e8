#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spdmark/channel_attacks.hpp"
#include "spdmark/objective.hpp"
#include "spdmark/serialization.hpp"
#include "spdmark/spd_core.hpp"
#include "spdmark/verifier.hpp"

namespace spdmark {

enum class EmbedMode { channel, toy };

struct RunConfig {
  GeneratorSpec generator;
  LossWeights loss;
  ChannelSpec channel{ChannelKind::bitflip, 0.02, 0};
  std::vector<AttackSpec> attacks;  // empty -> default_attack_suite(embed)
  double gamma_f = 1e-3;
  double gamma_v = 1e-6;
  std::size_t frames = 25;
  std::size_t trials = 200;
  std::size_t null_trials = 10000;
  std::uint64_t seed = 7;
  EmbedMode embed = EmbedMode::channel;
  std::size_t train_videos = 200;
  std::size_t train_frames = 8;
  double ridge = 1e-3;
  std::string secret_hex;  // empty -> derived from seed
  std::size_t threads = 0;  // 0 -> hardware concurrency

  void validate() const;
};

Json run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j);
// First 16 hex digits of SHA-256 over the canonical config JSON.
std::string config_hash(const RunConfig& c);

std::vector<AttackSpec> default_attack_suite(EmbedMode mode);

// Runs fn(i) for i in [0, n); results are keyed by index so any thread count
// produces the same output.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

// 16-byte secret from a seed (SHA-256 prefix).
BaseSecret secret_from_seed(std::uint64_t seed);

struct Interval {
  double lower = 0.0;
  double upper = 1.0;
};
Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.959963984540054);

struct CalibrationReport {
  std::uint64_t message_bits = 0;
  double gamma_f = 0.0;
  double gamma_v = 0.0;
  std::size_t frames = 0;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::uint64_t tau_f = 0;
  double p_f = 0.0;
  std::uint64_t tau_v = 0;
  std::uint64_t identity_passes = 0;
  std::uint64_t identity_pairs = 0;
  std::uint64_t matched_passes = 0;
  std::uint64_t matched_pairs = 0;
  std::uint64_t valid_videos = 0;
  std::vector<std::string> warnings;

  double identity_pass_rate() const;
  double matched_pass_rate() const;
  double video_fpr() const;
  double identity_standard_error() const;  // sqrt(p_f (1 - p_f) / pairs)
};

// Null-hypothesis Monte Carlo: random received messages against random expected ones.
CalibrationReport calibrate(std::uint64_t message_bits, double gamma_f, double gamma_v,
                            std::size_t frames, std::size_t trials, std::uint64_t seed,
                            std::size_t threads = 0);
Json calibration_to_json(const CalibrationReport& r);

struct TrialOutcome {
  Verdict verdict;
  TamperDiagnosis diagnosis;
  TamperRecord record;
  bool permutation_recovered = false;
};

struct AttackRow {
  AttackSpec attack;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  double bit_acc = 0.0;
  double order_acc = 0.0;
  double valid_rate = 0.0;
  ClassScore dropped;
  ClassScore inserted;
  ClassScore inversions;
  double order_detect_rate = 0.0;        // trials with Order Acc < 1
  double permutation_recovered_rate = 0.0;
};

struct ExperimentReport {
  std::string config_hash;
  RunConfig config;
  std::vector<AttackRow> rows;
  CalibrationReport null_calibration;
  double toy_train_bit_acc = -1.0;  // toy mode only
  double runtime_seconds = 0.0;
};

// Fits the toy extractor on freshly generated watermarked videos.
LinearExtractor train_toy_extractor(const Generator& gen, std::size_t videos, std::size_t frames,
                                    double ridge, std::uint64_t seed, double* train_acc = nullptr);

// Decodes every frame of a video into an extracted message sequence.
ExtractedSequence extract_sequence(const LinearExtractor& extractor, const Video& video);

// One schedule -> embed -> attack -> extract -> verify -> diagnose pass.
// `extractor` is required in toy mode and ignored in channel mode.
TrialOutcome run_trial(const RunConfig& cfg, const Generator* gen, const LinearExtractor* extractor,
                       const AttackSpec& attack, std::uint64_t trial_seed,
                       const std::string& artifact_dir = {});

// Writes config.json, report.json and the first trial's artifacts per attack
// under out_dir when it is non-empty.
ExperimentReport run_pipeline(const RunConfig& cfg, const std::string& out_dir = {});
Json experiment_report_to_json(const ExperimentReport& r, bool include_runtime = true);

}  // namespace spdmark
