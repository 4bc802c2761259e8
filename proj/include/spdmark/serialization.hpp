#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"
#include "spdmark/channel_attacks.hpp"
#include "spdmark/keyspace.hpp"
#include "spdmark/objective.hpp"
#include "spdmark/spd_core.hpp"
#include "spdmark/verifier.hpp"

namespace spdmark {

using Json = nlohmann::ordered_json;

// Frame indices are 1-based in every JSON document.

Json key_config_to_json(const KeyConfig& cfg);
KeyConfig key_config_from_json(const Json& j);

Json key_to_json(const KeyConfig& cfg, const WatermarkKey& key);
WatermarkKey key_from_json(const Json& j, KeyConfig* cfg_out = nullptr);

struct ScheduleFile {
  KeyConfig config;
  WatermarkKey key;
  Schedule frames;
};

Json schedule_to_json(const ScheduleFile& s);
ScheduleFile schedule_from_json(const Json& j);

Json sequence_to_json(const ExtractedSequence& seq);
ExtractedSequence sequence_from_json(const Json& j);

Json tamper_record_to_json(const TamperRecord& r);
TamperRecord tamper_record_from_json(const Json& j);

Json channel_spec_to_json(const ChannelSpec& s);
ChannelSpec channel_spec_from_json(const Json& j);

// { "attack": "drop", "fraction": 0.5, "seed": 7 } and friends.
Json attack_spec_to_json(const AttackSpec& s);
AttackSpec attack_spec_from_json(const Json& j);

Json verdict_to_json(const Verdict& v, const TamperDiagnosis* tamper = nullptr);
Verdict verdict_from_json(const Json& j);
Json diagnosis_to_json(const TamperDiagnosis& d);

Json loss_report_to_json(const LossReport& r);

// Header only: factors are regenerated from the seeds.
Json generator_spec_to_json(const GeneratorSpec& s);
GeneratorSpec generator_spec_from_json(const Json& j);

// SPDF: "SPDF", u8 version, T/H/W/C as u32 big-endian, then float32
// little-endian pixels, frame-major, channel-major, row-major.
inline constexpr std::uint8_t kSpdfVersion = 1;
void write_spdf(std::ostream& out, const Video& video);
Video read_spdf(std::istream& in);
void save_spdf(const std::string& path, const Video& video);
Video load_spdf(const std::string& path);

// One JSON header line, then weights (M x features, row-major) and bias as
// float32 little-endian.
void write_extractor(std::ostream& out, const LinearExtractor& ex);
LinearExtractor read_extractor(std::istream& in);
void save_extractor(const std::string& path, const LinearExtractor& ex);
LinearExtractor load_extractor(const std::string& path);

Json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const Json& j);

}  // namespace spdmark
