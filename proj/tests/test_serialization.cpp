#include "doctest.h"

#include <filesystem>
#include <random>
#include <sstream>

#include "spdmark/error.hpp"
#include "spdmark/pipeline.hpp"
#include "spdmark/serialization.hpp"

using namespace spdmark;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "spdmark_serialization_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("key and schedule documents round trip") {
  const KeyConfig cfg{5, 8};
  const WatermarkKey key = random_key(cfg, 4);
  KeyConfig back_cfg;
  CHECK(key_from_json(Json::parse(key_to_json(cfg, key).dump()), &back_cfg).bits == key.bits);
  CHECK(back_cfg == cfg);

  const ScheduleFile s{cfg, key, derive_frame_messages(secret_from_seed(1), key, 7)};
  const Json j = schedule_to_json(s);
  CHECK(j["frames"][0]["t"] == 1);
  const ScheduleFile back = schedule_from_json(Json::parse(j.dump()));
  REQUIRE(back.frames.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(back.frames[i].frame_index == s.frames[i].frame_index);
    CHECK(back.frames[i].bits == s.frames[i].bits);
  }

  Json bad = key_to_json(KeyConfig{}, random_key(KeyConfig{}, 1));
  bad["config"]["M"] = 27;
  CHECK_THROWS_AS(key_from_json(bad), Error);
  CHECK_THROWS_AS(key_from_json(Json{{"config", key_config_to_json(KeyConfig{})}}), Error);
}

TEST_CASE("sequence, tamper record and verdict round trip") {
  std::mt19937_64 rng(2);
  ExtractedSequence seq;
  for (int i = 0; i < 9; ++i) {
    Bits b(28);
    for (auto& v : b) v = rng() & 1u;
    seq.messages.push_back(b);
  }
  CHECK(sequence_from_json(Json::parse(sequence_to_json(seq).dump())).messages == seq.messages);

  AttackSpec spec;
  spec.kind = AttackKind::insert;
  spec.fraction = 0.3;
  spec.insert_mode = InsertMode::noise;
  spec.seed = 5;
  const auto attacked = attack_sequence(seq, spec);
  const Json rj = tamper_record_to_json(attacked.record);
  const TamperRecord r = tamper_record_from_json(Json::parse(rj.dump()));
  CHECK(r.positions == attacked.record.positions);
  CHECK(r.inserted == attacked.record.inserted);
  CHECK(r.output_length == attacked.record.output_length);
  for (const auto& pos : rj["inserted"]) CHECK(pos.get<std::size_t>() >= 1);

  Json broken = rj;
  broken["output_length"] = 3;
  CHECK_THROWS_AS(tamper_record_from_json(broken), Error);

  const Verdict v = verify(seq.messages, attacked.sequence.messages, 1e-3, 1e-6);
  const Verdict vb = verdict_from_json(Json::parse(verdict_to_json(v).dump()));
  CHECK(vb.valid == v.valid);
  CHECK(vb.num_valid == v.num_valid);
  CHECK(vb.bit_acc == v.bit_acc);
  CHECK(vb.frames.size() == v.frames.size());
  for (std::size_t i = 0; i < v.frames.size(); ++i) {
    CHECK(vb.frames[i].pi == v.frames[i].pi);
    CHECK(vb.frames[i].rho == v.frames[i].rho);
  }
  const Json vj = verdict_to_json(v);
  for (const char* k : {"valid", "tau_f", "p_f", "tau_v", "num_valid", "bit_acc", "order_acc", "frames"})
    CHECK(vj.contains(k));
}

TEST_CASE("attack and channel specs") {
  const AttackSpec a = attack_spec_from_json(Json::parse(R"({"attack":"drop","fraction":0.5,"seed":7})"));
  CHECK(a.kind == AttackKind::drop);
  CHECK(a.fraction == 0.5);
  CHECK(a.seed == 7);
  const AttackSpec back = attack_spec_from_json(attack_spec_to_json(a));
  CHECK(back.kind == a.kind);
  CHECK(back.fraction == a.fraction);
  CHECK_THROWS_AS(attack_spec_from_json(Json::parse(R"({"attack":"drop","fraction":1.5})")), Error);
  CHECK_THROWS_AS(attack_spec_from_json(Json::parse(R"({"attack":"melt"})")), Error);
  CHECK_THROWS_AS(attack_spec_from_json(Json::parse(R"({"attack":"insert","mode":"copy"})")), Error);

  const ChannelSpec c = channel_spec_from_json(Json::parse(R"({"kind":"bitflip","q":0.02,"seed":3})"));
  CHECK(c.kind == ChannelKind::bitflip);
  CHECK(c.flip_probability == 0.02);
  CHECK(channel_spec_from_json(channel_spec_to_json(c)).seed == 3);
}

TEST_CASE("SPDF video container") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Video v;
  for (std::size_t t = 0; t < 3; ++t) {
    ToyFrame f(t + 1, 4, 5);
    for (auto& p : f.pixels) p = static_cast<float>(u(rng));
    v.push_back(f);
  }
  std::stringstream buf;
  write_spdf(buf, v);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "SPDF");
  CHECK(static_cast<unsigned char>(bytes[4]) == kSpdfVersion);
  CHECK(bytes.size() == 5 + 16 + 3 * 3 * 4 * 5 * 4);
  // T as big-endian u32.
  CHECK(static_cast<unsigned char>(bytes[8]) == 3);
  const Video back = read_spdf(buf);
  REQUIRE(back.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(back[t].pixels == v[t].pixels);
    CHECK(back[t].frame_index == t + 1);
  }

  const auto path = scratch("clip.spdf");
  save_spdf(path.string(), v);
  CHECK(load_spdf(path.string())[2].pixels == v[2].pixels);

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_spdf(truncated), Error);
  std::stringstream wrong("SPDX" + bytes.substr(4));
  CHECK_THROWS_AS(read_spdf(wrong), Error);
  CHECK_THROWS_AS(load_spdf(scratch("missing.spdf").string()), Error);
}

TEST_CASE("extractor file") {
  const Generator gen = build_generator(GeneratorSpec{});
  const LinearExtractor ex = train_toy_extractor(gen, 20, 4, 1e-3, 1);
  const auto path = scratch("ex.bin");
  save_extractor(path.string(), ex);
  const LinearExtractor back = load_extractor(path.string());
  CHECK(back.weight.rows() == 28);
  CHECK(back.height == 8);
  CHECK(back.ridge == ex.ridge);
  CHECK((back.weight - ex.weight.cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.bias - ex.bias.cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("run config round trip and hash") {
  RunConfig c;
  c.trials = 17;
  c.embed = EmbedMode::toy;
  c.generator.alpha = 0.5;
  c.attacks = default_attack_suite(EmbedMode::toy);
  const RunConfig back = run_config_from_json(Json::parse(run_config_to_json(c).dump()));
  CHECK(back.trials == 17);
  CHECK(back.embed == EmbedMode::toy);
  CHECK(back.generator.alpha == 0.5);
  CHECK(back.attacks.size() == c.attacks.size());
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
  RunConfig other = c;
  other.seed += 1;
  CHECK(config_hash(other) != config_hash(c));

  CHECK_THROWS_AS(run_config_from_json(Json::parse(R"({"gamma_f": 2})")), Error);
  CHECK_THROWS_AS(run_config_from_json(Json::parse(R"({"embed": "diffusion"})")), Error);
  CHECK_THROWS_AS(run_config_from_json(Json::parse(R"({"generator": {"rank": 100}})")), Error);
  CHECK_THROWS_AS(run_config_from_json(Json::parse(R"({"generator": {"config": {"L": 14, "P": 4, "M": 30}}})")), Error);
}
