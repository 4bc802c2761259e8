// spdmark command-line front end. Talks to the library only through the C API.
#include <spdmark/spdmark.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

namespace {

using Json = nlohmann::ordered_json;

enum ExitCode { kOk = 0, kInvalidConfig = 2, kNotValid = 3, kInternal = 4 };

struct Failure : std::runtime_error {
  int exit_code;
  Failure(int code, const std::string& msg) : std::runtime_error(msg), exit_code(code) {}
};

int exit_for(spdmark_status s) {
  switch (s) {
    case SPDMARK_E_INVALID_ARGUMENT:
    case SPDMARK_E_DIMENSION:
    case SPDMARK_E_PARSE:
      return kInvalidConfig;
    default:
      return kInternal;
  }
}

void check(spdmark_status s, const char* what) {
  if (s != SPDMARK_OK)
    throw Failure(exit_for(s), std::string(what) + ": " + spdmark_last_error());
}

// Owns a malloc'd string handed out by the library.
struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { spdmark_free_string(p); }
  std::string str() const { return p ? p : ""; }
};

template <class T, void (*Destroy)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Destroy(p); }
};

using Schedule = Handle<spdmark_schedule, spdmark_schedule_destroy>;
using Sequence = Handle<spdmark_sequence, spdmark_sequence_destroy>;
using Generator = Handle<spdmark_generator, spdmark_generator_destroy>;
using Video = Handle<spdmark_video, spdmark_video_destroy>;
using Extractor = Handle<spdmark_extractor, spdmark_extractor_destroy>;
using Verdict = Handle<spdmark_verdict, spdmark_verdict_destroy>;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure(kInvalidConfig, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure(kInternal, "cannot write " + path);
  out << text << '\n';
}

Json parse_json(const std::string& text, const std::string& what) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Failure(kInvalidConfig, what + ": malformed JSON");
  return j;
}

std::string pretty(const std::string& compact) { return Json::parse(compact).dump(2); }

// Options shared by every subcommand. Flags win over the config file.
struct Common {
  std::string config_path;
  std::optional<double> gamma_f;
  std::optional<double> gamma_v;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string attack;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON run config (falls back to $SPDMARK_CONFIG)");
  cmd->add_option("--gamma-f", c.gamma_f, "frame-level false positive budget");
  cmd->add_option("--gamma-v", c.gamma_v, "video-level false positive budget");
  cmd->add_option("--seed", c.seed, "base seed");
  cmd->add_option("--trials", c.trials, "trials per attack or calibration trials");
  cmd->add_option("--attack", c.attack, "attack spec JSON, e.g. {\"attack\":\"drop\",\"fraction\":0.5}");
  cmd->add_option("--out", c.out, "output file or directory");
}

// Loads the config file, applies flag overrides and normalizes it through the
// library so every command sees the same defaults.
Json resolve_config(const Common& c) {
  std::string path = c.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("SPDMARK_CONFIG")) path = env;
  }
  Json j = path.empty() ? Json::object() : parse_json(read_text(path), path);
  if (!j.is_object()) throw Failure(kInvalidConfig, "config must be a JSON object");
  if (c.gamma_f) j["gamma_f"] = *c.gamma_f;
  if (c.gamma_v) j["gamma_v"] = *c.gamma_v;
  if (c.seed) j["seed"] = *c.seed;
  if (c.trials) j["trials"] = *c.trials;
  if (!c.attack.empty()) j["attacks"] = Json::array({parse_json(c.attack, "--attack")});
  OwnedString normalized;
  const spdmark_status s = spdmark_config_normalize(j.dump().c_str(), &normalized.p);
  if (s != SPDMARK_OK) throw Failure(kInvalidConfig, std::string("config: ") + spdmark_last_error());
  return Json::parse(normalized.str());
}

Json attack_from(const Common& c, const Json& cfg) {
  if (!c.attack.empty()) return parse_json(c.attack, "--attack");
  if (!cfg["attacks"].empty()) return cfg["attacks"][0];
  throw Failure(kInvalidConfig, "attack: pass --attack or list one in the config");
}

void load_schedule(const std::string& path, Schedule& s) {
  check(spdmark_schedule_from_json(read_text(path).c_str(), &s.p), "schedule");
}

void load_sequence(const std::string& path, Sequence& s) {
  check(spdmark_sequence_from_json(read_text(path).c_str(), &s.p), "sequence");
}

void make_generator(const Json& cfg, Generator& g) {
  check(spdmark_generator_create(cfg["generator"].dump().c_str(), &g.p), "generator");
}

std::string sibling(const std::string& path, const std::string& suffix) {
  return path.empty() || path == "-" ? std::string() : path + suffix;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spdmark: key-scheduled video watermark toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", spdmark_version());

  Common common;

  std::size_t bits = 28;
  auto* keygen = app.add_subcommand("keygen", "generate a random watermark key");
  keygen->add_option("--bits", bits, "key length; must equal L * log2(P)");
  add_common(keygen, common);

  std::string key_path;
  std::string secret_hex;
  std::size_t frames = 25;
  auto* schedule = app.add_subcommand("schedule", "derive per-frame messages from a key and secret");
  schedule->add_option("--key", key_path, "key JSON")->required();
  schedule->add_option("--secret", secret_hex, "base secret as hex (>= 16 bytes)")->required();
  schedule->add_option("--frames", frames, "number of frames T");
  add_common(schedule, common);

  std::string schedule_path;
  std::uint64_t condition_seed = 0;
  auto* embed = app.add_subcommand("embed", "render a watermarked toy video (SPDF)");
  embed->add_option("--schedule", schedule_path, "schedule JSON")->required();
  embed->add_option("--condition-seed", condition_seed, "seed for the conditioning vector");
  add_common(embed, common);

  std::string video_path;
  std::string sequence_path;
  std::string record_path;
  auto* attack = app.add_subcommand("attack", "apply a temporal or pixel attack");
  auto* attack_in = attack->add_option_group("input");
  attack_in->add_option("--video", video_path, "SPDF video");
  attack_in->add_option("--sequence", sequence_path, "extracted sequence JSON");
  attack_in->add_option("--schedule", schedule_path, "schedule JSON (attacked as a clean sequence)");
  attack_in->require_option(1);
  attack->add_option("--record", record_path, "tamper record output (default: <out>.tamper.json)");
  add_common(attack, common);

  std::string extractor_path;
  std::string channel_json;
  auto* extract = app.add_subcommand("extract", "recover per-frame messages");
  auto* extract_in = extract->add_option_group("input");
  extract_in->add_option("--video", video_path, "SPDF video (needs --extractor)");
  extract_in->add_option("--sequence", sequence_path, "sequence JSON sent through the channel");
  extract_in->add_option("--schedule", schedule_path, "schedule JSON sent through the channel");
  extract_in->require_option(1);
  extract->add_option("--extractor", extractor_path, "fitted extractor file");
  extract->add_option("--channel", channel_json, "channel JSON; defaults to the config channel");
  add_common(extract, common);

  std::size_t train_videos = 0;
  std::size_t train_frames = 0;
  auto* fit = app.add_subcommand("fit-extractor", "fit the linear bit extractor on toy videos");
  fit->add_option("--videos", train_videos, "training videos");
  fit->add_option("--frames", train_frames, "frames per training video");
  add_common(fit, common);

  std::string extracted_path;
  auto* verify = app.add_subcommand("verify", "verify an extracted sequence; exit 3 when invalid");
  verify->add_option("--schedule", schedule_path, "schedule JSON")->required();
  verify->add_option("--extracted", extracted_path, "extracted sequence JSON")->required();
  verify->add_option("--record", record_path, "ground-truth tamper record for scoring");
  add_common(verify, common);

  bool all_inversions = false;
  auto* diagnose = app.add_subcommand("diagnose", "localize dropped, inserted and reordered frames");
  diagnose->add_option("--schedule", schedule_path, "schedule JSON")->required();
  diagnose->add_option("--extracted", extracted_path, "extracted sequence JSON")->required();
  diagnose->add_option("--record", record_path, "ground-truth tamper record for scoring");
  diagnose->add_flag("--all-inversions", all_inversions, "list every inverted pair");
  add_common(diagnose, common);

  std::size_t cal_bits = 28;
  std::size_t cal_frames = 25;
  std::size_t threads = 0;
  auto* calibrate = app.add_subcommand("calibrate", "null-hypothesis calibration of the thresholds");
  calibrate->add_option("--bits", cal_bits, "message bits M");
  calibrate->add_option("--frames", cal_frames, "frames T");
  calibrate->add_option("--threads", threads, "worker threads (0 = all cores)");
  add_common(calibrate, common);

  auto* pipeline = app.add_subcommand("run-pipeline", "run the seeded attack experiment");
  add_common(pipeline, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalidConfig;
  }

  try {
    const Json cfg = resolve_config(common);
    const double gamma_f = cfg["gamma_f"].get<double>();
    const double gamma_v = cfg["gamma_v"].get<double>();
    const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();

    if (*keygen) {
      Json key_cfg = cfg["generator"]["config"];
      if (keygen->count("--bits") && key_cfg["M"].get<std::size_t>() != bits) {
        throw Failure(kInvalidConfig, "keygen: --bits " + std::to_string(bits) + " does not match L * log2(P) = " +
                                          key_cfg["M"].dump());
      }
      OwnedString key;
      check(spdmark_keygen(key_cfg.dump().c_str(), seed, &key.p), "keygen");
      write_text(common.out, pretty(key.str()));
      return kOk;
    }

    if (*schedule) {
      Schedule s;
      check(spdmark_schedule_derive(read_text(key_path).c_str(), secret_hex.c_str(), frames, &s.p), "schedule");
      OwnedString json;
      check(spdmark_schedule_to_json(s.p, &json.p), "schedule");
      write_text(common.out, pretty(json.str()));
      return kOk;
    }

    if (*embed) {
      if (common.out.empty()) throw Failure(kInvalidConfig, "embed: --out is required");
      Schedule s;
      load_schedule(schedule_path, s);
      Generator g;
      make_generator(cfg, g);
      Video v;
      const std::uint64_t cond = embed->count("--condition-seed") ? condition_seed : seed + 1;
      check(spdmark_generate_video(g.p, s.p, seed, cond, &v.p), "embed");
      check(spdmark_video_save(v.p, common.out.c_str()), "embed");
      return kOk;
    }

    if (*attack) {
      const std::string spec = attack_from(common, cfg).dump();
      OwnedString record;
      std::string record_out = record_path.empty() ? sibling(common.out, ".tamper.json") : record_path;
      if (!video_path.empty()) {
        if (common.out.empty()) throw Failure(kInvalidConfig, "attack: --out is required for videos");
        Video in;
        Video out;
        check(spdmark_video_load(video_path.c_str(), &in.p), "attack");
        check(spdmark_attack_video(in.p, spec.c_str(), &out.p, &record.p), "attack");
        check(spdmark_video_save(out.p, common.out.c_str()), "attack");
      } else {
        Sequence in;
        if (!sequence_path.empty()) {
          load_sequence(sequence_path, in);
        } else {
          Schedule s;
          load_schedule(schedule_path, s);
          check(spdmark_sequence_from_schedule(s.p, &in.p), "attack");
        }
        Sequence out;
        check(spdmark_attack_sequence(in.p, spec.c_str(), &out.p, &record.p), "attack");
        OwnedString json;
        check(spdmark_sequence_to_json(out.p, &json.p), "attack");
        write_text(common.out, pretty(json.str()));
      }
      if (record_out.empty()) {
        std::cerr << pretty(record.str()) << '\n';
      } else {
        write_text(record_out, pretty(record.str()));
      }
      return kOk;
    }

    if (*extract) {
      Sequence out;
      if (!video_path.empty()) {
        if (extractor_path.empty()) throw Failure(kInvalidConfig, "extract: --video needs --extractor");
        Extractor e;
        Video v;
        check(spdmark_extractor_load(extractor_path.c_str(), &e.p), "extract");
        check(spdmark_video_load(video_path.c_str(), &v.p), "extract");
        check(spdmark_extract(e.p, v.p, &out.p), "extract");
      } else {
        Sequence in;
        if (!sequence_path.empty()) {
          load_sequence(sequence_path, in);
        } else {
          Schedule s;
          load_schedule(schedule_path, s);
          check(spdmark_sequence_from_schedule(s.p, &in.p), "extract");
        }
        Json channel = channel_json.empty() ? cfg["channel"] : parse_json(channel_json, "--channel");
        if (channel_json.empty() && common.seed) channel["seed"] = *common.seed;
        check(spdmark_channel_extract(in.p, channel.dump().c_str(), &out.p), "extract");
      }
      OwnedString json;
      check(spdmark_sequence_to_json(out.p, &json.p), "extract");
      write_text(common.out, pretty(json.str()));
      return kOk;
    }

    if (*fit) {
      if (common.out.empty()) throw Failure(kInvalidConfig, "fit-extractor: --out is required");
      Generator g;
      make_generator(cfg, g);
      Extractor e;
      double acc = 0.0;
      const std::size_t videos = train_videos ? train_videos : cfg["train_videos"].get<std::size_t>();
      const std::size_t per_video = train_frames ? train_frames : cfg["train_frames"].get<std::size_t>();
      check(spdmark_extractor_fit(g.p, videos, per_video, cfg["ridge"].get<double>(), seed, &e.p, &acc),
            "fit-extractor");
      check(spdmark_extractor_save(e.p, common.out.c_str()), "fit-extractor");
      Json summary{{"extractor", common.out}, {"videos", videos}, {"frames", per_video}, {"train_bit_acc", acc}};
      std::cout << summary.dump(2) << '\n';
      return kOk;
    }

    if (*verify || *diagnose) {
      Schedule s;
      Sequence seq;
      load_schedule(schedule_path, s);
      load_sequence(extracted_path, seq);
      Verdict v;
      check(spdmark_verify(s.p, seq.p, gamma_f, gamma_v, &v.p), "verify");
      const std::string record = record_path.empty() ? std::string() : read_text(record_path);
      OwnedString json;
      check(spdmark_verdict_to_json(v.p, record.empty() ? nullptr : record.c_str(), all_inversions ? 1 : 0,
                                    &json.p),
            "verify");
      Json out = Json::parse(json.str());
      if (*diagnose) out = Json{{"valid", out["valid"]}, {"num_valid", out["num_valid"]}, {"tamper", out["tamper"]}};
      write_text(common.out, out.dump(2));
      if (*diagnose) return kOk;
      int valid = 0;
      check(spdmark_verdict_is_valid(v.p, &valid), "verify");
      return valid ? kOk : kNotValid;
    }

    if (*calibrate) {
      const std::size_t trials = common.trials ? *common.trials : 10000;
      OwnedString json;
      check(spdmark_calibrate(cal_bits, gamma_f, gamma_v, cal_frames, trials, seed, threads, &json.p),
            "calibrate");
      const Json report = Json::parse(json.str());
      for (const auto& w : report["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
      write_text(common.out, report.dump(2));
      return kOk;
    }

    if (*pipeline) {
      OwnedString json;
      const char* dir = common.out.empty() ? nullptr : common.out.c_str();
      check(spdmark_run_pipeline(cfg.dump().c_str(), dir, &json.p), "run-pipeline");
      if (!dir) std::cout << pretty(json.str()) << '\n';
      return kOk;
    }
  } catch (const Failure& f) {
    std::cerr << "spdmark: " << f.what() << '\n';
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "spdmark: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
