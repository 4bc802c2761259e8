#include "spdmark/spdmark.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "spdmark/error.hpp"
#include "spdmark/pipeline.hpp"
#include "spdmark/serialization.hpp"

struct spdmark_schedule {
  spdmark::ScheduleFile value;
};
struct spdmark_sequence {
  spdmark::ExtractedSequence value;
};
struct spdmark_generator {
  spdmark::Generator value;
};
struct spdmark_video {
  spdmark::Video value;
};
struct spdmark_extractor {
  spdmark::LinearExtractor value;
};
struct spdmark_verdict {
  spdmark::Verdict value;
};

namespace {

thread_local std::string last_error;

spdmark_status to_status(spdmark::Errc code) {
  switch (code) {
    case spdmark::Errc::invalid_argument: return SPDMARK_E_INVALID_ARGUMENT;
    case spdmark::Errc::dimension_mismatch: return SPDMARK_E_DIMENSION;
    case spdmark::Errc::parse: return SPDMARK_E_PARSE;
    case spdmark::Errc::io: return SPDMARK_E_IO;
    case spdmark::Errc::internal: return SPDMARK_E_INTERNAL;
  }
  return SPDMARK_E_INTERNAL;
}

template <class Fn>
spdmark_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return SPDMARK_OK;
  } catch (const spdmark::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    last_error = e.what();
    return SPDMARK_E_PARSE;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return SPDMARK_E_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return SPDMARK_E_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return SPDMARK_E_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  spdmark::require(p != nullptr, spdmark::Errc::invalid_argument, std::string(what) + " is null");
}

spdmark::Json parse(const char* text, const char* what) {
  need(text, what);
  spdmark::Json j = spdmark::Json::parse(text, nullptr, false);
  if (j.is_discarded()) spdmark::fail(spdmark::Errc::parse, std::string(what) + ": malformed JSON");
  return j;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const spdmark::Json& j) {
  need(out, "output pointer");
  *out = dup_string(j.dump());
}

}  // namespace

extern "C" {

const char* spdmark_version(void) { return "0.1.0"; }

const char* spdmark_last_error(void) { return last_error.c_str(); }

const char* spdmark_status_name(spdmark_status status) {
  switch (status) {
    case SPDMARK_OK: return "ok";
    case SPDMARK_E_INVALID_ARGUMENT: return "invalid argument";
    case SPDMARK_E_DIMENSION: return "dimension mismatch";
    case SPDMARK_E_PARSE: return "parse error";
    case SPDMARK_E_IO: return "i/o error";
    case SPDMARK_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void spdmark_free_string(char* s) { std::free(s); }

spdmark_status spdmark_keygen(const char* config_json, uint64_t seed, char** key_json) {
  return guarded([&] {
    spdmark::KeyConfig cfg;
    if (config_json) cfg = spdmark::key_config_from_json(parse(config_json, "config"));
    cfg.validate();
    emit(key_json, spdmark::key_to_json(cfg, spdmark::random_key(cfg, seed)));
  });
}

spdmark_status spdmark_schedule_derive(const char* key_json, const char* secret_hex, size_t frames,
                                       spdmark_schedule** out) {
  return guarded([&] {
    need(out, "output pointer");
    need(secret_hex, "secret");
    spdmark::KeyConfig cfg;
    const spdmark::WatermarkKey key = spdmark::key_from_json(parse(key_json, "key"), &cfg);
    const spdmark::BaseSecret secret{spdmark::bytes_from_hex(secret_hex)};
    *out = new spdmark_schedule{{cfg, key, spdmark::derive_frame_messages(secret, key, frames)}};
  });
}

spdmark_status spdmark_schedule_from_json(const char* json, spdmark_schedule** out) {
  return guarded([&] {
    need(out, "output pointer");
    *out = new spdmark_schedule{spdmark::schedule_from_json(parse(json, "schedule"))};
  });
}

spdmark_status spdmark_schedule_to_json(const spdmark_schedule* s, char** json) {
  return guarded([&] {
    need(s, "schedule");
    emit(json, spdmark::schedule_to_json(s->value));
  });
}

size_t spdmark_schedule_length(const spdmark_schedule* s) { return s ? s->value.frames.size() : 0; }

void spdmark_schedule_destroy(spdmark_schedule* s) { delete s; }

spdmark_status spdmark_sequence_from_schedule(const spdmark_schedule* s, spdmark_sequence** out) {
  return guarded([&] {
    need(s, "schedule");
    need(out, "output pointer");
    *out = new spdmark_sequence{spdmark::as_sequence(s->value.frames)};
  });
}

spdmark_status spdmark_sequence_from_json(const char* json, spdmark_sequence** out) {
  return guarded([&] {
    need(out, "output pointer");
    *out = new spdmark_sequence{spdmark::sequence_from_json(parse(json, "sequence"))};
  });
}

spdmark_status spdmark_sequence_to_json(const spdmark_sequence* seq, char** json) {
  return guarded([&] {
    need(seq, "sequence");
    emit(json, spdmark::sequence_to_json(seq->value));
  });
}

size_t spdmark_sequence_length(const spdmark_sequence* seq) { return seq ? seq->value.size() : 0; }

void spdmark_sequence_destroy(spdmark_sequence* seq) { delete seq; }

spdmark_status spdmark_channel_extract(const spdmark_sequence* in, const char* channel_json,
                                       spdmark_sequence** out) {
  return guarded([&] {
    need(in, "sequence");
    need(out, "output pointer");
    const auto spec = spdmark::channel_spec_from_json(parse(channel_json, "channel"));
    *out = new spdmark_sequence{spdmark::channel_extract(in->value, spec)};
  });
}

spdmark_status spdmark_attack_sequence(const spdmark_sequence* in, const char* attack_json,
                                       spdmark_sequence** out, char** record_json) {
  return guarded([&] {
    need(in, "sequence");
    need(out, "output pointer");
    const auto spec = spdmark::attack_spec_from_json(parse(attack_json, "attack"));
    auto attacked = spdmark::attack_sequence(in->value, spec);
    if (record_json) emit(record_json, spdmark::tamper_record_to_json(attacked.record));
    *out = new spdmark_sequence{std::move(attacked.sequence)};
  });
}

spdmark_status spdmark_generator_create(const char* spec_json, spdmark_generator** out) {
  return guarded([&] {
    need(out, "output pointer");
    spdmark::GeneratorSpec spec;
    if (spec_json) spec = spdmark::generator_spec_from_json(parse(spec_json, "generator"));
    *out = new spdmark_generator{spdmark::build_generator(spec)};
  });
}

void spdmark_generator_destroy(spdmark_generator* g) { delete g; }

spdmark_status spdmark_generate_video(const spdmark_generator* g, const spdmark_schedule* s,
                                      uint64_t latent_seed, uint64_t condition_seed,
                                      spdmark_video** out) {
  return guarded([&] {
    need(g, "generator");
    need(s, "schedule");
    need(out, "output pointer");
    const auto& gen = g->value;
    const auto cond =
        spdmark::random_condition(gen.spec.decoder.dim, gen.spec.condition_scale, condition_seed);
    *out = new spdmark_video{
        spdmark::generate_video(gen.decoder, gen.dictionary, s->value.frames, latent_seed, cond)};
  });
}

spdmark_status spdmark_video_load(const char* path, spdmark_video** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "output pointer");
    *out = new spdmark_video{spdmark::load_spdf(path)};
  });
}

spdmark_status spdmark_video_save(const spdmark_video* v, const char* path) {
  return guarded([&] {
    need(v, "video");
    need(path, "path");
    spdmark::save_spdf(path, v->value);
  });
}

size_t spdmark_video_length(const spdmark_video* v) { return v ? v->value.size() : 0; }

void spdmark_video_destroy(spdmark_video* v) { delete v; }

spdmark_status spdmark_attack_video(const spdmark_video* in, const char* attack_json,
                                    spdmark_video** out, char** record_json) {
  return guarded([&] {
    need(in, "video");
    need(out, "output pointer");
    const auto spec = spdmark::attack_spec_from_json(parse(attack_json, "attack"));
    auto attacked = spdmark::attack_video(in->value, spec);
    if (record_json) emit(record_json, spdmark::tamper_record_to_json(attacked.record));
    *out = new spdmark_video{std::move(attacked.video)};
  });
}

spdmark_status spdmark_extractor_fit(const spdmark_generator* g, size_t videos, size_t frames,
                                     double ridge, uint64_t seed, spdmark_extractor** out,
                                     double* train_bit_acc) {
  return guarded([&] {
    need(g, "generator");
    need(out, "output pointer");
    *out = new spdmark_extractor{
        spdmark::train_toy_extractor(g->value, videos, frames, ridge, seed, train_bit_acc)};
  });
}

spdmark_status spdmark_extractor_load(const char* path, spdmark_extractor** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "output pointer");
    *out = new spdmark_extractor{spdmark::load_extractor(path)};
  });
}

spdmark_status spdmark_extractor_save(const spdmark_extractor* e, const char* path) {
  return guarded([&] {
    need(e, "extractor");
    need(path, "path");
    spdmark::save_extractor(path, e->value);
  });
}

void spdmark_extractor_destroy(spdmark_extractor* e) { delete e; }

spdmark_status spdmark_extract(const spdmark_extractor* e, const spdmark_video* v,
                               spdmark_sequence** out) {
  return guarded([&] {
    need(e, "extractor");
    need(v, "video");
    need(out, "output pointer");
    *out = new spdmark_sequence{spdmark::extract_sequence(e->value, v->value)};
  });
}

spdmark_status spdmark_verify(const spdmark_schedule* expected, const spdmark_sequence* received,
                              double gamma_f, double gamma_v, spdmark_verdict** out) {
  return guarded([&] {
    need(expected, "schedule");
    need(received, "sequence");
    need(out, "output pointer");
    *out = new spdmark_verdict{spdmark::verify(expected->value.frames, received->value, gamma_f, gamma_v)};
  });
}

spdmark_status spdmark_verdict_is_valid(const spdmark_verdict* v, int* valid) {
  return guarded([&] {
    need(v, "verdict");
    need(valid, "output pointer");
    *valid = v->value.valid ? 1 : 0;
  });
}

spdmark_status spdmark_verdict_to_json(const spdmark_verdict* v, const char* record_json,
                                       int list_all_inversions, char** json) {
  return guarded([&] {
    need(v, "verdict");
    std::optional<spdmark::TamperRecord> record;
    if (record_json) record = spdmark::tamper_record_from_json(parse(record_json, "tamper record"));
    const auto diag = spdmark::diagnose_tampering(v->value, v->value.expected_length,
                                                  v->value.received_length,
                                                  record ? &*record : nullptr, list_all_inversions != 0);
    emit(json, spdmark::verdict_to_json(v->value, &diag));
  });
}

void spdmark_verdict_destroy(spdmark_verdict* v) { delete v; }

spdmark_status spdmark_calibrate(uint64_t message_bits, double gamma_f, double gamma_v, size_t frames,
                                 size_t trials, uint64_t seed, size_t threads, char** report_json) {
  return guarded([&] {
    need(report_json, "output pointer");
    const auto r = spdmark::calibrate(message_bits, gamma_f, gamma_v, frames, trials, seed, threads);
    emit(report_json, spdmark::calibration_to_json(r));
  });
}

spdmark_status spdmark_config_normalize(const char* config_json, char** json) {
  return guarded([&] {
    emit(json, spdmark::run_config_to_json(spdmark::run_config_from_json(parse(config_json, "config"))));
  });
}

spdmark_status spdmark_config_hash(const char* config_json, char** hash) {
  return guarded([&] {
    need(hash, "output pointer");
    const auto cfg = spdmark::run_config_from_json(parse(config_json, "config"));
    *hash = dup_string(spdmark::config_hash(cfg));
  });
}

spdmark_status spdmark_run_pipeline(const char* config_json, const char* out_dir, char** report_json) {
  return guarded([&] {
    const auto cfg = spdmark::run_config_from_json(parse(config_json, "config"));
    const auto report = spdmark::run_pipeline(cfg, out_dir ? out_dir : "");
    if (report_json) emit(report_json, spdmark::experiment_report_to_json(report));
  });
}

}  // extern "C"
