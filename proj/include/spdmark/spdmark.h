/* C interface to the spdmark library. Every function returns a status code;
 * on failure spdmark_last_error() holds a message for the calling thread.
 * Strings returned through char** are owned by the caller and released with
 * spdmark_free_string(). Frame indices in JSON are 1-based. */
#ifndef SPDMARK_SPDMARK_H
#define SPDMARK_SPDMARK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SPDMARK_BUILDING_LIBRARY)
#    define SPDMARK_API __declspec(dllexport)
#  else
#    define SPDMARK_API __declspec(dllimport)
#  endif
#else
#  define SPDMARK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spdmark_status {
  SPDMARK_OK = 0,
  SPDMARK_E_INVALID_ARGUMENT = 1,
  SPDMARK_E_DIMENSION = 2,
  SPDMARK_E_PARSE = 3,
  SPDMARK_E_IO = 4,
  SPDMARK_E_INTERNAL = 5
} spdmark_status;

typedef struct spdmark_schedule spdmark_schedule;
typedef struct spdmark_sequence spdmark_sequence;
typedef struct spdmark_generator spdmark_generator;
typedef struct spdmark_video spdmark_video;
typedef struct spdmark_extractor spdmark_extractor;
typedef struct spdmark_verdict spdmark_verdict;

SPDMARK_API const char* spdmark_version(void);
SPDMARK_API const char* spdmark_last_error(void);
SPDMARK_API const char* spdmark_status_name(spdmark_status status);
SPDMARK_API void spdmark_free_string(char* s);

/* Keys. config_json may be NULL for the default 14 x 4 layout. */
SPDMARK_API spdmark_status spdmark_keygen(const char* config_json, uint64_t seed, char** key_json);

/* Schedules. secret_hex must decode to at least 16 bytes. */
SPDMARK_API spdmark_status spdmark_schedule_derive(const char* key_json, const char* secret_hex,
                                                   size_t frames, spdmark_schedule** out);
SPDMARK_API spdmark_status spdmark_schedule_from_json(const char* json, spdmark_schedule** out);
SPDMARK_API spdmark_status spdmark_schedule_to_json(const spdmark_schedule* s, char** json);
SPDMARK_API size_t spdmark_schedule_length(const spdmark_schedule* s);
SPDMARK_API void spdmark_schedule_destroy(spdmark_schedule* s);

/* Extracted message sequences. */
SPDMARK_API spdmark_status spdmark_sequence_from_schedule(const spdmark_schedule* s,
                                                          spdmark_sequence** out);
SPDMARK_API spdmark_status spdmark_sequence_from_json(const char* json, spdmark_sequence** out);
SPDMARK_API spdmark_status spdmark_sequence_to_json(const spdmark_sequence* seq, char** json);
SPDMARK_API size_t spdmark_sequence_length(const spdmark_sequence* seq);
SPDMARK_API void spdmark_sequence_destroy(spdmark_sequence* seq);

/* channel_json: {"kind": "ideal"|"bitflip", "q": 0.02, "seed": 0}. */
SPDMARK_API spdmark_status spdmark_channel_extract(const spdmark_sequence* in, const char* channel_json,
                                                   spdmark_sequence** out);

/* attack_json: {"attack": "drop", "fraction": 0.5, "seed": 7}. record_json
 * may be NULL. Pixel attacks are rejected for sequences. */
SPDMARK_API spdmark_status spdmark_attack_sequence(const spdmark_sequence* in, const char* attack_json,
                                                   spdmark_sequence** out, char** record_json);

/* Toy generator. spec_json may be NULL for defaults. */
SPDMARK_API spdmark_status spdmark_generator_create(const char* spec_json, spdmark_generator** out);
SPDMARK_API void spdmark_generator_destroy(spdmark_generator* g);
SPDMARK_API spdmark_status spdmark_generate_video(const spdmark_generator* g, const spdmark_schedule* s,
                                                  uint64_t latent_seed, uint64_t condition_seed,
                                                  spdmark_video** out);

/* Videos in the SPDF container. */
SPDMARK_API spdmark_status spdmark_video_load(const char* path, spdmark_video** out);
SPDMARK_API spdmark_status spdmark_video_save(const spdmark_video* v, const char* path);
SPDMARK_API size_t spdmark_video_length(const spdmark_video* v);
SPDMARK_API void spdmark_video_destroy(spdmark_video* v);
SPDMARK_API spdmark_status spdmark_attack_video(const spdmark_video* in, const char* attack_json,
                                                spdmark_video** out, char** record_json);

/* Linear bit extractor. */
SPDMARK_API spdmark_status spdmark_extractor_fit(const spdmark_generator* g, size_t videos,
                                                 size_t frames, double ridge, uint64_t seed,
                                                 spdmark_extractor** out, double* train_bit_acc);
SPDMARK_API spdmark_status spdmark_extractor_load(const char* path, spdmark_extractor** out);
SPDMARK_API spdmark_status spdmark_extractor_save(const spdmark_extractor* e, const char* path);
SPDMARK_API void spdmark_extractor_destroy(spdmark_extractor* e);
SPDMARK_API spdmark_status spdmark_extract(const spdmark_extractor* e, const spdmark_video* v,
                                           spdmark_sequence** out);

/* Verification. */
SPDMARK_API spdmark_status spdmark_verify(const spdmark_schedule* expected, const spdmark_sequence* received,
                                          double gamma_f, double gamma_v, spdmark_verdict** out);
SPDMARK_API spdmark_status spdmark_verdict_is_valid(const spdmark_verdict* v, int* valid);
/* record_json (nullable) adds precision/recall against a ground-truth tamper
 * record; list_all_inversions adds every inverted pair. */
SPDMARK_API spdmark_status spdmark_verdict_to_json(const spdmark_verdict* v, const char* record_json,
                                                   int list_all_inversions, char** json);
SPDMARK_API void spdmark_verdict_destroy(spdmark_verdict* v);

/* Null-hypothesis Monte Carlo of the verifier. */
SPDMARK_API spdmark_status spdmark_calibrate(uint64_t message_bits, double gamma_f, double gamma_v,
                                             size_t frames, size_t trials, uint64_t seed,
                                             size_t threads, char** report_json);

/* Full experiment. out_dir may be NULL to skip artifacts. */
SPDMARK_API spdmark_status spdmark_config_normalize(const char* config_json, char** json);
SPDMARK_API spdmark_status spdmark_config_hash(const char* config_json, char** hash);
SPDMARK_API spdmark_status spdmark_run_pipeline(const char* config_json, const char* out_dir,
                                                char** report_json);

#ifdef __cplusplus
}
#endif

#endif
