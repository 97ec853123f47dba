#ifndef IMTRIAGE_IMTRIAGE_H
#define IMTRIAGE_IMTRIAGE_H

#include <stddef.h>
#include <stdint.h>

#if defined(IMT_BUILDING_LIBRARY)
#define IMT_API __attribute__((visibility("default")))
#else
#define IMT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum imt_status {
    IMT_OK = 0,
    IMT_ERR_INVALID_INPUT = 1,
    IMT_ERR_PARSE = 2,
    IMT_ERR_NOT_FOUND = 3,
    IMT_ERR_PRECONDITION = 4,
    IMT_ERR_OPTIMIZER = 5,
    IMT_ERR_CANCELLED = 6,
    IMT_ERR_IO = 7,
    IMT_ERR_CONFLICT = 8,
    IMT_ERR_INTERNAL = 99
} imt_status;

typedef struct imt_model imt_model;
typedef struct imt_session imt_session;
typedef struct imt_server imt_server;

/* Message for the most recent failure on the calling thread; never NULL. */
IMT_API const char* imt_last_error(void);
IMT_API const char* imt_version(void);

/* Strings returned through char** out-parameters are owned by the caller. */
IMT_API void imt_string_free(char* s);

/* Relation models. extractor is "gray16" or "rgbhist32+gray16"; NULL means gray16. */
IMT_API imt_status imt_model_create(const char* extractor, size_t hidden, uint64_t seed, imt_model** out);
/* For sessions built from precomputed feature files of width feature_dim. */
IMT_API imt_status imt_model_create_dim(size_t feature_dim, size_t hidden, uint64_t seed, imt_model** out);
IMT_API imt_status imt_model_load(const char* path, imt_model** out);
IMT_API imt_status imt_model_save(const imt_model* model, const char* path);
IMT_API size_t imt_model_feature_dim(const imt_model* model);
IMT_API double imt_model_score(const imt_model* model, const double* a, const double* b, size_t dim);
IMT_API void imt_model_free(imt_model* model);

typedef struct imt_train_options {
    int steps;
    int batch_size;
    double learning_rate;
    uint64_t seed;
    size_t hidden;
    const char* extractor; /* NULL: gray16 */
} imt_train_options;

IMT_API void imt_train_options_default(imt_train_options* opts);

/* Trains on an image folder with one subdirectory per class. final_loss may be NULL. */
IMT_API imt_status imt_train_dataset(const char* dataset_dir, const imt_train_options* opts, imt_model** out,
                                     double* final_loss);

/* N-way K-shot episodic accuracy of `model` on an image folder. */
IMT_API imt_status imt_benchmark(const imt_model* model, const char* dataset_dir, int ways, int shots, int episodes,
                                 uint64_t seed, double* accuracy);

/* Embeds a feature file into canvas coordinates. config_json may be NULL.
   *out_csv receives "<id>,<x>,<y>" lines. */
IMT_API imt_status imt_embed_features_file(const char* features_path, const char* config_json, char** out_csv);

/* Headless sessions over a precomputed feature file. */
IMT_API imt_status imt_session_create_from_features(const char* features_path, const char* config_json,
                                                    imt_session** out);
/* Applies one event given as JSON ({"type": "move", ...}); writes the state JSON. */
IMT_API imt_status imt_session_apply_event(imt_session* session, const char* event_json, char** out_state_json);
IMT_API imt_status imt_session_auto_group(imt_session* session, const imt_model* model, char** out_json);
IMT_API imt_status imt_session_auto_position(imt_session* session, char** out_json);
IMT_API imt_status imt_session_state(const imt_session* session, char** out_json);
IMT_API void imt_session_free(imt_session* session);

/* HTTP service. options_json keys: host, port, data_dir, model, threshold, seed, extractor, hidden. */
IMT_API imt_status imt_server_create(const char* options_json, imt_server** out);
/* Binds the socket; writes the bound port (useful when port is 0). */
IMT_API imt_status imt_server_bind(imt_server* server, int* port);
/* Blocks until imt_server_stop is called from another thread. */
IMT_API imt_status imt_server_run(imt_server* server);
IMT_API void imt_server_stop(imt_server* server);
IMT_API void imt_server_free(imt_server* server);

#ifdef __cplusplus
}
#endif

#endif
