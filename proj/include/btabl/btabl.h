/* B-TABL C interface. All functions return a btabl_status; on failure the
 * message for the calling thread is available from btabl_last_error(). */
#ifndef BTABL_BTABL_H
#define BTABL_BTABL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define BTABL_API __declspec(dllexport)
#else
#define BTABL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum btabl_status {
  BTABL_OK = 0,
  BTABL_ERROR = 1,            /* unexpected internal failure */
  BTABL_CONFIG = 2,           /* invalid configuration or checkpoint */
  BTABL_DATA = 3,             /* unreadable, malformed or insufficient data */
  BTABL_NUMERICAL = 4,        /* non-finite values during training */
  BTABL_INVALID_ARGUMENT = 5  /* bad arguments to this interface */
} btabl_status;

BTABL_API const char* btabl_version(void);
BTABL_API const char* btabl_last_error(void);

/* 0 trace, 1 debug, 2 info, 3 warn, 4 error, 5 critical, 6 off */
BTABL_API void btabl_set_log_level(int level);

typedef struct btabl_train_options {
  const char* config_path; /* required */
  const char* out_dir;     /* required */
  const char* resume;      /* checkpoint to resume from, or NULL */
  int has_seed;            /* nonzero: seed overrides the config seed */
  uint64_t seed;
} btabl_train_options;

typedef struct btabl_evaluate_options {
  const char* checkpoint; /* required */
  const char* data_dir;   /* required */
  const char* out_dir;    /* required */
  const char* split;      /* "test" (default when NULL), "validation", "train" or "all" */
  int per_stock;
  size_t draws;           /* 0: the checkpoint's ns_test */
  int has_seed;
  uint64_t seed;
} btabl_evaluate_options;

typedef struct btabl_predict_options {
  const char* checkpoint; /* required */
  const char* data_dir;   /* required */
  const char* out_file;   /* required */
  const char* split;      /* "all" when NULL */
  size_t draws;           /* 0: the checkpoint's ns_test */
  int has_seed;
  uint64_t seed;
} btabl_predict_options;

typedef struct btabl_synth_options {
  const char* out_dir; /* required */
  int stocks;
  int days;
  size_t events_per_day;
  size_t window_length;
  double p_up;
  double p_down;
  uint64_t seed;
  int events_as_columns;
} btabl_synth_options;

BTABL_API void btabl_train_options_init(btabl_train_options* options);
BTABL_API void btabl_evaluate_options_init(btabl_evaluate_options* options);
BTABL_API void btabl_predict_options_init(btabl_predict_options* options);
BTABL_API void btabl_synth_options_init(btabl_synth_options* options);

BTABL_API btabl_status btabl_train(const btabl_train_options* options);
BTABL_API btabl_status btabl_evaluate(const btabl_evaluate_options* options);
/* rows_written may be NULL */
BTABL_API btabl_status btabl_predict(const btabl_predict_options* options, size_t* rows_written);
BTABL_API btabl_status btabl_synth(const btabl_synth_options* options);

/* Trained model loaded from a checkpoint. */
typedef struct btabl_model btabl_model;

typedef struct btabl_model_info {
  size_t features;     /* rows D of an input window */
  size_t window;       /* columns T of an input window */
  size_t classes;
  size_t param_count;
  size_t epoch;
  int bayesian;        /* predictions are averaged over draws */
  char optimizer[8];
} btabl_model_info;

BTABL_API btabl_status btabl_model_load(const char* checkpoint_path, btabl_model** out);
BTABL_API void btabl_model_free(btabl_model* model);
BTABL_API btabl_status btabl_model_info_get(const btabl_model* model, btabl_model_info* info);
BTABL_API btabl_status btabl_model_save(const btabl_model* model, const char* path);

/* x: row-major features x window matrix, already selected and normalized the
 * way the model was trained. Writes `classes` mean predictive probabilities. */
BTABL_API btabl_status btabl_model_predict(const btabl_model* model, const double* x, size_t rows, size_t cols,
                                           size_t draws, uint64_t seed, uint64_t input_id, double* probs_out);

/* Trapezoidal AUROC over thresholds 0.05, 0.10, ..., 1.00. `positives` holds 0/1. */
BTABL_API btabl_status btabl_auroc(const double* scores, const int* positives, size_t n, double* auroc_out);

/* Signed ECE and ECD over `bins` equal-width bins. */
BTABL_API btabl_status btabl_calibration(const double* scores, const int* positives, size_t n, size_t bins,
                                         double* ece_out, double* ecd_out);

#ifdef __cplusplus
}
#endif

#endif
