#include "btabl/btabl.h"

#include <cstring>
#include <filesystem>
#include <memory>
#include <string>

#include <spdlog/spdlog.h>

#include "btabl/app.hpp"
#include "btabl/error.hpp"
#include "btabl/synth.hpp"

struct btabl_model {
  btabl::app::Checkpoint ckpt;
  std::unique_ptr<btabl::model::Network> net;
  std::unique_ptr<btabl::bayes::Predictor> predictor;
};

namespace {

thread_local std::string last_error;

btabl_status status_of(btabl::ErrorKind kind) {
  using btabl::ErrorKind;
  switch (kind) {
    case ErrorKind::config: return BTABL_CONFIG;
    case ErrorKind::parse:
    case ErrorKind::format:
    case ErrorKind::label:
    case ErrorKind::data:
    case ErrorKind::io: return BTABL_DATA;
    case ErrorKind::numerical: return BTABL_NUMERICAL;
    case ErrorKind::shape:
    case ErrorKind::index:
    case ErrorKind::contract: return BTABL_INVALID_ARGUMENT;
  }
  return BTABL_ERROR;
}

template <class F>
btabl_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return BTABL_OK;
  } catch (const btabl::Error& e) {
    last_error = std::string(btabl::to_string(e.kind())) + ": " + e.what();
    return status_of(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    last_error = std::string("io error: ") + e.what();
    return BTABL_DATA;
  } catch (const std::exception& e) {
    last_error = std::string("internal error: ") + e.what();
    return BTABL_ERROR;
  } catch (...) {
    last_error = "internal error: unknown exception";
    return BTABL_ERROR;
  }
}

void need(const void* p, const char* what) {
  if (!p) btabl::fail(btabl::ErrorKind::contract, std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* btabl_version(void) { return "1.0.0"; }

const char* btabl_last_error(void) { return last_error.c_str(); }

void btabl_set_log_level(int level) {
  if (level < 0) level = 0;
  if (level > 6) level = 6;
  spdlog::set_level(static_cast<spdlog::level::level_enum>(level));
}

void btabl_train_options_init(btabl_train_options* o) {
  if (o) *o = btabl_train_options{nullptr, nullptr, nullptr, 0, 0};
}

void btabl_evaluate_options_init(btabl_evaluate_options* o) {
  if (o) *o = btabl_evaluate_options{nullptr, nullptr, nullptr, nullptr, 0, 0, 0, 0};
}

void btabl_predict_options_init(btabl_predict_options* o) {
  if (o) *o = btabl_predict_options{nullptr, nullptr, nullptr, nullptr, 0, 0, 0};
}

void btabl_synth_options_init(btabl_synth_options* o) {
  if (!o) return;
  const btabl::lob::SynthOptions d;
  *o = btabl_synth_options{nullptr, d.stocks, d.days, d.events_per_day, d.window_length,
                           d.p_up,  d.p_down, d.seed, 0};
}

btabl_status btabl_train(const btabl_train_options* o) {
  return guarded([&] {
    need(o, "options");
    need(o->config_path, "config_path");
    need(o->out_dir, "out_dir");
    auto config = btabl::app::RunConfig::load(o->config_path);
    if (o->has_seed) config.seed = o->seed;
    std::optional<std::filesystem::path> resume;
    if (o->resume) resume = o->resume;
    btabl::app::train(config, o->out_dir, resume);
  });
}

btabl_status btabl_evaluate(const btabl_evaluate_options* o) {
  return guarded([&] {
    need(o, "options");
    need(o->checkpoint, "checkpoint");
    need(o->data_dir, "data_dir");
    need(o->out_dir, "out_dir");
    btabl::app::EvaluateOptions e;
    e.checkpoint = o->checkpoint;
    e.data_dir = o->data_dir;
    e.out_dir = o->out_dir;
    e.per_stock = o->per_stock != 0;
    if (o->split) e.split = o->split;
    if (o->draws) e.draws = o->draws;
    if (o->has_seed) e.seed = o->seed;
    btabl::app::evaluate(e);
  });
}

btabl_status btabl_predict(const btabl_predict_options* o, size_t* rows_written) {
  return guarded([&] {
    need(o, "options");
    need(o->checkpoint, "checkpoint");
    need(o->data_dir, "data_dir");
    need(o->out_file, "out_file");
    btabl::app::PredictOptions p;
    p.checkpoint = o->checkpoint;
    p.data_dir = o->data_dir;
    p.out_file = o->out_file;
    if (o->split) p.split = o->split;
    if (o->draws) p.draws = o->draws;
    if (o->has_seed) p.seed = o->seed;
    const auto rows = btabl::app::predict(p);
    if (rows_written) *rows_written = rows;
  });
}

btabl_status btabl_synth(const btabl_synth_options* o) {
  return guarded([&] {
    need(o, "options");
    need(o->out_dir, "out_dir");
    btabl::lob::SynthOptions s;
    s.stocks = o->stocks;
    s.days = o->days;
    s.events_per_day = o->events_per_day;
    s.window_length = o->window_length;
    s.p_up = o->p_up;
    s.p_down = o->p_down;
    s.seed = o->seed;
    btabl::lob::write_synth_dataset(o->out_dir, s,
                                    o->events_as_columns ? btabl::lob::Orientation::events_as_columns
                                                         : btabl::lob::Orientation::events_as_rows);
  });
}

btabl_status btabl_model_load(const char* path, btabl_model** out) {
  return guarded([&] {
    need(path, "checkpoint_path");
    need(out, "out");
    *out = nullptr;
    auto m = std::make_unique<btabl_model>();
    m->ckpt = btabl::app::Checkpoint::load(path);
    m->net = std::make_unique<btabl::model::Network>(m->ckpt.config.architecture());
    m->predictor = btabl::app::make_predictor(*m->net, m->ckpt);
    *out = m.release();
  });
}

void btabl_model_free(btabl_model* model) { delete model; }

btabl_status btabl_model_info_get(const btabl_model* m, btabl_model_info* info) {
  return guarded([&] {
    need(m, "model");
    need(info, "info");
    const auto arch = m->ckpt.config.architecture();
    *info = btabl_model_info{};
    info->features = arch.d;
    info->window = arch.t;
    info->classes = arch.classes();
    info->param_count = arch.param_count();
    info->epoch = m->ckpt.epoch;
    info->bayesian = btabl::optim::is_bayesian(m->ckpt.kind) ? 1 : 0;
    std::strncpy(info->optimizer, btabl::optim::to_string(m->ckpt.kind), sizeof info->optimizer - 1);
  });
}

btabl_status btabl_model_save(const btabl_model* m, const char* path) {
  return guarded([&] {
    need(m, "model");
    need(path, "path");
    m->ckpt.save(path);
  });
}

btabl_status btabl_model_predict(const btabl_model* m, const double* x, size_t rows, size_t cols, size_t draws,
                                 uint64_t seed, uint64_t input_id, double* probs_out) {
  return guarded([&] {
    need(m, "model");
    need(x, "x");
    need(probs_out, "probs_out");
    const auto arch = m->ckpt.config.architecture();
    if (rows != arch.d || cols != arch.t)
      btabl::fail(btabl::ErrorKind::shape, "input is " + std::to_string(rows) + "x" + std::to_string(cols) +
                                               ", model expects " + std::to_string(arch.d) + "x" +
                                               std::to_string(arch.t));
    btabl::Matrix window(rows, cols);
    std::copy(x, x + rows * cols, window.data().begin());
    const auto n = btabl::app::effective_draws(m->ckpt.kind, draws == 0 ? 1 : draws);
    const auto set = btabl::bayes::predictive_set(*m->predictor, window, n, seed, input_id);
    const auto summary = btabl::bayes::summarize(set);
    std::copy(summary.mean_probs.begin(), summary.mean_probs.end(), probs_out);
  });
}

btabl_status btabl_auroc(const double* scores, const int* positives, size_t n, double* auroc_out) {
  return guarded([&] {
    need(scores, "scores");
    need(positives, "positives");
    need(auroc_out, "auroc_out");
    const auto thresholds = btabl::metrics::default_thresholds();
    const auto curve = btabl::metrics::roc_curve({scores, n}, {positives, n}, thresholds);
    if (!curve.defined)
      btabl::fail(btabl::ErrorKind::contract, "AUROC needs at least one positive and one negative");
    *auroc_out = curve.auroc;
  });
}

btabl_status btabl_calibration(const double* scores, const int* positives, size_t n, size_t bins,
                               double* ece_out, double* ecd_out) {
  return guarded([&] {
    need(scores, "scores");
    need(positives, "positives");
    need(ece_out, "ece_out");
    need(ecd_out, "ecd_out");
    const auto curve = btabl::metrics::calibration({scores, n}, {positives, n}, bins);
    *ece_out = curve.ece;
    *ecd_out = curve.ecd;
  });
}

}  // extern "C"
