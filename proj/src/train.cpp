#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "btabl/app.hpp"
#include "btabl/error.hpp"
#include "btabl/rng.hpp"
#include "csv.hpp"

namespace btabl::app {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kCurveHeader = {"epoch", "split", "loss", "accuracy", "macro_f1", "lr"};

struct TrainData {
  std::vector<lob::LobWindow> train;
  std::vector<lob::LobWindow> validation;
  std::optional<lob::ZScoreStats> zscore;
};

TrainData prepare_data(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) fail(ErrorKind::config, "config must set data_dir");
  const auto windows = lob::load_windows(cfg.data_dir, cfg.load_options());
  auto parts = lob::make_splits(windows, cfg.split_options(), cfg.label_mapping);
  TrainData data{std::move(parts.train), std::move(parts.validation), std::nullopt};
  require(!data.train.empty(), ErrorKind::data, "the training split is empty");
  for (const auto* set : {&data.train, &data.validation})
    for (const auto& w : *set)
      require(w.label.has_value(), ErrorKind::data,
              "training data must be labeled (stock " + std::to_string(w.stock_id) + ", day " +
                  std::to_string(w.day) + ")");
  if (cfg.zscore) data.zscore = lob::zscore_fit_apply(data.train, data.validation);
  spdlog::info("train {} windows, validation {} windows", data.train.size(), data.validation.size());
  return data;
}

Checkpoint fresh_checkpoint(const RunConfig& cfg, const model::Network& net, const TrainData& data) {
  Checkpoint c;
  c.config = cfg;
  c.kind = cfg.optimizer;
  c.n_train = data.train.size();
  c.lr = cfg.lr;
  c.zscore = data.zscore;
  const std::size_t p = net.param_count();
  switch (c.kind) {
    case optim::Kind::vogn:
      c.vogn = optim::VariationalState::init(p, c.n_train, cfg.prior_precision, cfg.lr, cfg.vogn_momentum,
                                             cfg.h_decay);
      break;
    case optim::Kind::adam:
    case optim::Kind::mcd:
      c.params = net.init_params(derive_seed(cfg.seed, {stream::init}));
      c.adam = optim::AdamState::init(p, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
      break;
    case optim::Kind::sgd:
      c.params = net.init_params(derive_seed(cfg.seed, {stream::init}));
      c.sgd = optim::SgdState::init(p, cfg.lr, cfg.sgd_momentum);
      break;
  }
  return c;
}

[[noreturn]] void nan_abort(const fs::path& out, const Checkpoint& c, std::size_t epoch, std::size_t batch,
                            double loss, std::span<const lob::LobWindow* const> windows) {
  nlohmann::json dump;
  dump["epoch"] = epoch;
  dump["batch"] = batch;
  dump["step"] = c.step;
  dump["optimizer"] = optim::to_string(c.kind);
  dump["loss"] = std::isnan(loss) ? "nan" : (loss > 0 ? "inf" : "-inf");
  dump["windows"] = nlohmann::json::array();
  for (const auto* w : windows)
    dump["windows"].push_back({{"stock", w->stock_id}, {"day", w->day}, {"anchor", w->anchor_event_index}});
  const auto path = out / "nan_dump.json";
  std::ofstream(path) << dump.dump(1) << "\n";
  fail(ErrorKind::numerical, "non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch) + "; details in " + path.string());
}

/// Stacks the per-sample gradients of several minibatch evaluations.
Matrix stack_rows(const std::vector<Matrix>& parts) {
  std::size_t rows = 0;
  for (const auto& m : parts) rows += m.rows();
  Matrix out(rows, parts.front().cols());
  std::size_t r = 0;
  for (const auto& m : parts)
    for (std::size_t i = 0; i < m.rows(); ++i, ++r) std::ranges::copy(m.row(i), out.row(r).begin());
  return out;
}

double optimizer_step(Checkpoint& c, const model::Network& net, std::span<const lob::LobWindow* const> batch) {
  const auto& cfg = c.config;
  switch (c.kind) {
    case optim::Kind::vogn: {
      if (c.step < cfg.warmup_steps) {
        const auto theta = optim::vogn_sample(c.vogn, derive_seed(cfg.seed, {stream::posterior, c.step, 0}));
        const auto r = model::batch_forward_backward(net, batch, theta);
        optim::vogn_warmup_step(c.vogn, r.mean_grad);
        return r.mean_loss;
      }
      std::vector<Matrix> grads;
      double loss = 0.0;
      for (std::size_t k = 0; k < cfg.train_mc_samples; ++k) {
        const auto theta = optim::vogn_sample(c.vogn, derive_seed(cfg.seed, {stream::posterior, c.step, k}));
        auto r = model::batch_forward_backward(net, batch, theta);
        loss += r.mean_loss;
        grads.push_back(std::move(r.per_sample));
      }
      optim::vogn_step(c.vogn, grads.size() == 1 ? grads.front() : stack_rows(grads));
      return loss / static_cast<double>(cfg.train_mc_samples);
    }
    case optim::Kind::adam:
    case optim::Kind::mcd: {
      std::optional<model::DropoutSpec> dropout;
      if (c.kind == optim::Kind::mcd)
        dropout = model::DropoutSpec{cfg.dropout, derive_seed(cfg.seed, {stream::dropout, c.step})};
      const auto r = model::batch_forward_backward(net, batch, c.params, dropout);
      c.adam.lr = c.lr;
      optim::adam_step(c.adam, c.params, r.mean_grad);
      return r.mean_loss;
    }
    case optim::Kind::sgd: {
      const auto r = model::batch_forward_backward(net, batch, c.params);
      c.sgd.lr = c.lr;
      optim::sgd_step(c.sgd, c.params, r.mean_grad);
      return r.mean_loss;
    }
  }
  fail(ErrorKind::contract, "unknown optimizer kind");
}

void check_finite_state(const Checkpoint& c, const fs::path& out, std::size_t epoch) {
  const auto& v = c.center();
  if (std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) return;
  nan_abort(out, c, epoch, 0, std::numeric_limits<double>::quiet_NaN(), {});
}

}  // namespace

TrainResult train(const RunConfig& config, const fs::path& out, const std::optional<fs::path>& resume) {
  config.validate();
  const auto data = prepare_data(config);
  const model::Network net(config.architecture());
  fs::create_directories(out);

  Checkpoint c;
  if (resume) {
    c = Checkpoint::load(*resume);
    if (c.config.hash() != config.hash())
      fail(ErrorKind::config, "refusing to resume: checkpoint config hash " + c.config.hash() +
                                  " differs from config hash " + config.hash());
    require(c.n_train == data.train.size(), ErrorKind::data,
            "refusing to resume: checkpoint was trained on " + std::to_string(c.n_train) +
                " windows, the data now yields " + std::to_string(data.train.size()));
    c.config = config;
    spdlog::info("resuming {} from epoch {}", optim::to_string(c.kind), c.epoch);
  } else {
    c = fresh_checkpoint(config, net, data);
    c.save(out / "checkpoint_epoch_0.json");
  }

  TrainResult result;
  result.last = c;
  if (c.epoch >= config.epochs) return result;

  CsvFile curve(out / "learning_curve.csv", kCurveHeader, resume.has_value());
  optim::PlateauSchedule schedule({config.lr_factor, config.lr_patience, config.lr_min_delta});
  schedule.restore(c.plateau_best, c.plateau_stale, c.plateau_reductions);

  const std::size_t n = data.train.size();
  std::vector<std::size_t> order(n);
  std::vector<const lob::LobWindow*> batch;
  for (std::size_t epoch = c.epoch + 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, {stream::shuffle, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++batches) {
      const std::size_t end = std::min(n, start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&data.train[order[i]]);
      const double loss = optimizer_step(c, net, batch);
      if (!std::isfinite(loss)) nan_abort(out, c, epoch, batches, loss, batch);
      loss_sum += loss;
      ++c.step;
    }
    c.epoch = epoch;
    check_finite_state(c, out, epoch);

    const auto predictor = make_predictor(net, c);
    const std::size_t draws = effective_draws(c.kind, config.ns_validation);
    const auto train_score = score_run(run_predictive(*predictor, data.train, draws, config.seed));
    std::optional<SplitScore> val_score;
    if (!data.validation.empty())
      val_score = score_run(run_predictive(*predictor, data.validation, draws, config.seed));

    curve.write(CsvRow() << epoch << "train" << train_score.loss << train_score.accuracy << train_score.macro_f1
                         << c.lr);
    if (val_score)
      curve.write(CsvRow() << epoch << "validation" << val_score->loss << val_score->accuracy
                           << val_score->macro_f1 << c.lr);
    curve.flush();

    const SplitScore& monitor = val_score ? *val_score : train_score;
    spdlog::info("epoch {} minibatch loss {:.6f} train acc {:.4f} {} loss {:.6f} acc {:.4f} macro-f1 {:.4f}", epoch,
                 loss_sum / static_cast<double>(batches), train_score.accuracy,
                 val_score ? "validation" : "train", monitor.loss, monitor.accuracy, monitor.macro_f1);

    if (c.kind != optim::Kind::vogn) {
      const double next = schedule.observe(monitor.loss, c.lr);
      if (next != c.lr) spdlog::info("learning rate {} -> {}", c.lr, next);
      c.lr = next;
      c.plateau_best = schedule.best();
      c.plateau_stale = schedule.stale_epochs();
      c.plateau_reductions = schedule.reductions();
    }

    if (monitor.macro_f1 > c.best_val_f1) {
      c.best_val_f1 = monitor.macro_f1;
      c.best_epoch = epoch;
      c.save(out / "checkpoint_best.json");
    }
    if (epoch % config.checkpoint_every == 0) c.save(out / ("checkpoint_epoch_" + std::to_string(epoch) + ".json"));
    c.save(out / "checkpoint_last.json");

    result.final_train = train_score;
    result.final_validation = val_score;
    ++result.epochs_run;
  }
  result.last = c;
  return result;
}

}  // namespace btabl::app
