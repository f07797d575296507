#include <algorithm>
#include <cmath>
#include <limits>

#include "btabl/app.hpp"
#include "btabl/error.hpp"
#include "btabl/rng.hpp"

namespace btabl::app {

std::uint64_t input_id(const lob::LobWindow& w) {
  return derive_seed(0, {static_cast<std::uint64_t>(w.stock_id), static_cast<std::uint64_t>(w.day),
                         static_cast<std::uint64_t>(w.anchor_event_index)});
}

std::unique_ptr<bayes::Predictor> make_predictor(const model::Network& net, const Checkpoint& ckpt) {
  switch (ckpt.kind) {
    case optim::Kind::vogn:
      return std::make_unique<bayes::PosteriorPredictor>(net, ckpt.vogn);
    case optim::Kind::mcd:
      return std::make_unique<bayes::DropoutPredictor>(net, ckpt.params, ckpt.config.dropout);
    case optim::Kind::adam:
    case optim::Kind::sgd:
      return std::make_unique<bayes::PointPredictor>(net, ckpt.params);
  }
  fail(ErrorKind::contract, "unknown optimizer kind");
}

std::size_t effective_draws(optim::Kind kind, std::size_t requested) {
  require(requested >= 1, ErrorKind::config, "the number of predictive draws must be >= 1");
  return optim::is_bayesian(kind) ? requested : 1;
}

PredictiveRun run_predictive(const bayes::Predictor& predictor, std::span<const lob::LobWindow> windows,
                             std::size_t draws, std::uint64_t base_seed) {
  PredictiveRun run;
  run.labeled = !windows.empty();
  run.sets.reserve(windows.size());
  run.summaries.reserve(windows.size());
  for (const auto& w : windows) {
    if (!w.label) run.labeled = false;
    run.sets.push_back(bayes::predictive_set(predictor, w.x, draws, base_seed, input_id(w), w.label));
    run.summaries.push_back(bayes::summarize(run.sets.back()));
  }
  return run;
}

SplitScore score_run(const PredictiveRun& run) {
  require(run.labeled, ErrorKind::data, "scoring requires labeled windows");
  SplitScore score;
  score.count = run.summaries.size();
  const std::size_t classes = run.sets.front().probs.cols();
  std::vector<int> truth, pred;
  double nll = 0.0;
  for (const auto& s : run.summaries) {
    truth.push_back(*s.true_label);
    pred.push_back(s.predicted_class);
    const double p = s.mean_probs[static_cast<std::size_t>(*s.true_label)];
    nll -= std::log(std::max(p, std::numeric_limits<double>::min()));
  }
  score.loss = nll / static_cast<double>(score.count);
  const auto report = metrics::multiclass_metrics(metrics::confusion(truth, pred, classes));
  score.accuracy = report.accuracy;
  score.macro_f1 = report.macro_f1;
  return score;
}

std::vector<lob::LobWindow> load_split(const Checkpoint& ckpt, const std::filesystem::path& data_dir,
                                       const std::string& split) {
  auto windows = lob::load_windows(data_dir, ckpt.config.load_options());
  std::vector<lob::LobWindow> out;
  if (split == "all") {
    out = std::move(windows);
  } else {
    auto parts = lob::make_splits(windows, ckpt.config.split_options(), ckpt.config.label_mapping);
    if (split == "train") {
      out = std::move(parts.train);
    } else if (split == "validation") {
      out = std::move(parts.validation);
    } else if (split == "test") {
      out = std::move(parts.test);
    } else {
      fail(ErrorKind::config, "unknown split '" + split + "' (train, validation, test, all)");
    }
  }
  require(!out.empty(), ErrorKind::data, "the " + split + " split of " + data_dir.string() + " is empty");
  if (ckpt.zscore) lob::zscore_apply(out, *ckpt.zscore);
  return out;
}

}  // namespace btabl::app
