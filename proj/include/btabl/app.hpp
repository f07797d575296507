#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "btabl/bayes.hpp"
#include "btabl/checkpoint.hpp"
#include "btabl/config.hpp"
#include "btabl/lobdata.hpp"
#include "btabl/metrics.hpp"
#include "btabl/model.hpp"

namespace btabl::app {

/// Stable per-window identifier used to derive predictive draw seeds.
std::uint64_t input_id(const lob::LobWindow& w);

/// Predictor matching the checkpoint's optimizer: posterior draws for VOGN,
/// dropout masks for MCD, a single deterministic pass for ADAM and SGD.
/// The network and checkpoint must outlive the predictor.
std::unique_ptr<bayes::Predictor> make_predictor(const model::Network& net, const Checkpoint& ckpt);

/// Point-estimate predictors ignore the requested count and use one draw.
std::size_t effective_draws(optim::Kind kind, std::size_t requested);

struct PredictiveRun {
  std::vector<bayes::PredictiveSet> sets;
  std::vector<bayes::PredictiveSummary> summaries;
  bool labeled = false;  // every window carries a true label
};

PredictiveRun run_predictive(const bayes::Predictor& predictor, std::span<const lob::LobWindow> windows,
                             std::size_t draws, std::uint64_t base_seed);

/// Loss is the mean negative log predictive probability of the true class.
struct SplitScore {
  std::size_t count = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

SplitScore score_run(const PredictiveRun& run);

/// Windows of the requested split ("train", "validation", "test" or "all"),
/// with the checkpoint's z-score statistics applied.
std::vector<lob::LobWindow> load_split(const Checkpoint& ckpt, const std::filesystem::path& data_dir,
                                       const std::string& split);

struct TrainResult {
  Checkpoint last;
  std::size_t epochs_run = 0;
  std::optional<SplitScore> final_train;
  std::optional<SplitScore> final_validation;
};

/// Runs the training loop, writing checkpoints and learning_curve.csv under
/// `out_dir`. With `resume`, continues from that checkpoint after checking
/// that its config hash matches `config`.
TrainResult train(const RunConfig& config, const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume = std::nullopt);

struct EvaluateOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  bool per_stock = false;
  std::string split = "test";
  std::optional<std::size_t> draws;
  std::optional<std::uint64_t> seed;
};

struct EvaluateResult {
  std::size_t inputs = 0;
  bool labeled = false;
  std::optional<metrics::MetricsReport> predictive;
  std::vector<std::filesystem::path> files;
};

EvaluateResult evaluate(const EvaluateOptions& options);

struct PredictOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data_dir;
  std::filesystem::path out_file;
  std::string split = "all";
  std::optional<std::size_t> draws;
  std::optional<std::uint64_t> seed;
};

/// Writes one predictions.csv row per window; returns the row count.
std::size_t predict(const PredictOptions& options);

}  // namespace btabl::app
