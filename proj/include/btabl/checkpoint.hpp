#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "btabl/config.hpp"
#include "btabl/lobdata.hpp"
#include "btabl/optim.hpp"

namespace btabl::app {

inline constexpr int kCheckpointFormat = 1;

/// Everything needed to resume training or to evaluate a trained model.
/// Parameter vectors follow the network flattening order: hidden layers
/// (U, V, B each), then the TABL head (W1, W, W2, B, lambda).
struct Checkpoint {
  int format_version = kCheckpointFormat;
  RunConfig config;
  optim::Kind kind = optim::Kind::vogn;
  std::size_t n_train = 0;
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  double lr = 0.0;

  // reduce-on-plateau state (point-estimate optimizers)
  double plateau_best = std::numeric_limits<double>::infinity();
  std::size_t plateau_stale = 0;
  std::size_t plateau_reductions = 0;

  double best_val_f1 = -1.0;
  std::size_t best_epoch = 0;

  optim::VariationalState vogn;  // VOGN only
  std::vector<double> params;    // ADAM / SGD / MCD
  optim::AdamState adam;         // ADAM / MCD
  optim::SgdState sgd;           // SGD

  std::optional<lob::ZScoreStats> zscore;

  /// Mean parameters: mu for VOGN, the point estimate otherwise.
  const std::vector<double>& center() const;

  nlohmann::json to_json() const;
  static Checkpoint from_json(const nlohmann::json& j);

  std::string dump() const;
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

/// Named blocks of the flat parameter vector, in order.
nlohmann::json flattening_descriptor(const model::Architecture& arch);

}  // namespace btabl::app
