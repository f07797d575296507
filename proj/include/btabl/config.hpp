#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "btabl/lobdata.hpp"
#include "btabl/model.hpp"
#include "btabl/optim.hpp"

namespace btabl::app {

/// Full run configuration. Every hyperparameter has a default; data_dir has
/// none and must be given for training.
struct RunConfig {
  // data
  std::filesystem::path data_dir;
  lob::Orientation orientation = lob::Orientation::events_as_rows;
  std::vector<std::size_t> feature_dims = lob::default_dims(40);
  std::size_t window_length = 10;
  int horizon = 10;
  double train_frac = 0.75;
  double val_frac = 0.15;
  int test_days = 3;
  bool zscore = false;
  lob::LabelMapping label_mapping;

  // architecture
  std::vector<std::pair<std::size_t, std::size_t>> hidden;
  std::size_t d_out = 3;
  std::size_t t_out = 1;
  model::Activation activation = model::Activation::identity;

  // optimizer
  optim::Kind optimizer = optim::Kind::vogn;
  double lr = 0.01;
  double vogn_momentum = 0.999;
  double h_decay = 0.85;
  double prior_precision = 1.0;
  std::size_t warmup_steps = 0;
  std::size_t train_mc_samples = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double sgd_momentum = 0.99;
  double dropout = 0.10;
  double lr_factor = 0.5;
  std::size_t lr_patience = 20;
  double lr_min_delta = 1e-4;

  // schedule
  std::size_t batch_size = 256;
  std::size_t epochs = 1000;
  std::size_t checkpoint_every = 50;
  std::size_t ns_validation = 10;
  std::size_t ns_test = 50;
  std::uint64_t seed = 0;

  model::Architecture architecture() const;
  lob::LoadOptions load_options() const;
  lob::SplitOptions split_options() const;

  /// Range and consistency checks; throws a config error.
  void validate() const;

  nlohmann::json to_json() const;
  /// Rejects unknown keys and wrong types.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);

  /// FNV-1a over the canonical JSON with `epochs` removed, so a run can be
  /// resumed with a larger epoch budget.
  std::string hash() const;
};

std::string fnv1a_hex(const std::string& text);

}  // namespace btabl::app
