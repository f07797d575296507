#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "btabl/btabl.h"

namespace {

int exit_code(btabl_status s) {
  switch (s) {
    case BTABL_OK: return 0;
    case BTABL_CONFIG: return 2;
    case BTABL_DATA: return 3;
    case BTABL_NUMERICAL: return 4;
    default: return 1;
  }
}

int report(btabl_status s) {
  if (s != BTABL_OK) std::fprintf(stderr, "btabl: %s\n", btabl_last_error());
  return exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian temporal attention bilinear network for limit-order-book mid-price classification"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(btabl_version()));

  std::optional<std::uint64_t> seed;
  std::string log_level = "info";
  app.add_option("--seed", seed, "Override the run seed")->type_name("U64");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::string config, out, resume;
  auto* train = app.add_subcommand("train", "Train a model from a JSON config");
  train->add_option("--config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "Output directory for checkpoints and learning_curve.csv")->required();
  train->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);

  std::string checkpoint, data, split;
  std::size_t ns = 0;
  bool per_stock = false;
  auto* evaluate = app.add_subcommand("evaluate", "Write the evaluation report bundle");
  evaluate->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--data", data, "FI-2010 data directory")->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--out", out, "Report directory")->required();
  evaluate->add_flag("--per-stock", per_stock, "Also write per_stock_metrics.csv");
  evaluate->add_option("--split", split, "test (default), validation, train or all")
      ->check(CLI::IsMember({"test", "validation", "train", "all"}));
  evaluate->add_option("--ns", ns, "Predictive draws (default: the config's ns_test)")->check(CLI::PositiveNumber);

  auto* predict = app.add_subcommand("predict", "Write per-window predictive summaries");
  predict->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  predict->add_option("--data", data, "FI-2010 data directory")->required()->check(CLI::ExistingDirectory);
  predict->add_option("--ns", ns, "Predictive draws")->required()->check(CLI::PositiveNumber);
  predict->add_option("--out", out, "Output CSV file")->required();
  predict->add_option("--split", split, "all (default), train, validation or test")
      ->check(CLI::IsMember({"test", "validation", "train", "all"}));

  btabl_synth_options synth_opts;
  btabl_synth_options_init(&synth_opts);
  bool columns = false;
  auto* synth = app.add_subcommand("synth", "Generate a planted-pattern synthetic dataset");
  synth->add_option("--out", out, "Output data directory")->required();
  synth->add_option("--stocks", synth_opts.stocks)->capture_default_str();
  synth->add_option("--days", synth_opts.days)->capture_default_str();
  synth->add_option("--events", synth_opts.events_per_day, "Events per day")->capture_default_str();
  synth->add_option("--window", synth_opts.window_length, "Window length T")->capture_default_str();
  synth->add_option("--p-up", synth_opts.p_up)->capture_default_str();
  synth->add_option("--p-down", synth_opts.p_down)->capture_default_str();
  synth->add_flag("--columns", columns, "Write events as columns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const int level = log_level == "trace" ? 0
                    : log_level == "debug" ? 1
                    : log_level == "info"  ? 2
                    : log_level == "warn"  ? 3
                    : log_level == "error" ? 4
                                           : 6;
  btabl_set_log_level(level);

  if (*train) {
    btabl_train_options o;
    btabl_train_options_init(&o);
    o.config_path = config.c_str();
    o.out_dir = out.c_str();
    o.resume = resume.empty() ? nullptr : resume.c_str();
    o.has_seed = seed.has_value();
    o.seed = seed.value_or(0);
    return report(btabl_train(&o));
  }
  if (*evaluate) {
    btabl_evaluate_options o;
    btabl_evaluate_options_init(&o);
    o.checkpoint = checkpoint.c_str();
    o.data_dir = data.c_str();
    o.out_dir = out.c_str();
    o.split = split.empty() ? nullptr : split.c_str();
    o.per_stock = per_stock;
    o.draws = ns;
    o.has_seed = seed.has_value();
    o.seed = seed.value_or(0);
    return report(btabl_evaluate(&o));
  }
  if (*predict) {
    btabl_predict_options o;
    btabl_predict_options_init(&o);
    o.checkpoint = checkpoint.c_str();
    o.data_dir = data.c_str();
    o.out_file = out.c_str();
    o.split = split.empty() ? nullptr : split.c_str();
    o.draws = ns;
    o.has_seed = seed.has_value();
    o.seed = seed.value_or(0);
    return report(btabl_predict(&o, nullptr));
  }
  synth_opts.out_dir = out.c_str();
  synth_opts.events_as_columns = columns;
  if (seed) synth_opts.seed = *seed;
  return report(btabl_synth(&synth_opts));
}
