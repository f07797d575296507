#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <spdlog/spdlog.h>

#include "btabl/app.hpp"
#include "btabl/error.hpp"
#include "btabl/synth.hpp"

namespace fs = std::filesystem;
using namespace btabl;
using namespace btabl::app;

namespace {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    FAIL("missing column " << name);
    return 0;
  }
  double num(std::size_t r, const std::string& name) const { return std::stod(rows[r][col(name)]); }
};

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv read_csv(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  Csv c;
  std::string line;
  std::getline(in, line);
  c.header = split_line(line);
  while (std::getline(in, line)) c.rows.push_back(split_line(line));
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "btabl_app_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path dataset(int stocks, int days, std::size_t events) {
  static std::map<std::tuple<int, int, std::size_t>, fs::path> made;
  const auto key = std::make_tuple(stocks, days, events);
  if (auto it = made.find(key); it != made.end()) return it->second;
  spdlog::set_level(spdlog::level::warn);
  const auto dir = scratch("data_" + std::to_string(stocks) + "_" + std::to_string(days) + "_" + std::to_string(events));
  lob::SynthOptions o;
  o.stocks = stocks;
  o.days = days;
  o.events_per_day = events;
  o.seed = 5;
  lob::write_synth_dataset(dir, o);
  made[key] = dir;
  return dir;
}

RunConfig small_config(optim::Kind kind, std::size_t epochs) {
  RunConfig c;
  c.data_dir = dataset(1, 6, 300);
  c.test_days = 1;
  c.optimizer = kind;
  c.epochs = epochs;
  c.batch_size = 64;
  c.ns_validation = 3;
  c.ns_test = 5;
  c.checkpoint_every = 2;
  c.seed = 17;
  if (kind == optim::Kind::vogn) {
    c.vogn_momentum = 0.0;
    c.h_decay = 1.0;
  }
  return c;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::contract;
}

}  // namespace

TEST_CASE("config parsing rejects unknown keys and bad values") {
  auto j = RunConfig{}.to_json();
  j["data_dir"] = "somewhere";
  CHECK(RunConfig::from_json(j).hash() == [&] {
    RunConfig c;
    c.data_dir = "elsewhere";
    return c.hash();
  }());
  j["learning_rate"] = 0.1;
  CHECK(kind_of([&] { (void)RunConfig::from_json(j); }) == ErrorKind::config);
  j.erase("learning_rate");
  j["epochs"] = "many";
  CHECK(kind_of([&] { (void)RunConfig::from_json(j); }) == ErrorKind::config);

  RunConfig bad;
  bad.lr = -1.0;
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::config);
  RunConfig split;
  split.train_frac = 0.9;
  split.val_frac = 0.2;
  CHECK(kind_of([&] { split.validate(); }) == ErrorKind::config);

  RunConfig a, b;
  b.epochs = 7;
  CHECK(a.hash() == b.hash());
  b.lr = 0.02;
  CHECK(a.hash() != b.hash());
  CHECK(RunConfig::from_json(a.to_json()).to_json() == a.to_json());
}

TEST_CASE("checkpoint JSON round-trips byte for byte, including infinities") {
  const auto out = scratch("roundtrip");
  const auto result = train(small_config(optim::Kind::vogn, 1), out);
  const auto first = slurp(out / "checkpoint_last.json");
  const auto loaded = Checkpoint::load(out / "checkpoint_last.json");
  loaded.save(out / "again.json");
  CHECK(slurp(out / "again.json") == first);
  CHECK(loaded.vogn.mu == result.last.vogn.mu);

  auto inf = loaded;
  inf.vogn.s.assign(inf.vogn.s.size(), std::numeric_limits<double>::infinity());
  inf.plateau_best = std::numeric_limits<double>::infinity();
  inf.save(out / "inf.json");
  const auto back = Checkpoint::load(out / "inf.json");
  for (double s : back.vogn.s) CHECK(std::isinf(s));
  for (double v : back.vogn.sigma2()) CHECK(v == 0.0);
  CHECK(back.dump() == inf.dump());

  auto j = nlohmann::json::parse(first);
  j["config_hash"] = "0000000000000000";
  CHECK(kind_of([&] { (void)Checkpoint::from_json(j); }) == ErrorKind::config);
}

TEST_CASE("zero epochs writes only the initial checkpoint") {
  const auto out = scratch("zero");
  (void)train(small_config(optim::Kind::adam, 0), out);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(out)) names.push_back(e.path().filename().string());
  CHECK(names == std::vector<std::string>{"checkpoint_epoch_0.json"});
}

TEST_CASE("training is deterministic and resumable") {
  for (auto kind : {optim::Kind::vogn, optim::Kind::adam, optim::Kind::mcd, optim::Kind::sgd}) {
    CAPTURE(optim::to_string(kind));
    const auto a = scratch("det_a"), b = scratch("det_b"), r = scratch("det_r");
    (void)train(small_config(kind, 4), a);
    (void)train(small_config(kind, 4), b);
    CHECK(slurp(a / "learning_curve.csv") == slurp(b / "learning_curve.csv"));
    CHECK(slurp(a / "checkpoint_last.json") == slurp(b / "checkpoint_last.json"));

    (void)train(small_config(kind, 2), r);
    (void)train(small_config(kind, 4), r, r / "checkpoint_last.json");
    CHECK(slurp(a / "learning_curve.csv") == slurp(r / "learning_curve.csv"));
    CHECK(slurp(a / "checkpoint_last.json") == slurp(r / "checkpoint_last.json"));
    CHECK(fs::exists(r / "checkpoint_epoch_2.json"));
    CHECK(fs::exists(r / "checkpoint_epoch_4.json"));
    CHECK(read_csv(a / "learning_curve.csv").rows.size() == 8);
  }
}

TEST_CASE("resuming with a different config is refused") {
  const auto out = scratch("refuse");
  (void)train(small_config(optim::Kind::adam, 1), out);
  auto changed = small_config(optim::Kind::adam, 3);
  changed.lr = 0.5;
  CHECK(kind_of([&] { (void)train(changed, out, out / "checkpoint_last.json"); }) == ErrorKind::config);
}

TEST_CASE("evaluating the training split reproduces the learning-curve row") {
  for (auto kind : {optim::Kind::vogn, optim::Kind::adam}) {
    const auto out = scratch("evaltrain");
    const auto cfg = small_config(kind, 2);
    const auto result = train(cfg, out);
    EvaluateOptions e;
    e.checkpoint = out / "checkpoint_last.json";
    e.data_dir = cfg.data_dir;
    e.out_dir = out / "eval";
    e.split = "train";
    e.draws = cfg.ns_validation;
    const auto ev = evaluate(e);
    REQUIRE(ev.predictive);
    REQUIRE(result.final_train);
    CHECK(ev.inputs == result.final_train->count);
    CHECK(ev.predictive->accuracy == result.final_train->accuracy);
    CHECK(ev.predictive->macro_f1 == result.final_train->macro_f1);
    const auto curve = read_csv(out / "learning_curve.csv");
    CHECK(curve.num(2, "accuracy") == ev.predictive->accuracy);
  }
}

TEST_CASE("a collapsed posterior makes every draw agree") {
  const auto out = scratch("collapsed");
  const auto cfg = small_config(optim::Kind::vogn, 1);
  (void)train(cfg, out);
  auto c = Checkpoint::load(out / "checkpoint_last.json");
  c.vogn.s.assign(c.vogn.s.size(), std::numeric_limits<double>::infinity());
  c.save(out / "collapsed.json");
  EvaluateOptions e;
  e.checkpoint = out / "collapsed.json";
  e.data_dir = cfg.data_dir;
  e.out_dir = out / "eval";
  (void)evaluate(e);
  const auto m = read_csv(out / "eval" / "metrics_multiclass.csv");
  std::map<std::string, std::vector<std::string>> by_stat;
  for (const auto& row : m.rows)
    if (row[0] == "sample_by_sample") by_stat[row[1]] = row;
  REQUIRE(by_stat.count("min"));
  for (std::size_t i = 2; i < m.header.size(); ++i) CHECK(by_stat["min"][i] == by_stat["max"][i]);
}

TEST_CASE("per-stock metrics recombine into the pooled row") {
  auto cfg = small_config(optim::Kind::adam, 2);
  cfg.data_dir = dataset(3, 5, 250);
  const auto out = scratch("perstock");
  (void)train(cfg, out);
  EvaluateOptions e;
  e.checkpoint = out / "checkpoint_last.json";
  e.data_dir = cfg.data_dir;
  e.out_dir = out / "eval";
  e.per_stock = true;
  const auto ev = evaluate(e);
  const auto t = read_csv(out / "eval" / "per_stock_metrics.csv");
  REQUIRE(t.rows.size() == 4);
  CHECK(t.rows.back()[0] == "pooled");
  double weighted = 0.0, support = 0.0;
  std::vector<double> cells(9, 0.0);
  for (std::size_t r = 0; r + 1 < t.rows.size(); ++r) {
    weighted += t.num(r, "accuracy") * t.num(r, "support");
    support += t.num(r, "support");
    for (std::size_t k = 0; k < 9; ++k) cells[k] += t.num(r, "cm_" + std::to_string(k / 3) + "_" + std::to_string(k % 3));
  }
  CHECK(support == t.num(3, "support"));
  CHECK(std::abs(weighted / support - t.num(3, "accuracy")) < 1e-9);
  for (std::size_t k = 0; k < 9; ++k) CHECK(cells[k] == t.num(3, "cm_" + std::to_string(k / 3) + "_" + std::to_string(k % 3)));
  CHECK(std::abs(t.num(3, "accuracy") - ev.predictive->accuracy) < 1e-12);
}

TEST_CASE("predictions file") {
  const auto cfg = small_config(optim::Kind::vogn, 1);
  const auto out = scratch("predict");
  (void)train(cfg, out);
  PredictOptions p;
  p.checkpoint = out / "checkpoint_last.json";
  p.data_dir = cfg.data_dir;
  p.out_file = out / "single.csv";
  p.draws = 1;
  const auto rows = predict(p);
  const auto single = read_csv(p.out_file);
  CHECK(single.rows.size() == rows);
  for (std::size_t r = 0; r < single.rows.size(); ++r)
    CHECK(single.rows[r][single.col("predicted")] == single.rows[r][single.col("modal")]);

  p.draws = 7;
  p.out_file = out / "a.csv";
  (void)predict(p);
  p.out_file = out / "b.csv";
  (void)predict(p);
  CHECK(slurp(out / "a.csv") == slurp(out / "b.csv"));
  const auto many = read_csv(out / "a.csv");
  for (std::size_t r = 0; r < many.rows.size(); ++r) {
    const double sum = many.num(r, "mean_prob_0") + many.num(r, "mean_prob_1") + many.num(r, "mean_prob_2");
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(many.num(r, "count_0") + many.num(r, "count_1") + many.num(r, "count_2") == 7.0);
  }
}

TEST_CASE("missing and malformed inputs raise the right error kinds") {
  auto cfg = small_config(optim::Kind::adam, 1);
  cfg.data_dir = scratch("empty_data");
  CHECK(kind_of([&] { (void)train(cfg, scratch("nodata")); }) == ErrorKind::data);
  cfg.data_dir.clear();
  CHECK(kind_of([&] { (void)train(cfg, scratch("nodir")); }) == ErrorKind::config);
}

TEST_CASE("ADAM fits the synthetic training set") {
  auto cfg = small_config(optim::Kind::adam, 30);
  cfg.data_dir = dataset(1, 6, 1000);
  const auto r = train(cfg, scratch("adam30"));
  REQUIRE(r.final_train);
  CHECK(r.final_train->accuracy >= 0.95);
}
