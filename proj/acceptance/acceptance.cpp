// Acceptance suite: one PASS/FAIL/SKIP line per criterion, non-zero exit on
// any failure. Set BTABL_FI2010_DIR to a directory of FI-2010 day files to
// enable criterion 10.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "btabl/app.hpp"
#include "btabl/btabl.h"
#include "btabl/rng.hpp"
#include "btabl/synth.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace btabl;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict = Verdict::fail;
  std::string detail;
};

Outcome judge(bool ok, std::string detail) { return {ok ? Verdict::pass : Verdict::fail, std::move(detail)}; }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / "btabl_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    da += a[i] * a[i];
    db += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(da) + std::sqrt(db), 1e-12);
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    oracle::Gen g(seed);
    model::Architecture arch;
    arch.d = 4;
    arch.t = 5;
    arch.d_out = 3;
    arch.t_out = 1;
    const model::Network net(arch);
    auto theta = g.vec(net.param_count(), 0.5);
    theta.back() = g.uniform(0.1, 0.9);
    const Matrix x = g.matrix(4, 5);
    const int label = g.integer(0, 2);
    const auto analytic = net.backward(net.forward(x, theta), label, theta);
    const auto numeric = oracle::finite_difference(
        [&](const std::vector<double>& th) { return -net.forward(x, th).log_probs[static_cast<std::size_t>(label)]; },
        theta);
    worst = std::max(worst, rel_error(analytic, numeric));
  }
  const double secs = seconds_since(t0);
  return judge(worst < 1e-5 && secs < 10.0,
               "max relative error " + fmt(worst) + " (tol 1e-05) over 20 seeds, " + fmt(secs) + " s (limit 10 s)");
}

Outcome vogn_invariants() {
  oracle::Gen g(2024);
  double min_s = std::numeric_limits<double>::infinity(), min_var = min_s;
  std::size_t calls = 0;
  while (calls < 10000) {
    const std::size_t p = g.size(1, 16);
    auto st = optim::VariationalState::init(p, g.size(1, 10000), g.uniform(1e-3, 100.0), g.uniform(1e-3, 1.0),
                                            g.uniform(0.0, 0.999), g.uniform(0.5, 1.0));
    for (int k = 0; k < 100 && calls < 10000; ++k, ++calls) {
      const double scale = std::pow(10.0, g.uniform(-6.0, 4.0));
      optim::vogn_step(st, g.matrix(g.size(1, 8), p, scale));
      for (double s : st.s) min_s = std::min(min_s, s);
      for (double v : st.sigma2()) min_var = std::min(min_var, v);
    }
  }
  auto st = optim::VariationalState::init(1, 10, 1.0, 0.5);
  st.mu = {1.0};
  st.s = {0.9};
  const std::vector<double> zero{0.0}, h{0.3};
  optim::vogn_update(st, zero, h);
  const double ds = std::abs(st.s[0] - (0.5 * 0.9 + 0.5 * 0.3));
  const double dmu = std::abs(st.mu[0] - (1.0 - 0.5 * 0.1 / 0.7));
  return judge(min_s >= 0.0 && min_var > 0.0 && ds < 1e-12 && dmu < 1e-12,
               "10000 steps: min s " + fmt(min_s) + ", min sigma^2 " + fmt(min_var) + "; scalar example |ds| " +
                   fmt(ds) + ", |dmu| " + fmt(dmu) + " (tol 1e-12)");
}

Outcome vogn_fixed_point() {
  const std::vector<double> curvature{0.5, 1.0, 2.0, 3.0, 4.0};
  const std::vector<std::vector<double>> centers{
      {1.0, -2.0, 0.5, 3.0, -1.0}, {1.4, -1.6, 0.3, 2.6, -0.8}, {0.6, -2.4, 0.7, 3.4, -1.2}};
  auto st = optim::VariationalState::init(5, 10, 1.0, 0.1);
  auto residual = [&] {
    double r = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      double g = 0.0;
      for (const auto& c : centers) g += curvature[j] * (st.mu[j] - c[j]) / static_cast<double>(centers.size());
      r += std::pow(g + st.alpha_tilde * st.mu[j], 2);
    }
    return std::sqrt(r);
  };
  std::size_t steps = 0;
  for (; steps < 5000 && !(steps > 0 && residual() < 1e-3); ++steps) {
    Matrix per_sample(centers.size(), 5);
    for (std::size_t i = 0; i < centers.size(); ++i)
      for (std::size_t j = 0; j < 5; ++j) per_sample(i, j) = curvature[j] * (st.mu[j] - centers[i][j]);
    optim::vogn_step(st, per_sample);
  }
  const double r = residual();
  return judge(r < 1e-3 && std::abs(st.alpha_tilde - 0.1) < 1e-15,
               "alpha~ " + fmt(st.alpha_tilde) + ", ||g+alpha~ mu|| " + fmt(r) + " after " + std::to_string(steps) +
                   " steps (tol 1e-3, limit 5000)");
}

Outcome optimizer_baselines() {
  const double target = 3.0;
  auto grad = [&](double w) { return 2.0 * (w - target); };

  auto adam = optim::AdamState::init(1, 0.05);
  std::vector<double> w{0.0};
  double m = 0.0, v = 0.0, ref = 0.0, adam_gap = 0.0;
  for (int t = 1; t <= 500; ++t) {
    const double gr = grad(ref);
    m = 0.9 * m + 0.1 * gr;
    v = 0.999 * v + 0.001 * gr * gr;
    ref -= 0.05 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
    const std::vector<double> g{grad(w[0])};
    optim::adam_step(adam, w, g);
    adam_gap = std::max(adam_gap, std::abs(w[0] - ref));
  }
  const double adam_err = std::abs(w[0] - target);

  auto sgd = optim::SgdState::init(1, 0.01, 0.9);
  std::vector<double> u{0.0};
  double vel = 0.0, sref = 0.0, sgd_gap = 0.0;
  for (int t = 1; t <= 2000; ++t) {
    vel = 0.9 * vel + grad(sref);
    sref -= 0.01 * vel;
    const std::vector<double> g{grad(u[0])};
    optim::sgd_step(sgd, u, g);
    sgd_gap = std::max(sgd_gap, std::abs(u[0] - sref));
  }
  const double sgd_err = std::abs(u[0] - target);
  return judge(adam_err < 1e-2 && sgd_err < 1e-2 && adam_gap < 1e-12 && sgd_gap < 1e-12,
               "ADAM |w-w*| " + fmt(adam_err) + " after 500, SGD " + fmt(sgd_err) +
                   " after 2000 (tol 1e-2); recurrence gap " + fmt(std::max(adam_gap, sgd_gap)) + " (tol 1e-12)");
}

Outcome metric_identities() {
  oracle::Gen g(55);
  std::size_t broken = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = g.size(2, 8);
    metrics::ConfusionMatrix cm(c);
    for (std::size_t t = 0; t < c; ++t)
      for (std::size_t p = 0; p < c; ++p) cm.at(t, p) = g.size(0, 500);
    if (cm.total() == 0) cm.at(0, 0) = 1;
    const auto r = metrics::multiclass_metrics(cm);
    const bool ok = r.micro_precision == r.accuracy && r.micro_recall == r.accuracy &&
                    r.micro_f1 == r.accuracy && r.weighted_recall == r.accuracy;
    broken += ok ? 0 : 1;
  }
  return judge(broken == 0, std::to_string(broken) + " of 1000 matrices violate exact equality");
}

Outcome auroc_oracle() {
  oracle::Gen g(66);
  const auto th = metrics::default_thresholds();
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(200);
    std::vector<int> pos(200);
    const double sharpness = g.uniform(0.0, 3.0);
    for (std::size_t i = 0; i < 200; ++i) {
      pos[i] = g.coin(0.3) ? 1 : 0;
      s[i] = 1.0 / (1.0 + std::exp(-(g.normal() + sharpness * (pos[i] ? 1.0 : -1.0))));
    }
    if (std::accumulate(pos.begin(), pos.end(), 0) == 0) pos[0] = 1;
    const auto curve = metrics::roc_curve(s, pos, th);
    worst = std::max(worst, std::abs(curve.auroc - oracle::pairwise_auroc(s, pos)));
  }
  return judge(worst < 0.02, "max |trapezoid - pairwise| " + fmt(worst) + " over 50 sets of n=200 (tol 0.02)");
}

Outcome calibration_checks() {
  double worst = 0.0;
  for (std::size_t bins : {10u, 20u}) {
    std::vector<double> s;
    std::vector<int> pos;
    for (int level = 1; level <= 9; level += 2) {
      const double score = level / 10.0;
      for (int i = 0; i < 10; ++i) {
        s.push_back(score);
        pos.push_back(i < level ? 1 : 0);
      }
    }
    const auto c = metrics::calibration(s, pos, bins);
    worst = std::max({worst, std::abs(c.ece), c.ecd});
  }
  const std::vector<double> half(10, 0.5);
  const std::vector<int> mixed{1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
  const auto h = metrics::calibration(half, mixed, 20);
  worst = std::max({worst, std::abs(h.ece), h.ecd});

  const std::vector<double> high(10, 0.9);
  const std::vector<int> neg(10, 0);
  const double ece = metrics::calibration(high, neg, 20).ece;
  return judge(worst < 1e-12 && ece == -0.9,
               "calibrated sets max |ECE|,ECD " + fmt(worst) + " (tol 1e-12); constant-0.9 negatives ECE " + fmt(ece));
}

Outcome predictive_machinery() {
  const model::Network net(model::Architecture{});
  oracle::Gen g(88);
  auto st = optim::VariationalState::init(net.param_count(), 1000, 1.0, 0.01);
  st.mu = g.vec(net.param_count(), 0.2);
  auto collapsed = st;
  collapsed.s.assign(collapsed.s.size(), std::numeric_limits<double>::infinity());
  const bayes::PosteriorPredictor exact(net, collapsed), spread(net, st);

  std::size_t mismatches = 0;
  double worst_sum = 0.0;
  bool identical = true;
  for (std::uint64_t i = 0; i < 500; ++i) {
    const Matrix x = g.matrix(40, 10);
    const auto set = bayes::predictive_set(exact, x, 5, 7, i);
    const auto summary = bayes::summarize(set);
    if (summary.predicted_class != bayes::argmax(net.probabilities(x, st.mu))) ++mismatches;
    for (std::size_t n = 0; n < 5; ++n) {
      const auto row = set.probs.row(n);
      worst_sum = std::max(worst_sum, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
    }
    const auto a = bayes::predictive_set(spread, x, 5, 7, i), b = bayes::predictive_set(spread, x, 5, 7, i);
    identical = identical && std::ranges::equal(a.probs.data(), b.probs.data());
  }
  return judge(mismatches == 0 && worst_sum < 1e-9 && identical,
               std::to_string(mismatches) + " argmax mismatches of 500 with sigma^2=0; max |sum-1| " + fmt(worst_sum) +
                   " (tol 1e-9); repeated seeds " + (identical ? "bit-identical" : "differ"));
}

fs::path benchmark_data() {
  static const fs::path dir = [] {
    const auto d = scratch("bench_data");
    lob::SynthOptions o;
    o.days = 8;
    o.events_per_day = 1009;
    o.seed = 21;
    lob::write_synth_dataset(d, o);
    return d;
  }();
  return dir;
}

app::RunConfig benchmark_config(optim::Kind kind) {
  app::RunConfig c;
  c.data_dir = benchmark_data();
  c.train_frac = 1.0;
  c.val_frac = 0.0;
  c.test_days = 2;
  c.optimizer = kind;
  c.epochs = 50;
  c.batch_size = 64;
  c.checkpoint_every = 50;
  c.ns_validation = 2;
  c.ns_test = 10;
  c.seed = 3;
  if (kind == optim::Kind::vogn) {
    c.vogn_momentum = 0.0;
    c.h_decay = 1.0;
  }
  return c;
}

Outcome learnability() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  const std::pair<optim::Kind, double> runs[] = {
      {optim::Kind::adam, 0.90}, {optim::Kind::vogn, 0.90}, {optim::Kind::sgd, 0.80}};
  for (const auto& [kind, floor] : runs) {
    const auto cfg = benchmark_config(kind);
    const auto out = scratch(std::string("bench_") + optim::to_string(kind));
    const auto trained = app::train(cfg, out);
    app::EvaluateOptions e;
    e.checkpoint = out / "checkpoint_last.json";
    e.data_dir = cfg.data_dir;
    e.out_dir = out / "eval";
    const auto ev = app::evaluate(e);
    const double micro = ev.predictive ? ev.predictive->micro_f1 : 0.0;
    ok = ok && micro >= floor;
    detail += std::string(optim::to_string(kind)) + " test micro " + fmt(micro) + " (floor " + fmt(floor) + ", " +
              std::to_string(trained.last.n_train) + " train / " + std::to_string(ev.inputs) + " test); ";
  }
  const double secs = seconds_since(t0);
  detail += fmt(secs) + " s total";
  return judge(ok, detail);
}

Outcome fi2010_benchmark() {
  const char* env = std::getenv("BTABL_FI2010_DIR");
  if (!env || !fs::is_directory(env)) return {Verdict::skip, "BTABL_FI2010_DIR not set"};
  fs::path root = env;
  if (fs::is_directory(root / "stock1")) root /= "stock1";
  app::RunConfig c;
  c.data_dir = root;
  c.orientation = lob::Orientation::events_as_columns;
  c.optimizer = optim::Kind::vogn;
  c.epochs = 50;
  c.zscore = true;
  c.vogn_momentum = 0.0;
  c.h_decay = 1.0;
  const auto out = scratch("fi2010");
  const auto r = app::train(c, out);
  if (!r.final_validation) return {Verdict::fail, "no validation split"};
  app::EvaluateOptions e;
  e.checkpoint = out / "checkpoint_last.json";
  e.data_dir = root;
  e.out_dir = out / "eval";
  e.split = "validation";
  const auto ev = app::evaluate(e);
  const auto windows = app::load_split(r.last, root, "validation");
  std::map<int, std::size_t> counts;
  for (const auto& w : windows) ++counts[*w.label];
  std::size_t majority = 0;
  for (const auto& [label, n] : counts) majority = std::max(majority, n);
  const double baseline = static_cast<double>(majority) / static_cast<double>(windows.size());
  const double micro = ev.predictive->micro_f1;
  return judge(micro >= baseline + 0.03,
               "validation micro " + fmt(micro) + " vs majority " + fmt(baseline) + " + 0.03");
}

std::map<std::string, std::string> csv_bundle(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), dir).string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

Outcome end_to_end_determinism() {
  const auto base = scratch("determinism");
  const auto data = (base / "data").string();
  btabl_synth_options s;
  btabl_synth_options_init(&s);
  s.out_dir = data.c_str();
  s.days = 6;
  s.events_per_day = 400;
  s.seed = 9;
  if (btabl_synth(&s) != BTABL_OK) return {Verdict::fail, btabl_last_error()};
  std::ofstream(base / "config.json") << R"({"data_dir": "data", "optimizer": "vogn", "epochs": 3, "batch_size": 64,
    "test_days": 1, "vogn_momentum": 0.0, "h_decay": 1.0, "ns_validation": 3, "ns_test": 8, "seed": 4})";
  const auto cfg = (base / "config.json").string();

  std::vector<std::map<std::string, std::string>> bundles;
  for (const char* run : {"run_a", "run_b"}) {
    const auto out = (base / run).string();
    const auto ckpt = (base / run / "checkpoint_last.json").string();
    const auto eval = (base / run / "eval").string();
    btabl_train_options t;
    btabl_train_options_init(&t);
    t.config_path = cfg.c_str();
    t.out_dir = out.c_str();
    if (btabl_train(&t) != BTABL_OK) return {Verdict::fail, btabl_last_error()};
    btabl_evaluate_options e;
    btabl_evaluate_options_init(&e);
    e.checkpoint = ckpt.c_str();
    e.data_dir = data.c_str();
    e.out_dir = eval.c_str();
    e.per_stock = 1;
    if (btabl_evaluate(&e) != BTABL_OK) return {Verdict::fail, btabl_last_error()};
    bundles.push_back(csv_bundle(base / run));
  }
  std::size_t differing = 0;
  for (const auto& [name, bytes] : bundles[0]) {
    auto it = bundles[1].find(name);
    if (it == bundles[1].end() || it->second != bytes) ++differing;
  }
  const bool same_names = bundles[0].size() == bundles[1].size();
  return judge(differing == 0 && same_names && bundles[0].size() >= 10,
               std::to_string(bundles[0].size()) + " CSV files compared, " + std::to_string(differing) + " differ");
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  btabl_set_log_level(3);
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient correctness", gradient_correctness},
      {"VOGN invariants", vogn_invariants},
      {"VOGN fixed point", vogn_fixed_point},
      {"optimizer baselines", optimizer_baselines},
      {"metric identities", metric_identities},
      {"AUROC oracle", auroc_oracle},
      {"calibration", calibration_checks},
      {"predictive machinery", predictive_machinery},
      {"smoke learnability benchmark", learnability},
      {"FI-2010 data-present benchmark", fi2010_benchmark},
      {"end-to-end determinism", end_to_end_determinism},
  };
  int failures = 0, index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::skip ? "SKIP" : "FAIL";
    if (o.verdict == Verdict::fail) ++failures;
    std::printf("[%s] %2d %s: %s\n", tag, index, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
