#include <algorithm>
#include <functional>
#include <map>

#include <spdlog/spdlog.h>

#include "btabl/app.hpp"
#include "btabl/error.hpp"
#include "csv.hpp"

namespace btabl::app {

namespace fs = std::filesystem;

namespace {

using metrics::MetricsReport;

const std::vector<std::string> kMetricColumns = {
    "accuracy",        "micro_precision", "micro_recall",       "micro_f1",        "macro_precision",
    "macro_recall",    "macro_f1",        "weighted_precision", "weighted_recall", "weighted_f1"};

std::vector<double> metric_values(const MetricsReport& r) {
  return {r.accuracy,     r.micro_precision, r.micro_recall,       r.micro_f1,        r.macro_precision,
          r.macro_recall, r.macro_f1,        r.weighted_precision, r.weighted_recall, r.weighted_f1};
}

std::vector<std::string> with_prefix(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

struct Context {
  const Checkpoint& ckpt;
  const std::vector<lob::LobWindow>& windows;
  const PredictiveRun& run;
  std::size_t classes;
  std::vector<int> truth;
  fs::path out;
  std::vector<fs::path> files;

  const std::string& class_name(std::size_t k) const { return ckpt.config.label_mapping.class_names[k]; }

  MetricsReport report_for(const std::function<int(std::size_t)>& label_of) const {
    std::vector<int> pred(truth.size());
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = label_of(i);
    return metrics::multiclass_metrics(metrics::confusion(truth, pred, classes));
  }

  CsvFile open(const std::string& name, const std::vector<std::string>& header) {
    files.push_back(out / name);
    return CsvFile(out / name, header);
  }
};

MetricsReport write_multiclass(Context& ctx) {
  auto csv = ctx.open("metrics_multiclass.csv", with_prefix({"panel", "statistic"}, kMetricColumns));
  const auto& run = ctx.run;
  const bool bayesian = optim::is_bayesian(ctx.ckpt.kind);

  if (bayesian) {
    const std::size_t draws = run.sets.front().probs.rows();
    std::vector<std::vector<double>> per_metric(kMetricColumns.size());
    for (std::size_t n = 0; n < draws; ++n) {
      const auto r = ctx.report_for([&](std::size_t i) { return run.summaries[i].draw_labels[n]; });
      const auto values = metric_values(r);
      for (std::size_t m = 0; m < values.size(); ++m) per_metric[m].push_back(values[m]);
    }
    std::vector<bayes::DescriptiveStats> stats;
    for (const auto& v : per_metric) stats.push_back(*bayes::describe(v));
    const std::pair<const char*, double bayes::DescriptiveStats::*> rows[] = {
        {"mean", &bayes::DescriptiveStats::mean},
        {"median", &bayes::DescriptiveStats::median},
        {"min", &bayes::DescriptiveStats::min},
        {"max", &bayes::DescriptiveStats::max}};
    for (const auto& [name, member] : rows) {
      CsvRow row;
      row << "sample_by_sample" << name;
      for (const auto& s : stats) row << s.*member;
      csv.write(row);
    }
    for (auto f : {bayes::Forecast::label_mean, bayes::Forecast::label_median, bayes::Forecast::label_mode}) {
      const auto r = ctx.report_for([&](std::size_t i) { return bayes::forecast_label(run.summaries[i], f); });
      CsvRow row;
      row << "forecast_function" << bayes::to_string(f);
      for (double v : metric_values(r)) row << v;
      csv.write(row);
    }
  }

  const auto predictive = ctx.report_for([&](std::size_t i) { return run.summaries[i].predicted_class; });
  {
    CsvRow row;
    row << "predictive" << "mean";
    for (double v : metric_values(predictive)) row << v;
    csv.write(row);
  }
  if (bayesian) {
    const auto r = ctx.report_for([&](std::size_t i) { return run.summaries[i].predicted_class_median; });
    CsvRow row;
    row << "predictive" << "median";
    for (double v : metric_values(r)) row << v;
    csv.write(row);
  }
  return predictive;
}

void write_singleclass(Context& ctx, const MetricsReport& report) {
  auto csv = ctx.open("metrics_singleclass.csv",
                      {"class", "class_name", "support", "tp", "fp", "fn", "tn", "precision", "recall", "f1",
                       "tpr", "fnr", "tnr", "fpr", "fdr", "accuracy", "zero_division"});
  for (std::size_t k = 0; k < report.per_class.size(); ++k) {
    const auto& m = report.per_class[k];
    csv.write(CsvRow() << k << ctx.class_name(k) << m.support << m.tp << m.fp << m.fn << m.tn << m.precision
                       << m.recall << m.f1 << m.tpr << m.fnr << m.tnr << m.fpr << m.fdr << m.accuracy
                       << m.zero_division);
  }
}

Matrix mean_prob_matrix(const PredictiveRun& run, std::size_t classes) {
  Matrix scores(run.summaries.size(), classes);
  for (std::size_t i = 0; i < run.summaries.size(); ++i)
    std::ranges::copy(run.summaries[i].mean_probs, scores.row(i).begin());
  return scores;
}

void write_roc_calibration(Context& ctx) {
  const auto scores = mean_prob_matrix(ctx.run, ctx.classes);
  const auto thresholds = metrics::default_thresholds();
  const auto roc = metrics::micro_macro_roc(scores, ctx.truth, thresholds);
  const auto cal = metrics::micro_macro_calibration(scores, ctx.truth);

  std::vector<std::pair<std::string, const metrics::RocCurve*>> curves;
  for (std::size_t k = 0; k < ctx.classes; ++k) curves.emplace_back(ctx.class_name(k), &roc.per_class[k]);
  curves.emplace_back("micro", &roc.micro);
  curves.emplace_back("macro", &roc.macro);
  {
    auto csv = ctx.open("roc.csv", {"curve", "threshold", "fpr", "tpr", "defined"});
    for (const auto& [name, curve] : curves)
      for (const auto& p : curve->points)
        csv.write(CsvRow() << name << p.threshold << p.fpr << p.tpr << curve->defined);
  }

  std::vector<std::pair<std::string, const metrics::CalibrationCurve*>> calib;
  for (std::size_t k = 0; k < ctx.classes; ++k) calib.emplace_back(ctx.class_name(k), &cal.per_class[k]);
  calib.emplace_back("micro", &cal.micro);
  calib.emplace_back("macro", &cal.macro);
  {
    auto csv = ctx.open("calibration.csv", {"curve", "bin", "lo", "hi", "mean_score", "frequency", "count"});
    for (const auto& [name, curve] : calib)
      for (std::size_t b = 0; b < curve->bins.size(); ++b) {
        const auto& bin = curve->bins[b];
        csv.write(CsvRow() << name << b << bin.lo << bin.hi << bin.mean_score << bin.frequency << bin.count);
      }
  }

  std::vector<std::string> header = {"metric"};
  for (const auto& c : curves) header.push_back(c.first);
  auto csv = ctx.open("auroc_ece_ecd.csv", header);
  auto auroc_row = CsvRow() << "auroc";
  auto fpr_row = CsvRow() << "fpr_at_95tpr";
  for (const auto& [name, curve] : curves) {
    auroc_row << (curve->defined ? std::optional<double>(curve->auroc) : std::nullopt);
    fpr_row << (curve->defined ? std::optional<double>(metrics::fpr_at_tpr(*curve, 0.95).fpr) : std::nullopt);
  }
  csv.write(auroc_row);
  const std::pair<const char*, double metrics::CalibrationCurve::*> rows[] = {
      {"ece", &metrics::CalibrationCurve::ece},
      {"ece_abs", &metrics::CalibrationCurve::ece_abs},
      {"ecd", &metrics::CalibrationCurve::ecd}};
  for (const auto& [name, member] : rows) {
    CsvRow row;
    row << name;
    for (const auto& c : calib) row << (*c.second).*member;
    csv.write(row);
  }
  csv.write(fpr_row);
}

void write_rank_stats(Context& ctx) {
  const auto stats = bayes::rank_statistics(ctx.run.summaries);
  auto csv = ctx.open("rank_stats.csv", {"group", "count", "statistic", "p1", "p2", "p3", "rank_gap"});
  std::vector<std::pair<const char*, const bayes::RankStatsRow*>> groups = {{"all", &stats.all}};
  if (ctx.run.labeled) {
    groups.emplace_back("correct", &stats.correct);
    groups.emplace_back("missed", &stats.missed);
  }
  const std::pair<const char*, double bayes::DescriptiveStats::*> rows[] = {
      {"mean", &bayes::DescriptiveStats::mean},
      {"median", &bayes::DescriptiveStats::median},
      {"min", &bayes::DescriptiveStats::min},
      {"max", &bayes::DescriptiveStats::max}};
  auto cell = [](const std::optional<bayes::DescriptiveStats>& d, double bayes::DescriptiveStats::*m) {
    return d ? std::optional<double>((*d).*m) : std::nullopt;
  };
  for (const auto& [group, r] : groups)
    for (const auto& [name, member] : rows)
      csv.write(CsvRow() << group << r->count << name << cell(r->p1, member) << cell(r->p2, member)
                         << cell(r->p3, member) << cell(r->gap, member));
}

void write_esf(Context& ctx) {
  const auto grid = bayes::uniform_grid(0.0, 1.0, 101);
  auto csv = ctx.open("esf.csv", {"group", "threshold", "p1", "p2", "p3", "rank_gap"});
  std::vector<std::string> groups = {"all"};
  if (ctx.run.labeled) {
    groups.emplace_back("correct");
    groups.emplace_back("missed");
  }
  for (const auto& group : groups) {
    std::vector<double> p1, p2, p3, gap;
    for (const auto& s : ctx.run.summaries) {
      if (group == "correct" && !s.correct()) continue;
      if (group == "missed" && s.correct()) continue;
      p1.push_back(s.ranked[0]);
      p2.push_back(s.ranked[1]);
      p3.push_back(s.ranked.size() > 2 ? s.ranked[2] : 0.0);
      gap.push_back(s.rank_gap);
    }
    const auto e1 = bayes::esf(p1, grid), e2 = bayes::esf(p2, grid), e3 = bayes::esf(p3, grid),
               eg = bayes::esf(gap, grid);
    for (std::size_t g = 0; g < grid.size(); ++g)
      csv.write(CsvRow() << group << grid[g] << e1[g] << e2[g] << e3[g] << eg[g]);
  }
}

void write_score_density(Context& ctx) {
  constexpr std::size_t kBins = 50;
  const auto parts = bayes::score_densities(ctx.run.sets, ctx.run.summaries, kBins);
  auto csv = ctx.open("score_density.csv", {"true_class", "true_class_name", "correct", "inputs", "class",
                                            "class_name", "bin", "lo", "hi", "count", "density"});
  const double width = 1.0 / static_cast<double>(kBins);
  for (const auto& part : parts) {
    const std::string true_name = part.true_class < 0 ? "unlabeled" : ctx.class_name(part.true_class);
    const char* correct = part.true_class < 0 ? "" : (part.correct ? "1" : "0");
    for (std::size_t k = 0; k < part.per_class.size(); ++k) {
      const auto& h = part.per_class[k];
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        const double density =
            h.total ? static_cast<double>(h.counts[b]) / (static_cast<double>(h.total) * width) : 0.0;
        csv.write(CsvRow() << part.true_class << true_name << correct << part.inputs << k << ctx.class_name(k) << b
                           << width * static_cast<double>(b) << width * static_cast<double>(b + 1) << h.counts[b]
                           << density);
      }
    }
  }
}

void write_confusion_stats(Context& ctx) {
  auto csv = ctx.open("confusion_stats.csv",
                      {"positive_class", "positive_class_name", "cell", "count", "mean_p1", "mean_p_true"});
  for (std::size_t k = 0; k < ctx.classes; ++k)
    for (const auto& row : bayes::predictive_confusion_stats(ctx.run.summaries, static_cast<int>(k)))
      csv.write(CsvRow() << k << ctx.class_name(k) << bayes::to_string(row.cell) << row.count << row.mean_p1
                         << row.mean_p_true);
}

void write_per_stock(Context& ctx) {
  std::vector<std::string> header = with_prefix({"stock", "support"}, kMetricColumns);
  for (std::size_t t = 0; t < ctx.classes; ++t)
    for (std::size_t p = 0; p < ctx.classes; ++p) header.push_back("cm_" + std::to_string(t) + "_" + std::to_string(p));
  auto csv = ctx.open("per_stock_metrics.csv", header);

  std::map<int, metrics::ConfusionMatrix> by_stock;
  metrics::ConfusionMatrix pooled(ctx.classes);
  for (std::size_t i = 0; i < ctx.windows.size(); ++i) {
    auto [it, _] = by_stock.try_emplace(ctx.windows[i].stock_id, ctx.classes);
    const auto t = static_cast<std::size_t>(ctx.truth[i]);
    const auto p = static_cast<std::size_t>(ctx.run.summaries[i].predicted_class);
    ++it->second.at(t, p);
    ++pooled.at(t, p);
  }
  auto emit = [&](const std::string& name, const metrics::ConfusionMatrix& cm) {
    CsvRow row;
    row << name << cm.total();
    for (double v : metric_values(metrics::multiclass_metrics(cm))) row << v;
    for (std::size_t t = 0; t < ctx.classes; ++t)
      for (std::size_t p = 0; p < ctx.classes; ++p) row << cm.at(t, p);
    csv.write(row);
  };
  for (const auto& [stock, cm] : by_stock) emit(std::to_string(stock), cm);
  emit("pooled", pooled);
}

void write_label_frequencies(Context& ctx) {
  auto csv = ctx.open("label_frequencies.csv", {"source", "class", "class_name", "count", "frequency"});
  const auto& run = ctx.run;
  auto emit = [&](const std::string& source, const std::vector<std::size_t>& counts) {
    std::size_t total = 0;
    for (auto c : counts) total += c;
    for (std::size_t k = 0; k < counts.size(); ++k)
      csv.write(CsvRow() << source << k << ctx.class_name(k) << counts[k]
                         << (total ? static_cast<double>(counts[k]) / static_cast<double>(total) : 0.0));
  };
  auto tally = [&](const std::function<int(const bayes::PredictiveSummary&)>& f) {
    std::vector<std::size_t> counts(ctx.classes, 0);
    for (const auto& s : run.summaries) ++counts[static_cast<std::size_t>(f(s))];
    return counts;
  };
  if (run.labeled) emit("true", tally([](const auto& s) { return *s.true_label; }));
  emit("predictive", tally([](const auto& s) { return s.predicted_class; }));
  if (!optim::is_bayesian(ctx.ckpt.kind)) return;
  emit("predictive_median", tally([](const auto& s) { return s.predicted_class_median; }));
  for (auto f : {bayes::Forecast::label_mean, bayes::Forecast::label_median, bayes::Forecast::label_mode})
    emit(bayes::to_string(f), tally([f](const auto& s) { return bayes::forecast_label(s, f); }));
  std::vector<std::size_t> draws(ctx.classes, 0);
  for (const auto& s : run.summaries)
    for (std::size_t k = 0; k < ctx.classes; ++k) draws[k] += static_cast<std::size_t>(s.label_counts[k]);
  emit("draws", draws);
}

}  // namespace

EvaluateResult evaluate(const EvaluateOptions& o) {
  const auto ckpt = Checkpoint::load(o.checkpoint);
  const model::Network net(ckpt.config.architecture());
  const auto windows = load_split(ckpt, o.data_dir, o.split);
  const auto predictor = make_predictor(net, ckpt);
  const std::size_t draws = effective_draws(ckpt.kind, o.draws.value_or(ckpt.config.ns_test));
  const auto run = run_predictive(*predictor, windows, draws, o.seed.value_or(ckpt.config.seed));
  fs::create_directories(o.out_dir);

  Context ctx{ckpt, windows, run, net.classes(), {}, o.out_dir, {}};
  EvaluateResult result;
  result.inputs = windows.size();
  result.labeled = run.labeled;

  if (run.labeled) {
    for (const auto& s : run.summaries) ctx.truth.push_back(*s.true_label);
    const auto predictive = write_multiclass(ctx);
    write_singleclass(ctx, predictive);
    write_roc_calibration(ctx);
    write_confusion_stats(ctx);
    if (o.per_stock) write_per_stock(ctx);
    result.predictive = predictive;
  } else {
    spdlog::warn("{} split has windows without true labels; writing uncertainty outputs only", o.split);
  }
  write_rank_stats(ctx);
  write_esf(ctx);
  write_score_density(ctx);
  write_label_frequencies(ctx);
  result.files = ctx.files;
  spdlog::info("evaluated {} windows with {} draws; wrote {} files to {}", windows.size(), draws,
               ctx.files.size(), o.out_dir.string());
  return result;
}

std::size_t predict(const PredictOptions& o) {
  const auto ckpt = Checkpoint::load(o.checkpoint);
  const model::Network net(ckpt.config.architecture());
  const auto windows = load_split(ckpt, o.data_dir, o.split);
  const auto predictor = make_predictor(net, ckpt);
  const std::size_t draws = effective_draws(ckpt.kind, o.draws.value_or(ckpt.config.ns_test));
  const auto run = run_predictive(*predictor, windows, draws, o.seed.value_or(ckpt.config.seed));
  const std::size_t classes = net.classes();

  std::vector<std::string> header = {"stock", "day", "anchor", "true_label"};
  for (std::size_t k = 0; k < classes; ++k) header.push_back("mean_prob_" + std::to_string(k));
  for (const char* h : {"p1", "rank_gap", "predicted", "modal", "median", "mean"}) header.emplace_back(h);
  for (std::size_t k = 0; k < classes; ++k) header.push_back("count_" + std::to_string(k));

  if (o.out_file.has_parent_path()) fs::create_directories(o.out_file.parent_path());
  CsvFile csv(o.out_file, header);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    const auto& s = run.summaries[i];
    CsvRow row;
    row << w.stock_id << w.day << w.anchor_event_index << s.true_label;
    for (double p : s.mean_probs) row << p;
    row << s.ranked[0] << s.rank_gap << s.predicted_class << s.modal_label << s.median_label_rounded
        << s.mean_label_rounded;
    for (int c : s.label_counts) row << c;
    csv.write(row);
  }
  spdlog::info("wrote {} predictions with {} draws to {}", windows.size(), draws, o.out_file.string());
  return windows.size();
}

}  // namespace btabl::app
