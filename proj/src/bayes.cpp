#include "btabl/bayes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>

#include "btabl/error.hpp"
#include "btabl/rng.hpp"

namespace btabl::bayes {

std::vector<double> PointPredictor::probabilities(const Matrix& x, std::uint64_t) const {
  return net_.probabilities(x, theta_);
}

std::vector<double> PosteriorPredictor::probabilities(const Matrix& x,
                                                      std::uint64_t draw_seed) const {
  const auto theta = optim::vogn_sample(state_, draw_seed);
  return net_.probabilities(x, theta);
}

std::vector<double> DropoutPredictor::probabilities(const Matrix& x,
                                                    std::uint64_t draw_seed) const {
  const auto [rows, cols] = net_.tabl_input_shape();
  const auto mask = model::dropout_mask(rows, cols, rate_, draw_seed);
  return net_.probabilities(x, theta_, &mask);
}

std::uint64_t draw_seed(std::uint64_t base_seed, std::uint64_t input_id, std::size_t draw) {
  return derive_seed(base_seed, {stream::predictive, input_id, draw});
}

PredictiveSet predictive_set(const Predictor& predictor, const Matrix& x, std::size_t draws,
                             std::uint64_t base_seed, std::uint64_t input_id,
                             std::optional<int> true_label) {
  require(draws >= 1, ErrorKind::config, "need at least one predictive draw");
  PredictiveSet set;
  set.input_id = input_id;
  set.true_label = true_label;
  set.probs = Matrix(draws, predictor.classes());
  for (std::size_t n = 0; n < draws; ++n) {
    const auto p = predictor.probabilities(x, draw_seed(base_seed, input_id, n));
    std::copy(p.begin(), p.end(), set.probs.row(n).begin());
  }
  return set;
}

int argmax(std::span<const double> values) {
  require(!values.empty(), ErrorKind::contract, "argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k)
    if (values[k] > values[best]) best = k;
  return static_cast<int>(best);
}

double median(std::vector<double> values) {
  require(!values.empty(), ErrorKind::contract, "median of empty vector");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

PredictiveSummary summarize(const PredictiveSet& set) {
  const std::size_t draws = set.probs.rows();
  const std::size_t classes = set.probs.cols();
  require(draws >= 1 && classes >= 2, ErrorKind::contract, "summarize: empty predictive set");
  PredictiveSummary s;
  s.true_label = set.true_label;
  s.mean_probs.assign(classes, 0.0);
  s.median_probs.assign(classes, 0.0);
  s.label_counts.assign(classes, 0);
  std::vector<double> column(draws);
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t n = 0; n < draws; ++n) column[n] = set.probs(n, k);
    s.mean_probs[k] = std::accumulate(column.begin(), column.end(), 0.0) / static_cast<double>(draws);
    s.median_probs[k] = median(column);
  }
  s.predicted_class = argmax(s.mean_probs);
  s.predicted_class_median = argmax(s.median_probs);
  s.ranked = s.mean_probs;
  std::sort(s.ranked.begin(), s.ranked.end(), std::greater<>());
  s.rank_gap = s.ranked[0] - s.ranked[1];

  std::vector<double> labels(draws);
  s.draw_labels.resize(draws);
  for (std::size_t n = 0; n < draws; ++n) {
    const int l = argmax(set.probs.row(n));
    s.draw_labels[n] = l;
    labels[n] = l;
    ++s.label_counts[static_cast<std::size_t>(l)];
  }
  s.modal_label = static_cast<int>(std::max_element(s.label_counts.begin(), s.label_counts.end()) -
                                   s.label_counts.begin());
  const double mean_label = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(draws);
  s.mean_label_rounded = static_cast<int>(std::floor(mean_label + 0.5));
  s.median_label_rounded = static_cast<int>(std::floor(median(labels) + 0.5));
  return s;
}

std::optional<DescriptiveStats> describe(std::span<const double> values) {
  if (values.empty()) return std::nullopt;
  DescriptiveStats d;
  d.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  d.median = median({values.begin(), values.end()});
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  d.min = *lo;
  d.max = *hi;
  return d;
}

namespace {

RankStatsRow rank_row(const std::vector<const PredictiveSummary*>& group) {
  std::vector<double> p1, p2, p3, gap;
  for (const auto* s : group) {
    p1.push_back(s->ranked[0]);
    p2.push_back(s->ranked[1]);
    p3.push_back(s->ranked.size() > 2 ? s->ranked[2] : 0.0);
    gap.push_back(s->rank_gap);
  }
  return RankStatsRow{describe(p1), describe(p2), describe(p3), describe(gap), group.size()};
}

}  // namespace

RankStatistics rank_statistics(std::span<const PredictiveSummary> summaries) {
  std::vector<const PredictiveSummary*> correct, missed, all;
  for (const auto& s : summaries) {
    all.push_back(&s);
    if (!s.true_label) continue;
    (s.correct() ? correct : missed).push_back(&s);
  }
  return RankStatistics{rank_row(correct), rank_row(missed), rank_row(all)};
}

std::vector<double> esf(std::span<const double> values, std::span<const double> grid) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out;
  out.reserve(grid.size());
  const double n = static_cast<double>(sorted.size());
  for (double t : grid) {
    if (sorted.empty()) {
      out.push_back(0.0);
      continue;
    }
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), t);
    out.push_back(static_cast<double>(above) / n);
  }
  return out;
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t points) {
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

Histogram histogram(std::span<const double> values, std::size_t bins) {
  require(bins >= 1, ErrorKind::config, "histogram needs at least one bin");
  Histogram h;
  h.counts.assign(bins, 0);
  double sum = 0.0;
  for (double v : values) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    const auto b = std::min(static_cast<std::size_t>(clamped * static_cast<double>(bins)), bins - 1);
    ++h.counts[b];
    sum += v;
  }
  h.total = values.size();
  h.mean = values.empty() ? 0.0 : sum / static_cast<double>(values.size());
  return h;
}

std::vector<DensityPartition> score_densities(std::span<const PredictiveSet> sets,
                                              std::span<const PredictiveSummary> summaries,
                                              std::size_t bins) {
  require(sets.size() == summaries.size(), ErrorKind::contract,
          "score_densities: sets and summaries differ in length");
  require(!sets.empty(), ErrorKind::contract, "score_densities: no predictive sets");
  const std::size_t classes = sets.front().probs.cols();

  struct Key {
    int true_class;
    bool correct;
  };
  std::vector<Key> keys;
  for (int c = -1; c < static_cast<int>(classes); ++c)
    for (bool ok : {true, false}) keys.push_back({c, ok});

  std::vector<DensityPartition> out;
  for (const auto& key : keys) {
    std::vector<std::vector<double>> values(classes);
    std::size_t inputs = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const auto& s = summaries[i];
      const int tc = s.true_label ? *s.true_label : -1;
      const bool ok = s.true_label ? s.correct() : true;
      if (tc != key.true_class || ok != key.correct) continue;
      ++inputs;
      for (std::size_t n = 0; n < sets[i].probs.rows(); ++n)
        for (std::size_t k = 0; k < classes; ++k) values[k].push_back(sets[i].probs(n, k));
    }
    if (inputs == 0) continue;
    DensityPartition part;
    part.true_class = key.true_class;
    part.correct = key.correct;
    part.inputs = inputs;
    for (std::size_t k = 0; k < classes; ++k) part.per_class.push_back(histogram(values[k], bins));
    out.push_back(std::move(part));
  }
  return out;
}

const char* to_string(Cell c) {
  switch (c) {
    case Cell::tp: return "TP";
    case Cell::fn: return "FN";
    case Cell::fp: return "FP";
    case Cell::tn: return "TN";
  }
  return "?";
}

std::vector<ConfusionCellStats> predictive_confusion_stats(
    std::span<const PredictiveSummary> summaries, int positive_class) {
  std::array<double, 4> p1_sum{}, pt_sum{};
  std::array<std::size_t, 4> counts{};
  for (const auto& s : summaries) {
    if (!s.true_label) continue;
    const bool actual = *s.true_label == positive_class;
    const bool predicted = s.predicted_class == positive_class;
    const Cell cell = actual ? (predicted ? Cell::tp : Cell::fn) : (predicted ? Cell::fp : Cell::tn);
    const auto idx = static_cast<std::size_t>(cell);
    ++counts[idx];
    p1_sum[idx] += s.ranked[0];
    pt_sum[idx] += s.mean_probs[static_cast<std::size_t>(*s.true_label)];
  }
  std::vector<ConfusionCellStats> rows;
  for (Cell c : {Cell::tp, Cell::fn, Cell::fp, Cell::tn}) {
    const auto idx = static_cast<std::size_t>(c);
    ConfusionCellStats row;
    row.cell = c;
    row.count = counts[idx];
    if (counts[idx] > 0) {
      row.mean_p1 = p1_sum[idx] / static_cast<double>(counts[idx]);
      row.mean_p_true = pt_sum[idx] / static_cast<double>(counts[idx]);
    }
    rows.push_back(row);
  }
  return rows;
}

const char* to_string(Forecast f) {
  switch (f) {
    case Forecast::predictive_mean: return "predictive";
    case Forecast::predictive_median: return "predictive_median";
    case Forecast::label_mean: return "label_mean";
    case Forecast::label_median: return "label_median";
    case Forecast::label_mode: return "label_mode";
  }
  return "?";
}

int forecast_label(const PredictiveSummary& s, Forecast f) {
  switch (f) {
    case Forecast::predictive_mean: return s.predicted_class;
    case Forecast::predictive_median: return s.predicted_class_median;
    case Forecast::label_mean: return s.mean_label_rounded;
    case Forecast::label_median: return s.median_label_rounded;
    case Forecast::label_mode: return s.modal_label;
  }
  return s.predicted_class;
}

}  // namespace btabl::bayes
