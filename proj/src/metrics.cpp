#include "btabl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "btabl/error.hpp"

namespace btabl::metrics {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (auto c : counts_) n += c;
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t c = 0; c < classes_; ++c) n += at(c, c);
  return n;
}

std::size_t ConfusionMatrix::support(std::size_t c) const {
  std::size_t n = 0;
  for (std::size_t p = 0; p < classes_; ++p) n += at(c, p);
  return n;
}

std::size_t ConfusionMatrix::predicted(std::size_t c) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < classes_; ++t) n += at(t, c);
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  require(other.classes_ == classes_, ErrorKind::shape, "confusion matrices differ in classes");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          std::size_t classes) {
  require(truth.size() == predicted.size(), ErrorKind::contract,
          "confusion: label sequences differ in length");
  ConfusionMatrix cm(classes);
  const int c = static_cast<int>(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= c || predicted[i] < 0 || predicted[i] >= c)
      fail(ErrorKind::contract, "confusion: label out of range at position " + std::to_string(i));
    ++cm.at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
  }
  return cm;
}

namespace {

double ratio(std::size_t num, std::size_t den, bool& flag) {
  if (den == 0) {
    flag = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

ClassMetrics single_class_metrics(const ConfusionMatrix& cm, std::size_t cls) {
  require(cls < cm.classes(), ErrorKind::index, "class index out of range");
  ClassMetrics m;
  const std::size_t total = cm.total();
  m.tp = cm.at(cls, cls);
  m.support = cm.support(cls);
  m.fn = m.support - m.tp;
  m.fp = cm.predicted(cls) - m.tp;
  m.tn = total - m.tp - m.fn - m.fp;
  bool flag = false;
  m.precision = ratio(m.tp, m.tp + m.fp, flag);
  m.recall = ratio(m.tp, m.tp + m.fn, flag);
  m.f1 = harmonic(m.precision, m.recall);
  m.accuracy = ratio(m.tp + m.tn, total, flag);
  m.tpr = m.recall;
  m.fnr = ratio(m.fn, m.tp + m.fn, flag);
  m.tnr = ratio(m.tn, m.tn + m.fp, flag);
  m.fpr = ratio(m.fp, m.fp + m.tn, flag);
  m.fdr = ratio(m.fp, m.fp + m.tp, flag);
  m.zero_division = flag;
  return m;
}

MetricsReport multiclass_metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  require(total > 0, ErrorKind::contract, "multiclass_metrics: empty confusion matrix");
  MetricsReport r;
  r.total = total;
  const std::size_t classes = cm.classes();
  std::size_t pooled_tp = 0, pooled_tp_fp = 0, pooled_tp_fn = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    auto m = single_class_metrics(cm, c);
    pooled_tp += m.tp;
    pooled_tp_fp += m.tp + m.fp;
    pooled_tp_fn += m.tp + m.fn;
    r.zero_division = r.zero_division || m.zero_division;
    r.per_class.push_back(m);
  }
  bool flag = false;
  // Pooled counts: sum(TP+FP) = sum(TP+FN) = total, so all three coincide with accuracy.
  r.accuracy = ratio(cm.trace(), total, flag);
  r.micro_precision = ratio(pooled_tp, pooled_tp_fp, flag);
  r.micro_recall = ratio(pooled_tp, pooled_tp_fn, flag);
  r.micro_f1 = ratio(2 * pooled_tp, pooled_tp_fp + pooled_tp_fn, flag);

  const double n = static_cast<double>(classes);
  const double w = static_cast<double>(total);
  for (const auto& m : r.per_class) {
    r.macro_precision += m.precision / n;
    r.macro_recall += m.recall / n;
    r.macro_f1 += m.f1 / n;
    r.weighted_precision += static_cast<double>(m.support) * m.precision / w;
    r.weighted_f1 += static_cast<double>(m.support) * m.f1 / w;
  }
  // support_c * (TP_c / support_c) telescopes to TP_c.
  r.weighted_recall = ratio(pooled_tp, total, flag);
  return r;
}

std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int k = 1; k <= 20; ++k) t.push_back(static_cast<double>(k) / 20.0);
  return t;
}

double trapezoid_auroc(std::span<const RocPoint> points) {
  std::vector<std::pair<double, double>> xy;
  xy.reserve(points.size() + 2);
  xy.emplace_back(0.0, 0.0);
  for (const auto& p : points) xy.emplace_back(p.fpr, p.tpr);
  xy.emplace_back(1.0, 1.0);
  std::sort(xy.begin(), xy.end());
  double area = 0.0;
  for (std::size_t i = 1; i < xy.size(); ++i)
    area += 0.5 * (xy[i].first - xy[i - 1].first) * (xy[i].second + xy[i - 1].second);
  return area;
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> positives,
                   std::span<const double> thresholds) {
  require(scores.size() == positives.size(), ErrorKind::contract,
          "roc_curve: scores and truths differ in length");
  std::size_t n_pos = 0;
  for (int p : positives) n_pos += p ? 1 : 0;
  const std::size_t n_neg = positives.size() - n_pos;
  RocCurve curve;
  if (n_pos == 0 || n_neg == 0) return curve;
  curve.defined = true;
  for (double tau : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] < tau) continue;
      (positives[i] ? tp : fp) += 1;
    }
    curve.points.push_back({tau, static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  curve.auroc = trapezoid_auroc(curve.points);
  return curve;
}

MultiRoc micro_macro_roc(const Matrix& scores, std::span<const int> labels,
                         std::span<const double> thresholds) {
  require(scores.rows() == labels.size(), ErrorKind::contract,
          "micro_macro_roc: scores and labels differ in length");
  const std::size_t classes = scores.cols();
  require(classes >= 2, ErrorKind::contract, "micro_macro_roc: need at least two classes");
  MultiRoc out;
  std::vector<double> pooled_scores;
  std::vector<int> pooled_truth;
  pooled_scores.reserve(scores.size());
  pooled_truth.reserve(scores.size());
  std::vector<double> column(labels.size());
  std::vector<int> truth(labels.size());
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      column[i] = scores(i, c);
      truth[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
    }
    pooled_scores.insert(pooled_scores.end(), column.begin(), column.end());
    pooled_truth.insert(pooled_truth.end(), truth.begin(), truth.end());
    out.per_class.push_back(roc_curve(column, truth, thresholds));
    if (!out.per_class.back().defined) out.excluded.push_back(c);
  }
  out.micro = roc_curve(pooled_scores, pooled_truth, thresholds);

  std::size_t defined = 0;
  for (const auto& c : out.per_class) defined += c.defined ? 1 : 0;
  if (defined == 0) return out;
  out.macro.defined = true;
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    RocPoint p{thresholds[k], 0.0, 0.0};
    for (const auto& c : out.per_class) {
      if (!c.defined) continue;
      p.fpr += c.points[k].fpr / static_cast<double>(defined);
      p.tpr += c.points[k].tpr / static_cast<double>(defined);
    }
    out.macro.points.push_back(p);
  }
  out.macro.auroc = trapezoid_auroc(out.macro.points);
  return out;
}

CalibrationCurve calibration(std::span<const double> scores, std::span<const int> positives,
                             std::size_t bins) {
  require(scores.size() == positives.size(), ErrorKind::contract,
          "calibration: scores and truths differ in length");
  require(bins >= 1, ErrorKind::config, "calibration needs at least one bin");
  CalibrationCurve curve;
  curve.total = scores.size();
  // Neumaier-compensated per-bin score sums.
  std::vector<double> score_sum(bins, 0.0), score_comp(bins, 0.0);
  std::vector<std::size_t> pos(bins, 0);
  curve.bins.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    curve.bins[b].lo = static_cast<double>(b) / static_cast<double>(bins);
    curve.bins[b].hi = static_cast<double>(b + 1) / static_cast<double>(bins);
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = std::clamp(scores[i], 0.0, 1.0);
    const auto b = std::min(static_cast<std::size_t>(s * static_cast<double>(bins)), bins - 1);
    const double t = score_sum[b] + scores[i];
    score_comp[b] += std::abs(score_sum[b]) >= std::abs(scores[i]) ? (score_sum[b] - t) + scores[i]
                                                                    : (scores[i] - t) + score_sum[b];
    score_sum[b] = t;
    pos[b] += positives[i] ? 1 : 0;
    ++curve.bins[b].count;
  }
  if (curve.total == 0) return curve;
  const double n = static_cast<double>(curve.total);
  double sq = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    auto& bin = curve.bins[b];
    if (bin.count == 0) continue;
    const double cnt = static_cast<double>(bin.count);
    bin.mean_score = (score_sum[b] + score_comp[b]) / cnt;
    bin.frequency = static_cast<double>(pos[b]) / cnt;
    const double gap = bin.frequency - bin.mean_score;
    curve.ece += cnt / n * gap;
    curve.ece_abs += cnt / n * std::abs(gap);
    sq += cnt / n * gap * gap;
  }
  curve.ecd = std::sqrt(sq);
  return curve;
}

MultiCalibration micro_macro_calibration(const Matrix& scores, std::span<const int> labels,
                                         std::size_t bins) {
  require(scores.rows() == labels.size(), ErrorKind::contract,
          "calibration: scores and labels differ in length");
  const std::size_t classes = scores.cols();
  MultiCalibration out;
  std::vector<double> pooled_scores;
  std::vector<int> pooled_truth;
  std::vector<double> column(labels.size());
  std::vector<int> truth(labels.size());
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      column[i] = scores(i, c);
      truth[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
    }
    pooled_scores.insert(pooled_scores.end(), column.begin(), column.end());
    pooled_truth.insert(pooled_truth.end(), truth.begin(), truth.end());
    out.per_class.push_back(calibration(column, truth, bins));
  }
  out.micro = calibration(pooled_scores, pooled_truth, bins);

  auto& macro = out.macro;
  macro.total = labels.size();
  macro.bins.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    auto& mb = macro.bins[b];
    mb.lo = out.per_class.front().bins[b].lo;
    mb.hi = out.per_class.front().bins[b].hi;
    std::size_t contributing = 0;
    for (const auto& pc : out.per_class) {
      const auto& bin = pc.bins[b];
      if (bin.count == 0) continue;
      ++contributing;
      mb.mean_score += bin.mean_score;
      mb.frequency += bin.frequency;
      mb.count += bin.count;
    }
    if (contributing) {
      mb.mean_score /= static_cast<double>(contributing);
      mb.frequency /= static_cast<double>(contributing);
    }
  }
  for (const auto& pc : out.per_class) {
    macro.ece += pc.ece / static_cast<double>(classes);
    macro.ece_abs += pc.ece_abs / static_cast<double>(classes);
    macro.ecd += pc.ecd / static_cast<double>(classes);
  }
  return out;
}

FprAtTpr fpr_at_tpr(const RocCurve& curve, double target_tpr) {
  FprAtTpr out;
  if (!curve.defined) return out;
  std::vector<std::pair<double, double>> xy{{0.0, 0.0}};
  for (const auto& p : curve.points) xy.emplace_back(p.fpr, p.tpr);
  xy.emplace_back(1.0, 1.0);
  std::sort(xy.begin(), xy.end());
  for (std::size_t i = 0; i < xy.size(); ++i) {
    if (xy[i].second < target_tpr) continue;
    out.reached = true;
    if (i == 0 || xy[i].second == xy[i - 1].second) {
      out.fpr = xy[i].first;
    } else {
      const auto [x0, y0] = xy[i - 1];
      const auto [x1, y1] = xy[i];
      out.fpr = x0 + (target_tpr - y0) * (x1 - x0) / (y1 - y0);
    }
    return out;
  }
  return out;
}

}  // namespace btabl::metrics
