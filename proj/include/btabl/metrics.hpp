#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "btabl/linalg.hpp"

namespace btabl::metrics {

/// counts(t, p): rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const { return classes_; }
  std::size_t& at(std::size_t truth, std::size_t pred) { return counts_[truth * classes_ + pred]; }
  std::size_t at(std::size_t truth, std::size_t pred) const { return counts_[truth * classes_ + pred]; }
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t support(std::size_t c) const;    // row sum
  std::size_t predicted(std::size_t c) const;  // column sum

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::size_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          std::size_t classes);

/// Binary reduction of a confusion matrix around one class.
struct ClassMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t support = 0;
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;
  double tpr = 0, fnr = 0, tnr = 0, fpr = 0, fdr = 0;
  /// True when some ratio had a zero denominator and was reported as 0.
  bool zero_division = false;
};

ClassMetrics single_class_metrics(const ConfusionMatrix& cm, std::size_t cls);

struct MetricsReport {
  std::size_t total = 0;
  double accuracy = 0;
  double micro_precision = 0, micro_recall = 0, micro_f1 = 0;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double weighted_precision = 0, weighted_recall = 0, weighted_f1 = 0;
  std::vector<ClassMetrics> per_class;
  bool zero_division = false;
};

MetricsReport multiclass_metrics(const ConfusionMatrix& cm);

struct RocPoint {
  double threshold = 0;
  double fpr = 0;
  double tpr = 0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // one per threshold, in threshold order
  double auroc = 0.0;
  bool defined = false;  // false when there are no positives or no negatives
};

/// {0.05, 0.10, ..., 1.00}
std::vector<double> default_thresholds();

/// Trapezoidal area under the given (fpr, tpr) points after adding the
/// (0,0) and (1,1) endpoints and sorting by fpr, then tpr.
double trapezoid_auroc(std::span<const RocPoint> points);

/// Retains samples whose score is >= tau and computes TPR/FPR of the retained
/// positives/negatives against the full positive/negative totals.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> positives,
                   std::span<const double> thresholds);

struct MultiRoc {
  std::vector<RocCurve> per_class;
  RocCurve micro;
  RocCurve macro;
  std::vector<std::size_t> excluded;  // classes with undefined curves, left out of the macro average
};

/// scores: n x C class probabilities; labels: true class per row.
MultiRoc micro_macro_roc(const Matrix& scores, std::span<const int> labels,
                         std::span<const double> thresholds);

struct CalibrationBin {
  double lo = 0, hi = 0;
  double mean_score = 0;
  double frequency = 0;
  std::size_t count = 0;
};

struct CalibrationCurve {
  std::vector<CalibrationBin> bins;
  double ece = 0;      // signed: sum (count/n)(frequency - mean score)
  double ece_abs = 0;  // conventional absolute-gap ECE
  double ecd = 0;      // sqrt(sum over non-empty bins (count/n)(frequency - mean score)^2)
  std::size_t total = 0;
};

CalibrationCurve calibration(std::span<const double> scores, std::span<const int> positives,
                             std::size_t bins = 20);

struct MultiCalibration {
  std::vector<CalibrationCurve> per_class;
  CalibrationCurve micro;
  /// Bin-wise average over classes with a non-empty bin; ece/ecd are the
  /// class means of the per-class values.
  CalibrationCurve macro;
};

MultiCalibration micro_macro_calibration(const Matrix& scores, std::span<const int> labels,
                                         std::size_t bins = 20);

struct FprAtTpr {
  double fpr = 1.0;
  bool reached = false;
};

/// Linear interpolation of FPR at the first point whose TPR reaches the
/// target, walking the curve sorted by (fpr, tpr) from (0,0) to (1,1).
FprAtTpr fpr_at_tpr(const RocCurve& curve, double target_tpr = 0.95);

}  // namespace btabl::metrics
