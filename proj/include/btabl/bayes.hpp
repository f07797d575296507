#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "btabl/linalg.hpp"
#include "btabl/model.hpp"
#include "btabl/optim.hpp"

namespace btabl::bayes {

/// Source of per-draw class probabilities for one input.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::vector<double> probabilities(const Matrix& x, std::uint64_t draw_seed) const = 0;
  virtual std::size_t classes() const = 0;
};

/// Deterministic network (ADAM / SGD); the seed is ignored.
class PointPredictor final : public Predictor {
 public:
  PointPredictor(const model::Network& net, std::vector<double> theta)
      : net_(net), theta_(std::move(theta)) {}
  std::vector<double> probabilities(const Matrix& x, std::uint64_t) const override;
  std::size_t classes() const override { return net_.classes(); }

 private:
  const model::Network& net_;
  std::vector<double> theta_;
};

/// One posterior draw theta ~ N(mu, sigma^2) per call.
class PosteriorPredictor final : public Predictor {
 public:
  PosteriorPredictor(const model::Network& net, const optim::VariationalState& state)
      : net_(net), state_(state) {}
  std::vector<double> probabilities(const Matrix& x, std::uint64_t draw_seed) const override;
  std::size_t classes() const override { return net_.classes(); }

 private:
  const model::Network& net_;
  const optim::VariationalState& state_;
};

/// One independent dropout mask per call.
class DropoutPredictor final : public Predictor {
 public:
  DropoutPredictor(const model::Network& net, std::vector<double> theta, double rate)
      : net_(net), theta_(std::move(theta)), rate_(rate) {}
  std::vector<double> probabilities(const Matrix& x, std::uint64_t draw_seed) const override;
  std::size_t classes() const override { return net_.classes(); }

 private:
  const model::Network& net_;
  std::vector<double> theta_;
  double rate_;
};

struct PredictiveSet {
  Matrix probs;  // N_s x C
  std::uint64_t input_id = 0;
  std::optional<int> true_label;
};

/// Seed of draw n for input i: a pure function of (base, i, n), so draws can
/// be evaluated in any order.
std::uint64_t draw_seed(std::uint64_t base_seed, std::uint64_t input_id, std::size_t draw);

PredictiveSet predictive_set(const Predictor& predictor, const Matrix& x, std::size_t draws,
                             std::uint64_t base_seed, std::uint64_t input_id,
                             std::optional<int> true_label = std::nullopt);

struct PredictiveSummary {
  std::vector<double> mean_probs;
  std::vector<double> median_probs;
  int predicted_class = 0;         // argmax of mean_probs, ties to the lowest index
  int predicted_class_median = 0;  // argmax of median_probs
  std::vector<double> ranked;      // mean_probs sorted descending
  double rank_gap = 0.0;           // ranked[0] - ranked[1]
  std::vector<int> draw_labels;    // per-draw argmax
  std::vector<int> label_counts;
  int modal_label = 0;
  int mean_label_rounded = 0;      // half-up rounding of the mean draw label
  int median_label_rounded = 0;
  std::optional<int> true_label;

  bool correct() const { return true_label && *true_label == predicted_class; }
};

int argmax(std::span<const double> values);
double median(std::vector<double> values);

PredictiveSummary summarize(const PredictiveSet& set);

struct DescriptiveStats {
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

std::optional<DescriptiveStats> describe(std::span<const double> values);

struct RankStatsRow {
  std::optional<DescriptiveStats> p1;
  std::optional<DescriptiveStats> p2;
  std::optional<DescriptiveStats> p3;
  std::optional<DescriptiveStats> gap;
  std::size_t count = 0;
};

struct RankStatistics {
  RankStatsRow correct;
  RankStatsRow missed;
  RankStatsRow all;
};

/// Descriptive statistics of the ranked predictive probabilities, split by
/// correct and miss-classified inputs. Summaries without a true label only
/// enter the `all` row.
RankStatistics rank_statistics(std::span<const PredictiveSummary> summaries);

/// Fraction of values strictly greater than each threshold.
std::vector<double> esf(std::span<const double> values, std::span<const double> grid);

std::vector<double> uniform_grid(double lo, double hi, std::size_t points);

struct Histogram {
  std::vector<std::size_t> counts;
  double mean = 0.0;
  std::size_t total = 0;
};

Histogram histogram(std::span<const double> values, std::size_t bins);

struct DensityPartition {
  int true_class = -1;  // -1 when unlabeled
  bool correct = false;
  std::size_t inputs = 0;
  std::vector<Histogram> per_class;  // histogram of per-draw probabilities of class k
};

/// Per-draw class-probability histograms for every non-empty
/// (true class, correct/miss) partition.
std::vector<DensityPartition> score_densities(std::span<const PredictiveSet> sets,
                                              std::span<const PredictiveSummary> summaries,
                                              std::size_t bins = 50);

enum class Cell { tp, fn, fp, tn };
const char* to_string(Cell c);

struct ConfusionCellStats {
  Cell cell = Cell::tp;
  std::size_t count = 0;
  std::optional<double> mean_p1;
  std::optional<double> mean_p_true;
};

/// Binary reduction with `positive_class` as positives; mean rank-1 and
/// true-class predictive probability in each TP/FN/FP/TN cell.
std::vector<ConfusionCellStats> predictive_confusion_stats(
    std::span<const PredictiveSummary> summaries, int positive_class);

enum class Forecast { predictive_mean, predictive_median, label_mean, label_median, label_mode };
const char* to_string(Forecast f);

int forecast_label(const PredictiveSummary& s, Forecast f);

}  // namespace btabl::bayes
