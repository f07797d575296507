#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "btabl/linalg.hpp"

namespace btabl::optim {

enum class Kind { vogn, adam, sgd, mcd };

Kind parse_kind(const std::string& text);
const char* to_string(Kind kind);
/// VOGN and MC dropout produce predictive distributions; ADAM and SGD are point estimates.
inline bool is_bayesian(Kind k) { return k == Kind::vogn || k == Kind::mcd; }

/// Mean-field Gaussian posterior tracked by VOGN. The variance
/// sigma^2 = 1 / (N (s + alpha_tilde)) is always derived from s.
struct VariationalState {
  std::vector<double> mu;
  std::vector<double> s;
  std::vector<double> grad_avg;
  double alpha_tilde = 0.0;
  std::size_t n = 1;
  double beta = 0.01;
  double grad_momentum = 0.0;
  double h_decay = 1.0;
  std::uint64_t step = 0;

  /// Prior N(0, I/alpha) with s initialized so that sigma^2 starts at 1
  /// (s0 = 1/N - alpha_tilde, clipped at 0).
  static VariationalState init(std::size_t params, std::size_t n, double alpha, double beta,
                               double grad_momentum = 0.0, double h_decay = 1.0);

  std::vector<double> sigma2() const;
  void validate() const;
};

/// theta = mu + sigma * eps with eps ~ N(0, I) from the given seed.
std::vector<double> vogn_sample(const VariationalState& state, std::uint64_t seed);

/// Update from an explicit mean gradient g and Hessian proxy h.
void vogn_update(VariationalState& state, std::span<const double> g, std::span<const double> h);

/// One VOGN step from per-sample gradients (M x P) evaluated at a sampled theta:
/// h_j = mean_i g_ij^2, s <- (1-beta) s + beta h, mu <- mu - beta (g + at mu)/(s + at).
void vogn_step(VariationalState& state, const Matrix& per_sample_grads);

/// Plain gradient step on mu, used during the optional warm-up phase.
void vogn_warmup_step(VariationalState& state, std::span<const double> mean_grad);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double lr = 0.01;
  double eps = 1e-8;
  std::uint64_t step = 0;

  static AdamState init(std::size_t params, double lr = 0.01, double beta1 = 0.9,
                        double beta2 = 0.999, double eps = 1e-8);
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

struct SgdState {
  std::vector<double> velocity;
  double momentum = 0.99;
  double lr = 0.01;

  static SgdState init(std::size_t params, double lr = 0.01, double momentum = 0.99);
};

/// velocity <- momentum * velocity + g; params <- params - lr * velocity
void sgd_step(SgdState& state, std::span<double> params, std::span<const double> grad);

struct PlateauOptions {
  double factor = 0.5;
  std::size_t patience = 20;
  double min_delta = 1e-4;
};

/// Reduce-on-plateau: multiply the rate by `factor` once the validation loss
/// has failed to improve on its best value by at least `min_delta` for
/// `patience` consecutive epochs.
class PlateauSchedule {
 public:
  explicit PlateauSchedule(PlateauOptions options = {}) : options_(options) {}

  double observe(double validation_loss, double lr);

  double best() const { return best_; }
  std::size_t stale_epochs() const { return stale_; }
  std::size_t reductions() const { return reductions_; }
  void restore(double best, std::size_t stale, std::size_t reductions) {
    best_ = best;
    stale_ = stale;
    reductions_ = reductions;
  }

 private:
  PlateauOptions options_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
  std::size_t reductions_ = 0;
};

/// Replays a validation-loss history and returns the resulting rate.
double lr_schedule(std::span<const double> validation_losses, double lr,
                   const PlateauOptions& options = {});

}  // namespace btabl::optim
