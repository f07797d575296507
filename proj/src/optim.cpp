#include "btabl/optim.hpp"

#include <algorithm>
#include <cmath>

#include "btabl/error.hpp"
#include "btabl/rng.hpp"

namespace btabl::optim {

Kind parse_kind(const std::string& text) {
  if (text == "vogn") return Kind::vogn;
  if (text == "adam") return Kind::adam;
  if (text == "sgd") return Kind::sgd;
  if (text == "mcd") return Kind::mcd;
  fail(ErrorKind::config, "unknown optimizer '" + text + "' (vogn, adam, sgd, mcd)");
}

const char* to_string(Kind kind) {
  switch (kind) {
    case Kind::vogn: return "vogn";
    case Kind::adam: return "adam";
    case Kind::sgd: return "sgd";
    case Kind::mcd: return "mcd";
  }
  return "?";
}

VariationalState VariationalState::init(std::size_t params, std::size_t n, double alpha,
                                        double beta, double grad_momentum, double h_decay) {
  require(n >= 1, ErrorKind::config, "VOGN needs a non-empty training set");
  require(alpha > 0.0, ErrorKind::config, "prior precision must be positive");
  VariationalState st;
  st.n = n;
  st.alpha_tilde = alpha / static_cast<double>(n);
  st.beta = beta;
  st.grad_momentum = grad_momentum;
  st.h_decay = h_decay;
  st.mu.assign(params, 0.0);
  st.s.assign(params, std::max(1.0 / static_cast<double>(n) - st.alpha_tilde, 0.0));
  st.grad_avg.assign(params, 0.0);
  st.validate();
  return st;
}

void VariationalState::validate() const {
  require(alpha_tilde > 0.0, ErrorKind::config, "alpha_tilde must be positive");
  require(beta > 0.0 && beta <= 1.0, ErrorKind::config, "VOGN learning rate must be in (0,1]");
  require(grad_momentum >= 0.0 && grad_momentum < 1.0, ErrorKind::config,
          "gradient momentum must be in [0,1)");
  require(h_decay >= 0.0 && h_decay <= 1.0, ErrorKind::config, "h_decay must be in [0,1]");
  require(mu.size() == s.size() && mu.size() == grad_avg.size(), ErrorKind::shape,
          "VOGN state vectors differ in length");
}

std::vector<double> VariationalState::sigma2() const {
  std::vector<double> out(s.size());
  const double nn = static_cast<double>(n);
  for (std::size_t j = 0; j < s.size(); ++j) out[j] = 1.0 / (nn * (s[j] + alpha_tilde));
  return out;
}

std::vector<double> vogn_sample(const VariationalState& state, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> theta(state.mu.size());
  const double nn = static_cast<double>(state.n);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double sigma = std::sqrt(1.0 / (nn * (state.s[j] + state.alpha_tilde)));
    theta[j] = state.mu[j] + sigma * rng.normal();
  }
  return theta;
}

void vogn_update(VariationalState& st, std::span<const double> g, std::span<const double> h) {
  const std::size_t p = st.mu.size();
  require(g.size() == p && h.size() == p, ErrorKind::shape, "VOGN update length mismatch");
  const double beta = st.beta;
  for (std::size_t j = 0; j < p; ++j) {
    const double decayed = st.h_decay * st.s[j];
    st.s[j] = std::max((1.0 - beta) * decayed + beta * h[j], 0.0);
    st.grad_avg[j] = st.grad_momentum * st.grad_avg[j] + (1.0 - st.grad_momentum) * g[j];
    st.mu[j] -= beta * (st.grad_avg[j] + st.alpha_tilde * st.mu[j]) / (st.s[j] + st.alpha_tilde);
  }
  ++st.step;
}

void vogn_step(VariationalState& st, const Matrix& per_sample_grads) {
  require(!per_sample_grads.empty() && per_sample_grads.rows() >= 1, ErrorKind::contract,
          "vogn_step: empty gradient matrix");
  const std::size_t p = st.mu.size();
  require(per_sample_grads.cols() == p, ErrorKind::shape, "vogn_step: gradient width mismatch");
  std::vector<double> g(p, 0.0);
  std::vector<double> h(p, 0.0);
  for (std::size_t i = 0; i < per_sample_grads.rows(); ++i) {
    auto row = per_sample_grads.row(i);
    for (std::size_t j = 0; j < p; ++j) {
      g[j] += row[j];
      h[j] += row[j] * row[j];
    }
  }
  const double m = static_cast<double>(per_sample_grads.rows());
  for (std::size_t j = 0; j < p; ++j) {
    g[j] /= m;
    h[j] /= m;
  }
  vogn_update(st, g, h);
}

void vogn_warmup_step(VariationalState& st, std::span<const double> mean_grad) {
  require(mean_grad.size() == st.mu.size(), ErrorKind::shape, "warm-up gradient length mismatch");
  for (std::size_t j = 0; j < st.mu.size(); ++j) st.mu[j] -= st.beta * mean_grad[j];
}

AdamState AdamState::init(std::size_t params, double lr, double beta1, double beta2, double eps) {
  AdamState st;
  st.m.assign(params, 0.0);
  st.v.assign(params, 0.0);
  st.lr = lr;
  st.beta1 = beta1;
  st.beta2 = beta2;
  st.eps = eps;
  return st;
}

void adam_step(AdamState& st, std::span<double> params, std::span<const double> grad) {
  require(params.size() == st.m.size() && grad.size() == st.m.size(), ErrorKind::shape,
          "adam_step: length mismatch");
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(st.beta1, t);
  const double c2 = 1.0 - std::pow(st.beta2, t);
  for (std::size_t j = 0; j < params.size(); ++j) {
    st.m[j] = st.beta1 * st.m[j] + (1.0 - st.beta1) * grad[j];
    st.v[j] = st.beta2 * st.v[j] + (1.0 - st.beta2) * grad[j] * grad[j];
    const double m_hat = st.m[j] / c1;
    const double v_hat = st.v[j] / c2;
    params[j] -= st.lr * m_hat / (std::sqrt(v_hat) + st.eps);
  }
}

SgdState SgdState::init(std::size_t params, double lr, double momentum) {
  SgdState st;
  st.velocity.assign(params, 0.0);
  st.lr = lr;
  st.momentum = momentum;
  return st;
}

void sgd_step(SgdState& st, std::span<double> params, std::span<const double> grad) {
  require(params.size() == st.velocity.size() && grad.size() == st.velocity.size(),
          ErrorKind::shape, "sgd_step: length mismatch");
  for (std::size_t j = 0; j < params.size(); ++j) {
    st.velocity[j] = st.momentum * st.velocity[j] + grad[j];
    params[j] -= st.lr * st.velocity[j];
  }
}

double PlateauSchedule::observe(double validation_loss, double lr) {
  if (validation_loss < best_ - options_.min_delta) {
    best_ = validation_loss;
    stale_ = 0;
    return lr;
  }
  if (++stale_ >= options_.patience) {
    stale_ = 0;
    ++reductions_;
    return lr * options_.factor;
  }
  return lr;
}

double lr_schedule(std::span<const double> validation_losses, double lr,
                   const PlateauOptions& options) {
  PlateauSchedule schedule(options);
  for (double loss : validation_losses) lr = schedule.observe(loss, lr);
  return lr;
}

}  // namespace btabl::optim
