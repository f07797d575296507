#include <doctest.h>

#include <cmath>
#include <numeric>

#include "btabl/error.hpp"
#include "btabl/model.hpp"
#include "oracles.hpp"

using namespace btabl;
using namespace btabl::model;

namespace {

TablParams random_params(oracle::Gen& g, const TablShape& s, double lambda) {
  TablParams p;
  p.w1 = g.matrix(s.d_out, s.d, 0.5);
  p.w = g.matrix(s.t, s.t, 0.5);
  p.w2 = g.matrix(s.t, s.t_out, 0.5);
  p.b = g.matrix(s.d_out, s.t_out, 0.5);
  p.lambda = lambda;
  return p;
}

double norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return norm(d) / std::max(norm(a) + norm(b), 1e-12);
}

std::vector<lob::LobWindow> random_windows(oracle::Gen& g, std::size_t n, std::size_t d, std::size_t t) {
  std::vector<lob::LobWindow> out(n);
  for (auto& w : out) {
    w.x = g.matrix(d, t);
    w.label = g.integer(0, 2);
  }
  return out;
}

}  // namespace

TEST_CASE("lambda zero bypasses attention and identity weights select a column") {
  const TablShape s{3, 4, 3, 1, Activation::identity};
  oracle::Gen g(1);
  const Matrix x = g.matrix(3, 4);
  TablParams p = TablParams::zeros(s);
  p.w1 = Matrix::identity(3);
  p.w2(3, 0) = 1.0;
  p.lambda = 0.0;
  const auto base = tabl_forward(x, p, s).logits;
  for (std::size_t i = 0; i < 3; ++i) CHECK(base[i] == x(i, 3));

  p.w = g.matrix(4, 4, 3.0);
  CHECK(tabl_forward(x, p, s).logits == base);

  p.lambda = -2.0;
  CHECK(tabl_forward(x, p, s).logits == base);
  CHECK(p.effective_lambda() == 0.0);
  p.lambda = 7.0;
  CHECK(p.effective_lambda() == 1.0);
}

TEST_CASE("forward pass matches a direct transcription") {
  oracle::Gen g(2);
  for (int trial = 0; trial < 25; ++trial) {
    const TablShape s{g.size(1, 6), g.size(1, 8), g.size(1, 4), g.size(1, 3),
                      g.coin() ? Activation::relu : Activation::identity};
    const auto p = random_params(g, s, g.uniform(-0.2, 1.2));
    const Matrix x = g.matrix(s.d, s.t);
    const auto got = tabl_forward(x, p, s);
    const Matrix want = oracle::tabl_forward(x, p.w1, p.w, p.w2, p.b, p.lambda, s.activation == Activation::relu);
    REQUIRE(got.logits.size() == s.outputs());
    for (std::size_t i = 0; i < s.d_out; ++i)
      for (std::size_t j = 0; j < s.t_out; ++j)
        CHECK(got.logits[i * s.t_out + j] == doctest::Approx(want(i, j)).epsilon(1e-12));
  }
}

TEST_CASE("flatten and unflatten are inverse") {
  oracle::Gen g(3);
  const TablShape s{3, 5, 2, 2, Activation::identity};
  const auto p = random_params(g, s, 0.3);
  const auto flat = p.flatten();
  CHECK(flat.size() == s.param_count());
  CHECK(flat.back() == 0.3);
  CHECK(flat.front() == p.w1(0, 0));
  CHECK(TablParams::unflatten(flat, s).flatten() == flat);
  std::vector<double> short_flat(flat.begin(), flat.end() - 1);
  CHECK_THROWS_AS((void)TablParams::unflatten(short_flat, s), Error);
}

TEST_CASE("negative log-likelihood") {
  const std::vector<double> zero{0.0, 0.0, 0.0};
  for (int c = 0; c < 3; ++c) CHECK(log_softmax_nll(zero, c).loss == doctest::Approx(std::log(3.0)).epsilon(1e-15));

  const std::vector<double> huge{1000.0, 0.0, 0.0};
  const auto wrong = log_softmax_nll(huge, 1);
  CHECK(std::isfinite(wrong.loss));
  CHECK(wrong.loss == doctest::Approx(1000.0));
  CHECK(log_softmax_nll(huge, 0).loss == doctest::Approx(0.0));

  const std::vector<double> sure{40.0, 0.0, 0.0};
  const auto r = log_softmax_nll(sure, 0);
  double worst = 0.0;
  for (std::size_t k = 0; k < 3; ++k) worst = std::max(worst, std::abs(std::exp(r.log_probs[k]) - (k == 0 ? 1.0 : 0.0)));
  CHECK(worst < 1e-12);

  oracle::Gen g(4);
  for (int i = 0; i < 50; ++i) {
    const auto z = g.vec(3, 3.0);
    const int label = g.integer(0, 2);
    CHECK(log_softmax_nll(z, label).loss == doctest::Approx(oracle::nll(z, label)).epsilon(1e-12));
  }
  CHECK_THROWS_AS((void)log_softmax_nll(zero, 3), Error);
}

TEST_CASE("default architecture parameter count") {
  const Architecture a;
  CHECK(a.param_count() == 234);
  CHECK(Network(a).param_count() == 234);
  Architecture deep;
  deep.hidden = {{20, 5}};
  const std::size_t hidden = 20 * 40 + 10 * 5 + 20 * 5;
  const std::size_t head = 3 * 20 + 25 + 5 + 3 + 1;
  CHECK(deep.param_count() == hidden + head);
  CHECK(Network(deep).tabl_offset() == hidden);
}

TEST_CASE("analytic gradients agree with central differences") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    oracle::Gen g(seed * 101);
    Architecture arch;
    arch.d = 4;
    arch.t = 5;
    arch.d_out = 3;
    arch.t_out = 1;
    if (seed % 2 == 0) arch.hidden = {{3, 4}};
    arch.activation = seed % 3 == 0 ? Activation::relu : Activation::identity;
    const Network net(arch);
    auto theta = g.vec(net.param_count(), 0.5);
    theta.back() = g.uniform(0.2, 0.8);
    const Matrix x = g.matrix(4, 5);
    const int label = g.integer(0, 2);

    const auto pass = net.forward(x, theta);
    const auto analytic = net.backward(pass, label, theta);
    const auto numeric = oracle::finite_difference(
        [&](const std::vector<double>& th) { return -net.forward(x, th).log_probs[static_cast<std::size_t>(label)]; },
        theta);
    CAPTURE(seed);
    CHECK(relative_error(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("gradient with respect to the layer input") {
  oracle::Gen g(5);
  const TablShape s{3, 4, 2, 2, Activation::identity};
  const auto p = random_params(g, s, 0.6);
  Matrix x = g.matrix(3, 4);
  const auto upstream = g.vec(s.outputs());
  auto objective = [&](const Matrix& in) {
    const auto y = tabl_forward(in, p, s).logits;
    return std::inner_product(y.begin(), y.end(), upstream.begin(), 0.0);
  };
  const auto grad = tabl_backward(tabl_forward(x, p, s).cache, upstream, p);
  std::vector<double> flat(x.data().begin(), x.data().end());
  const auto numeric = oracle::finite_difference(
      [&](const std::vector<double>& v) {
        Matrix m(3, 4);
        std::copy(v.begin(), v.end(), m.data().begin());
        return objective(m);
      },
      flat);
  const std::vector<double> analytic(grad.dx.data().begin(), grad.dx.data().end());
  CHECK(relative_error(analytic, numeric) < 1e-6);
}

TEST_CASE("minibatch gradients") {
  oracle::Gen g(6);
  const Network net(Architecture{});
  const auto theta = net.init_params(9);
  const auto windows = random_windows(g, 8, 40, 10);

  std::span<const lob::LobWindow> one(windows.data(), 1);
  const auto single = batch_forward_backward(net, one, theta);
  const auto direct = net.backward(net.forward(windows[0].x, theta), *windows[0].label, theta);
  CHECK(single.mean_grad == direct);
  CHECK(single.per_sample.rows() == 1);

  std::vector<lob::LobWindow> dup(4, windows[0]);
  const auto four = batch_forward_backward(net, dup, theta);
  for (std::size_t j = 0; j < direct.size(); ++j) CHECK(four.mean_grad[j] == doctest::Approx(direct[j]).epsilon(1e-14));
  CHECK(four.mean_loss == doctest::Approx(single.mean_loss));

  const auto eight = batch_forward_backward(net, windows, theta);
  std::vector<double> mean(net.param_count(), 0.0);
  double loss = 0.0;
  for (const auto& w : windows) {
    const auto pass = net.forward(w.x, theta);
    loss += -pass.log_probs[static_cast<std::size_t>(*w.label)];
    const auto gi = net.backward(pass, *w.label, theta);
    for (std::size_t j = 0; j < gi.size(); ++j) mean[j] += gi[j] / 8.0;
  }
  CHECK(eight.mean_loss == doctest::Approx(loss / 8.0).epsilon(1e-13));
  CHECK(relative_error(eight.mean_grad, mean) < 1e-13);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto gi = net.backward(net.forward(windows[i].x, theta), *windows[i].label, theta);
    for (std::size_t j = 0; j < gi.size(); ++j) REQUIRE(eight.per_sample(i, j) == gi[j]);
  }
}

TEST_CASE("probabilities form a distribution and dropout masks are seeded") {
  oracle::Gen g(7);
  const Network net(Architecture{});
  const auto theta = net.init_params(1);
  CHECK(theta == net.init_params(1));
  CHECK(theta != net.init_params(2));
  for (int i = 0; i < 10; ++i) {
    const auto p = net.probabilities(g.matrix(40, 10), theta);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    for (double v : p) CHECK(v >= 0.0);
  }

  const auto m = dropout_mask(40, 10, 0.25, 77);
  CHECK(max_abs_diff(m, dropout_mask(40, 10, 0.25, 77)) == 0.0);
  std::size_t zeros = 0;
  for (double v : m.data()) {
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
    zeros += v == 0.0;
  }
  CHECK(zeros > 50);
  CHECK(zeros < 150);
  const auto keep_all = dropout_mask(3, 3, 0.0, 1);
  for (double v : keep_all.data()) CHECK(v == 1.0);
  CHECK_THROWS_AS((void)dropout_mask(2, 2, 1.0, 1), Error);
}

TEST_CASE("input shape is checked") {
  const Network net(Architecture{});
  const auto theta = net.init_params(1);
  CHECK_THROWS_AS((void)net.forward(Matrix(10, 40), theta), Error);
  std::vector<double> wrong(theta.size() + 1, 0.0);
  CHECK_THROWS_AS((void)net.forward(Matrix(40, 10), wrong), Error);
}
