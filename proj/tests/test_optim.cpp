#include <doctest.h>

#include <cmath>
#include <vector>

#include "btabl/error.hpp"
#include "btabl/optim.hpp"
#include "oracles.hpp"

using namespace btabl;
using namespace btabl::optim;

TEST_CASE("VOGN scalar update by hand") {
  auto st = VariationalState::init(1, 10, 1.0, 0.5);
  CHECK(st.alpha_tilde == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(st.s[0] == 0.0);
  st.s = {0.9};
  st.mu = {1.0};
  const std::vector<double> g{0.0}, h{0.3};
  vogn_update(st, g, h);
  CHECK(std::abs(st.s[0] - 0.6) < 1e-12);
  CHECK(std::abs(st.mu[0] - (1.0 - 0.5 * 0.1 / 0.7)) < 1e-12);
  CHECK(st.step == 1);
  CHECK(st.sigma2()[0] == doctest::Approx(1.0 / (10.0 * 0.7)).epsilon(1e-12));

  auto other = VariationalState::init(1, 10, 1.0, 0.1);
  other.s = {0.5};
  other.mu = {1.0};
  const std::vector<double> g2{0.4}, h2{1.5};
  vogn_update(other, g2, h2);
  CHECK(std::abs(other.s[0] - 0.6) < 1e-12);
  CHECK(std::abs(other.mu[0] - (1.0 - 0.05 / 0.7)) < 1e-12);
}

TEST_CASE("VOGN step reduces per-sample gradients to mean and mean square") {
  auto a = VariationalState::init(2, 100, 1.0, 0.2);
  auto b = a;
  const Matrix per_sample{{1.0, -2.0}, {3.0, 0.0}};
  vogn_step(a, per_sample);
  const std::vector<double> g{2.0, -1.0}, h{5.0, 2.0};
  vogn_update(b, g, h);
  CHECK(a.mu == b.mu);
  CHECK(a.s == b.s);
  CHECK_THROWS_AS(vogn_step(a, Matrix(1, 3)), Error);
}

TEST_CASE("initial posterior has unit variance when the prior allows it") {
  const auto st = VariationalState::init(5, 200, 0.5, 0.01);
  for (double v : st.sigma2()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  for (double m : st.mu) CHECK(m == 0.0);
  const auto clipped = VariationalState::init(3, 10, 50.0, 0.01);
  for (double s : clipped.s) CHECK(s == 0.0);
  CHECK_THROWS_AS((void)VariationalState::init(3, 10, 0.0, 0.01), Error);
  CHECK_THROWS_AS((void)VariationalState::init(3, 10, 1.0, 1.5), Error);
}

TEST_CASE("zero gradient at the origin is a fixed point of the mean") {
  auto st = VariationalState::init(4, 50, 1.0, 0.3);
  const std::vector<double> zero(4, 0.0);
  for (int i = 0; i < 20; ++i) vogn_update(st, zero, zero);
  for (double m : st.mu) CHECK(m == 0.0);
  for (double s : st.s) CHECK(s >= 0.0);
}

TEST_CASE("huge precision collapses samples onto the mean") {
  auto st = VariationalState::init(6, 10, 1.0, 0.1);
  st.mu = {1.0, -2.0, 3.0, 0.5, 0.0, 9.0};
  st.s.assign(6, 1e12);
  const auto theta = vogn_sample(st, 42);
  for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(theta[j] - st.mu[j]) < 1e-4);
  st.s.assign(6, std::numeric_limits<double>::infinity());
  CHECK(vogn_sample(st, 42) == st.mu);
}

TEST_CASE("posterior sampling is seeded and has the right moments") {
  auto st = VariationalState::init(1, 4, 1.0, 0.1);
  st.mu = {0.7};
  st.s = {0.25};
  const double var = st.sigma2()[0];
  CHECK(vogn_sample(st, 5) == vogn_sample(st, 5));
  CHECK(vogn_sample(st, 5) != vogn_sample(st, 6));
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = vogn_sample(st, static_cast<std::uint64_t>(i))[0];
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double sample_var = sq / n - mean * mean;
  CHECK(std::abs(mean - 0.7) < 5.0 * std::sqrt(var / n));
  CHECK(std::abs(sample_var / var - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("random VOGN trajectories keep s non-negative and sigma^2 consistent") {
  oracle::Gen gen(9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t p = gen.size(1, 12);
    const std::size_t n = gen.size(1, 5000);
    auto st = VariationalState::init(p, n, gen.uniform(0.01, 10.0), gen.uniform(0.001, 1.0),
                                     gen.uniform(0.0, 0.99), gen.uniform(0.5, 1.0));
    for (int k = 0; k < 30; ++k) {
      const std::size_t m = gen.size(1, 6);
      vogn_step(st, gen.matrix(m, p, gen.uniform(0.01, 10.0)));
      const auto s2 = st.sigma2();
      for (std::size_t j = 0; j < p; ++j) {
        REQUIRE(st.s[j] >= 0.0);
        REQUIRE(std::isfinite(st.mu[j]));
        REQUIRE(s2[j] > 0.0);
        REQUIRE(s2[j] == doctest::Approx(1.0 / (static_cast<double>(n) * (st.s[j] + st.alpha_tilde))));
      }
    }
  }
}

TEST_CASE("VOGN on a quadratic converges to the regularized minimizer") {
  const double a = 2.0, c = 3.0;
  auto st = VariationalState::init(1, 20, 1.0, 0.2);
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> g{a * (st.mu[0] - c)}, h{a * a};
    vogn_update(st, g, h);
  }
  CHECK(st.mu[0] == doctest::Approx(a * c / (a + st.alpha_tilde)).epsilon(1e-10));
  CHECK(st.s[0] == doctest::Approx(a * a).epsilon(1e-10));
}

TEST_CASE("warm-up moves the mean by a plain gradient step") {
  auto st = VariationalState::init(2, 10, 1.0, 0.1);
  const auto s_before = st.s;
  const std::vector<double> g{1.0, -2.0};
  vogn_warmup_step(st, g);
  CHECK(st.s == s_before);
  CHECK(st.mu[0] < 0.0);
  CHECK(st.mu[1] > 0.0);
}

TEST_CASE("ADAM minimizes a one-dimensional quadratic") {
  auto st = AdamState::init(1, 0.1);
  std::vector<double> w{0.0};
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> g{2.0 * (w[0] - 3.0)};
    adam_step(st, w, g);
  }
  CHECK(std::abs(w[0] - 3.0) < 0.05);
  CHECK(st.step == 500);

  auto first = AdamState::init(1, 0.01);
  std::vector<double> v{0.0};
  const std::vector<double> g{123.0};
  adam_step(first, v, g);
  CHECK(v[0] == doctest::Approx(-0.01).epsilon(1e-6));
}

TEST_CASE("SGD with momentum minimizes a one-dimensional quadratic") {
  auto st = SgdState::init(1, 0.01, 0.9);
  std::vector<double> w{0.0};
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> g{2.0 * (w[0] - 3.0)};
    sgd_step(st, w, g);
  }
  CHECK(std::abs(w[0] - 3.0) < 1e-6);

  auto one = SgdState::init(2, 0.5, 0.9);
  std::vector<double> p{1.0, 1.0};
  const std::vector<double> g{1.0, 2.0};
  sgd_step(one, p, g);
  sgd_step(one, p, g);
  CHECK(one.velocity[0] == doctest::Approx(1.9));
  CHECK(p[0] == doctest::Approx(1.0 - 0.5 - 0.95));
}

TEST_CASE("plateau schedule traces") {
  const PlateauOptions opt{0.5, 2, 0.0};
  const std::vector<double> improving{1.0, 0.9, 0.8, 0.7};
  CHECK(lr_schedule(improving, 1.0, opt) == 1.0);

  const std::vector<double> flat{1.0, 0.9, 0.9, 0.9};
  CHECK(lr_schedule(flat, 1.0, opt) == 0.5);

  PlateauSchedule two(opt);
  double lr = 1.0;
  for (double loss : {1.0, 1.0, 1.0, 0.5, 0.5, 0.5}) lr = two.observe(loss, lr);
  CHECK(two.reductions() == 2);
  CHECK(lr == 0.25);

  const std::vector<double> tiny{1.0, 0.99995, 0.9999};
  CHECK(lr_schedule(tiny, 1.0, PlateauOptions{0.1, 2, 1e-3}) == doctest::Approx(0.1));

  PlateauSchedule resumed(opt);
  resumed.restore(0.5, 1, 3);
  CHECK(resumed.observe(0.6, 1.0) == 0.5);
  CHECK(resumed.reductions() == 4);
}

TEST_CASE("optimizer names") {
  for (auto k : {Kind::vogn, Kind::adam, Kind::sgd, Kind::mcd}) CHECK(parse_kind(to_string(k)) == k);
  CHECK(is_bayesian(Kind::vogn));
  CHECK(is_bayesian(Kind::mcd));
  CHECK_FALSE(is_bayesian(Kind::adam));
  CHECK_THROWS_AS((void)parse_kind("rmsprop"), Error);
}
