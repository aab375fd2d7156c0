#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "crysdiff/coord_diffusion.hpp"
#include "crysdiff/crystal.hpp"
#include "crysdiff/error.hpp"
#include "crysdiff/lattice_diffusion.hpp"
#include "crysdiff/symmetry.hpp"
#include "oracles.hpp"

using namespace crysdiff;

TEST_CASE("sigma schedule") {
  const SigmaSchedule s = make_sigma_schedule(1000);
  CHECK(s.sigma(1) == doctest::Approx(0.005 * std::pow(100.0, 1.0 / 1000.0)).epsilon(1e-12));
  CHECK(s.sigma(1000) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.sigma(0) == 0.005);
  for (int t = 2; t <= 1000; ++t) CHECK(s.sigma(t) > s.sigma(t - 1));
  CHECK_THROWS_AS(make_sigma_schedule(0), Error);
  CHECK_THROWS_AS(make_sigma_schedule(10, 0.5, 0.1), Error);
}

TEST_CASE("forward_sample_F") {
  Rng rng(1);
  std::vector<Vec3> f0{{0.1, 0.9, 0.5}, {0.0, 0.25, 0.75}};
  const SigmaSchedule tiny = make_sigma_schedule(10, 1e-13, 1e-12);
  const auto n = forward_sample_F(f0, 10, tiny, rng);
  for (std::size_t i = 0; i < 2; ++i)
    for (int c = 0; c < 3; ++c) {
      const double d = std::fabs(n.f_t[i][c] - f0[i][c]);
      CHECK(std::min(d, 1.0 - d) < 1e-9);
    }

  const SigmaSchedule s = make_sigma_schedule(100);
  Rng a(5), b(5);
  const auto x = forward_sample_F(f0, 40, s, a);
  const auto y = forward_sample_F(f0, 40, s, b);
  CHECK(x.f_t == y.f_t);
  CHECK(x.eps == y.eps);

  // At sigma_max the marginal is close to uniform.
  std::vector<Vec3> origin(1, Vec3{0.3, 0.3, 0.3});
  std::vector<double> samples;
  Rng u(7);
  for (int k = 0; k < 100000; ++k) samples.push_back(forward_sample_F(origin, 100, s, u).f_t[0][0]);
  std::sort(samples.begin(), samples.end());
  double ks = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double n_k = static_cast<double>(samples.size());
    ks = std::max({ks, std::fabs((k + 1) / n_k - samples[k]), std::fabs(samples[k] - k / n_k)});
  }
  CHECK(ks < 0.01);
}

TEST_CASE("wrapped normal score") {
  CHECK(wrapped_normal_score(0.0, 0.1) == 0.0);
  CHECK(wrapped_normal_score(0.1, 0.01) == doctest::Approx(-1000.0).epsilon(1e-3));
  Rng rng(2);
  for (int k = 0; k < 100; ++k) CHECK(std::fabs(wrapped_normal_score(rng.uniform(-2, 2), 10.0)) < 1e-6);
  CHECK_THROWS_AS(wrapped_normal_score(0.1, 0.0), Error);
  CHECK_THROWS_AS(wrapped_normal_score(0.1, -1.0), Error);
  CHECK(wrapped_normal_truncation(0.01) == 4);

  for (double sigma : {0.01, 0.1, 0.5}) {
    for (int k = 0; k < 100; ++k) {
      // Dyadic residuals keep u +- 1 exact in floating point.
      const double u = std::ldexp(std::floor(std::ldexp(rng.uniform(-0.5, 0.5), 30)), -30);
      const double h = 1e-6 * std::max(sigma, 0.01);
      const double fd = (oracle::wrapped_normal_log_density(u + h, sigma) -
                         oracle::wrapped_normal_log_density(u - h, sigma)) / (2 * h);
      const double s = wrapped_normal_score(u, sigma);
      CHECK(std::fabs(s - fd) / std::max(std::fabs(fd), 1e-8) < 1e-4);
      CHECK(wrapped_normal_score(u + 1.0, sigma) == s);
      CHECK(wrapped_normal_score(u - 1.0, sigma) == s);
    }
  }
}

TEST_CASE("score is consistent under joint translation") {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    std::vector<Vec3> ft(4), f0(4);
    for (std::size_t i = 0; i < 4; ++i) {
      ft[i] = {rng.uniform(), rng.uniform(), rng.uniform()};
      f0[i] = {rng.uniform(), rng.uniform(), rng.uniform()};
    }
    const Vec3 t{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const auto a = wrapped_normal_score(ft, f0, 0.2);
    const auto b = wrapped_normal_score(translate(ft, t), translate(f0, t), 0.2);
    for (std::size_t i = 0; i < 4; ++i)
      for (int c = 0; c < 3; ++c) CHECK(std::fabs(a[i][c] - b[i][c]) < 1e-12);
  }
}

TEST_CASE("lambda weights") {
  const SigmaSchedule s = make_sigma_schedule(100);
  Rng rng(4);
  const double l1 = lambda_weight(1, s, 100000, rng);
  CHECK(l1 == doctest::Approx(s.sigma(1) * s.sigma(1)).epsilon(0.05));
  Rng r1(8), r2(9);
  for (int t : {10, 50, 100}) {
    const double a = lambda_weight(t, s, 100000, r1);
    const double b = lambda_weight(t, s, 100000, r2);
    CHECK(a > 0.0);
    CHECK(std::fabs(a - b) / a < 0.02);
  }
  const auto w = estimate_lambda_weights(s, 2000, 11);
  CHECK(w.lambdas.size() == 100);
  for (double v : w.lambdas) CHECK(v > 0.0);
  const auto w2 = estimate_lambda_weights(s, 2000, 11);
  CHECK(w.lambdas == w2.lambdas);
}

TEST_CASE("loss_F and score_from_prediction") {
  std::vector<Vec3> a{{1, 2, 3}, {4, 5, 6}};
  CHECK(loss_F(a, a, 0.7) == 0.0);
  std::vector<Vec3> b{{0, 1, 2}, {3, 4, 5}};
  CHECK(loss_F(a, b, 1.0) == 6.0);
  std::vector<Vec3> c(1);
  CHECK_THROWS_AS(loss_F(a, c, 1.0), Error);

  Rng rng(5);
  std::vector<Vec3> x(7), y(7);
  double want = 0.0;
  for (std::size_t i = 0; i < 7; ++i)
    for (int k = 0; k < 3; ++k) {
      x[i][k] = rng.normal();
      y[i][k] = rng.normal();
      want += (x[i][k] - y[i][k]) * (x[i][k] - y[i][k]);
    }
  CHECK(std::fabs(loss_F(x, y, 0.3) - 0.3 * want) < 1e-12);

  const auto s = score_from_prediction(x, 0.25);
  CHECK(s[3][1] == doctest::Approx(2.0 * x[3][1]));
}

TEST_CASE("cosine schedule") {
  const BetaSchedule s = make_cosine_schedule(1000);
  CHECK(s.alpha_bar(1) > 0.999);
  CHECK(s.alpha_bar(1000) < 0.01);
  CHECK(s.alpha_bar(0) == 1.0);
  double prod = 1.0;
  for (int t = 1; t <= 1000; ++t) {
    CHECK(s.beta(t) >= 1e-5);
    CHECK(s.beta(t) <= 0.999);
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    prod *= 1.0 - s.beta(t);
    CHECK(std::fabs(prod - s.alpha_bar(t)) < 1e-12);
    CHECK(s.alpha(t) == 1.0 - s.beta(t));
  }
  CHECK(s.posterior_variance(1) == doctest::Approx(0.0));
  CHECK(s.posterior_variance(500) < s.beta(500));
}

TEST_CASE("forward_sample_L") {
  const BetaSchedule s = make_cosine_schedule(1000);
  Rng rng(6);
  const Mat3 l0 = Mat3::from_columns({4, 0.1, 0}, {0.2, 5, -0.3}, {0, 0.4, 6});
  Mat3 eps;
  for (double& v : eps.a) v = rng.normal();
  const auto a = forward_sample_L(l0, eps, 1000, s);
  for (int q = 0; q < 9; ++q) {
    CHECK(a.l_t.a[q] == doctest::Approx(std::sqrt(s.alpha_bar(1000)) * l0.a[q] +
                                        std::sqrt(1 - s.alpha_bar(1000)) * eps.a[q]));
  }

  // Rotating L_0 and the noise rotates L_t.
  const Mat3 q = random_orthogonal(rng);
  const auto r = forward_sample_L(q * l0, q * eps, 300, s);
  const auto b = forward_sample_L(l0, eps, 300, s);
  const Mat3 qb = q * b.l_t;
  for (int k = 0; k < 9; ++k) CHECK(std::fabs(r.l_t.a[k] - qb.a[k]) < 1e-12);

  // Moments at t = 400.
  const int t = 400;
  const int n = 100000;
  std::array<double, 9> sum{}, sq{};
  Rng m(7);
  for (int k = 0; k < n; ++k) {
    const auto x = forward_sample_L(l0, t, s, m);
    for (int e = 0; e < 9; ++e) {
      sum[e] += x.l_t.a[e];
      sq[e] += x.l_t.a[e] * x.l_t.a[e];
    }
  }
  const double var = 1.0 - s.alpha_bar(t);
  for (int e = 0; e < 9; ++e) {
    const double mean = sum[e] / n;
    const double v = sq[e] / n - mean * mean;
    CHECK(std::fabs(mean - std::sqrt(s.alpha_bar(t)) * l0.a[e]) < 3.0 * std::sqrt(var / n));
    // Standard error of a sample variance is var * sqrt(2 / n).
    CHECK(std::fabs(v - var) < 3.0 * var * std::sqrt(2.0 / n));
  }
}

TEST_CASE("reverse_mean") {
  const BetaSchedule s = make_cosine_schedule(200);
  Rng rng(8);
  Mat3 lt, eh, l0, eps;
  for (int k = 0; k < 9; ++k) {
    lt.a[k] = rng.normal();
    eh.a[k] = rng.normal();
    l0.a[k] = rng.normal() * 3;
    eps.a[k] = rng.normal();
  }
  const Mat3 zero{};
  const Mat3 mu0 = reverse_mean(lt, zero, 50, s);
  for (int k = 0; k < 9; ++k) CHECK(mu0.a[k] == doctest::Approx(lt.a[k] / std::sqrt(s.alpha(50))));

  for (int t : {1, 2, 77, 200}) {
    const Mat3 mu = reverse_mean(lt, eh, t, s);
    const double c = s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t));
    for (int k = 0; k < 9; ++k) CHECK(std::fabs(mu.a[k] - (lt.a[k] - c * eh.a[k]) / std::sqrt(s.alpha(t))) < 1e-14);
  }

  // With the true noise the reverse mean is the DDPM posterior mean.
  for (int t : {2, 50, 150}) {
    const auto fwd = forward_sample_L(l0, eps, t, s);
    const Mat3 mu = reverse_mean(fwd.l_t, eps, t, s);
    const double ab = s.alpha_bar(t), ab1 = s.alpha_bar(t - 1);
    const double c0 = std::sqrt(ab1) * s.beta(t) / (1.0 - ab);
    const double ct = std::sqrt(s.alpha(t)) * (1.0 - ab1) / (1.0 - ab);
    for (int k = 0; k < 9; ++k) CHECK(std::fabs(mu.a[k] - (c0 * l0.a[k] + ct * fwd.l_t.a[k])) < 1e-10);
  }
}

TEST_CASE("loss_L") {
  Mat3 a = Mat3::identity();
  CHECK(loss_L(a, a) == 0.0);
  Mat3 b = a;
  for (double& v : b.a) v += 1.0;
  CHECK(loss_L(a, b) == 9.0);
  Rng rng(9);
  Mat3 x, y;
  double want = 0.0;
  for (int k = 0; k < 9; ++k) {
    x.a[k] = rng.normal();
    y.a[k] = rng.normal();
    want += (x.a[k] - y.a[k]) * (x.a[k] - y.a[k]);
  }
  CHECK(std::fabs(loss_L(x, y) - want) < 1e-12);
}
