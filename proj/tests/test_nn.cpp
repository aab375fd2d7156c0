#include <doctest.h>

#include <cmath>

#include "crysdiff/error.hpp"
#include "crysdiff/nn.hpp"

using namespace crysdiff;

namespace {

// Straightforward re-implementation used as the forward oracle.
std::vector<double> naive_forward(const Mlp& mlp, std::vector<double> x) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    std::vector<double> y(layer.weight.rows);
    for (std::size_t r = 0; r < layer.weight.rows; ++r) {
      double acc = layer.bias[r];
      for (std::size_t c = 0; c < layer.weight.cols; ++c) acc += layer.weight(r, c) * x[c];
      const bool last = l + 1 == mlp.layers.size();
      y[r] = last || mlp.activation == Activation::kIdentity ? acc : acc / (1.0 + std::exp(-acc));
    }
    x = std::move(y);
  }
  return x;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("mlp_forward basics") {
  Mlp zero = zeros_like(init_params({4, 8, 3}, 1));
  const auto out = mlp_forward(zero, std::vector<double>{1, 2, 3, 4});
  CHECK(out == std::vector<double>{0, 0, 0});

  Mlp id = zeros_like(init_params({3, 3}, 1, Activation::kIdentity));
  for (std::size_t i = 0; i < 3; ++i) id.layers[0].weight(i, i) = 1.0;
  CHECK(mlp_forward(id, std::vector<double>{0.5, -2.0, 7.0}) == std::vector<double>{0.5, -2.0, 7.0});

  CHECK_THROWS_AS(mlp_forward(id, std::vector<double>{1.0, 2.0}), Error);
}

TEST_CASE("mlp_forward matches the naive oracle") {
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const Mlp mlp = init_params({7, 33, 5}, rng);
    const auto x = random_vec(7, rng);
    const auto a = mlp_forward(mlp, x);
    const auto b = naive_forward(mlp, x);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) < 1e-12);
  }
}

TEST_CASE("mlp_backward") {
  Rng rng(3);
  Mlp mlp = init_params({5, 9, 4}, rng);
  MlpTape tape;
  const auto x = random_vec(5, rng);
  mlp_forward(mlp, x, &tape);

  Mlp g = zeros_like(mlp);
  const auto gin = mlp_backward(mlp, tape, std::vector<double>(4, 0.0), g);
  for (double v : gin) CHECK(v == 0.0);
  std::vector<ParamView> gv;
  collect_params(g, "g", gv);
  for (const auto& v : gv)
    for (double x : v.values) CHECK(x == 0.0);

  // Single linear layer: input gradient is W^T g.
  Mlp lin = init_params({3, 2}, 4, Activation::kIdentity);
  MlpTape lt;
  mlp_forward(lin, std::vector<double>{0.1, 0.2, 0.3}, &lt);
  Mlp lg = zeros_like(lin);
  const std::vector<double> og{1.5, -0.5};
  const auto li = mlp_backward(lin, lt, og, lg);
  for (std::size_t c = 0; c < 3; ++c) {
    const double expect = lin.layers[0].weight(0, c) * og[0] + lin.layers[0].weight(1, c) * og[1];
    CHECK(li[c] == doctest::Approx(expect).epsilon(1e-14));
  }

  // Tape recorded on another network.
  Mlp other = init_params({5, 9, 4}, 99);
  CHECK_THROWS_AS(mlp_backward(other, tape, std::vector<double>(4, 1.0), g), Error);
  MlpTape empty;
  CHECK_THROWS_AS(mlp_backward(mlp, empty, std::vector<double>(4, 1.0), g), Error);
}

TEST_CASE("mlp gradients match finite differences") {
  Rng rng(5);
  Mlp mlp = init_params({6, 12, 12, 3}, rng);
  const auto x = random_vec(6, rng);
  const auto w = random_vec(3, rng);
  auto loss = [&] {
    const auto y = mlp_forward(mlp, x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i] + 0.5 * y[i] * y[i];
    return s;
  };
  MlpTape tape;
  const auto y = mlp_forward(mlp, x, &tape);
  std::vector<double> og(3);
  for (std::size_t i = 0; i < 3; ++i) og[i] = w[i] + y[i];
  Mlp g = zeros_like(mlp);
  const auto gin = mlp_backward(mlp, tape, og, g);

  std::vector<ParamView> pv, gv;
  collect_params(mlp, "m", pv);
  collect_params(g, "m", gv);
  Rng probe(6);
  const auto res = finite_diff_check(loss, pv, gv, 200, probe);
  CHECK(res.probes == 200);
  CHECK(res.max_rel_error < 1e-4);

  // Input gradient too.
  auto xv = x;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double h = 1e-5;
    auto lx = [&](double d) {
      auto xx = xv;
      xx[i] += d;
      const auto yy = mlp_forward(mlp, xx);
      double s = 0.0;
      for (std::size_t k = 0; k < yy.size(); ++k) s += w[k] * yy[k] + 0.5 * yy[k] * yy[k];
      return s;
    };
    const double num = (lx(h) - lx(-h)) / (2 * h);
    CHECK(std::fabs(gin[i] - num) / std::max(std::fabs(num), 1e-8) < 1e-4);
  }
}

TEST_CASE("finite_diff_check on analytic functions") {
  std::vector<double> p{1.0, -2.0, 0.5};
  std::vector<double> g(3);
  std::vector<ParamView> pv{{"p", {3}, std::span<double>(p)}};
  std::vector<ParamView> gv{{"p", {3}, std::span<double>(g)}};
  Rng rng(7);

  auto quad = [&] { return p[0] * p[0] + 3 * p[1] * p[1] + 0.5 * p[2] * p[2]; };
  g = {2 * p[0], 6 * p[1], p[2]};
  CHECK(finite_diff_check(quad, pv, gv, 10, rng).max_rel_error < 1e-7);

  auto constant = [] { return 4.0; };
  g = {0, 0, 0};
  CHECK(finite_diff_check(constant, pv, gv, 10, rng).max_rel_error < 1e-7);
}

TEST_CASE("init_params") {
  const Mlp a = init_params({10, 20, 5}, 42);
  const Mlp b = init_params({10, 20, 5}, 42);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].weight.data == b.layers[l].weight.data);
    for (double v : a.layers[l].bias) CHECK(v == 0.0);
    CHECK(a.layers[l].weight.rows == a.layer_sizes[l + 1]);
    CHECK(a.layers[l].weight.cols == a.layer_sizes[l]);
  }

  const Mlp big = init_params({1000, 1000}, 3);
  const double s = std::sqrt(6.0 / 2000.0);
  double sum = 0.0, sq = 0.0, peak = 0.0;
  for (double v : big.layers[0].weight.data) {
    peak = std::max(peak, std::fabs(v));
    sum += v;
    sq += v * v;
  }
  CHECK(peak <= s);
  const double n = static_cast<double>(big.layers[0].weight.data.size());
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  CHECK(std::fabs(sd - s / std::sqrt(3.0)) < 0.05 * s / std::sqrt(3.0));
}

TEST_CASE("adam_step") {
  std::vector<double> x{5.0};
  std::vector<double> g{0.0};
  std::vector<ParamView> pv{{"x", {1}, std::span<double>(x)}};
  std::vector<ParamView> gv{{"x", {1}, std::span<double>(g)}};
  AdamState state;
  AdamOptions opt;
  adam_step(pv, gv, state, opt);
  CHECK(x[0] == 5.0);

  // First step with bias correction: -lr * g / (|g| + eps).
  AdamState fresh;
  g[0] = 0.3;
  adam_step(pv, gv, fresh, opt);
  CHECK(x[0] == doctest::Approx(5.0 - opt.lr * 0.3 / (0.3 + opt.eps)).epsilon(1e-12));

  x[0] = 5.0;
  AdamState run;
  opt.lr = 1e-2;
  for (int k = 0; k < 2000; ++k) {
    g[0] = 2.0 * x[0];
    adam_step(pv, gv, run, opt);
  }
  CHECK(std::fabs(x[0]) < 1e-2);
}

TEST_CASE("adam is independent of parameter order") {
  std::vector<double> a{1.0, 2.0}, b{-1.0};
  std::vector<double> ga{0.1, -0.2}, gb{0.7};
  std::vector<double> a2 = a, b2 = b;
  AdamState s1, s2;
  std::vector<ParamView> p1{{"a", {2}, std::span<double>(a)}, {"b", {1}, std::span<double>(b)}};
  std::vector<ParamView> g1{{"a", {2}, std::span<double>(ga)}, {"b", {1}, std::span<double>(gb)}};
  std::vector<ParamView> p2{{"b", {1}, std::span<double>(b2)}, {"a", {2}, std::span<double>(a2)}};
  std::vector<ParamView> g2{{"b", {1}, std::span<double>(gb)}, {"a", {2}, std::span<double>(ga)}};
  for (int k = 0; k < 5; ++k) {
    adam_step(p1, g1, s1, {});
    adam_step(p2, g2, s2, {});
  }
  CHECK(a == a2);
  CHECK(b == b2);
}

TEST_CASE("parameter json round trip is bit exact") {
  Mlp mlp = init_params({4, 6, 2}, 11);
  std::vector<ParamView> pv;
  collect_params(mlp, "net", pv);
  const auto j = params_to_json(pv);

  Mlp copy = zeros_like(mlp);
  std::vector<ParamView> cv;
  collect_params(copy, "net", cv);
  params_from_json(nlohmann::json::parse(j.dump()), cv);
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) CHECK(copy.layers[l].weight.data == mlp.layers[l].weight.data);

  Mlp wrong = init_params({4, 7, 2}, 11);
  std::vector<ParamView> wv;
  collect_params(wrong, "net", wv);
  CHECK_THROWS_AS(params_from_json(j, wv), Error);
}
