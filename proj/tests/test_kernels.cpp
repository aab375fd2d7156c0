#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "crysdiff/kernels.hpp"
#include "crysdiff/random.hpp"

using namespace crysdiff;

namespace {

std::vector<double> rand_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]) / std::max(1.0, std::fabs(b[i])));
  return m;
}

}  // namespace

TEST_CASE("active table is one of the known variants") {
  const auto& k = kernels::active();
  const auto* avx = kernels::avx2_kernels();
  CHECK((&k == &kernels::scalar_kernels() || (avx != nullptr && &k == avx)));
  MESSAGE("active kernels: " << std::string(k.name));
}

TEST_CASE("scalar kernels on small known inputs") {
  const auto& s = kernels::scalar_kernels();
  const double x[3] = {1, 2, 3}, y[3] = {4, 5, 6};
  CHECK(s.dot(x, y, 3) == 32.0);
  double z[3] = {1, 1, 1};
  s.axpy(2.0, x, z, 3);
  CHECK(z[2] == 7.0);
  const double w[6] = {1, 2, 3, 4, 5, 6};  // 2x3
  const double b[2] = {0.5, -0.5};
  double out[2];
  s.gemv(w, x, b, out, 2, 3);
  CHECK(out[0] == 14.5);
  CHECK(out[1] == 31.5);
  double xg[3] = {0, 0, 0};
  const double g[2] = {1, -1};
  s.gemv_t_acc(w, g, xg, 2, 3);
  CHECK(xg[0] == -3.0);
  double wg[6] = {};
  s.ger_acc(g, x, wg, 2, 3);
  CHECK(wg[4] == -2.0);
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const auto* avx = kernels::avx2_kernels();
  if (avx == nullptr) {
    MESSAGE("AVX2 variant unavailable; skipped");
    return;
  }
  const auto& s = kernels::scalar_kernels();
  Rng rng(1);
  for (std::size_t rows : {1u, 3u, 8u, 17u, 64u}) {
    for (std::size_t cols : {1u, 2u, 5u, 16u, 37u, 129u}) {
      const auto w = rand_vec(rows * cols, rng);
      const auto x = rand_vec(cols, rng);
      const auto b = rand_vec(rows, rng);
      const auto g = rand_vec(rows, rng);

      CHECK(std::fabs(s.dot(w.data(), w.data(), cols) - avx->dot(w.data(), w.data(), cols)) < 1e-12 * cols);

      std::vector<double> y1(rows), y2(rows);
      s.gemv(w.data(), x.data(), b.data(), y1.data(), rows, cols);
      avx->gemv(w.data(), x.data(), b.data(), y2.data(), rows, cols);
      CHECK(max_rel(y1, y2) < 1e-13);
      s.gemv(w.data(), x.data(), nullptr, y1.data(), rows, cols);
      avx->gemv(w.data(), x.data(), nullptr, y2.data(), rows, cols);
      CHECK(max_rel(y1, y2) < 1e-13);

      std::vector<double> xg1(cols, 0.25), xg2(cols, 0.25);
      s.gemv_t_acc(w.data(), g.data(), xg1.data(), rows, cols);
      avx->gemv_t_acc(w.data(), g.data(), xg2.data(), rows, cols);
      CHECK(max_rel(xg1, xg2) < 1e-13);

      std::vector<double> wg1(rows * cols, 1.0), wg2(rows * cols, 1.0);
      s.ger_acc(g.data(), x.data(), wg1.data(), rows, cols);
      avx->ger_acc(g.data(), x.data(), wg2.data(), rows, cols);
      CHECK(max_rel(wg1, wg2) < 1e-15);

      std::vector<double> a1 = b, a2 = b;
      s.axpy(0.3, g.data(), a1.data(), rows);
      avx->axpy(0.3, g.data(), a2.data(), rows);
      CHECK(max_rel(a1, a2) < 1e-15);
    }
  }
}
