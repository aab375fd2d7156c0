#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "crysdiff/crystal.hpp"
#include "crysdiff/error.hpp"
#include "crysdiff/random.hpp"

using namespace crysdiff;

namespace {

Mat3 random_lattice(Rng& rng, double skew) {
  Mat3 l = Mat3::diag(rng.uniform(3.0, 6.0), rng.uniform(3.0, 6.0), rng.uniform(3.0, 6.0));
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (r != c) l(r, c) = skew * rng.uniform(-1.0, 1.0);
  return l;
}

Vec3 random_frac(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

// Plain triple loop, independent of the Mat3 operators.
Vec3 matvec_oracle(const Mat3& m, const Vec3& v) {
  Vec3 out{0.0, 0.0, 0.0};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[r] += m.a[3 * r + c] * v[c];
  return out;
}

double cofactor_det(const Mat3& m) {
  const auto& a = m.a;
  return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) + a[2] * (a[3] * a[7] - a[4] * a[6]);
}

double brute_min_image(const Mat3& l, const Vec3& fi, const Vec3& fj, int range) {
  double best = std::numeric_limits<double>::infinity();
  for (int a = -range; a <= range; ++a)
    for (int b = -range; b <= range; ++b)
      for (int c = -range; c <= range; ++c) {
        const Vec3 d{fj[0] - fi[0] + a, fj[1] - fi[1] + b, fj[2] - fi[2] + c};
        best = std::min(best, norm(matvec_oracle(l, d)));
      }
  return best;
}

}  // namespace

TEST_CASE("wrap examples") {
  CHECK(wrap(0.5) == 0.5);
  CHECK(wrap(1.25) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(wrap(-0.3) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(wrap(1.0) == 0.0);
  CHECK(wrap(-1e-18) < 1.0);
  CHECK_THROWS_AS(wrap(std::numeric_limits<double>::quiet_NaN()), Error);
  CHECK_THROWS_AS(wrap(std::numeric_limits<double>::infinity()), Error);
}

TEST_CASE("wrap is idempotent and lands in [0,1)") {
  Rng rng(1);
  for (int k = 0; k < 10000; ++k) {
    const double x = rng.uniform(-50.0, 50.0);
    const double w = wrap(x);
    CHECK(w >= 0.0);
    CHECK(w < 1.0);
    CHECK(wrap(w) == w);
  }
}

TEST_CASE("frac_to_cart") {
  CHECK(frac_to_cart(Mat3::identity(), {0.5, 0.5, 0.5}) == Vec3{0.5, 0.5, 0.5});
  CHECK(frac_to_cart(Mat3::diag(2, 2, 2), {0.25, 0, 0}) == Vec3{0.5, 0, 0});
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const Mat3 l = random_lattice(rng, 1.5);
    const Vec3 f = random_frac(rng);
    const Vec3 x = frac_to_cart(l, f);
    const Vec3 o = matvec_oracle(l, f);
    for (int c = 0; c < 3; ++c) CHECK(std::fabs(x[c] - o[c]) < 1e-12);
  }
}

TEST_CASE("cart_to_frac") {
  const Vec3 a = cart_to_frac(Mat3::identity(), {0.3, 0.3, 0.3});
  for (double v : a) CHECK(v == doctest::Approx(0.3));
  const Vec3 b = cart_to_frac(Mat3::diag(2, 2, 2), {0.5, 0, 0});
  CHECK(b[0] == doctest::Approx(0.25));
  CHECK(b[1] == 0.0);
  CHECK_THROWS_AS(cart_to_frac(Mat3::diag(1, 1, 0), {0.1, 0.1, 0.1}), Error);
  try {
    cart_to_frac(Mat3::diag(1e-4, 1e-4, 1e-4), {0.0, 0.0, 0.0});
    FAIL("expected singular lattice");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSingularLattice);
  }

  Rng rng(3);
  for (int k = 0; k < 500; ++k) {
    const Mat3 l = random_lattice(rng, 1.0);
    const Vec3 f = random_frac(rng);
    const Vec3 back = cart_to_frac(l, frac_to_cart(l, f));
    for (int c = 0; c < 3; ++c) {
      const double d = std::fabs(back[c] - f[c]);
      CHECK(std::min(d, 1.0 - d) < 1e-10);
    }
  }
}

TEST_CASE("periodic_diff") {
  const Vec3 a = periodic_diff({0.1, 0, 0}, {0.2, 0, 0});
  CHECK(a[0] == doctest::Approx(0.1));
  const Vec3 b = periodic_diff({0.9, 0, 0}, {0.1, 0, 0});
  CHECK(b[0] == doctest::Approx(0.2));
  CHECK(b[1] == 0.0);

  Rng rng(4);
  for (int k = 0; k < 2000; ++k) {
    const Vec3 fi = random_frac(rng), fj = random_frac(rng);
    const Vec3 d = periodic_diff(fi, fj);
    for (int c = 0; c < 3; ++c) {
      CHECK(d[c] >= -0.5);
      CHECK(d[c] < 0.5);
    }
    const Vec3 back = wrap(fi + d);
    for (int c = 0; c < 3; ++c) {
      const double e = std::fabs(back[c] - fj[c]);
      CHECK(std::min(e, 1.0 - e) < 1e-12);
    }
    const Vec3 t{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const Vec3 d2 = periodic_diff(wrap(fi + t), wrap(fj + t));
    for (int c = 0; c < 3; ++c) {
      // Components at exactly +-0.5 may flip sides; compare on the circle.
      const double e = std::fabs(d2[c] - d[c]);
      CHECK(std::min(e, std::fabs(e - 1.0)) < 1e-12);
    }
  }
}

TEST_CASE("min_image_distance") {
  CHECK(min_image_distance(Mat3::identity(), {0.9, 0, 0}, {0.1, 0, 0}) == doctest::Approx(0.2));
  CHECK(min_image_distance(Mat3::diag(2, 2, 2), {0.9, 0, 0}, {0.1, 0, 0}) == doctest::Approx(0.4));

  Rng rng(5);
  for (int k = 0; k < 500; ++k) {
    const Mat3 l = random_lattice(rng, 1.2);
    const Vec3 fi = random_frac(rng), fj = random_frac(rng);
    const double d = min_image_distance(l, fi, fj);
    CHECK(std::fabs(d - brute_min_image(l, fi, fj, 2)) < 1e-12);
    CHECK(std::fabs(d - min_image_distance(l, fj, fi)) < 1e-12);
    CHECK(min_image_distance(l, fi, fi) == 0.0);
    const Vec3 t{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    CHECK(std::fabs(d - min_image_distance(l, wrap(fi + t), wrap(fj + t))) < 1e-12);
  }
}

TEST_CASE("periodic_images") {
  Crystal one({0}, 1, {{0.0, 0.0, 0.0}}, Mat3::identity());
  CHECK(periodic_images(one, 0).size() == 1);
  const auto imgs = periodic_images(one, 1);
  CHECK(imgs.size() == 27);

  // Cubic cell of edge 2: every image of the origin atom is 2k.
  Crystal cubic({0, 1}, 2, {{0.0, 0.0, 0.0}, {0.5, 0.5, 0.5}}, Mat3::diag(2, 2, 2));
  const auto all = periodic_images(cubic, 1);
  CHECK(all.size() == 54);
  std::set<std::array<long, 4>> expected, got;
  for (int atom = 0; atom < 2; ++atom)
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b)
        for (int c = -1; c <= 1; ++c) {
          const double o = atom == 0 ? 0.0 : 1.0;
          expected.insert({atom, std::lround(10 * (o + 2 * a)), std::lround(10 * (o + 2 * b)),
                           std::lround(10 * (o + 2 * c))});
        }
  for (const auto& img : all) {
    got.insert({static_cast<long>(img.atom), std::lround(10 * img.position[0]), std::lround(10 * img.position[1]),
                std::lround(10 * img.position[2])});
    CHECK(img.species == cubic.species()[img.atom]);
  }
  CHECK(got == expected);
  CHECK_THROWS_AS(periodic_images(cubic, -1), Error);
}

TEST_CASE("lattice_volume") {
  CHECK(lattice_volume(Mat3::identity()) == 1.0);
  CHECK(lattice_volume(Mat3::diag(2, 3, 4)) == doctest::Approx(24.0));
  Rng rng(6);
  for (int k = 0; k < 200; ++k) {
    const Mat3 l = random_lattice(rng, 2.0);
    CHECK(std::fabs(lattice_volume(l) - std::fabs(cofactor_det(l))) < 1e-12 * std::fabs(cofactor_det(l)) + 1e-12);
  }
}

TEST_CASE("crystal invariants are enforced") {
  const Mat3 l = Mat3::identity();
  CHECK_NOTHROW(Crystal({0, 1}, 2, {{0.1, 0.2, 0.3}, {0.0, 0.5, 0.9}}, l));
  CHECK_THROWS_AS(Crystal({0, 2}, 2, {{0.1, 0.2, 0.3}, {0.0, 0.5, 0.9}}, l), Error);
  CHECK_THROWS_AS(Crystal({0, -1}, 2, {{0.1, 0.2, 0.3}, {0.0, 0.5, 0.9}}, l), Error);
  CHECK_THROWS_AS(Crystal({0}, 2, {{0.1, 0.2, 0.3}, {0.0, 0.5, 0.9}}, l), Error);
  CHECK_THROWS_AS(Crystal({0}, 1, {{1.0, 0.2, 0.3}}, l), Error);
  CHECK_THROWS_AS(Crystal({0}, 1, {{-0.1, 0.2, 0.3}}, l), Error);
  CHECK_THROWS_AS(Crystal({0}, 1, {{0.1, 0.2, 0.3}}, Mat3::diag(1, 1, 0)), Error);

  Crystal c({1, 0}, 3, {{0.1, 0.2, 0.3}, {0.0, 0.5, 0.9}}, l);
  const auto oh = c.one_hot();
  // Channels x atoms.
  REQUIRE(oh.size() == 3);
  CHECK(oh[0] == std::vector<double>{0, 1});
  CHECK(oh[1] == std::vector<double>{1, 0});
  CHECK(oh[2] == std::vector<double>{0, 0});
}
