#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace crysdiff {

using Vec3 = std::array<double, 3>;

/// Row-major 3x3 matrix. Lattices store basis vectors as columns.
struct Mat3 {
  std::array<double, 9> a{};

  double& operator()(std::size_t r, std::size_t c) { return a[3 * r + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[3 * r + c]; }

  static Mat3 identity() { return diag(1.0, 1.0, 1.0); }
  static Mat3 diag(double x, double y, double z) {
    Mat3 m;
    m(0, 0) = x;
    m(1, 1) = y;
    m(2, 2) = z;
    return m;
  }
  static Mat3 from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
    Mat3 m;
    for (std::size_t r = 0; r < 3; ++r) {
      m(r, 0) = c0[r];
      m(r, 1) = c1[r];
      m(r, 2) = c2[r];
    }
    return m;
  }

  Vec3 column(std::size_t c) const { return {a[c], a[3 + c], a[6 + c]}; }

  friend bool operator==(const Mat3&, const Mat3&) = default;
};

inline Vec3 operator+(const Vec3& x, const Vec3& y) { return {x[0] + y[0], x[1] + y[1], x[2] + y[2]}; }
inline Vec3 operator-(const Vec3& x, const Vec3& y) { return {x[0] - y[0], x[1] - y[1], x[2] - y[2]}; }
inline Vec3 operator*(double s, const Vec3& x) { return {s * x[0], s * x[1], s * x[2]}; }

inline double dot(const Vec3& x, const Vec3& y) { return x[0] * y[0] + x[1] * y[1] + x[2] * y[2]; }
inline double norm(const Vec3& x) { return std::sqrt(dot(x, x)); }

inline Vec3 operator*(const Mat3& m, const Vec3& x) {
  return {m(0, 0) * x[0] + m(0, 1) * x[1] + m(0, 2) * x[2],
          m(1, 0) * x[0] + m(1, 1) * x[1] + m(1, 2) * x[2],
          m(2, 0) * x[0] + m(2, 1) * x[1] + m(2, 2) * x[2]};
}

inline Mat3 operator*(const Mat3& x, const Mat3& y) {
  Mat3 out;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      out(r, c) = x(r, 0) * y(0, c) + x(r, 1) * y(1, c) + x(r, 2) * y(2, c);
  return out;
}

inline Mat3 operator+(const Mat3& x, const Mat3& y) {
  Mat3 out;
  for (std::size_t i = 0; i < 9; ++i) out.a[i] = x.a[i] + y.a[i];
  return out;
}

inline Mat3 operator-(const Mat3& x, const Mat3& y) {
  Mat3 out;
  for (std::size_t i = 0; i < 9; ++i) out.a[i] = x.a[i] - y.a[i];
  return out;
}

inline Mat3 operator*(double s, const Mat3& x) {
  Mat3 out;
  for (std::size_t i = 0; i < 9; ++i) out.a[i] = s * x.a[i];
  return out;
}

inline Mat3 transpose(const Mat3& m) {
  Mat3 t;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) t(c, r) = m(r, c);
  return t;
}

inline double determinant(const Mat3& m) {
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

/// Adjugate-based inverse; caller is responsible for checking the determinant.
inline Mat3 inverse(const Mat3& m) {
  const double det = determinant(m);
  Mat3 inv;
  inv(0, 0) = (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) / det;
  inv(0, 1) = (m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2)) / det;
  inv(0, 2) = (m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1)) / det;
  inv(1, 0) = (m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2)) / det;
  inv(1, 1) = (m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)) / det;
  inv(1, 2) = (m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2)) / det;
  inv(2, 0) = (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0)) / det;
  inv(2, 1) = (m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1)) / det;
  inv(2, 2) = (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)) / det;
  return inv;
}

inline double max_abs_diff(const Mat3& x, const Mat3& y) {
  double d = 0.0;
  for (std::size_t i = 0; i < 9; ++i) d = std::fmax(d, std::fabs(x.a[i] - y.a[i]));
  return d;
}

}  // namespace crysdiff
