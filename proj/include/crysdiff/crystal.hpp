#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "crysdiff/linalg.hpp"

namespace crysdiff {

inline constexpr double kSingularDetEps = 1e-10;

/// Periodic unit cell (A, F, L).
///
/// Atom types are stored as species indices into a vocabulary of
/// `num_species` channels; `one_hot()` materializes the h x N matrix. Fractional
/// coordinates are one Vec3 per atom (the columns of F). The lattice stores the
/// basis vectors as columns, so Cartesian positions are `lattice * f`.
class Crystal {
 public:
  Crystal() = default;
  /// Validates every invariant; fractional coordinates must already be wrapped.
  Crystal(std::vector<int> species, int num_species, std::vector<Vec3> frac_coords, Mat3 lattice);

  std::size_t num_atoms() const { return species_.size(); }
  int num_species() const { return num_species_; }
  const std::vector<int>& species() const { return species_; }
  const std::vector<Vec3>& frac_coords() const { return frac_; }
  const Mat3& lattice() const { return lattice_; }

  std::vector<std::vector<double>> one_hot() const;

 private:
  std::vector<int> species_;
  int num_species_ = 0;
  std::vector<Vec3> frac_;
  Mat3 lattice_ = Mat3::identity();
};

/// Fractional part x - floor(x). Throws kDomain on non-finite input.
double wrap(double x);
Vec3 wrap(const Vec3& f);
std::vector<Vec3> wrap(std::span<const Vec3> frac);

/// Shifts every atom by the same fractional vector and wraps.
std::vector<Vec3> translate(std::span<const Vec3> frac, const Vec3& shift);

Vec3 frac_to_cart(const Mat3& lattice, const Vec3& f);
/// Wrapped fractional coordinates of a Cartesian point. Throws
/// kSingularLattice when |det L| <= kSingularDetEps.
Vec3 cart_to_frac(const Mat3& lattice, const Vec3& x);

/// Canonical wrapped difference d in [-0.5, 0.5)^3 with wrap(f_i + d) = f_j.
Vec3 periodic_diff(const Vec3& f_i, const Vec3& f_j);

/// min over k in {-1,0,1}^3 of |L (periodic_diff(f_i, f_j) + k)|. Exact for
/// reasonably reduced cells; no Niggli reduction is attempted.
double min_image_distance(const Mat3& lattice, const Vec3& f_i, const Vec3& f_j);

/// Cartesian displacement vector realising min_image_distance.
Vec3 min_image_vector(const Mat3& lattice, const Vec3& f_i, const Vec3& f_j);

struct PeriodicImage {
  int species;
  std::size_t atom;
  std::array<int, 3> offset;
  Vec3 position;
};

/// All images x_i + L k for k in {-k_range..k_range}^3, atom-major.
std::vector<PeriodicImage> periodic_images(const Crystal& crystal, int k_range);

double lattice_volume(const Mat3& lattice);

}  // namespace crysdiff
