#include "crysdiff/crystal.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "crysdiff/error.hpp"

namespace crysdiff {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kSingularLattice: return "singular lattice";
    case ErrorKind::kOversizeHyperedge: return "oversize hyperedge";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kTapeMismatch: return "tape mismatch";
    case ErrorKind::kSpecies: return "species error";
    case ErrorKind::kGraph: return "graph error";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kInvariant: return "invariant violation";
    case ErrorKind::kIo: return "io error";
  }
  return "error";
}

Crystal::Crystal(std::vector<int> species, int num_species, std::vector<Vec3> frac_coords, Mat3 lattice)
    : species_(std::move(species)), num_species_(num_species), frac_(std::move(frac_coords)), lattice_(lattice) {
  if (species_.size() != frac_.size()) {
    throw Error(ErrorKind::kShape, "species count " + std::to_string(species_.size()) +
                                       " != coordinate count " + std::to_string(frac_.size()));
  }
  for (int s : species_) {
    if (s < 0 || s >= num_species_) {
      throw Error(ErrorKind::kSpecies, "species index " + std::to_string(s) + " outside vocabulary of " +
                                           std::to_string(num_species_));
    }
  }
  for (const Vec3& f : frac_) {
    for (double v : f) {
      if (!(v >= 0.0 && v < 1.0)) {
        throw Error(ErrorKind::kInvariant, "fractional coordinate " + std::to_string(v) + " outside [0, 1)");
      }
    }
  }
  for (double v : lattice_.a) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kInvariant, "non-finite lattice entry");
  }
  if (!(std::fabs(determinant(lattice_)) > 0.0)) {
    throw Error(ErrorKind::kInvariant, "degenerate lattice");
  }
}

std::vector<std::vector<double>> Crystal::one_hot() const {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(num_species_),
                                       std::vector<double>(species_.size(), 0.0));
  for (std::size_t i = 0; i < species_.size(); ++i) out[static_cast<std::size_t>(species_[i])][i] = 1.0;
  return out;
}

double wrap(double x) {
  if (!std::isfinite(x)) throw Error(ErrorKind::kDomain, "cannot wrap non-finite coordinate");
  double w = x - std::floor(x);
  // x slightly below an integer can round up to exactly 1.0.
  if (w >= 1.0) w = 0.0;
  return w;
}

Vec3 wrap(const Vec3& f) { return {wrap(f[0]), wrap(f[1]), wrap(f[2])}; }

std::vector<Vec3> wrap(std::span<const Vec3> frac) {
  std::vector<Vec3> out;
  out.reserve(frac.size());
  for (const Vec3& f : frac) out.push_back(wrap(f));
  return out;
}

std::vector<Vec3> translate(std::span<const Vec3> frac, const Vec3& shift) {
  std::vector<Vec3> out;
  out.reserve(frac.size());
  for (const Vec3& f : frac) out.push_back(wrap(f + shift));
  return out;
}

Vec3 frac_to_cart(const Mat3& lattice, const Vec3& f) { return lattice * f; }

Vec3 cart_to_frac(const Mat3& lattice, const Vec3& x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kDomain, "non-finite Cartesian coordinate");
  }
  if (std::fabs(determinant(lattice)) <= kSingularDetEps) {
    throw Error(ErrorKind::kSingularLattice, "|det L| below threshold");
  }
  return wrap(inverse(lattice) * x);
}

namespace {

double centered(double d) {
  // Maps any real difference into [-0.5, 0.5).
  double c = d - std::floor(d + 0.5);
  if (c >= 0.5) c -= 1.0;
  return c;
}

}  // namespace

Vec3 periodic_diff(const Vec3& f_i, const Vec3& f_j) {
  return {centered(f_j[0] - f_i[0]), centered(f_j[1] - f_i[1]), centered(f_j[2] - f_i[2])};
}

Vec3 min_image_vector(const Mat3& lattice, const Vec3& f_i, const Vec3& f_j) {
  const Vec3 d = periodic_diff(f_i, f_j);
  Vec3 best{};
  double best_sq = std::numeric_limits<double>::infinity();
  for (int a = -1; a <= 1; ++a) {
    for (int b = -1; b <= 1; ++b) {
      for (int c = -1; c <= 1; ++c) {
        const Vec3 x = lattice * Vec3{d[0] + a, d[1] + b, d[2] + c};
        const double sq = dot(x, x);
        if (sq < best_sq) {
          best_sq = sq;
          best = x;
        }
      }
    }
  }
  return best;
}

double min_image_distance(const Mat3& lattice, const Vec3& f_i, const Vec3& f_j) {
  return norm(min_image_vector(lattice, f_i, f_j));
}

std::vector<PeriodicImage> periodic_images(const Crystal& crystal, int k_range) {
  if (k_range < 0) throw Error(ErrorKind::kDomain, "k_range must be non-negative");
  std::vector<PeriodicImage> out;
  const std::size_t side = static_cast<std::size_t>(2 * k_range + 1);
  out.reserve(crystal.num_atoms() * side * side * side);
  for (std::size_t i = 0; i < crystal.num_atoms(); ++i) {
    const Vec3 x = frac_to_cart(crystal.lattice(), crystal.frac_coords()[i]);
    for (int a = -k_range; a <= k_range; ++a) {
      for (int b = -k_range; b <= k_range; ++b) {
        for (int c = -k_range; c <= k_range; ++c) {
          const Vec3 shift = crystal.lattice() * Vec3{double(a), double(b), double(c)};
          out.push_back({crystal.species()[i], i, {a, b, c}, x + shift});
        }
      }
    }
  }
  return out;
}

double lattice_volume(const Mat3& lattice) { return std::fabs(determinant(lattice)); }

}  // namespace crysdiff
