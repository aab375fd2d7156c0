#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crysdiff/crystal.hpp"

namespace crysdiff {

inline constexpr std::size_t kHyperedgeHardCap = 32;

/// Node set {0..num_nodes-1} plus deduplicated hyperedges, each a sorted list
/// of at least two node indices.
struct Hypergraph {
  std::size_t num_nodes = 0;
  std::vector<std::vector<std::size_t>> hyperedges;
  /// Reserved per-hyperedge weights; always 1.0 and never read by the model.
  std::vector<double> weights;
  std::vector<std::size_t> degrees;

  /// Sorts members, drops duplicates and recomputes weights and degrees.
  void canonicalize();
  /// Throws kGraph if an index is out of range or an edge has < 2 members.
  void validate() const;
};

std::vector<std::size_t> node_degrees(const Hypergraph& graph);

/// Atom-centred sphere scan: one candidate hyperedge per atom holding every
/// atom within min-image distance `radius` (the centre included), truncated to
/// the `max_order` nearest with ties broken by lower index.
Hypergraph build_sphere_hyperedges(std::span<const Vec3> frac, const Mat3& lattice, double radius,
                                   std::size_t max_order);
Hypergraph build_sphere_hyperedges(const Crystal& crystal, double radius, std::size_t max_order);

/// Atom-centred axis-aligned Cartesian cube of edge `side`, images {-1,0,1}^3.
Hypergraph build_cube_hyperedges(std::span<const Vec3> frac, const Mat3& lattice, double side,
                                 std::size_t max_order);
Hypergraph build_cube_hyperedges(const Crystal& crystal, double side, std::size_t max_order);

/// Adds every pair {i, j} as an order-2 hyperedge.
Hypergraph augment_pairwise(const Hypergraph& graph);
Hypergraph augment_pairwise(const Hypergraph& graph, const Crystal& crystal);

/// Relabels node i as perm[i].
Hypergraph relabel(const Hypergraph& graph, std::span<const std::size_t> perm);

enum class HyperedgeMode { kSphere, kCube, kPairwise };

HyperedgeMode parse_hyperedge_mode(const std::string& name);
std::string to_string(HyperedgeMode mode);

/// How the model derives a hypergraph from (F, L) whenever it is evaluated.
struct HypergraphPolicy {
  HyperedgeMode mode = HyperedgeMode::kSphere;
  /// Sphere radius as a multiple of the shortest lattice vector; ignored when
  /// `radius` is positive.
  double radius_scale = 0.55;
  double radius = 0.0;
  /// Cube side as a multiple of the effective sphere radius; ignored when
  /// `side` is positive.
  double side_scale = 1.1;
  double side = 0.0;
  std::size_t max_order = 6;
  bool augment_pairwise = false;

  double effective_radius(const Mat3& lattice) const;
  double effective_side(const Mat3& lattice) const;
};

Hypergraph build_hypergraph(std::span<const Vec3> frac, const Mat3& lattice, const HypergraphPolicy& policy);

nlohmann::json to_json(const Hypergraph& graph);
Hypergraph hypergraph_from_json(const nlohmann::json& j);

nlohmann::json to_json(const HypergraphPolicy& policy);
HypergraphPolicy policy_from_json(const nlohmann::json& j);

}  // namespace crysdiff
