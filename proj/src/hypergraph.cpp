#include "crysdiff/hypergraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "crysdiff/error.hpp"

namespace crysdiff {

void Hypergraph::canonicalize() {
  for (auto& e : hyperedges) std::sort(e.begin(), e.end());
  std::sort(hyperedges.begin(), hyperedges.end(), [](const auto& x, const auto& y) {
    if (x.size() != y.size()) return x.size() < y.size();
    return x < y;
  });
  hyperedges.erase(std::unique(hyperedges.begin(), hyperedges.end()), hyperedges.end());
  weights.assign(hyperedges.size(), 1.0);
  degrees = node_degrees(*this);
}

void Hypergraph::validate() const {
  for (const auto& e : hyperedges) {
    if (e.size() < 2) throw Error(ErrorKind::kGraph, "hyperedge with fewer than two nodes");
    for (std::size_t v : e) {
      if (v >= num_nodes) {
        throw Error(ErrorKind::kGraph, "hyperedge index " + std::to_string(v) + " >= num_nodes " +
                                           std::to_string(num_nodes));
      }
    }
  }
}

std::vector<std::size_t> node_degrees(const Hypergraph& graph) {
  std::vector<std::size_t> deg(graph.num_nodes, 0);
  for (const auto& e : graph.hyperedges) {
    for (std::size_t v : e) {
      if (v >= graph.num_nodes) throw Error(ErrorKind::kGraph, "hyperedge index out of range");
      ++deg[v];
    }
  }
  return deg;
}

namespace {

using Measure = double (*)(const Mat3&, const Vec3&);

double euclid(const Mat3&, const Vec3& x) { return norm(x); }
double chebyshev(const Mat3&, const Vec3& x) {
  return std::max({std::fabs(x[0]), std::fabs(x[1]), std::fabs(x[2])});
}

/// Smallest measure over images {-1,0,1}^3 of the canonical difference.
double min_image_measure(const Mat3& lattice, const Vec3& f_i, const Vec3& f_j, Measure measure) {
  const Vec3 d = periodic_diff(f_i, f_j);
  double best = std::numeric_limits<double>::infinity();
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      for (int c = -1; c <= 1; ++c)
        best = std::min(best, measure(lattice, lattice * Vec3{d[0] + a, d[1] + b, d[2] + c}));
  return best;
}

Hypergraph scan(std::span<const Vec3> frac, const Mat3& lattice, double threshold, std::size_t max_order,
                Measure measure, const char* what) {
  if (!(threshold > 0.0)) throw Error(ErrorKind::kDomain, std::string(what) + " must be positive");
  if (max_order < 2) throw Error(ErrorKind::kDomain, "max_order must be at least 2");
  const std::size_t n = frac.size();
  Hypergraph graph;
  graph.num_nodes = n;
  std::vector<std::pair<double, std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) {
    members.clear();
    for (std::size_t j = 0; j < n; ++j) {
      const double d = j == i ? 0.0 : min_image_measure(lattice, frac[i], frac[j], measure);
      if (d <= threshold) members.emplace_back(d, j);
    }
    if (members.size() > kHyperedgeHardCap) {
      throw Error(ErrorKind::kOversizeHyperedge,
                  std::to_string(members.size()) + " atoms inside one scan volume (cap " +
                      std::to_string(kHyperedgeHardCap) + "); use a smaller " + what);
    }
    if (members.size() < 2) continue;
    std::sort(members.begin(), members.end());
    if (members.size() > max_order) members.resize(max_order);
    std::vector<std::size_t> edge;
    edge.reserve(members.size());
    for (const auto& m : members) edge.push_back(m.second);
    graph.hyperedges.push_back(std::move(edge));
  }
  graph.canonicalize();
  return graph;
}

double shortest_lattice_vector(const Mat3& lattice) {
  return std::min({norm(lattice.column(0)), norm(lattice.column(1)), norm(lattice.column(2))});
}

}  // namespace

Hypergraph build_sphere_hyperedges(std::span<const Vec3> frac, const Mat3& lattice, double radius,
                                   std::size_t max_order) {
  return scan(frac, lattice, radius, max_order, euclid, "radius");
}

Hypergraph build_sphere_hyperedges(const Crystal& crystal, double radius, std::size_t max_order) {
  return build_sphere_hyperedges(crystal.frac_coords(), crystal.lattice(), radius, max_order);
}

Hypergraph build_cube_hyperedges(std::span<const Vec3> frac, const Mat3& lattice, double side,
                                 std::size_t max_order) {
  if (!(side > 0.0)) throw Error(ErrorKind::kDomain, "side must be positive");
  return scan(frac, lattice, 0.5 * side, max_order, chebyshev, "side");
}

Hypergraph build_cube_hyperedges(const Crystal& crystal, double side, std::size_t max_order) {
  return build_cube_hyperedges(crystal.frac_coords(), crystal.lattice(), side, max_order);
}

Hypergraph augment_pairwise(const Hypergraph& graph) {
  Hypergraph out = graph;
  for (std::size_t i = 0; i < graph.num_nodes; ++i)
    for (std::size_t j = i + 1; j < graph.num_nodes; ++j) out.hyperedges.push_back({i, j});
  out.canonicalize();
  return out;
}

Hypergraph augment_pairwise(const Hypergraph& graph, const Crystal& crystal) {
  if (graph.num_nodes != crystal.num_atoms()) {
    throw Error(ErrorKind::kGraph, "hypergraph node count does not match crystal");
  }
  return augment_pairwise(graph);
}

Hypergraph relabel(const Hypergraph& graph, std::span<const std::size_t> perm) {
  if (perm.size() != graph.num_nodes) throw Error(ErrorKind::kGraph, "permutation size mismatch");
  Hypergraph out;
  out.num_nodes = graph.num_nodes;
  out.hyperedges.reserve(graph.hyperedges.size());
  for (const auto& e : graph.hyperedges) {
    std::vector<std::size_t> mapped;
    mapped.reserve(e.size());
    for (std::size_t v : e) mapped.push_back(perm[v]);
    std::sort(mapped.begin(), mapped.end());
    out.hyperedges.push_back(std::move(mapped));
  }
  // Keep the original edge order so aggregation order is unchanged.
  out.weights.assign(out.hyperedges.size(), 1.0);
  out.degrees = node_degrees(out);
  return out;
}

HyperedgeMode parse_hyperedge_mode(const std::string& name) {
  if (name == "sphere") return HyperedgeMode::kSphere;
  if (name == "cube") return HyperedgeMode::kCube;
  if (name == "pairwise") return HyperedgeMode::kPairwise;
  throw Error(ErrorKind::kConfig, "unknown hypergraph mode '" + name + "'");
}

std::string to_string(HyperedgeMode mode) {
  switch (mode) {
    case HyperedgeMode::kSphere: return "sphere";
    case HyperedgeMode::kCube: return "cube";
    case HyperedgeMode::kPairwise: return "pairwise";
  }
  return "sphere";
}

double HypergraphPolicy::effective_radius(const Mat3& lattice) const {
  return radius > 0.0 ? radius : radius_scale * shortest_lattice_vector(lattice);
}

double HypergraphPolicy::effective_side(const Mat3& lattice) const {
  if (side > 0.0) return side;
  const double r = radius > 0.0 ? radius : radius_scale * shortest_lattice_vector(lattice);
  return side_scale * r;
}

Hypergraph build_hypergraph(std::span<const Vec3> frac, const Mat3& lattice, const HypergraphPolicy& policy) {
  Hypergraph graph;
  switch (policy.mode) {
    case HyperedgeMode::kSphere:
      graph = build_sphere_hyperedges(frac, lattice, policy.effective_radius(lattice), policy.max_order);
      break;
    case HyperedgeMode::kCube:
      graph = build_cube_hyperedges(frac, lattice, policy.effective_side(lattice), policy.max_order);
      break;
    case HyperedgeMode::kPairwise:
      graph.num_nodes = frac.size();
      graph.canonicalize();
      return augment_pairwise(graph);
  }
  return policy.augment_pairwise ? augment_pairwise(graph) : graph;
}

nlohmann::json to_json(const Hypergraph& graph) {
  return {{"num_nodes", graph.num_nodes}, {"hyperedges", graph.hyperedges}};
}

Hypergraph hypergraph_from_json(const nlohmann::json& j) {
  try {
    Hypergraph g;
    g.num_nodes = j.at("num_nodes").get<std::size_t>();
    g.hyperedges = j.at("hyperedges").get<std::vector<std::vector<std::size_t>>>();
    g.validate();
    g.canonicalize();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("hypergraph: ") + e.what());
  }
}

nlohmann::json to_json(const HypergraphPolicy& p) {
  return {{"mode", to_string(p.mode)}, {"radius_scale", p.radius_scale}, {"radius", p.radius},
          {"side_scale", p.side_scale}, {"side", p.side},     {"max_order", p.max_order},
          {"augment_pairwise", p.augment_pairwise}};
}

HypergraphPolicy policy_from_json(const nlohmann::json& j) {
  HypergraphPolicy p;
  p.mode = parse_hyperedge_mode(j.value("mode", std::string("sphere")));
  p.radius_scale = j.value("radius_scale", p.radius_scale);
  p.radius = j.value("radius", p.radius);
  p.side_scale = j.value("side_scale", p.side_scale);
  p.side = j.value("side", p.side);
  p.max_order = j.value("max_order", p.max_order);
  p.augment_pairwise = j.value("augment_pairwise", p.augment_pairwise);
  return p;
}

}  // namespace crysdiff
