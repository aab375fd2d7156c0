#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "crysdiff/crystal.hpp"
#include "crysdiff/random.hpp"

namespace crysdiff {

struct Dataset {
  std::vector<Crystal> crystals;
  std::vector<std::string> ids;
  std::vector<std::string> species_vocabulary;
  /// Non-fatal notes from loading (e.g. coordinates wrapped into [0, 1)).
  std::vector<std::string> warnings;

  std::size_t size() const { return crystals.size(); }
  bool empty() const { return crystals.empty(); }
  void add(std::string id, Crystal crystal);
  /// Throws on duplicate ids or mismatched vocabulary widths.
  void validate() const;
};

/// One record of the JSONL schema:
///   {"id": str, "species": [int], "frac_coords": [[f,f,f]], "lattice": [[row], [row], [row]]}
/// Lattice rows are basis vectors. An optional "num_species" key fixes the
/// vocabulary width; otherwise it is inferred over the whole file.
nlohmann::json crystal_to_json(const std::string& id, const Crystal& crystal);

/// `num_species` = 0 infers the width as 1 + the largest index in the file.
Dataset load_jsonl(const std::string& path, int num_species = 0);
Dataset parse_jsonl(std::istream& in, int num_species = 0, const std::string& source = "<stream>");
void save_jsonl(const std::string& path, const Dataset& dataset);

/// ABX3 cubic cells. Per cell: edge ~ U[3.8, 4.2], a random assignment of the
/// three species to the A, B and X roles, then per-coordinate N(0, jitter)
/// displacements of the ideal sites, wrapped.
Dataset synth_perovskite(std::size_t count, double jitter_sigma, Rng& rng);

/// Ideal fractional sites in the order A, B, X, X, X.
const std::array<Vec3, 5>& perovskite_sites();

struct Split {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Seeded shuffle, then contiguous slices of floor(f * n); when the fractions
/// sum to 1 the test slice takes the remainder.
Split split(const Dataset& dataset, const std::array<double, 3>& fractions, std::uint64_t seed);

}  // namespace crysdiff
