#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crysdiff/crystal.hpp"
#include "crysdiff/denoiser.hpp"
#include "crysdiff/hypergraph.hpp"
#include "crysdiff/model.hpp"
#include "crysdiff/random.hpp"

namespace crysdiff {

/// Q from the QR factorisation of a standard normal matrix, with R's diagonal
/// made positive. det(Q) takes either sign.
Mat3 random_orthogonal(Rng& rng);

/// Random wrapped coordinates in a mildly sheared cell of edge ~`edge`.
Crystal random_crystal(std::size_t atoms, int num_species, double edge, Rng& rng);

struct SymmetryCheck {
  std::string name;
  int trials = 0;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string note;
};

struct SymmetryReport {
  std::vector<SymmetryCheck> checks;
  bool all_passed() const;
};

struct VerifyOptions {
  int trials = 20;
  std::uint64_t seed = 7;
  double tolerance = 1e-8;
  double permutation_tolerance = 1e-10;
  double pushforward_tolerance = 1e-5;
  int pushforward_steps = 50;
  int pushforward_seeds = 3;
  /// Largest t fed to the denoiser in the pointwise checks.
  int max_t = 1000;
};

/// ||eps_L(QL) - Q eps_L(L)||_inf and ||eps_F(QL) - eps_F(L)||_inf over random
/// Q and t. Cube hyperedges are axis aligned, so for that mode the graph of the
/// unrotated input is reused instead of rebuilt.
SymmetryCheck check_o3_equivariance(const DenoiserParams& params, const HypergraphPolicy& policy,
                                    const Crystal& crystal, const VerifyOptions& options);

/// Both outputs under F -> wrap(F + s) for random s, hypergraph rebuilt.
SymmetryCheck check_periodic_translation(const DenoiserParams& params, const HypergraphPolicy& policy,
                                         const Crystal& crystal, const VerifyOptions& options);

/// eps_F permutes with the atoms and eps_L is unchanged.
SymmetryCheck check_permutation(const DenoiserParams& params, const HypergraphPolicy& policy,
                                const Crystal& crystal, const VerifyOptions& options);

/// Paired sampler runs from one seed, the second with L_T and every lattice
/// noise draw rotated by Q. Deviation is ||L_Q - Q L||_inf relative to
/// max(1, ||L||_inf).
SymmetryCheck check_sampler_pushforward(const DenoiserParams& params, const HypergraphPolicy& policy,
                                        std::span<const int> species, const VerifyOptions& options);

SymmetryReport verify_symmetry(const DenoiserParams& params, const HypergraphPolicy& policy,
                               const Crystal& crystal, const VerifyOptions& options = {});

nlohmann::json to_json(const SymmetryReport& report);
std::string format_table(const SymmetryReport& report);

}  // namespace crysdiff
