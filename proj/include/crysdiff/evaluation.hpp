#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crysdiff/crystal.hpp"

namespace crysdiff {

struct MatchTolerances {
  double stol = 0.5;
  double angle_tol = 10.0;  // degrees
  double ltol = 0.3;
};

struct MatchReport {
  bool matched = false;
  std::optional<double> rmse;  // present iff matched
  MatchTolerances tolerances;
};

/// Lengths (a, b, c) followed by angles (alpha, beta, gamma) in degrees.
std::array<double, 6> lattice_parameters(const Mat3& lattice);

/// Simplified periodic structure matcher. Displacements are measured in the
/// truth lattice after the best axis permutation of the predicted cell.
MatchReport match_structures(const Crystal& pred, const Crystal& truth, const MatchTolerances& tol = {});

/// RMS length of `displacements` divided by sqrt(volume / n).
double normalized_rmse(std::span<const Vec3> displacements, double volume, std::size_t n);

/// Percentage of matched reports.
double match_rate(std::span<const MatchReport> reports);

/// Mean rmse over matched reports; nullopt when nothing matched.
std::optional<double> mean_matched_rmse(std::span<const MatchReport> reports);

/// Mean of per-metric ranks.
double rank_score(std::span<const int> ranks);

/// Competition ranking (1 + number of strictly better entries), so ties share
/// the best rank.
std::vector<int> competition_ranks(std::span<const double> values, bool higher_is_better);

/// Minimum-cost assignment: result[row] = column. Exact (Hungarian) for
/// n <= exact_limit, greedy on sorted costs above.
std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost,
                                          std::size_t exact_limit = 16);

std::vector<MatchReport> evaluate_pairs(std::span<const Crystal> preds, std::span<const Crystal> truths,
                                        const MatchTolerances& tol = {});

std::string evaluation_csv(std::span<const MatchReport> reports, std::span<const std::string> ids = {});
nlohmann::json evaluation_summary(std::span<const MatchReport> reports);

}  // namespace crysdiff
