#include "crysdiff/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "crysdiff/error.hpp"
#include "crysdiff/parallel.hpp"

namespace crysdiff {

std::array<double, 6> lattice_parameters(const Mat3& lattice) {
  const Vec3 a = lattice.column(0), b = lattice.column(1), c = lattice.column(2);
  auto angle = [](const Vec3& x, const Vec3& y) {
    const double cosv = std::clamp(dot(x, y) / (norm(x) * norm(y)), -1.0, 1.0);
    return std::acos(cosv) * 180.0 / std::numbers::pi;
  };
  return {norm(a), norm(b), norm(c), angle(b, c), angle(a, c), angle(a, b)};
}

double normalized_rmse(std::span<const Vec3> displacements, double volume, std::size_t n) {
  if (n == 0) throw Error(ErrorKind::kDomain, "normalized_rmse needs n >= 1");
  if (!(volume > 0.0)) throw Error(ErrorKind::kDomain, "normalized_rmse needs V > 0");
  if (displacements.empty()) return 0.0;
  double sq = 0.0;
  for (const auto& d : displacements) sq += dot(d, d);
  const double rms = std::sqrt(sq / static_cast<double>(displacements.size()));
  return rms / std::sqrt(volume / static_cast<double>(n));
}

double match_rate(std::span<const MatchReport> reports) {
  if (reports.empty()) throw Error(ErrorKind::kDomain, "match_rate of an empty list");
  const auto hits = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return r.matched; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(reports.size());
}

std::optional<double> mean_matched_rmse(std::span<const MatchReport> reports) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : reports) {
    if (r.matched && r.rmse) {
      sum += *r.rmse;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

double rank_score(std::span<const int> ranks) {
  if (ranks.empty()) throw Error(ErrorKind::kDomain, "rank_score of an empty list");
  double sum = 0.0;
  for (int r : ranks) {
    if (r < 1) throw Error(ErrorKind::kDomain, "ranks must be positive");
    sum += r;
  }
  return sum / static_cast<double>(ranks.size());
}

std::vector<int> competition_ranks(std::span<const double> values, bool higher_is_better) {
  std::vector<int> ranks(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    int better = 0;
    for (double v : values) better += higher_is_better ? v > values[i] : v < values[i];
    ranks[i] = better + 1;
  }
  return ranks;
}

namespace {

std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  // Shortest augmenting path with potentials, 1-based internal indexing.
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> result(n);
  for (std::size_t j = 1; j <= n; ++j) result[p[j] - 1] = j - 1;
  return result;
}

std::vector<std::size_t> greedy(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  std::vector<std::tuple<double, std::size_t, std::size_t>> entries;
  entries.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) entries.emplace_back(cost[i][j], i, j);
  std::sort(entries.begin(), entries.end());
  std::vector<std::size_t> result(n, n);
  std::vector<char> col_used(n, 0);
  std::size_t placed = 0;
  for (const auto& [c, i, j] : entries) {
    if (result[i] != n || col_used[j]) continue;
    result[i] = j;
    col_used[j] = 1;
    if (++placed == n) break;
  }
  return result;
}

}  // namespace

std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost, std::size_t exact_limit) {
  for (const auto& row : cost) {
    if (row.size() != cost.size()) throw Error(ErrorKind::kShape, "assignment cost matrix must be square");
  }
  if (cost.empty()) return {};
  return cost.size() <= exact_limit ? hungarian(cost) : greedy(cost);
}

namespace {

struct SiteFit {
  double rms = std::numeric_limits<double>::infinity();
  std::vector<Vec3> displacements;
};

// Per-species optimal assignment of shifted pred sites onto truth sites.
SiteFit fit_sites(std::span<const Vec3> pred, std::span<const Vec3> truth, const std::vector<int>& species_p,
                  const std::vector<int>& species_t, const Mat3& lattice, const Vec3& shift,
                  std::vector<std::size_t>& assignment) {
  const std::size_t n = pred.size();
  std::map<int, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[species_p[i]].first.push_back(i);
  for (std::size_t j = 0; j < n; ++j) groups[species_t[j]].second.push_back(j);

  std::vector<Vec3> shifted(n);
  for (std::size_t i = 0; i < n; ++i) shifted[i] = wrap(pred[i] + shift);

  assignment.assign(n, 0);
  for (const auto& [sp, idx] : groups) {
    const auto& [rows, cols] = idx;
    std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(cols.size()));
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t b = 0; b < cols.size(); ++b) {
        const double d = min_image_distance(lattice, shifted[rows[a]], truth[cols[b]]);
        cost[a][b] = d * d;
      }
    const auto sol = solve_assignment(cost);
    for (std::size_t a = 0; a < rows.size(); ++a) assignment[rows[a]] = cols[sol[a]];
  }

  SiteFit fit;
  fit.displacements.resize(n);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    fit.displacements[i] = min_image_vector(lattice, shifted[i], truth[assignment[i]]);
    sq += dot(fit.displacements[i], fit.displacements[i]);
  }
  fit.rms = std::sqrt(sq / static_cast<double>(n));
  return fit;
}

std::vector<int> sorted_species(const Crystal& c) {
  std::vector<int> s = c.species();
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

MatchReport match_structures(const Crystal& pred, const Crystal& truth, const MatchTolerances& tol) {
  MatchReport report;
  report.tolerances = tol;
  const std::size_t n = truth.num_atoms();
  if (pred.num_atoms() != n || n == 0 || sorted_species(pred) != sorted_species(truth)) return report;

  const double volume = lattice_volume(truth.lattice());
  const double scale = std::cbrt(volume / static_cast<double>(n));
  const auto truth_params = lattice_parameters(truth.lattice());

  // Anchor translations on the species with the fewest atoms.
  std::map<int, std::size_t> counts;
  for (int s : truth.species()) ++counts[s];
  int anchor = counts.begin()->first;
  for (const auto& [s, c] : counts)
    if (c < counts[anchor]) anchor = s;

  std::array<std::size_t, 3> perm{0, 1, 2};
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> assignment;
  do {
    // Relabel pred axes: new axis k is old axis perm[k].
    const Mat3 pl = Mat3::from_columns(pred.lattice().column(perm[0]), pred.lattice().column(perm[1]),
                                       pred.lattice().column(perm[2]));
    const auto pp = lattice_parameters(pl);
    bool gate = true;
    for (int k = 0; k < 3 && gate; ++k) gate = std::fabs(pp[k] - truth_params[k]) <= tol.ltol * truth_params[k];
    for (int k = 3; k < 6 && gate; ++k) gate = std::fabs(pp[k] - truth_params[k]) <= tol.angle_tol;
    if (!gate) continue;

    std::vector<Vec3> pf(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3& f = pred.frac_coords()[i];
      pf[i] = {f[perm[0]], f[perm[1]], f[perm[2]]};
    }
    for (std::size_t p = 0; p < n; ++p) {
      if (pred.species()[p] != anchor) continue;
      for (std::size_t q = 0; q < n; ++q) {
        if (truth.species()[q] != anchor) continue;
        const Vec3 shift = periodic_diff(pf[p], truth.frac_coords()[q]);
        SiteFit fit = fit_sites(pf, truth.frac_coords(), pred.species(), truth.species(), truth.lattice(), shift,
                                assignment);
        // Re-centre on the mean residual and refit once.
        Vec3 mean{0.0, 0.0, 0.0};
        const Mat3 inv = inverse(truth.lattice());
        for (const auto& d : fit.displacements) mean = mean + (1.0 / static_cast<double>(n)) * (inv * d);
        SiteFit refit = fit_sites(pf, truth.frac_coords(), pred.species(), truth.species(), truth.lattice(),
                                  shift + mean, assignment);
        best = std::min({best, fit.rms, refit.rms});
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  if (best <= tol.stol * scale) {
    report.matched = true;
    report.rmse = best / std::sqrt(volume / static_cast<double>(n));
  }
  return report;
}

std::vector<MatchReport> evaluate_pairs(std::span<const Crystal> preds, std::span<const Crystal> truths,
                                        const MatchTolerances& tol) {
  if (preds.size() != truths.size()) throw Error(ErrorKind::kShape, "prediction and truth counts differ");
  std::vector<MatchReport> out(preds.size());
  parallel_for(preds.size(), [&](std::size_t i) { out[i] = match_structures(preds[i], truths[i], tol); });
  return out;
}

std::string evaluation_csv(std::span<const MatchReport> reports, std::span<const std::string> ids) {
  std::ostringstream os;
  os.precision(10);
  os << "structure_id,matched,rmse\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    os << (i < ids.size() ? ids[i] : std::to_string(i)) << ',' << (reports[i].matched ? 1 : 0) << ',';
    if (reports[i].rmse) os << *reports[i].rmse;
    os << '\n';
  }
  return os.str();
}

nlohmann::json evaluation_summary(std::span<const MatchReport> reports) {
  nlohmann::json j;
  j["count"] = reports.size();
  j["matched"] = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return r.matched; });
  j["match_rate"] = reports.empty() ? 0.0 : match_rate(reports);
  const auto m = mean_matched_rmse(reports);
  j["mean_rmse"] = m ? nlohmann::json(*m) : nlohmann::json(nullptr);
  if (!reports.empty()) {
    const auto& t = reports.front().tolerances;
    j["tolerances"] = {{"stol", t.stol}, {"angle_tol", t.angle_tol}, {"ltol", t.ltol}};
  }
  return j;
}

}  // namespace crysdiff
