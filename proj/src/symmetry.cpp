#include "crysdiff/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "crysdiff/error.hpp"
#include "crysdiff/sampler.hpp"

namespace crysdiff {

Mat3 random_orthogonal(Rng& rng) {
  std::array<Vec3, 3> cols;
  for (auto& c : cols) c = {rng.normal(), rng.normal(), rng.normal()};
  // Modified Gram-Schmidt with one reorthogonalisation pass, which keeps
  // Q^T Q = I to rounding even for nearly dependent draws. R's diagonal
  // entries are the norms, hence positive.
  for (int k = 0; k < 3; ++k) {
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < k; ++j) cols[k] = cols[k] - dot(cols[j], cols[k]) * cols[j];
    cols[k] = (1.0 / norm(cols[k])) * cols[k];
  }
  return Mat3::from_columns(cols[0], cols[1], cols[2]);
}

Crystal random_crystal(std::size_t atoms, int num_species, double edge, Rng& rng) {
  std::vector<int> species(atoms);
  std::vector<Vec3> frac(atoms);
  for (std::size_t i = 0; i < atoms; ++i) {
    species[i] = static_cast<int>(rng.uniform_int(0, num_species - 1));
    frac[i] = wrap(Vec3{rng.uniform(), rng.uniform(), rng.uniform()});
  }
  Mat3 lattice = Mat3::diag(edge, edge, edge);
  for (double& v : lattice.a) v += 0.15 * edge * rng.uniform(-1.0, 1.0);
  return Crystal(std::move(species), num_species, std::move(frac), lattice);
}

bool SymmetryReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
}

namespace {

double inf_norm(const Mat3& m) {
  double v = 0.0;
  for (double x : m.a) v = std::max(v, std::fabs(x));
  return v;
}

double inf_diff(std::span<const Vec3> a, std::span<const Vec3> b) {
  double v = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (int c = 0; c < 3; ++c) v = std::max(v, std::fabs(a[i][c] - b[i][c]));
  return v;
}

DenoiserOutput run(const Crystal& c, std::span<const Vec3> frac, const Mat3& lattice, int t,
                   const DenoiserParams& params, const HypergraphPolicy& policy) {
  return denoise(c.species(), frac, lattice, t, build_hypergraph(frac, lattice, policy), params);
}

SymmetryCheck finish(std::string name, int trials, double dev, double tol, std::string note = {}) {
  SymmetryCheck c;
  c.name = std::move(name);
  c.trials = trials;
  c.max_deviation = dev;
  c.tolerance = tol;
  c.passed = std::isfinite(dev) && dev < tol;
  c.note = std::move(note);
  return c;
}

}  // namespace

SymmetryCheck check_o3_equivariance(const DenoiserParams& params, const HypergraphPolicy& policy,
                                    const Crystal& crystal, const VerifyOptions& o) {
  Rng rng(o.seed);
  const bool reuse_graph = policy.mode == HyperedgeMode::kCube;
  const auto& f = crystal.frac_coords();
  const Mat3& l = crystal.lattice();
  double dev = 0.0;
  for (int k = 0; k < o.trials; ++k) {
    const Mat3 q = random_orthogonal(rng);
    const int t = static_cast<int>(rng.uniform_int(1, o.max_t));
    const Hypergraph g = build_hypergraph(f, l, policy);
    const Mat3 ql = q * l;
    const DenoiserOutput a = denoise(crystal.species(), f, l, t, g, params);
    const DenoiserOutput b =
        denoise(crystal.species(), f, ql, t, reuse_graph ? g : build_hypergraph(f, ql, policy), params);
    dev = std::max({dev, inf_norm(b.eps_lattice - q * a.eps_lattice), inf_diff(b.eps_coords, a.eps_coords)});
  }
  return finish("o3_equivariance", o.trials, dev, o.tolerance,
                reuse_graph ? "cube scan is axis aligned; graph of the unrotated input reused" : "");
}

SymmetryCheck check_periodic_translation(const DenoiserParams& params, const HypergraphPolicy& policy,
                                         const Crystal& crystal, const VerifyOptions& o) {
  Rng rng(o.seed + 1);
  const auto& f = crystal.frac_coords();
  double dev = 0.0;
  for (int k = 0; k < o.trials; ++k) {
    const Vec3 s{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
    const int t = static_cast<int>(rng.uniform_int(1, o.max_t));
    const std::vector<Vec3> shifted = translate(f, s);
    const DenoiserOutput a = run(crystal, f, crystal.lattice(), t, params, policy);
    const DenoiserOutput b = run(crystal, shifted, crystal.lattice(), t, params, policy);
    dev = std::max({dev, inf_norm(b.eps_lattice - a.eps_lattice), inf_diff(b.eps_coords, a.eps_coords)});
  }
  return finish("periodic_translation", o.trials, dev, o.tolerance);
}

SymmetryCheck check_permutation(const DenoiserParams& params, const HypergraphPolicy& policy,
                                const Crystal& crystal, const VerifyOptions& o) {
  Rng rng(o.seed + 2);
  const std::size_t n = crystal.num_atoms();
  double dev = 0.0;
  for (int k = 0; k < o.trials; ++k) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    const int t = static_cast<int>(rng.uniform_int(1, o.max_t));
    // Permuted atom k is original atom perm[k].
    std::vector<int> species(n);
    std::vector<Vec3> frac(n);
    for (std::size_t i = 0; i < n; ++i) {
      species[i] = crystal.species()[perm[i]];
      frac[i] = crystal.frac_coords()[perm[i]];
    }
    const Crystal permuted(species, crystal.num_species(), frac, crystal.lattice());
    const DenoiserOutput a = run(crystal, crystal.frac_coords(), crystal.lattice(), t, params, policy);
    const DenoiserOutput b = run(permuted, frac, crystal.lattice(), t, params, policy);
    std::vector<Vec3> expected(n);
    for (std::size_t i = 0; i < n; ++i) expected[i] = a.eps_coords[perm[i]];
    dev = std::max({dev, inf_norm(b.eps_lattice - a.eps_lattice), inf_diff(b.eps_coords, expected)});
  }
  return finish("permutation", o.trials, dev, o.permutation_tolerance);
}

SymmetryCheck check_sampler_pushforward(const DenoiserParams& params, const HypergraphPolicy& policy,
                                        std::span<const int> species, const VerifyOptions& o) {
  ScheduleOptions so;
  so.steps = o.pushforward_steps;
  so.lambda_mc_samples = 20000;
  Model model;
  model.params = params;
  model.policy = policy;
  if (model.policy.mode == HyperedgeMode::kCube) model.policy.mode = HyperedgeMode::kSphere;
  model.schedule_options = so;
  model.schedules = make_schedules(so);

  Rng master(o.seed + 3);
  double dev = 0.0;
  for (int k = 0; k < o.pushforward_seeds; ++k) {
    const std::uint64_t seed = master.next_seed();
    SampleConfig plain;
    SampleConfig rotated;
    rotated.noise_frame = random_orthogonal(master);
    Rng r1(seed), r2(seed);
    try {
      const Crystal a = sample_structure(species, model, plain, r1);
      const Crystal b = sample_structure(species, model, rotated, r2);
      const Mat3 diff = b.lattice() - rotated.noise_frame * a.lattice();
      dev = std::max(dev, inf_norm(diff) / std::max(1.0, inf_norm(a.lattice())));
    } catch (const Error& e) {
      return finish("sampler_pushforward", k + 1, std::numeric_limits<double>::infinity(),
                    o.pushforward_tolerance, e.what());
    }
  }
  return finish("sampler_pushforward", o.pushforward_seeds, dev, o.pushforward_tolerance,
                policy.mode == HyperedgeMode::kCube ? "sampled with sphere hyperedges" : "");
}

SymmetryReport verify_symmetry(const DenoiserParams& params, const HypergraphPolicy& policy,
                               const Crystal& crystal, const VerifyOptions& options) {
  SymmetryReport r;
  r.checks.push_back(check_o3_equivariance(params, policy, crystal, options));
  r.checks.push_back(check_periodic_translation(params, policy, crystal, options));
  r.checks.push_back(check_permutation(params, policy, crystal, options));
  r.checks.push_back(check_sampler_pushforward(params, policy, crystal.species(), options));
  return r;
}

nlohmann::json to_json(const SymmetryReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    nlohmann::json j = {{"name", c.name},
                        {"trials", c.trials},
                        {"max_deviation", std::isfinite(c.max_deviation) ? nlohmann::json(c.max_deviation)
                                                                         : nlohmann::json("inf")},
                        {"tolerance", c.tolerance},
                        {"passed", c.passed}};
    if (!c.note.empty()) j["note"] = c.note;
    checks.push_back(j);
  }
  return {{"checks", checks}, {"all_passed", report.all_passed()}};
}

std::string format_table(const SymmetryReport& report) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %6s %14s %10s  %s\n", "check", "trials", "max_dev", "tol", "result");
  os << line;
  for (const auto& c : report.checks) {
    std::snprintf(line, sizeof line, "%-22s %6d %14.3e %10.1e  %s\n", c.name.c_str(), c.trials, c.max_deviation,
                  c.tolerance, c.passed ? "PASS" : "FAIL");
    os << line;
  }
  return os.str();
}

}  // namespace crysdiff
