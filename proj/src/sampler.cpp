#include "crysdiff/sampler.hpp"

#include <cmath>
#include <optional>

#include "crysdiff/denoiser.hpp"
#include "crysdiff/error.hpp"
#include "crysdiff/lattice_diffusion.hpp"
#include "crysdiff/parallel.hpp"

namespace crysdiff {

void SampleConfig::validate() const {
  if (corrector_steps < 0) throw Error(ErrorKind::kConfig, "corrector_steps must be >= 0");
  if (!(snr > 0.0)) throw Error(ErrorKind::kConfig, "snr must be positive");
  const Mat3 g = transpose(noise_frame) * noise_frame;
  if (max_abs_diff(g, Mat3::identity()) > 1e-9) throw Error(ErrorKind::kConfig, "noise_frame is not orthogonal");
}

ScoreFn model_score_fn(std::span<const int> species, const Model& model) {
  std::vector<int> sp(species.begin(), species.end());
  return [sp, &model](std::span<const Vec3> frac, const Mat3& lattice, int t) {
    const Hypergraph graph = build_hypergraph(frac, lattice, model.policy);
    DenoiserOutput out = denoise(sp, frac, lattice, t, graph, model.params);
    return ScoreEstimate{out.eps_lattice, score_from_prediction(out.eps_coords, model.schedules.lambda.at(t))};
  };
}

nlohmann::json to_json(const TrajectoryFrame& f) {
  nlohmann::json coords = nlohmann::json::array();
  for (const auto& v : f.frac) coords.push_back(v);
  // Rows are lattice vectors, matching the dataset format.
  const Mat3 rows = transpose(f.lattice);
  nlohmann::json lattice = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) lattice.push_back({rows(r, 0), rows(r, 1), rows(r, 2)});
  return {{"t", f.t}, {"lattice", lattice}, {"frac_coords", coords}};
}

namespace {

double frob(std::span<const Vec3> x) {
  double s = 0.0;
  for (const auto& v : x) s += dot(v, v);
  return std::sqrt(s);
}

void check_size(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kShape, "score and coordinate counts differ");
}

}  // namespace

std::vector<Vec3> predictor_step_F(std::span<const Vec3> f_t, std::span<const Vec3> score, int t,
                                   const SigmaSchedule& schedule, Rng& rng) {
  check_size(f_t, score);
  if (t < 1) throw Error(ErrorKind::kDomain, "predictor step needs t >= 1");
  const double s_t = schedule.sigma(t);
  const double s_prev = schedule.sigma(t - 1);
  const double d = std::max(0.0, s_t * s_t - s_prev * s_prev);
  const double noise = t > 1 ? std::sqrt(d) : 0.0;
  std::vector<Vec3> out(f_t.size());
  for (std::size_t i = 0; i < f_t.size(); ++i) {
    Vec3 z{0.0, 0.0, 0.0};
    if (t > 1) z = {rng.normal(), rng.normal(), rng.normal()};
    out[i] = wrap(f_t[i] + d * score[i] + noise * z);
  }
  return out;
}

std::vector<Vec3> corrector_step_F(std::span<const Vec3> f, std::span<const Vec3> score, double sigma, double snr,
                                   Rng& rng) {
  check_size(f, score);
  if (!(sigma > 0.0)) throw Error(ErrorKind::kDomain, "corrector noise scale must be positive");
  std::vector<Vec3> z(f.size());
  for (auto& v : z) v = {rng.normal(), rng.normal(), rng.normal()};
  const double score_norm = frob(score);
  if (score_norm == 0.0) return {f.begin(), f.end()};
  const double ratio = snr * frob(z) / score_norm;
  const double delta = std::min(2.0 * ratio * ratio, 0.25 * sigma * sigma);
  const double noise = std::sqrt(2.0 * delta);
  std::vector<Vec3> out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = wrap(f[i] + delta * score[i] + noise * z[i]);
  return out;
}

namespace {

bool finite(const Mat3& m) {
  for (double v : m.a)
    if (!std::isfinite(v)) return false;
  return true;
}

bool finite(std::span<const Vec3> x) {
  for (const auto& v : x)
    for (double c : v)
      if (!std::isfinite(c)) return false;
  return true;
}

ScoreEstimate checked(const ScoreFn& fn, std::span<const Vec3> frac, const Mat3& lattice, int t) {
  ScoreEstimate s = fn(frac, lattice, t);
  if (s.score_coords.size() != frac.size()) throw Error(ErrorKind::kShape, "score estimate has wrong length");
  if (!finite(s.eps_lattice) || !finite(s.score_coords)) {
    throw Error(ErrorKind::kDivergence, "non-finite denoiser output at step " + std::to_string(t));
  }
  return s;
}

Mat3 normal_matrix(Rng& rng) {
  Mat3 m;
  for (double& v : m.a) v = rng.normal();
  return m;
}

}  // namespace

Crystal sample_structure(std::span<const int> species, int num_species, const DiffusionSchedules& schedules,
                         const SampleConfig& config, Rng& rng, const ScoreFn& score_fn,
                         std::vector<TrajectoryFrame>* trajectory) {
  config.validate();
  const std::size_t n = species.size();
  if (n == 0) throw Error(ErrorKind::kShape, "composition is empty");
  const int T = schedules.steps();
  const Mat3& q = config.noise_frame;

  Mat3 lattice = q * normal_matrix(rng);
  std::vector<Vec3> frac(n);
  for (auto& f : frac) f = {rng.uniform(), rng.uniform(), rng.uniform()};
  if (trajectory) trajectory->push_back({T, lattice, frac});

  try {
    for (int t = T; t >= 1; --t) {
      const ScoreEstimate est = checked(score_fn, frac, lattice, t);
      const Mat3 z_lattice = q * normal_matrix(rng);
      Mat3 next = reverse_mean(lattice, est.eps_lattice, t, schedules.beta);
      if (t > 1) next = next + std::sqrt(schedules.beta.posterior_variance(t)) * z_lattice;
      lattice = next;
      if (!finite(lattice)) throw Error(ErrorKind::kDivergence, "non-finite lattice at step " + std::to_string(t));

      frac = predictor_step_F(frac, est.score_coords, t, schedules.sigma, rng);
      if (t > 1) {
        for (int c = 0; c < config.corrector_steps; ++c) {
          const ScoreEstimate corr = checked(score_fn, frac, lattice, t - 1);
          frac = corrector_step_F(frac, corr.score_coords, schedules.sigma.sigma(t - 1), config.snr, rng);
        }
      }
      if (trajectory) trajectory->push_back({t - 1, lattice, frac});
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDomain) throw Error(ErrorKind::kDivergence, std::string("sampler: ") + e.what());
    throw;
  }
  return Crystal(std::vector<int>(species.begin(), species.end()), num_species, frac, lattice);
}

Crystal sample_structure(std::span<const int> species, const Model& model, const SampleConfig& config, Rng& rng,
                         std::vector<TrajectoryFrame>* trajectory) {
  return sample_structure(species, model.params.config.num_species, model.schedules, config, rng,
                          model_score_fn(species, model), trajectory);
}

std::vector<Crystal> sample_many(std::span<const int> species, const Model& model, const SampleConfig& config,
                                 Rng& rng, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (auto& s : seeds) s = rng.next_seed();
  std::vector<std::optional<Crystal>> out(count);
  parallel_for(count, [&](std::size_t k) {
    Rng local(seeds[k]);
    out[k] = sample_structure(species, model, config, local);
  });
  std::vector<Crystal> result;
  result.reserve(count);
  for (auto& c : out) result.push_back(std::move(*c));
  return result;
}

}  // namespace crysdiff
