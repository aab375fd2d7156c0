#pragma once

#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "crysdiff/coord_diffusion.hpp"
#include "crysdiff/crystal.hpp"
#include "crysdiff/model.hpp"
#include "crysdiff/random.hpp"

namespace crysdiff {

struct SampleConfig {
  int corrector_steps = 1;
  double snr = 0.16;
  /// Orthogonal frame applied to L_T and to every lattice noise draw. Identity
  /// for normal use; the equivariance check runs the sampler under a random Q.
  Mat3 noise_frame = Mat3::identity();

  void validate() const;
};

/// What the sampler needs at each step: the lattice noise estimate and the
/// coordinate score estimate at level t.
struct ScoreEstimate {
  Mat3 eps_lattice;
  std::vector<Vec3> score_coords;
};

using ScoreFn = std::function<ScoreEstimate(std::span<const Vec3> frac, const Mat3& lattice, int t)>;

/// Score estimator backed by the trained denoiser. The hypergraph is rebuilt
/// from the current coordinates on every call.
ScoreFn model_score_fn(std::span<const int> species, const Model& model);

struct TrajectoryFrame {
  int t = 0;
  Mat3 lattice;
  std::vector<Vec3> frac;
};

nlohmann::json to_json(const TrajectoryFrame& frame);

/// F_{t-1} = wrap(F_t + d score + sqrt(d) z), d = sigma_t^2 - sigma_{t-1}^2.
/// No noise is drawn when t == 1.
std::vector<Vec3> predictor_step_F(std::span<const Vec3> f_t, std::span<const Vec3> score, int t,
                                   const SigmaSchedule& schedule, Rng& rng);

/// Langevin step F + delta score + sqrt(2 delta) z with
/// delta = min(2 (snr |z| / |score|)^2, 0.25 sigma^2). z is always drawn; a
/// zero score returns F unchanged.
std::vector<Vec3> corrector_step_F(std::span<const Vec3> f, std::span<const Vec3> score, double sigma, double snr,
                                   Rng& rng);

/// Reverse process from L_T ~ N(0, I), F_T ~ U[0,1). Rng draw order: L_T (row
/// major), F_T, then per step z_L, z_F, corrector noise.
Crystal sample_structure(std::span<const int> species, int num_species, const DiffusionSchedules& schedules,
                         const SampleConfig& config, Rng& rng, const ScoreFn& score_fn,
                         std::vector<TrajectoryFrame>* trajectory = nullptr);

Crystal sample_structure(std::span<const int> species, const Model& model, const SampleConfig& config, Rng& rng,
                         std::vector<TrajectoryFrame>* trajectory = nullptr);

/// Independent samples, sample k seeded by the k-th next_seed() of `rng`.
std::vector<Crystal> sample_many(std::span<const int> species, const Model& model, const SampleConfig& config,
                                 Rng& rng, std::size_t count);

}  // namespace crysdiff
