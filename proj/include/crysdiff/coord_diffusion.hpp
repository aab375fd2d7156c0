#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crysdiff/linalg.hpp"
#include "crysdiff/random.hpp"

namespace crysdiff {

/// Exponential noise levels sigma_t = sigma_min * (sigma_max / sigma_min)^(t/T),
/// t = 1..T. sigma(0) is defined as sigma_min, the level the final predictor
/// step lands on.
struct SigmaSchedule {
  int steps = 0;
  double sigma_min = 0.005;
  double sigma_max = 0.5;
  std::vector<double> sigmas;  // sigmas[t - 1]

  double sigma(int t) const;
};

SigmaSchedule make_sigma_schedule(int steps, double sigma_min = 0.005, double sigma_max = 0.5);

/// Number of images summed on each side of the residual.
int wrapped_normal_truncation(double sigma);

/// d/du log sum_z exp(-(u + z)^2 / (2 sigma^2)) for the residual u, reduced
/// into [-0.5, 0.5) first so that score(u) == score(u + k) for integer k.
double wrapped_normal_score(double u, double sigma);

/// Elementwise score of q(F_t | F_0) with respect to F_t.
std::vector<Vec3> wrapped_normal_score(std::span<const Vec3> f_t, std::span<const Vec3> f_0, double sigma);

struct CoordNoise {
  std::vector<Vec3> f_t;
  std::vector<Vec3> eps;
};

/// F_t = wrap(F_0 + sigma_t eps), eps ~ N(0, I), drawn atom-major.
CoordNoise forward_sample_F(std::span<const Vec3> f_0, int t, const SigmaSchedule& schedule, Rng& rng);

/// Monte Carlo estimate of 1 / E[score^2] per scalar coordinate at level t.
double lambda_weight(int t, const SigmaSchedule& schedule, std::size_t mc_samples, Rng& rng);

/// Cached lambda_t for t = 1..T.
struct LambdaWeights {
  std::vector<double> lambdas;  // lambdas[t - 1]
  std::size_t mc_samples = 0;

  double at(int t) const { return lambdas.at(static_cast<std::size_t>(t - 1)); }
};

LambdaWeights estimate_lambda_weights(const SigmaSchedule& schedule, std::size_t mc_samples, std::uint64_t seed);

/// lambda * ||target - prediction||_F^2
double loss_F(std::span<const Vec3> score_target, std::span<const Vec3> prediction, double lambda);

/// The coordinate head predicts a unit-scale quantity; the score estimate is
/// that output divided by sqrt(lambda_t).
std::vector<Vec3> score_from_prediction(std::span<const Vec3> prediction, double lambda);

nlohmann::json to_json(const SigmaSchedule& schedule, const LambdaWeights& weights);

}  // namespace crysdiff
