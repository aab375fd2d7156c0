#pragma once

#include <vector>

#include <json.hpp>

#include "crysdiff/linalg.hpp"
#include "crysdiff/random.hpp"

namespace crysdiff {

/// Fixed DDPM variance schedule. Arrays are indexed by t - 1; alpha_bar(0) = 1.
struct BetaSchedule {
  int steps = 0;
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_bars;

  double beta(int t) const;
  double alpha(int t) const;
  double alpha_bar(int t) const;
  /// beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t), the fixed reverse variance.
  double posterior_variance(int t) const;
};

/// Cosine alpha_bar profile with offset s; betas clipped to [1e-5, 0.999] and
/// alpha_bar recomputed as the running product of (1 - beta).
BetaSchedule make_cosine_schedule(int steps, double offset = 0.008);

struct LatticeNoise {
  Mat3 l_t;
  Mat3 eps;
};

/// L_t = sqrt(alpha_bar_t) L_0 + sqrt(1 - alpha_bar_t) eps, eps drawn row-major.
LatticeNoise forward_sample_L(const Mat3& l_0, int t, const BetaSchedule& schedule, Rng& rng);
LatticeNoise forward_sample_L(const Mat3& l_0, const Mat3& eps, int t, const BetaSchedule& schedule);

/// (1 / sqrt(alpha_t)) (L_t - beta_t / sqrt(1 - alpha_bar_t) eps_hat)
Mat3 reverse_mean(const Mat3& l_t, const Mat3& eps_hat, int t, const BetaSchedule& schedule);

/// Squared Frobenius distance.
double loss_L(const Mat3& eps, const Mat3& eps_hat);

nlohmann::json to_json(const BetaSchedule& schedule);

}  // namespace crysdiff
