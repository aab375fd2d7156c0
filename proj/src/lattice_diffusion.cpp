#include "crysdiff/lattice_diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "crysdiff/error.hpp"

namespace crysdiff {

namespace {

std::size_t index(int t, int steps) {
  if (t < 1 || t > steps) throw Error(ErrorKind::kDomain, "time step " + std::to_string(t) + " outside [1, T]");
  return static_cast<std::size_t>(t - 1);
}

}  // namespace

double BetaSchedule::beta(int t) const { return betas[index(t, steps)]; }
double BetaSchedule::alpha(int t) const { return alphas[index(t, steps)]; }
double BetaSchedule::alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars[index(t, steps)]; }

double BetaSchedule::posterior_variance(int t) const {
  return beta(t) * (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t));
}

BetaSchedule make_cosine_schedule(int steps, double offset) {
  if (steps < 2) throw Error(ErrorKind::kConfig, "cosine schedule needs T >= 2");
  auto f = [&](int t) {
    const double c = std::cos((double(t) / steps + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
    return c * c;
  };
  const double f0 = f(0);
  BetaSchedule s;
  s.steps = steps;
  double prev = 1.0;
  double running = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double ab = f(t) / f0;
    const double beta = std::clamp(1.0 - ab / prev, 1e-5, 0.999);
    prev = ab;
    running *= 1.0 - beta;
    s.betas.push_back(beta);
    s.alphas.push_back(1.0 - beta);
    s.alpha_bars.push_back(running);
  }
  return s;
}

LatticeNoise forward_sample_L(const Mat3& l_0, const Mat3& eps, int t, const BetaSchedule& schedule) {
  const double ab = schedule.alpha_bar(t);
  return {std::sqrt(ab) * l_0 + std::sqrt(1.0 - ab) * eps, eps};
}

LatticeNoise forward_sample_L(const Mat3& l_0, int t, const BetaSchedule& schedule, Rng& rng) {
  Mat3 eps;
  for (double& v : eps.a) v = rng.normal();
  return forward_sample_L(l_0, eps, t, schedule);
}

Mat3 reverse_mean(const Mat3& l_t, const Mat3& eps_hat, int t, const BetaSchedule& schedule) {
  const double coef = schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t));
  return (1.0 / std::sqrt(schedule.alpha(t))) * (l_t - coef * eps_hat);
}

double loss_L(const Mat3& eps, const Mat3& eps_hat) {
  double acc = 0.0;
  for (std::size_t i = 0; i < 9; ++i) {
    const double d = eps.a[i] - eps_hat.a[i];
    acc += d * d;
  }
  return acc;
}

nlohmann::json to_json(const BetaSchedule& schedule) {
  return {{"steps", schedule.steps}, {"betas", schedule.betas}, {"alpha_bars", schedule.alpha_bars}};
}

}  // namespace crysdiff
