#include "crysdiff/coord_diffusion.hpp"

#include <algorithm>
#include <cmath>

#include "crysdiff/crystal.hpp"
#include "crysdiff/error.hpp"

namespace crysdiff {

double SigmaSchedule::sigma(int t) const {
  if (t == 0) return sigma_min;
  if (t < 0 || t > steps) throw Error(ErrorKind::kDomain, "time step " + std::to_string(t) + " outside [0, T]");
  return sigmas[static_cast<std::size_t>(t - 1)];
}

SigmaSchedule make_sigma_schedule(int steps, double sigma_min, double sigma_max) {
  if (steps < 1) throw Error(ErrorKind::kConfig, "sigma schedule needs at least one step");
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min)) {
    throw Error(ErrorKind::kConfig, "sigma schedule needs 0 < sigma_min < sigma_max");
  }
  SigmaSchedule s;
  s.steps = steps;
  s.sigma_min = sigma_min;
  s.sigma_max = sigma_max;
  s.sigmas.resize(static_cast<std::size_t>(steps));
  const double ratio = sigma_max / sigma_min;
  for (int t = 1; t <= steps; ++t) {
    s.sigmas[static_cast<std::size_t>(t - 1)] = sigma_min * std::pow(ratio, double(t) / double(steps));
  }
  s.sigmas.back() = sigma_max;
  return s;
}

int wrapped_normal_truncation(double sigma) {
  return std::max(3, static_cast<int>(std::ceil(8.0 * sigma)) + 3);
}

double wrapped_normal_score(double u, double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::kDomain, "wrapped normal needs sigma > 0");
  if (!std::isfinite(u)) throw Error(ErrorKind::kDomain, "non-finite residual");
  double r = u - std::floor(u + 0.5);
  if (r >= 0.5) r -= 1.0;
  const int zmax = wrapped_normal_truncation(sigma);
  const double inv_var = 1.0 / (sigma * sigma);
  // Shift exponents by the largest term so that small sigma cannot underflow.
  const double peak = -0.5 * r * r * inv_var;
  auto term = [&](double x, double& num, double& den) {
    const double w = std::exp(-0.5 * x * x * inv_var - peak);
    num += -x * inv_var * w;
    den += w;
  };
  double num = 0.0;
  double den = 0.0;
  term(r, num, den);
  // Images at +z and -z are summed together so that r = 0 gives exactly 0.
  for (int z = zmax; z >= 1; --z) {
    double pn = 0.0, pd = 0.0;
    term(r + z, pn, pd);
    term(r - z, pn, pd);
    num += pn;
    den += pd;
  }
  return num / den;
}

std::vector<Vec3> wrapped_normal_score(std::span<const Vec3> f_t, std::span<const Vec3> f_0, double sigma) {
  if (f_t.size() != f_0.size()) throw Error(ErrorKind::kShape, "score inputs differ in atom count");
  std::vector<Vec3> out(f_t.size());
  for (std::size_t i = 0; i < f_t.size(); ++i) {
    const Vec3 u = periodic_diff(f_0[i], f_t[i]);
    for (int c = 0; c < 3; ++c) out[i][c] = wrapped_normal_score(u[c], sigma);
  }
  return out;
}

CoordNoise forward_sample_F(std::span<const Vec3> f_0, int t, const SigmaSchedule& schedule, Rng& rng) {
  const double sigma = schedule.sigma(t);
  CoordNoise out;
  out.eps.resize(f_0.size());
  out.f_t.resize(f_0.size());
  for (std::size_t i = 0; i < f_0.size(); ++i) {
    for (int c = 0; c < 3; ++c) out.eps[i][c] = rng.normal();
    out.f_t[i] = wrap(f_0[i] + sigma * out.eps[i]);
  }
  return out;
}

double lambda_weight(int t, const SigmaSchedule& schedule, std::size_t mc_samples, Rng& rng) {
  if (mc_samples == 0) throw Error(ErrorKind::kConfig, "lambda estimate needs samples");
  const double sigma = schedule.sigma(t);
  double acc = 0.0;
  for (std::size_t k = 0; k < mc_samples; ++k) {
    const double s = wrapped_normal_score(wrap(sigma * rng.normal()), sigma);
    acc += s * s;
  }
  const double mean = acc / static_cast<double>(mc_samples);
  if (!std::isfinite(mean)) throw Error(ErrorKind::kDomain, "non-finite score moment at t=" + std::to_string(t));
  return 1.0 / std::max(mean, 1e-12);
}

LambdaWeights estimate_lambda_weights(const SigmaSchedule& schedule, std::size_t mc_samples, std::uint64_t seed) {
  LambdaWeights w;
  w.mc_samples = mc_samples;
  w.lambdas.resize(static_cast<std::size_t>(schedule.steps));
  Rng rng(seed);
  for (int t = 1; t <= schedule.steps; ++t) {
    w.lambdas[static_cast<std::size_t>(t - 1)] = lambda_weight(t, schedule, mc_samples, rng);
  }
  return w;
}

double loss_F(std::span<const Vec3> score_target, std::span<const Vec3> prediction, double lambda) {
  if (score_target.size() != prediction.size()) throw Error(ErrorKind::kShape, "loss_F shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double d = score_target[i][c] - prediction[i][c];
      acc += d * d;
    }
  }
  return lambda * acc;
}

std::vector<Vec3> score_from_prediction(std::span<const Vec3> prediction, double lambda) {
  const double scale = 1.0 / std::sqrt(lambda);
  std::vector<Vec3> out(prediction.size());
  for (std::size_t i = 0; i < prediction.size(); ++i) out[i] = scale * prediction[i];
  return out;
}

nlohmann::json to_json(const SigmaSchedule& schedule, const LambdaWeights& weights) {
  return {{"steps", schedule.steps},
          {"sigma_min", schedule.sigma_min},
          {"sigma_max", schedule.sigma_max},
          {"sigmas", schedule.sigmas},
          {"lambda_mc_samples", weights.mc_samples},
          {"lambdas", weights.lambdas}};
}

}  // namespace crysdiff
