#include "crysdiff/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "crysdiff/coord_diffusion.hpp"
#include "crysdiff/error.hpp"
#include "crysdiff/lattice_diffusion.hpp"
#include "crysdiff/parallel.hpp"

namespace crysdiff {

void TrainConfig::validate() const {
  if (epochs <= 0) throw Error(ErrorKind::kConfig, "epochs must be positive");
  if (batch_size == 0) throw Error(ErrorKind::kConfig, "batch_size must be positive");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::kConfig, "learning_rate must be positive");
  if (!(weight_lattice >= 0.0) || !(weight_coords >= 0.0) || !(weight_lattice + weight_coords > 0.0)) {
    throw Error(ErrorKind::kConfig, "loss weights must be >= 0 with a positive sum");
  }
  if (checkpoint_interval < 0) throw Error(ErrorKind::kConfig, "checkpoint_interval must be >= 0");
  if (checkpoint_interval > 0 && checkpoint_path.empty()) {
    throw Error(ErrorKind::kConfig, "checkpoint_interval set without a checkpoint path");
  }
  if (max_steps < 0) throw Error(ErrorKind::kConfig, "max_steps must be >= 0");
  if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0)) {
    throw Error(ErrorKind::kConfig, "lr_final_fraction must be in (0, 1]");
  }
  if (!(grad_clip >= 0.0)) throw Error(ErrorKind::kConfig, "grad_clip must be >= 0");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"weight_lattice", c.weight_lattice},
          {"weight_coords", c.weight_coords},
          {"checkpoint_interval", c.checkpoint_interval},
          {"max_steps", c.max_steps},
          {"lr_final_fraction", c.lr_final_fraction},
          {"grad_clip", c.grad_clip}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.seed = j.value("seed", c.seed);
    c.weight_lattice = j.value("weight_lattice", c.weight_lattice);
    c.weight_coords = j.value("weight_coords", c.weight_coords);
    c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.lr_final_fraction = j.value("lr_final_fraction", c.lr_final_fraction);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("train config: ") + e.what());
  }
  return c;
}

StepLoss train_step(const Crystal& crystal, const Model& model, Rng& rng, const TrainConfig& config,
                    DenoiserParams* grads) {
  const auto& sched = model.schedules;
  const int T = sched.steps();
  StepLoss out;
  out.t = static_cast<int>(rng.uniform_int(1, T));
  const int t = out.t;

  const LatticeNoise ln = forward_sample_L(crystal.lattice(), t, sched.beta, rng);
  const CoordNoise cn = forward_sample_F(crystal.frac_coords(), t, sched.sigma, rng);

  const Hypergraph graph = build_hypergraph(cn.f_t, ln.l_t, model.policy);
  DenoiserTape tape;
  const DenoiserOutput pred =
      denoise(crystal.species(), cn.f_t, ln.l_t, t, graph, model.params, grads ? &tape : nullptr);

  // The coordinate head is trained against sqrt(lambda) * score, which has
  // roughly unit scale at every noise level.
  const double lambda = sched.lambda.at(t);
  const double root_lambda = std::sqrt(lambda);
  const std::vector<Vec3> score = wrapped_normal_score(cn.f_t, crystal.frac_coords(), sched.sigma.sigma(t));
  out.loss_lattice = loss_L(ln.eps, pred.eps_lattice);
  out.loss_coords = loss_F(score, score_from_prediction(pred.eps_coords, lambda), lambda);
  out.loss = config.weight_lattice * out.loss_lattice + config.weight_coords * out.loss_coords;

  if (grads) {
    const Mat3 g_lattice = (-2.0 * config.weight_lattice) * (ln.eps - pred.eps_lattice);
    std::vector<Vec3> g_coords(score.size());
    for (std::size_t i = 0; i < score.size(); ++i) {
      g_coords[i] = (-2.0 * config.weight_coords) * (root_lambda * score[i] - pred.eps_coords[i]);
    }
    denoise_backward(model.params, tape, g_lattice, g_coords, *grads);
  }
  return out;
}

StepLoss train_batch(std::span<const Crystal* const> batch, const Model& model, Rng& rng,
                     const TrainConfig& config, DenoiserParams& grads) {
  const std::size_t b = batch.size();
  if (b == 0) throw Error(ErrorKind::kConfig, "empty batch");
  std::vector<std::uint64_t> seeds(b);
  for (auto& s : seeds) s = rng.next_seed();

  std::vector<StepLoss> losses(b);
  std::vector<DenoiserParams> per_sample(b, zeros_like(grads));
  parallel_for(b, [&](std::size_t k) {
    Rng local(seeds[k]);
    losses[k] = train_step(*batch[k], model, local, config, &per_sample[k]);
  });

  StepLoss mean;
  const double inv = 1.0 / static_cast<double>(b);
  for (std::size_t k = 0; k < b; ++k) {
    add_scaled(grads, per_sample[k], inv);
    mean.loss += losses[k].loss * inv;
    mean.loss_lattice += losses[k].loss_lattice * inv;
    mean.loss_coords += losses[k].loss_coords * inv;
  }
  return mean;
}

namespace {

void zero(DenoiserParams& p) {
  for (auto& v : p.views()) std::fill(v.values.begin(), v.values.end(), 0.0);
}

void clip_global_norm(DenoiserParams& g, double max_norm) {
  double sq = 0.0;
  auto views = g.views();
  for (const auto& v : views)
    for (double x : v.values) sq += x * x;
  const double n = std::sqrt(sq);
  if (!std::isfinite(n)) throw Error(ErrorKind::kDivergence, "non-finite gradient norm");
  if (n <= max_norm) return;
  const double s = max_norm / n;
  for (auto& v : views)
    for (double& x : v.values) x *= s;
}

}  // namespace

TrainResult train_loop(std::span<const Crystal> dataset, Model& model, const TrainConfig& config,
                       const EpochCallback& on_epoch) {
  if (dataset.empty()) throw Error(ErrorKind::kConfig, "training dataset is empty");
  config.validate();
  for (const auto& c : dataset) {
    if (c.num_species() != model.params.config.num_species) {
      throw Error(ErrorKind::kSpecies, "dataset species count does not match the denoiser");
    }
  }

  Rng rng(config.seed);
  AdamState adam;
  DenoiserParams grads = zeros_like(model.params);
  auto param_views = model.params.views();
  auto grad_views = grads.views();

  const std::size_t n = dataset.size();
  const long batches_per_epoch = static_cast<long>((n + config.batch_size - 1) / config.batch_size);
  long planned = batches_per_epoch * config.epochs;
  if (config.max_steps > 0) planned = std::min(planned, config.max_steps);

  TrainResult result;
  std::vector<std::size_t> order(n);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng.engine());

    EpochStats stats;
    stats.epoch = epoch;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      if (config.max_steps > 0 && result.steps >= config.max_steps) break;
      const std::size_t end = std::min(n, start + config.batch_size);
      std::vector<const Crystal*> batch;
      for (std::size_t k = start; k < end; ++k) batch.push_back(&dataset[order[k]]);

      zero(grads);
      const StepLoss loss = train_batch(batch, model, rng, config, grads);
      if (!std::isfinite(loss.loss)) {
        throw Error(ErrorKind::kDivergence, "non-finite loss at step " + std::to_string(result.steps + 1));
      }
      if (config.grad_clip > 0.0) clip_global_norm(grads, config.grad_clip);

      AdamOptions opts;
      const double progress = planned > 1 ? static_cast<double>(result.steps) / static_cast<double>(planned - 1)
                                          : 0.0;
      const double f = config.lr_final_fraction;
      opts.lr = config.learning_rate * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
      adam_step(param_views, grad_views, adam, opts);
      ++result.steps;

      const double w = static_cast<double>(batch.size());
      stats.mean_loss += loss.loss * w;
      stats.mean_loss_lattice += loss.loss_lattice * w;
      stats.mean_loss_coords += loss.loss_coords * w;
      seen += batch.size();
    }
    if (seen == 0) break;
    stats.mean_loss /= static_cast<double>(seen);
    stats.mean_loss_lattice /= static_cast<double>(seen);
    stats.mean_loss_coords /= static_cast<double>(seen);
    stats.steps = result.steps;
    result.curve.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (config.checkpoint_interval > 0 && epoch % config.checkpoint_interval == 0) {
      save_checkpoint(config.checkpoint_path, model);
    }
  }
  return result;
}

std::string loss_csv_header() { return "epoch,mean_loss_L,mean_loss_F"; }

std::string loss_csv_row(const EpochStats& s) {
  std::ostringstream os;
  os.precision(10);
  os << s.epoch << ',' << s.mean_loss_lattice << ',' << s.mean_loss_coords;
  return os.str();
}

}  // namespace crysdiff
