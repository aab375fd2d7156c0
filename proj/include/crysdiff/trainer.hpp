#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crysdiff/crystal.hpp"
#include "crysdiff/model.hpp"
#include "crysdiff/nn.hpp"
#include "crysdiff/random.hpp"

namespace crysdiff {

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double weight_lattice = 1.0;
  double weight_coords = 1.0;
  /// Save a checkpoint every this many epochs (0 disables).
  int checkpoint_interval = 0;
  std::string checkpoint_path;
  /// Hard cap on optimizer steps across all epochs (0 means no cap).
  long max_steps = 0;
  /// Cosine decay of the learning rate down to lr * lr_final_fraction over the
  /// run. 1.0 keeps it constant.
  double lr_final_fraction = 1.0;
  /// Clip the batch gradient to this global L2 norm (0 disables).
  double grad_clip = 0.0;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct StepLoss {
  double loss = 0.0;
  double loss_lattice = 0.0;
  double loss_coords = 0.0;
  int t = 0;
};

/// One joint noising + denoising pass. Draw order from `rng`: t, eps_L (row
/// major), eps_F (atom major). If `grads` is given the exact parameter
/// gradients of the returned loss are accumulated into it.
StepLoss train_step(const Crystal& crystal, const Model& model, Rng& rng, const TrainConfig& config,
                    DenoiserParams* grads);

/// Mean loss and mean gradient over a batch. Sample k uses an Rng seeded with
/// the k-th next_seed() of `rng`; samples may run in parallel but the
/// reduction happens in batch order.
StepLoss train_batch(std::span<const Crystal* const> batch, const Model& model, Rng& rng,
                     const TrainConfig& config, DenoiserParams& grads);

struct EpochStats {
  int epoch = 0;
  long steps = 0;
  double mean_loss = 0.0;
  double mean_loss_lattice = 0.0;
  double mean_loss_coords = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> curve;
  long steps = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Shuffled mini-batch Adam training of `model.params` in place.
TrainResult train_loop(std::span<const Crystal> dataset, Model& model, const TrainConfig& config,
                       const EpochCallback& on_epoch = {});

std::string loss_csv_header();
std::string loss_csv_row(const EpochStats& stats);

}  // namespace crysdiff
