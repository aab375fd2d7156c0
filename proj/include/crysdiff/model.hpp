#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "crysdiff/coord_diffusion.hpp"
#include "crysdiff/denoiser.hpp"
#include "crysdiff/hypergraph.hpp"
#include "crysdiff/lattice_diffusion.hpp"

namespace crysdiff {

inline constexpr int kCheckpointVersion = 1;

/// Noise schedules for both diffusion processes, sharing the step count T.
struct DiffusionSchedules {
  SigmaSchedule sigma;
  LambdaWeights lambda;
  BetaSchedule beta;

  int steps() const { return sigma.steps; }
};

struct ScheduleOptions {
  int steps = 1000;
  double sigma_min = 0.005;
  double sigma_max = 0.5;
  std::size_t lambda_mc_samples = 100000;
  std::uint64_t lambda_seed = 0x5eedu;
};

DiffusionSchedules make_schedules(const ScheduleOptions& options);

/// Trained (or freshly initialised) network plus everything needed to run it.
struct Model {
  DenoiserParams params;
  HypergraphPolicy policy;
  ScheduleOptions schedule_options;
  DiffusionSchedules schedules;
};

Model make_model(const DenoiserConfig& config, const HypergraphPolicy& policy, const ScheduleOptions& schedules,
                 std::uint64_t seed);

/// Checkpoint layout (JSON):
///   {"format": "crysdiff-checkpoint", "version": 1,
///    "denoiser": {architecture}, "hypergraph": {policy},
///    "schedules": {"options": {...}, "sigma": {...}, "beta": {...}},
///    "params": [{"name", "shape", "data"}, ...]}
/// Doubles are written in shortest round-trip form, so save/load is bit-exact.
nlohmann::json checkpoint_to_json(Model& model);
Model checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::string& path, Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace crysdiff
