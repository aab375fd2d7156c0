#include "crysdiff/model.hpp"

#include <fstream>

#include "crysdiff/error.hpp"

namespace crysdiff {

DiffusionSchedules make_schedules(const ScheduleOptions& o) {
  DiffusionSchedules s;
  s.sigma = make_sigma_schedule(o.steps, o.sigma_min, o.sigma_max);
  s.lambda = estimate_lambda_weights(s.sigma, o.lambda_mc_samples, o.lambda_seed);
  s.beta = make_cosine_schedule(o.steps);
  return s;
}

Model make_model(const DenoiserConfig& config, const HypergraphPolicy& policy, const ScheduleOptions& schedules,
                 std::uint64_t seed) {
  Model m;
  m.params = init_denoiser(config, seed);
  m.policy = policy;
  m.schedule_options = schedules;
  m.schedules = make_schedules(schedules);
  return m;
}

nlohmann::json checkpoint_to_json(Model& model) {
  const auto& o = model.schedule_options;
  nlohmann::json options = {{"steps", o.steps},
                            {"sigma_min", o.sigma_min},
                            {"sigma_max", o.sigma_max},
                            {"lambda_mc_samples", o.lambda_mc_samples},
                            {"lambda_seed", o.lambda_seed}};
  return {{"format", "crysdiff-checkpoint"},
          {"version", kCheckpointVersion},
          {"denoiser", to_json(model.params.config)},
          {"hypergraph", to_json(model.policy)},
          {"schedules",
           {{"options", options},
            {"sigma", to_json(model.schedules.sigma, model.schedules.lambda)},
            {"beta", to_json(model.schedules.beta)}}},
          {"params", params_to_json(model.params.views())}};
}

Model checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != "crysdiff-checkpoint") {
      throw Error(ErrorKind::kParse, "not a crysdiff checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorKind::kParse, "unsupported checkpoint version " + j.at("version").dump());
    }
    Model m;
    const DenoiserConfig config = denoiser_config_from_json(j.at("denoiser"));
    m.params = zeros_like(init_denoiser(config, 0));
    params_from_json(j.at("params"), m.params.views());
    m.policy = policy_from_json(j.at("hypergraph"));
    const auto& sched = j.at("schedules");
    const auto& o = sched.at("options");
    m.schedule_options.steps = o.at("steps").get<int>();
    m.schedule_options.sigma_min = o.at("sigma_min").get<double>();
    m.schedule_options.sigma_max = o.at("sigma_max").get<double>();
    m.schedule_options.lambda_mc_samples = o.at("lambda_mc_samples").get<std::size_t>();
    m.schedule_options.lambda_seed = o.at("lambda_seed").get<std::uint64_t>();
    // Rebuild the deterministic schedules but keep the stored lambda values
    // so a checkpoint is usable even if the estimator changes.
    m.schedules.sigma = make_sigma_schedule(m.schedule_options.steps, m.schedule_options.sigma_min,
                                            m.schedule_options.sigma_max);
    m.schedules.beta = make_cosine_schedule(m.schedule_options.steps);
    m.schedules.lambda.lambdas = sched.at("sigma").at("lambdas").get<std::vector<double>>();
    m.schedules.lambda.mc_samples = m.schedule_options.lambda_mc_samples;
    if (static_cast<int>(m.schedules.lambda.lambdas.size()) != m.schedule_options.steps) {
      throw Error(ErrorKind::kParse, "lambda cache length does not match T");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, Model& model) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out << checkpoint_to_json(model).dump() << '\n';
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, path + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace crysdiff
