#include "crysdiff/nn.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "crysdiff/error.hpp"
#include "crysdiff/kernels.hpp"

namespace crysdiff {

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

std::vector<double> mlp_forward(const Mlp& mlp, std::span<const double> input, MlpTape* tape) {
  if (input.size() != mlp.input_size()) {
    throw Error(ErrorKind::kShape, "mlp input length " + std::to_string(input.size()) + " != " +
                                       std::to_string(mlp.input_size()));
  }
  const auto& k = kernels::active();
  std::vector<double> x(input.begin(), input.end());
  if (tape) {
    tape->owner = &mlp;
    tape->inputs.clear();
    tape->pre.clear();
  }
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const DenseLayer& layer = mlp.layers[l];
    std::vector<double> z(layer.weight.rows);
    k.gemv(layer.weight.data.data(), x.data(), layer.bias.data(), z.data(), layer.weight.rows, layer.weight.cols);
    const bool last = l + 1 == mlp.layers.size();
    if (tape) tape->inputs.push_back(std::move(x));
    if (last || mlp.activation == Activation::kIdentity) {
      if (tape && !last) tape->pre.push_back(z);
      x = std::move(z);
    } else {
      std::vector<double> a(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) a[i] = silu(z[i]);
      if (tape) tape->pre.push_back(std::move(z));
      x = std::move(a);
    }
  }
  return x;
}

std::vector<double> mlp_backward(const Mlp& mlp, const MlpTape& tape, std::span<const double> output_grad,
                                 Mlp& grads) {
  if (tape.owner != &mlp || tape.inputs.size() != mlp.layers.size() ||
      tape.pre.size() + 1 != mlp.layers.size()) {
    throw Error(ErrorKind::kTapeMismatch, "tape was not recorded on this network");
  }
  if (output_grad.size() != mlp.output_size()) throw Error(ErrorKind::kShape, "output gradient length mismatch");
  if (grads.layers.size() != mlp.layers.size()) throw Error(ErrorKind::kShape, "gradient buffer shape mismatch");
  const auto& k = kernels::active();
  std::vector<double> g(output_grad.begin(), output_grad.end());
  for (std::size_t l = mlp.layers.size(); l-- > 0;) {
    const DenseLayer& layer = mlp.layers[l];
    DenseLayer& glayer = grads.layers[l];
    const std::vector<double>& in = tape.inputs[l];
    if (in.size() != layer.weight.cols) throw Error(ErrorKind::kTapeMismatch, "stale tape");
    for (std::size_t r = 0; r < g.size(); ++r) glayer.bias[r] += g[r];
    k.ger_acc(g.data(), in.data(), glayer.weight.data.data(), layer.weight.rows, layer.weight.cols);
    std::vector<double> gin(layer.weight.cols, 0.0);
    k.gemv_t_acc(layer.weight.data.data(), g.data(), gin.data(), layer.weight.rows, layer.weight.cols);
    if (l > 0 && mlp.activation == Activation::kSiLU) {
      const std::vector<double>& z = tape.pre[l - 1];
      for (std::size_t i = 0; i < gin.size(); ++i) gin[i] *= silu_grad(z[i]);
    }
    g = std::move(gin);
  }
  return g;
}

Mlp init_params(const std::vector<std::size_t>& layer_sizes, Rng& rng, Activation activation) {
  if (layer_sizes.size() < 2) throw Error(ErrorKind::kShape, "an mlp needs at least input and output sizes");
  Mlp mlp;
  mlp.layer_sizes = layer_sizes;
  mlp.activation = activation;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t in = layer_sizes[l];
    const std::size_t out = layer_sizes[l + 1];
    DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& w : layer.weight.data) w = rng.uniform(-s, s);
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

Mlp init_params(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed, Activation activation) {
  Rng rng(seed);
  return init_params(layer_sizes, rng, activation);
}

Mlp zeros_like(const Mlp& mlp) {
  Mlp z = mlp;
  for (auto& layer : z.layers) {
    std::fill(layer.weight.data.begin(), layer.weight.data.end(), 0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
  return z;
}

void collect_params(Mlp& mlp, const std::string& prefix, std::vector<ParamView>& out) {
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    DenseLayer& layer = mlp.layers[l];
    const std::string base = prefix + ".layer" + std::to_string(l);
    out.push_back({base + ".weight", {layer.weight.rows, layer.weight.cols}, layer.weight.data});
    out.push_back({base + ".bias", {layer.bias.size()}, layer.bias});
  }
}

FiniteDiffResult finite_diff_check(const std::function<double()>& loss, std::span<const ParamView> params,
                                   std::span<const ParamView> grads, std::size_t probe_count, Rng& rng,
                                   double step) {
  if (params.size() != grads.size()) throw Error(ErrorKind::kShape, "params and grads differ in block count");
  std::size_t total = 0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].values.size() != grads[b].values.size()) {
      throw Error(ErrorKind::kShape, "gradient block " + params[b].name + " has wrong size");
    }
    total += params[b].values.size();
  }
  FiniteDiffResult result;
  if (total == 0) return result;
  for (std::size_t p = 0; p < probe_count; ++p) {
    std::size_t flat = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(total) - 1));
    std::size_t b = 0;
    while (flat >= params[b].values.size()) {
      flat -= params[b].values.size();
      ++b;
    }
    double& theta = params[b].values[flat];
    const double saved = theta;
    theta = saved + step;
    const double up = loss();
    theta = saved - step;
    const double down = loss();
    theta = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double analytic = grads[b].values[flat];
    const double rel = std::fabs(analytic - numeric) / std::max(std::fabs(numeric), 1e-8);
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_param = params[b].name + "[" + std::to_string(flat) + "]";
    }
    ++result.probes;
  }
  return result;
}

void adam_step(std::span<const ParamView> params, std::span<const ParamView> grads, AdamState& state,
               const AdamOptions& o) {
  if (params.size() != grads.size()) throw Error(ErrorKind::kShape, "params and grads differ in block count");
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& p : params) {
      state.m.emplace_back(p.values.size(), 0.0);
      state.v.emplace_back(p.values.size(), 0.0);
    }
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto theta = params[b].values;
    auto g = grads[b].values;
    if (g.size() != theta.size()) throw Error(ErrorKind::kShape, "gradient block " + params[b].name + " size");
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

nlohmann::json params_to_json(std::span<const ParamView> params) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : params) {
    arr.push_back({{"name", p.name},
                   {"shape", p.shape},
                   {"data", std::vector<double>(p.values.begin(), p.values.end())}});
  }
  return arr;
}

void params_from_json(const nlohmann::json& j, std::span<const ParamView> params) {
  std::unordered_map<std::string, const nlohmann::json*> by_name;
  for (const auto& entry : j) by_name[entry.at("name").get<std::string>()] = &entry;
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw Error(ErrorKind::kParse, "checkpoint lacks parameter " + p.name);
    const auto shape = it->second->at("shape").get<std::vector<std::size_t>>();
    if (shape != p.shape) throw Error(ErrorKind::kParse, "checkpoint shape mismatch for " + p.name);
    const auto& data = it->second->at("data");
    if (data.size() != p.values.size()) throw Error(ErrorKind::kParse, "checkpoint size mismatch for " + p.name);
    for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = data[i].get<double>();
  }
}

}  // namespace crysdiff
