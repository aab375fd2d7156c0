#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crysdiff/random.hpp"

namespace crysdiff {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

enum class Activation { kSiLU, kIdentity };

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;
};

/// Multilayer perceptron: affine maps with `activation` between them and a
/// final affine layer without activation.
struct Mlp {
  std::vector<std::size_t> layer_sizes;
  std::vector<DenseLayer> layers;
  Activation activation = Activation::kSiLU;

  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
};

/// Forward activations cached for the reverse pass.
struct MlpTape {
  const Mlp* owner = nullptr;
  std::vector<std::vector<double>> inputs;  // input to each affine layer
  std::vector<std::vector<double>> pre;     // pre-activation of each hidden layer
};

double silu(double x);
double silu_grad(double x);

std::vector<double> mlp_forward(const Mlp& mlp, std::span<const double> input, MlpTape* tape = nullptr);

/// Accumulates parameter gradients into `grads` (shaped like `mlp`) and
/// returns the gradient with respect to the input. Throws kTapeMismatch if the
/// tape was recorded on a different network or has the wrong shape.
std::vector<double> mlp_backward(const Mlp& mlp, const MlpTape& tape, std::span<const double> output_grad,
                                 Mlp& grads);

/// Glorot-uniform weights, zero biases.
Mlp init_params(const std::vector<std::size_t>& layer_sizes, Rng& rng, Activation activation = Activation::kSiLU);
Mlp init_params(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed,
                Activation activation = Activation::kSiLU);

Mlp zeros_like(const Mlp& mlp);

/// Named view of one parameter array; the unit of optimisation, gradient
/// checking and checkpointing.
struct ParamView {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<double> values;
};

void collect_params(Mlp& mlp, const std::string& prefix, std::vector<ParamView>& out);

struct FiniteDiffResult {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  std::string worst_param;
};

/// Central differences on `probe_count` uniformly chosen scalars of `params`
/// compared against the matching entries of `grads`.
/// Relative error is |analytic - numeric| / max(|numeric|, 1e-8).
FiniteDiffResult finite_diff_check(const std::function<double()>& loss, std::span<const ParamView> params,
                                   std::span<const ParamView> grads, std::size_t probe_count, Rng& rng,
                                   double step = 1e-5);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

/// One bias-corrected adaptive-moment update. Each scalar is updated from its
/// own moments only.
void adam_step(std::span<const ParamView> params, std::span<const ParamView> grads, AdamState& state,
               const AdamOptions& options);

nlohmann::json params_to_json(std::span<const ParamView> params);
/// Copies named arrays into `params`; throws kParse on missing names or
/// mismatched shapes.
void params_from_json(const nlohmann::json& j, std::span<const ParamView> params);

}  // namespace crysdiff
