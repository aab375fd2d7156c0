#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crysdiff/hypergraph.hpp"
#include "crysdiff/linalg.hpp"
#include "crysdiff/nn.hpp"

namespace crysdiff {

/// How the periodic Fourier features of a hyperedge are pooled.
enum class PsiPooling {
  /// Per member i: mean over partners j of psi(periodic_diff(f_i, f_j)).
  /// Carries the direction of each partner, so the coordinate head can point.
  kNodeRelative,
  /// Mean of psi over all ordered member pairs. Sine channels cancel, leaving
  /// a reflection-even feature; kept for ablation.
  kSymmetricPairs,
  /// psi of the raw sum over ordered pairs of (f_j - f_i), which is zero up to
  /// rounding; kept for ablation.
  kLiteralSum,
  /// kNodeRelative split into one block per partner species: block s sums
  /// psi over partners of species s, divided by |e| - 1. The blocks add up to
  /// the kNodeRelative feature.
  kNodeRelativeBySpecies,
};

/// Deliberate symmetry-breaking variants used to show that the verifier
/// checks are not vacuous. Never used outside tests and verification.
enum class Mutation {
  kNone,
  kRawLattice,           // feeds L entries instead of L^T L
  kPositionalEmbedding,  // adds an atom-index dependent offset to h^(0)
  kAbsoluteCoordinates,  // feeds psi(f_i) instead of coordinate differences
  kUnscaledReadout,      // eps_L = phi(.) without the left factor L
};

struct DenoiserConfig {
  int num_species = 3;
  std::size_t hidden_dim = 128;
  std::size_t num_layers = 4;
  std::size_t fourier_k = 16;
  std::size_t time_embed_dim = 64;
  std::size_t order_embed_dim = 16;
  /// Largest hyperedge order with an embedding row (rows cover 2..max_order).
  std::size_t max_order = 6;
  PsiPooling psi_pooling = PsiPooling::kNodeRelative;
  /// Feed (G / s^2)(1 + log(1 + s^2)), G = L^T L, s^2 = tr(G) / 3, instead of G.
  bool normalize_gram = true;
  /// Hidden layers (width hidden_dim) in each message MLP.
  std::size_t message_hidden_layers = 1;
  Mutation mutation = Mutation::kNone;

  std::size_t psi_feature_dim() const {
    const std::size_t blocks = psi_pooling == PsiPooling::kNodeRelativeBySpecies ? num_species : 1;
    return 6 * fourier_k * blocks;
  }
  std::size_t message_input_dim() const { return 2 * hidden_dim + 9 + psi_feature_dim() + order_embed_dim; }
};

struct EhnnLayerParams {
  Mlp message;  // [mean h_e, h_i, lattice Gram features, psi features, order embedding] -> hidden
  Mlp update;   // [h_i, m_i] -> hidden
};

struct DenoiserParams {
  DenoiserConfig config;
  Matrix atom_embed;   // num_species x hidden_dim
  Matrix order_embed;  // (max_order - 1) x order_embed_dim
  Mlp input_mlp;       // [atom embedding, time encoding] -> hidden
  std::vector<EhnnLayerParams> layers;
  Mlp readout;     // hidden -> 9, reshaped row-major to 3x3
  Mlp coord_head;  // hidden -> 3

  std::vector<ParamView> views();
  std::size_t parameter_count();
};

DenoiserParams init_denoiser(const DenoiserConfig& config, std::uint64_t seed);
DenoiserParams zeros_like(const DenoiserParams& params);
void add_scaled(DenoiserParams& into, DenoiserParams& from, double scale);

using NodeStates = std::vector<std::vector<double>>;

/// Channel 2m = sin(t / 10000^(2m/d)), channel 2m+1 = cos of the same angle.
std::vector<double> sinusoidal_embedding(double t, std::size_t dim);

/// psi[c][2m-2] = sin(2 pi m d_c), psi[c][2m-1] = cos(2 pi m d_c), m = 1..K,
/// flattened row-major (length 6K).
std::vector<double> fourier_psi(const Vec3& d, std::size_t k);

struct DenoiserOutput {
  Mat3 eps_lattice;
  std::vector<Vec3> eps_coords;
};

struct EhnnLayerTape {
  std::vector<MlpTape> messages;  // one per (hyperedge, member), hyperedge-major
  std::vector<MlpTape> updates;   // one per node
};

/// Everything the reverse pass needs from one forward evaluation.
struct DenoiserTape {
  const DenoiserParams* owner = nullptr;
  std::vector<int> species;
  Mat3 lattice;
  Hypergraph graph;
  std::vector<MlpTape> inputs;
  std::vector<EhnnLayerTape> layers;
  MlpTape readout;
  std::vector<MlpTape> coord_head;
};

NodeStates embed_inputs(std::span<const int> species, double t, const DenoiserParams& params,
                        std::vector<MlpTape>* tapes = nullptr);

/// Geometric features fed to the message MLP for member `member` of `edge`.
std::vector<double> hyperedge_features(const std::vector<std::size_t>& edge, std::size_t member,
                                       std::span<const Vec3> frac, std::span<const int> species,
                                       const DenoiserConfig& config);

/// One EHNN-MLP layer with residual node update.
NodeStates ehnn_layer(const NodeStates& states, const Hypergraph& graph, const Mat3& lattice,
                      std::span<const Vec3> frac, std::span<const int> species, const EhnnLayerParams& layer,
                      const DenoiserParams& params, EhnnLayerTape* tape = nullptr);

/// eps_L = L * reshape(phi(mean_i h_i)), eps_F[:, i] = phi_F(h_i).
DenoiserOutput readout(const NodeStates& states, const Mat3& lattice, const DenoiserParams& params,
                       DenoiserTape* tape = nullptr);

DenoiserOutput denoise(std::span<const int> species, std::span<const Vec3> frac, const Mat3& lattice, int t,
                       const Hypergraph& graph, const DenoiserParams& params, DenoiserTape* tape = nullptr);

/// Reverse pass: accumulates d(loss)/d(params) into `grads` given the loss
/// gradients with respect to both outputs.
void denoise_backward(const DenoiserParams& params, const DenoiserTape& tape, const Mat3& grad_eps_lattice,
                      std::span<const Vec3> grad_eps_coords, DenoiserParams& grads);

nlohmann::json to_json(const DenoiserConfig& config);
DenoiserConfig denoiser_config_from_json(const nlohmann::json& j);

PsiPooling parse_psi_pooling(const std::string& name);
std::string to_string(PsiPooling pooling);

}  // namespace crysdiff
