#include "crysdiff/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "crysdiff/crystal.hpp"
#include "crysdiff/error.hpp"
#include "crysdiff/kernels.hpp"

namespace crysdiff {

namespace {

void glorot_fill(Matrix& m, Rng& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
  for (double& v : m.data) v = rng.uniform(-s, s);
}

std::array<double, 9> lattice_descriptor(const Mat3& lattice, const DenoiserConfig& cfg) {
  if (cfg.mutation == Mutation::kRawLattice) return lattice.a;
  auto g = (transpose(lattice) * lattice).a;
  if (cfg.normalize_gram) {
    // Shape G / s^2 times (1 + log(1 + s^2)), s^2 = tr(G) / 3. Invertible, and
    // only logarithmic in the cell size, so untrained outputs stay linear in L.
    const double s2 = (g[0] + g[4] + g[8]) / 3.0;
    const double f = s2 > 0.0 ? (1.0 + std::log1p(s2)) / s2 : 0.0;
    for (double& v : g) v *= f;
  }
  return g;
}

void append(std::vector<double>& dst, std::span<const double> src) { dst.insert(dst.end(), src.begin(), src.end()); }

}  // namespace

std::vector<ParamView> DenoiserParams::views() {
  std::vector<ParamView> out;
  out.push_back({"atom_embed", {atom_embed.rows, atom_embed.cols}, atom_embed.data});
  out.push_back({"order_embed", {order_embed.rows, order_embed.cols}, order_embed.data});
  collect_params(input_mlp, "input_mlp", out);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    collect_params(layers[l].message, "layers." + std::to_string(l) + ".message", out);
    collect_params(layers[l].update, "layers." + std::to_string(l) + ".update", out);
  }
  collect_params(readout, "readout", out);
  collect_params(coord_head, "coord_head", out);
  return out;
}

std::size_t DenoiserParams::parameter_count() {
  std::size_t n = 0;
  for (const auto& v : views()) n += v.values.size();
  return n;
}

DenoiserParams init_denoiser(const DenoiserConfig& config, std::uint64_t seed) {
  if (config.num_species < 1 || config.hidden_dim == 0 || config.fourier_k == 0 || config.max_order < 2 ||
      config.message_hidden_layers == 0) {
    throw Error(ErrorKind::kConfig, "invalid denoiser configuration");
  }
  if (config.time_embed_dim % 2 != 0) throw Error(ErrorKind::kConfig, "time_embed_dim must be even");
  Rng rng(seed);
  const std::size_t h = config.hidden_dim;
  DenoiserParams p;
  p.config = config;
  p.atom_embed = Matrix(static_cast<std::size_t>(config.num_species), h);
  glorot_fill(p.atom_embed, rng);
  p.order_embed = Matrix(config.max_order - 1, config.order_embed_dim);
  glorot_fill(p.order_embed, rng);
  p.input_mlp = init_params({h + config.time_embed_dim, h, h}, rng);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    EhnnLayerParams layer;
    std::vector<std::size_t> widths{config.message_input_dim()};
    widths.insert(widths.end(), config.message_hidden_layers + 1, h);
    layer.message = init_params(widths, rng);
    layer.update = init_params({2 * h, h, h}, rng);
    p.layers.push_back(std::move(layer));
  }
  p.readout = init_params({h, h, 9}, rng);
  p.coord_head = init_params({h, h, 3}, rng);
  return p;
}

DenoiserParams zeros_like(const DenoiserParams& params) {
  DenoiserParams z = params;
  for (auto& v : z.views()) std::fill(v.values.begin(), v.values.end(), 0.0);
  return z;
}

void add_scaled(DenoiserParams& into, DenoiserParams& from, double scale) {
  auto dst = into.views();
  auto src = from.views();
  if (dst.size() != src.size()) throw Error(ErrorKind::kShape, "parameter layouts differ");
  const auto& k = kernels::active();
  for (std::size_t b = 0; b < dst.size(); ++b) {
    if (dst[b].values.size() != src[b].values.size()) throw Error(ErrorKind::kShape, "parameter block size differs");
    k.axpy(scale, src[b].values.data(), dst[b].values.data(), dst[b].values.size());
  }
}

std::vector<double> sinusoidal_embedding(double t, std::size_t dim) {
  std::vector<double> out(dim);
  for (std::size_t m = 0; 2 * m < dim; ++m) {
    const double angle = t / std::pow(10000.0, static_cast<double>(2 * m) / static_cast<double>(dim));
    out[2 * m] = std::sin(angle);
    if (2 * m + 1 < dim) out[2 * m + 1] = std::cos(angle);
  }
  return out;
}

std::vector<double> fourier_psi(const Vec3& d, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::kDomain, "fourier_psi needs K >= 1");
  std::vector<double> out(6 * k);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t m = 1; m <= k; ++m) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) * d[c];
      out[c * 2 * k + 2 * m - 2] = std::sin(angle);
      out[c * 2 * k + 2 * m - 1] = std::cos(angle);
    }
  }
  return out;
}

NodeStates embed_inputs(std::span<const int> species, double t, const DenoiserParams& params,
                        std::vector<MlpTape>* tapes) {
  const auto& cfg = params.config;
  const std::vector<double> time = sinusoidal_embedding(t, cfg.time_embed_dim);
  NodeStates states;
  states.reserve(species.size());
  if (tapes) tapes->assign(species.size(), MlpTape{});
  std::vector<double> x(cfg.hidden_dim + cfg.time_embed_dim);
  for (std::size_t i = 0; i < species.size(); ++i) {
    const int s = species[i];
    if (s < 0 || s >= cfg.num_species) {
      throw Error(ErrorKind::kSpecies, "species " + std::to_string(s) + " has no embedding row");
    }
    const double* row = params.atom_embed.data.data() + static_cast<std::size_t>(s) * cfg.hidden_dim;
    std::copy(row, row + cfg.hidden_dim, x.begin());
    std::copy(time.begin(), time.end(), x.begin() + static_cast<std::ptrdiff_t>(cfg.hidden_dim));
    std::vector<double> h = mlp_forward(params.input_mlp, x, tapes ? &(*tapes)[i] : nullptr);
    if (cfg.mutation == Mutation::kPositionalEmbedding) {
      const double offset = 0.5 * std::sin(static_cast<double>(i + 1));
      for (double& v : h) v += offset;
    }
    states.push_back(std::move(h));
  }
  return states;
}

std::vector<double> hyperedge_features(const std::vector<std::size_t>& edge, std::size_t member,
                                       std::span<const Vec3> frac, std::span<const int> species,
                                       const DenoiserConfig& config) {
  const std::size_t k = config.fourier_k;
  std::vector<double> acc(6 * k, 0.0);
  auto accumulate = [&](const Vec3& d) {
    const std::vector<double> psi = fourier_psi(d, k);
    for (std::size_t q = 0; q < acc.size(); ++q) acc[q] += psi[q];
  };
  const std::size_t i = edge[member];
  if (config.mutation == Mutation::kAbsoluteCoordinates) {
    std::vector<double> out = fourier_psi(frac[i], k);
    out.resize(config.psi_feature_dim(), 0.0);
    return out;
  }
  switch (config.psi_pooling) {
    case PsiPooling::kNodeRelative: {
      for (std::size_t j : edge) {
        if (j != i) accumulate(periodic_diff(frac[i], frac[j]));
      }
      const double inv = 1.0 / static_cast<double>(edge.size() - 1);
      for (double& v : acc) v *= inv;
      return acc;
    }
    case PsiPooling::kSymmetricPairs: {
      for (std::size_t a : edge)
        for (std::size_t b : edge)
          if (a != b) accumulate(periodic_diff(frac[a], frac[b]));
      const double pairs = static_cast<double>(edge.size() * (edge.size() - 1));
      for (double& v : acc) v /= pairs;
      return acc;
    }
    case PsiPooling::kNodeRelativeBySpecies: {
      const std::size_t block = 6 * k;
      std::vector<double> out(config.psi_feature_dim(), 0.0);
      const double inv = 1.0 / static_cast<double>(edge.size() - 1);
      for (std::size_t j : edge) {
        if (j == i) continue;
        const std::vector<double> psi = fourier_psi(periodic_diff(frac[i], frac[j]), k);
        double* dst = out.data() + static_cast<std::size_t>(species[j]) * block;
        for (std::size_t q = 0; q < block; ++q) dst[q] += inv * psi[q];
      }
      return out;
    }
    case PsiPooling::kLiteralSum: {
      Vec3 sum{};
      for (std::size_t a : edge)
        for (std::size_t b : edge) sum = sum + (frac[b] - frac[a]);
      return fourier_psi(sum, k);
    }
  }
  return acc;
}

NodeStates ehnn_layer(const NodeStates& states, const Hypergraph& graph, const Mat3& lattice,
                      std::span<const Vec3> frac, std::span<const int> species, const EhnnLayerParams& layer,
                      const DenoiserParams& params, EhnnLayerTape* tape) {
  const auto& cfg = params.config;
  const std::size_t n = states.size();
  const std::size_t h = cfg.hidden_dim;
  if (graph.num_nodes != n || frac.size() != n || species.size() != n)
    throw Error(ErrorKind::kGraph, "hypergraph/state size mismatch");
  const auto gram = lattice_descriptor(lattice, cfg);

  std::size_t message_count = 0;
  for (const auto& e : graph.hyperedges) message_count += e.size();
  if (tape) {
    tape->messages.assign(message_count, MlpTape{});
    tape->updates.assign(n, MlpTape{});
  }

  std::vector<std::vector<double>> aggregated(n, std::vector<double>(h, 0.0));
  std::vector<double> mean_h(h);
  std::vector<double> x;
  x.reserve(cfg.message_input_dim());
  std::size_t slot = 0;
  for (const auto& edge : graph.hyperedges) {
    if (edge.size() < 2 || edge.size() > cfg.max_order) {
      throw Error(ErrorKind::kGraph, "hyperedge of order " + std::to_string(edge.size()) +
                                         " outside the embedded range 2.." + std::to_string(cfg.max_order));
    }
    std::fill(mean_h.begin(), mean_h.end(), 0.0);
    for (std::size_t v : edge) {
      if (v >= n) throw Error(ErrorKind::kGraph, "hyperedge index out of range");
      for (std::size_t q = 0; q < h; ++q) mean_h[q] += states[v][q];
    }
    const double inv_size = 1.0 / static_cast<double>(edge.size());
    for (double& v : mean_h) v *= inv_size;
    const double* order_row = params.order_embed.data.data() + (edge.size() - 2) * cfg.order_embed_dim;
    for (std::size_t member = 0; member < edge.size(); ++member) {
      const std::size_t i = edge[member];
      x.clear();
      append(x, mean_h);
      append(x, states[i]);
      append(x, gram);
      append(x, hyperedge_features(edge, member, frac, species, cfg));
      x.insert(x.end(), order_row, order_row + cfg.order_embed_dim);
      const std::vector<double> m = mlp_forward(layer.message, x, tape ? &tape->messages[slot] : nullptr);
      for (std::size_t q = 0; q < h; ++q) aggregated[i][q] += m[q] * inv_size;
      ++slot;
    }
  }

  NodeStates out(n);
  std::vector<double> u(2 * h);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(states[i].begin(), states[i].end(), u.begin());
    std::copy(aggregated[i].begin(), aggregated[i].end(), u.begin() + static_cast<std::ptrdiff_t>(h));
    const std::vector<double> delta = mlp_forward(layer.update, u, tape ? &tape->updates[i] : nullptr);
    out[i] = states[i];
    for (std::size_t q = 0; q < h; ++q) out[i][q] += delta[q];
  }
  return out;
}

DenoiserOutput readout(const NodeStates& states, const Mat3& lattice, const DenoiserParams& params,
                       DenoiserTape* tape) {
  const std::size_t n = states.size();
  const std::size_t h = params.config.hidden_dim;
  std::vector<double> pooled(h, 0.0);
  for (const auto& s : states)
    for (std::size_t q = 0; q < h; ++q) pooled[q] += s[q];
  if (n > 0) {
    for (double& v : pooled) v /= static_cast<double>(n);
  }
  const std::vector<double> phi = mlp_forward(params.readout, pooled, tape ? &tape->readout : nullptr);
  Mat3 weights;
  std::copy(phi.begin(), phi.end(), weights.a.begin());

  DenoiserOutput out;
  out.eps_lattice = params.config.mutation == Mutation::kUnscaledReadout ? weights : lattice * weights;
  out.eps_coords.resize(n);
  if (tape) tape->coord_head.assign(n, MlpTape{});
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> f = mlp_forward(params.coord_head, states[i], tape ? &tape->coord_head[i] : nullptr);
    out.eps_coords[i] = {f[0], f[1], f[2]};
  }
  return out;
}

DenoiserOutput denoise(std::span<const int> species, std::span<const Vec3> frac, const Mat3& lattice, int t,
                       const Hypergraph& graph, const DenoiserParams& params, DenoiserTape* tape) {
  if (species.size() != frac.size()) throw Error(ErrorKind::kShape, "species/coordinate count mismatch");
  if (graph.num_nodes != species.size()) throw Error(ErrorKind::kGraph, "hypergraph node count mismatch");
  if (tape) {
    tape->owner = &params;
    tape->species.assign(species.begin(), species.end());
    tape->lattice = lattice;
    tape->graph = graph;
    tape->layers.assign(params.layers.size(), EhnnLayerTape{});
  }
  NodeStates states = embed_inputs(species, static_cast<double>(t), params, tape ? &tape->inputs : nullptr);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    states = ehnn_layer(states, graph, lattice, frac, species, params.layers[l], params,
                        tape ? &tape->layers[l] : nullptr);
  }
  return readout(states, lattice, params, tape);
}

void denoise_backward(const DenoiserParams& params, const DenoiserTape& tape, const Mat3& grad_eps_lattice,
                      std::span<const Vec3> grad_eps_coords, DenoiserParams& grads) {
  if (tape.owner != &params) throw Error(ErrorKind::kTapeMismatch, "denoiser tape from another parameter set");
  const auto& cfg = params.config;
  const std::size_t n = tape.species.size();
  const std::size_t h = cfg.hidden_dim;
  if (grad_eps_coords.size() != n) throw Error(ErrorKind::kShape, "coordinate gradient has wrong atom count");

  // Readout.
  NodeStates dh(n, std::vector<double>(h, 0.0));
  const Mat3 d_weights = cfg.mutation == Mutation::kUnscaledReadout
                             ? grad_eps_lattice
                             : transpose(tape.lattice) * grad_eps_lattice;
  const std::vector<double> d_pooled = mlp_backward(params.readout, tape.readout, d_weights.a, grads.readout);
  if (n > 0) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t q = 0; q < h; ++q) dh[i][q] = d_pooled[q] * inv_n;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::array<double, 3> g = grad_eps_coords[i];
    const std::vector<double> d = mlp_backward(params.coord_head, tape.coord_head[i], g, grads.coord_head);
    for (std::size_t q = 0; q < h; ++q) dh[i][q] += d[q];
  }

  // Message-passing layers, last to first.
  const std::size_t order_off = 2 * h + 9 + cfg.psi_feature_dim();
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const EhnnLayerParams& layer = params.layers[l];
    EhnnLayerParams& glayer = grads.layers[l];
    const EhnnLayerTape& lt = tape.layers[l];
    NodeStates din = dh;  // residual path
    std::vector<std::vector<double>> dm(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> du = mlp_backward(layer.update, lt.updates[i], dh[i], glayer.update);
      for (std::size_t q = 0; q < h; ++q) din[i][q] += du[q];
      dm[i].assign(du.begin() + static_cast<std::ptrdiff_t>(h), du.end());
    }
    std::size_t slot = 0;
    std::vector<double> g(h);
    for (const auto& edge : tape.graph.hyperedges) {
      const double inv_size = 1.0 / static_cast<double>(edge.size());
      double* order_grad = grads.order_embed.data.data() + (edge.size() - 2) * cfg.order_embed_dim;
      for (std::size_t member = 0; member < edge.size(); ++member) {
        const std::size_t i = edge[member];
        for (std::size_t q = 0; q < h; ++q) g[q] = dm[i][q] * inv_size;
        const std::vector<double> dx = mlp_backward(layer.message, lt.messages[slot], g, glayer.message);
        for (std::size_t v : edge)
          for (std::size_t q = 0; q < h; ++q) din[v][q] += dx[q] * inv_size;
        for (std::size_t q = 0; q < h; ++q) din[i][q] += dx[h + q];
        for (std::size_t q = 0; q < cfg.order_embed_dim; ++q) order_grad[q] += dx[order_off + q];
        ++slot;
      }
    }
    dh = std::move(din);
  }

  // Input embedding.
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> dx = mlp_backward(params.input_mlp, tape.inputs[i], dh[i], grads.input_mlp);
    double* row = grads.atom_embed.data.data() + static_cast<std::size_t>(tape.species[i]) * h;
    for (std::size_t q = 0; q < h; ++q) row[q] += dx[q];
  }
}

PsiPooling parse_psi_pooling(const std::string& name) {
  if (name == "node_relative") return PsiPooling::kNodeRelative;
  if (name == "symmetric_pairs") return PsiPooling::kSymmetricPairs;
  if (name == "literal_sum") return PsiPooling::kLiteralSum;
  if (name == "node_relative_species") return PsiPooling::kNodeRelativeBySpecies;
  throw Error(ErrorKind::kConfig, "unknown psi pooling '" + name + "'");
}

std::string to_string(PsiPooling pooling) {
  switch (pooling) {
    case PsiPooling::kNodeRelative: return "node_relative";
    case PsiPooling::kSymmetricPairs: return "symmetric_pairs";
    case PsiPooling::kLiteralSum: return "literal_sum";
    case PsiPooling::kNodeRelativeBySpecies: return "node_relative_species";
  }
  return "node_relative";
}

nlohmann::json to_json(const DenoiserConfig& c) {
  return {{"num_species", c.num_species},       {"hidden_dim", c.hidden_dim},
          {"num_layers", c.num_layers},         {"fourier_k", c.fourier_k},
          {"time_embed_dim", c.time_embed_dim}, {"order_embed_dim", c.order_embed_dim},
          {"max_order", c.max_order},           {"psi_pooling", to_string(c.psi_pooling)},
          {"normalize_gram", c.normalize_gram}, {"message_hidden_layers", c.message_hidden_layers}};
}

DenoiserConfig denoiser_config_from_json(const nlohmann::json& j) {
  DenoiserConfig c;
  c.num_species = j.value("num_species", c.num_species);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.num_layers = j.value("num_layers", c.num_layers);
  c.fourier_k = j.value("fourier_k", c.fourier_k);
  c.time_embed_dim = j.value("time_embed_dim", c.time_embed_dim);
  c.order_embed_dim = j.value("order_embed_dim", c.order_embed_dim);
  c.max_order = j.value("max_order", c.max_order);
  c.psi_pooling = parse_psi_pooling(j.value("psi_pooling", std::string("node_relative")));
  c.normalize_gram = j.value("normalize_gram", c.normalize_gram);
  c.message_hidden_layers = j.value("message_hidden_layers", c.message_hidden_layers);
  return c;
}

}  // namespace crysdiff
