#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "crysdiff/dataset.hpp"
#include "crysdiff/error.hpp"
#include "crysdiff/evaluation.hpp"
#include "crysdiff/hypergraph.hpp"
#include "crysdiff/model.hpp"
#include "crysdiff/sampler.hpp"
#include "crysdiff/symmetry.hpp"
#include "crysdiff/trainer.hpp"

namespace crysdiff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --config reader: top-level keys are global flags, an object keyed by a
// subcommand name holds that subcommand's flags. Arrays become multi-value
// inputs.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j;
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames()[0];
      if (opt->count() > 0)
        j[name] = opt->results().size() == 1 ? json(opt->results()[0]) : json(opt->results());
      else if (default_also && !opt->get_default_str().empty())
        j[name] = opt->get_default_str();
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConfigError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const json& obj, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        flatten(value, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      out.push_back(std::move(item));
    }
  }
};

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir;
};

// Relative output paths land under --out-dir when it is set.
std::string output_path(const Globals& g, const std::string& path) {
  fs::path p(path);
  if (!g.out_dir.empty() && p.is_relative()) p = fs::path(g.out_dir) / p;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p.string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path);
  f << text;
  if (!f) throw Error(ErrorKind::kIo, "write failed: " + path);
}

// ---- synth-data ----

struct SynthArgs {
  std::size_t count = 200;
  double jitter = 0.02;
  std::string out;
};

int synth_data(const Globals& g, const SynthArgs& a, std::ostream& out) {
  Rng rng(g.seed);
  const Dataset ds = synth_perovskite(a.count, a.jitter, rng);
  const std::string path = output_path(g, a.out);
  save_jsonl(path, ds);
  out << "wrote " << ds.size() << " crystals to " << path << "\n";
  return kOk;
}

// ---- build-hypergraph ----

struct HypergraphArgs {
  std::string in;
  std::string mode = "sphere";
  double radius = 0.0;
  double side = 0.0;
  std::size_t max_order = 6;
  bool pairwise = false;
  std::string out;
};

int build_hypergraphs(const Globals& g, const HypergraphArgs& a, std::ostream& out) {
  const Dataset ds = load_jsonl(a.in);
  HypergraphPolicy policy;
  policy.mode = parse_hyperedge_mode(a.mode);
  policy.radius = a.radius;
  policy.side = a.side;
  policy.max_order = a.max_order;
  policy.augment_pairwise = a.pairwise;
  std::ostringstream lines;
  std::size_t edges = 0;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const Crystal& c = ds.crystals[k];
    const Hypergraph h = build_hypergraph(c.frac_coords(), c.lattice(), policy);
    edges += h.hyperedges.size();
    lines << json{{"id", ds.ids[k]}, {"hypergraph", to_json(h)}}.dump() << "\n";
  }
  const std::string path = output_path(g, a.out);
  write_text(path, lines.str());
  out << "wrote " << ds.size() << " hypergraphs (" << edges << " hyperedges, mode " << to_string(policy.mode)
      << ") to " << path << "\n";
  return kOk;
}

// ---- train ----

struct TrainArgs {
  std::string data;
  int epochs = 100;
  std::size_t batch = 32;
  double lr = 1e-3;
  int steps_T = 1000;
  std::string out_ckpt = "model.ckpt.json";
  std::string loss_csv;
  long max_steps = 0;
  double lr_final = 1.0;
  double grad_clip = 0.0;
  double weight_lattice = 1.0;
  double weight_coords = 1.0;
  int checkpoint_interval = 0;
  std::size_t hidden = 128;
  std::size_t layers = 4;
  std::size_t fourier_k = 16;
  std::size_t time_dim = 64;
  std::size_t message_layers = 1;
  std::string psi_pooling = "node_relative";
  HypergraphArgs graph;
};

int train(const Globals& g, const TrainArgs& a, std::ostream& out) {
  const Dataset ds = load_jsonl(a.data);
  for (const auto& w : ds.warnings) out << "warning: " << w << "\n";

  DenoiserConfig dc;
  dc.num_species = ds.crystals.empty() ? 1 : ds.crystals[0].num_species();
  dc.hidden_dim = a.hidden;
  dc.num_layers = a.layers;
  dc.fourier_k = a.fourier_k;
  dc.time_embed_dim = a.time_dim;
  dc.message_hidden_layers = a.message_layers;
  dc.psi_pooling = parse_psi_pooling(a.psi_pooling);
  HypergraphPolicy policy;
  policy.mode = parse_hyperedge_mode(a.graph.mode);
  policy.radius = a.graph.radius;
  policy.side = a.graph.side;
  policy.max_order = a.graph.max_order;
  policy.augment_pairwise = a.graph.pairwise;
  ScheduleOptions so;
  so.steps = a.steps_T;

  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.batch_size = a.batch;
  tc.learning_rate = a.lr;
  tc.seed = g.seed;
  tc.max_steps = a.max_steps;
  tc.lr_final_fraction = a.lr_final;
  tc.grad_clip = a.grad_clip;
  tc.weight_lattice = a.weight_lattice;
  tc.weight_coords = a.weight_coords;
  tc.checkpoint_interval = a.checkpoint_interval;
  const std::string ckpt = output_path(g, a.out_ckpt);
  tc.checkpoint_path = ckpt;
  tc.validate();

  Model model = make_model(dc, policy, so, g.seed);
  std::ostringstream csv;
  csv << loss_csv_header() << "\n";
  const TrainResult r = train_loop(ds.crystals, model, tc, [&](const EpochStats& s) {
    csv << loss_csv_row(s) << "\n";
    out << "epoch " << s.epoch << " steps " << s.steps << " loss_L " << s.mean_loss_lattice << " loss_F "
        << s.mean_loss_coords << "\n";
  });
  save_checkpoint(ckpt, model);
  if (!a.loss_csv.empty()) write_text(output_path(g, a.loss_csv), csv.str());
  out << "trained " << r.steps << " steps; checkpoint " << ckpt << "\n";
  return kOk;
}

// ---- sample ----

struct SampleArgs {
  std::string ckpt;
  std::string composition_from;
  std::size_t num_samples = 1;
  std::string out;
  std::string trajectory;
  int corrector_steps = 1;
  double snr = 0.16;
};

int sample(const Globals& g, const SampleArgs& a, std::ostream& out) {
  const Model model = load_checkpoint(a.ckpt);
  const Dataset targets = load_jsonl(a.composition_from, model.params.config.num_species);
  SampleConfig sc;
  sc.corrector_steps = a.corrector_steps;
  sc.snr = a.snr;
  sc.validate();

  Rng rng(g.seed);
  Dataset result;
  std::ostringstream traj;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const auto& species = targets.crystals[k].species();
    for (std::size_t s = 0; s < a.num_samples; ++s) {
      Rng local(rng.next_seed());
      std::vector<TrajectoryFrame> frames;
      Crystal c = sample_structure(species, model, sc, local, a.trajectory.empty() ? nullptr : &frames);
      const std::string id = targets.ids[k] + "#" + std::to_string(s);
      for (const auto& f : frames) {
        json j = to_json(f);
        j["id"] = id;
        traj << j.dump() << "\n";
      }
      result.add(id, std::move(c));
    }
  }
  const std::string path = output_path(g, a.out);
  save_jsonl(path, result);
  if (!a.trajectory.empty()) write_text(output_path(g, a.trajectory), traj.str());
  out << "wrote " << result.size() << " samples to " << path << "\n";
  return kOk;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string pred;
  std::string truth;
  MatchTolerances tol;
  std::string out;
  std::string csv;
};

// Predictions are paired with truths by id; "<id>#<k>" is the k-th sample for
// truth <id>. Only the first sample per truth (k = 1 protocol) is scored; a
// truth without any prediction counts as unmatched.
int evaluate(const Globals& g, const EvaluateArgs& a, std::ostream& out) {
  const Dataset truth = load_jsonl(a.truth);
  const Dataset pred = load_jsonl(a.pred, truth.empty() ? 0 : truth.crystals[0].num_species());
  std::map<std::string, std::size_t> first;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const std::string& id = pred.ids[k];
    const std::string base = id.substr(0, id.rfind('#'));
    first.try_emplace(base, k);
  }
  std::vector<MatchReport> reports;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const auto it = first.find(truth.ids[k]);
    if (it == first.end()) {
      MatchReport missing;
      missing.tolerances = a.tol;
      reports.push_back(missing);
    } else {
      reports.push_back(match_structures(pred.crystals[it->second], truth.crystals[k], a.tol));
    }
  }
  nlohmann::ordered_json report;
  report["thresholds"] = {{"stol", a.tol.stol}, {"angle_tol", a.tol.angle_tol}, {"ltol", a.tol.ltol}};
  report["summary"] = nlohmann::ordered_json::parse(evaluation_summary(reports).dump());
  const std::string text = report.dump(2) + "\n";
  if (!a.out.empty()) write_text(output_path(g, a.out), text);
  if (!a.csv.empty()) write_text(output_path(g, a.csv), evaluation_csv(reports, truth.ids));
  out << text;
  return kOk;
}

// ---- verify-symmetry ----

struct VerifyArgs {
  std::string ckpt;
  bool random_init = false;
  int trials = 20;
  std::string mode = "sphere";
  std::size_t atoms = 6;
  std::string out;
};

int verify(const Globals& g, const VerifyArgs& a, std::ostream& out) {
  Model model;
  if (a.random_init) {
    DenoiserConfig dc;
    dc.hidden_dim = 32;
    dc.num_layers = 3;
    dc.fourier_k = 8;
    dc.time_embed_dim = 16;
    HypergraphPolicy policy;
    policy.mode = parse_hyperedge_mode(a.mode);
    ScheduleOptions so;
    so.lambda_mc_samples = 1000;
    model = make_model(dc, policy, so, g.seed);
  } else {
    model = load_checkpoint(a.ckpt);
  }
  Rng rng(g.seed);
  const Crystal c = random_crystal(a.atoms, model.params.config.num_species, 4.0, rng);
  VerifyOptions o;
  o.trials = a.trials;
  o.seed = g.seed;
  o.max_t = model.schedules.steps();
  const SymmetryReport r = verify_symmetry(model.params, model.policy, c, o);
  out << format_table(r);
  if (!a.out.empty()) write_text(output_path(g, a.out), to_json(r).dump(2) + "\n");
  return r.all_passed() ? kOk : kFailure;
}

void add_graph_options(CLI::App* app, HypergraphArgs& a) {
  app->add_option("--mode", a.mode, "Hyperedge construction")
      ->check(CLI::IsMember({"sphere", "cube", "pairwise"}))
      ->capture_default_str();
  app->add_option("--radius", a.radius, "Sphere radius in angstrom (default: scaled shortest lattice vector)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--side", a.side, "Cube side in angstrom (default: scaled radius)")->check(CLI::NonNegativeNumber);
  app->add_option("--max-order", a.max_order, "Largest hyperedge order kept")->capture_default_str();
  app->add_flag("--pairwise", a.pairwise, "Add every within-cell atom pair as an order-2 hyperedge");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Crystal structure diffusion on periodic hypergraphs"};
  app.name("crysdiff");
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "JSON file of flag values; a nested object per subcommand");

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random stream")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Directory for relative output paths");

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth-data", "Write synthetic cubic perovskite cells as JSONL");
  s_synth->add_option("--count", synth.count)->capture_default_str();
  s_synth->add_option("--jitter", synth.jitter, "Per-coordinate displacement std")->capture_default_str();
  s_synth->add_option("--out", synth.out)->required();

  HypergraphArgs hg;
  auto* s_hg = app.add_subcommand("build-hypergraph", "Construct hyperedges for every crystal in a JSONL file");
  s_hg->add_option("--in", hg.in)->required()->check(CLI::ExistingFile);
  add_graph_options(s_hg, hg);
  s_hg->add_option("--out", hg.out)->required();

  TrainArgs tr;
  auto* s_train = app.add_subcommand("train", "Train the denoiser");
  s_train->add_option("--data", tr.data)->required()->check(CLI::ExistingFile);
  s_train->add_option("--epochs", tr.epochs)->capture_default_str();
  s_train->add_option("--batch", tr.batch)->capture_default_str();
  s_train->add_option("--lr", tr.lr)->capture_default_str();
  s_train->add_option("--T", tr.steps_T, "Diffusion steps")->capture_default_str();
  s_train->add_option("--out-ckpt", tr.out_ckpt)->capture_default_str();
  s_train->add_option("--loss-csv", tr.loss_csv, "Per-epoch loss log");
  s_train->add_option("--max-steps", tr.max_steps, "Cap on optimizer steps (0: none)")->capture_default_str();
  s_train->add_option("--lr-final", tr.lr_final, "Cosine decay target as a fraction of --lr")
      ->capture_default_str();
  s_train->add_option("--grad-clip", tr.grad_clip)->capture_default_str();
  s_train->add_option("--weight-lattice", tr.weight_lattice)->capture_default_str();
  s_train->add_option("--weight-coords", tr.weight_coords)->capture_default_str();
  s_train->add_option("--checkpoint-interval", tr.checkpoint_interval)->capture_default_str();
  s_train->add_option("--hidden", tr.hidden)->capture_default_str();
  s_train->add_option("--layers", tr.layers)->capture_default_str();
  s_train->add_option("--fourier-k", tr.fourier_k)->capture_default_str();
  s_train->add_option("--time-dim", tr.time_dim)->capture_default_str();
  s_train->add_option("--message-layers", tr.message_layers, "Hidden layers in each message MLP")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_train->add_option("--psi-pooling", tr.psi_pooling)
      ->check(CLI::IsMember({"node_relative", "symmetric_pairs", "literal_sum", "node_relative_species"}))
      ->capture_default_str();
  add_graph_options(s_train, tr.graph);

  SampleArgs sa;
  auto* s_sample = app.add_subcommand("sample", "Generate structures for the compositions of a JSONL file");
  s_sample->add_option("--ckpt", sa.ckpt)->required()->check(CLI::ExistingFile);
  s_sample->add_option("--composition-from", sa.composition_from)->required()->check(CLI::ExistingFile);
  s_sample->add_option("--num-samples", sa.num_samples)->capture_default_str()->check(CLI::PositiveNumber);
  s_sample->add_option("--out", sa.out)->required();
  s_sample->add_option("--trajectory", sa.trajectory, "Per-step JSONL dump");
  s_sample->add_option("--corrector-steps", sa.corrector_steps)->capture_default_str();
  s_sample->add_option("--snr", sa.snr)->capture_default_str();

  EvaluateArgs ev;
  auto* s_eval = app.add_subcommand("evaluate", "Match predictions against ground truth");
  s_eval->add_option("--pred", ev.pred)->required()->check(CLI::ExistingFile);
  s_eval->add_option("--truth", ev.truth)->required()->check(CLI::ExistingFile);
  s_eval->add_option("--stol", ev.tol.stol)->capture_default_str();
  s_eval->add_option("--angle-tol", ev.tol.angle_tol)->capture_default_str();
  s_eval->add_option("--ltol", ev.tol.ltol)->capture_default_str();
  s_eval->add_option("--out", ev.out, "Summary JSON");
  s_eval->add_option("--csv", ev.csv, "Per-structure CSV");

  VerifyArgs vs;
  auto* s_verify = app.add_subcommand("verify-symmetry", "Run the equivariance and pushforward checks");
  auto* ckpt_opt = s_verify->add_option("--ckpt", vs.ckpt)->check(CLI::ExistingFile);
  auto* rand_opt = s_verify->add_flag("--random-init", vs.random_init, "Use a freshly initialised network");
  ckpt_opt->excludes(rand_opt);
  s_verify->add_option("--trials", vs.trials)->capture_default_str()->check(CLI::PositiveNumber);
  s_verify->add_option("--mode", vs.mode, "Hyperedges for --random-init")
      ->check(CLI::IsMember({"sphere", "cube", "pairwise"}))
      ->capture_default_str();
  s_verify->add_option("--atoms", vs.atoms)->capture_default_str();
  s_verify->add_option("--out", vs.out, "Report JSON");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (s_verify->parsed() && vs.ckpt.empty() && !vs.random_init)
      throw CLI::ValidationError("verify-symmetry", "needs --ckpt or --random-init");
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (s_synth->parsed()) return synth_data(g, synth, out);
    if (s_hg->parsed()) return build_hypergraphs(g, hg, out);
    if (s_train->parsed()) return train(g, tr, out);
    if (s_sample->parsed()) return sample(g, sa, out);
    if (s_eval->parsed()) return evaluate(g, ev, out);
    if (s_verify->parsed()) return verify(g, vs, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kConfig ? kUsage : kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return run(args, std::cout, std::cerr);
}

}  // namespace crysdiff::cli
