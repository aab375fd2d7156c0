#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "crysdiff/dataset.hpp"

namespace fs = std::filesystem;
using crysdiff::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(call({}).code == 2);
  CHECK(call({"no-such-command"}).code == 2);
  CHECK(call({"synth-data"}).code == 2);  // --out is required
  CHECK(call({"synth-data", "--out", "x.jsonl", "--bogus"}).code == 2);
  CHECK(call({"verify-symmetry"}).code == 2);
  CHECK(call({"build-hypergraph", "--in", "/nonexistent.jsonl", "--out", "h.jsonl"}).code == 2);
  const auto help = call({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("synth-data") != std::string::npos);
}

TEST_CASE("synth-data is reproducible from the seed") {
  TempDir dir("crysdiff_cli_synth");
  CHECK(call({"--seed", "4", "synth-data", "--count", "5", "--out", dir / "a.jsonl"}).code == 0);
  CHECK(call({"synth-data", "--count", "5", "--out", dir / "b.jsonl", "--seed", "4"}).code == 0);
  CHECK(call({"--seed", "5", "synth-data", "--count", "5", "--out", dir / "c.jsonl"}).code == 0);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(slurp(dir / "a.jsonl") != slurp(dir / "c.jsonl"));
  CHECK(crysdiff::load_jsonl(dir / "a.jsonl").size() == 5);

  // Relative outputs go under --out-dir.
  CHECK(call({"--out-dir", dir / "nested", "synth-data", "--count", "2", "--out", "d.jsonl"}).code == 0);
  CHECK(fs::exists(dir / "nested/d.jsonl"));
}

TEST_CASE("config file values sit between defaults and the command line") {
  TempDir dir("crysdiff_cli_config");
  {
    std::ofstream f(dir / "cfg.json");
    f << R"({"seed": 4, "synth-data": {"count": 7, "jitter": 0.01}})";
  }
  CHECK(call({"--config", dir / "cfg.json", "synth-data", "--out", dir / "a.jsonl"}).code == 0);
  CHECK(crysdiff::load_jsonl(dir / "a.jsonl").size() == 7);
  CHECK(call({"--config", dir / "cfg.json", "synth-data", "--count", "3", "--out", dir / "b.jsonl"}).code == 0);
  CHECK(crysdiff::load_jsonl(dir / "b.jsonl").size() == 3);

  {
    std::ofstream f(dir / "bad.json");
    f << R"({"synth-data": {"no_such_flag": 1}})";
  }
  CHECK(call({"--config", dir / "bad.json", "synth-data", "--out", dir / "c.jsonl"}).code == 2);
  {
    std::ofstream f(dir / "broken.json");
    f << "{not json";
  }
  CHECK(call({"--config", dir / "broken.json", "synth-data", "--out", dir / "c.jsonl"}).code == 2);
}

TEST_CASE("evaluate on identical files reports a perfect match") {
  TempDir dir("crysdiff_cli_eval");
  REQUIRE(call({"--seed", "1", "synth-data", "--count", "4", "--out", dir / "d.jsonl"}).code == 0);
  const auto r = call({"evaluate", "--pred", dir / "d.jsonl", "--truth", dir / "d.jsonl", "--out", dir / "r.json",
                       "--csv", dir / "r.csv"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::ordered_json::parse(slurp(dir / "r.json"));
  CHECK(j.begin().key() == "thresholds");
  CHECK(j.at("thresholds").at("stol") == 0.5);
  CHECK(j.at("thresholds").at("angle_tol") == 10.0);
  CHECK(j.at("thresholds").at("ltol") == 0.3);
  CHECK(j.at("summary").at("match_rate") == 100.0);
  CHECK(j.at("summary").at("count") == 4);
  const std::string csv = slurp(dir / "r.csv");
  CHECK(csv.rfind("structure_id,matched,rmse\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  const auto loose = call({"evaluate", "--pred", dir / "d.jsonl", "--truth", dir / "d.jsonl", "--stol", "0.7"});
  CHECK(nlohmann::json::parse(loose.out).at("thresholds").at("stol") == 0.7);
}

TEST_CASE("build-hypergraph writes one graph per crystal") {
  TempDir dir("crysdiff_cli_graph");
  REQUIRE(call({"synth-data", "--count", "3", "--out", dir / "d.jsonl"}).code == 0);
  REQUIRE(call({"build-hypergraph", "--in", dir / "d.jsonl", "--mode", "pairwise", "--out", dir / "h.jsonl"}).code ==
          0);
  std::ifstream f(dir / "h.jsonl");
  std::string line;
  int n = 0;
  while (std::getline(f, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("hypergraph").at("hyperedges").size() == 10);  // all pairs of 5 atoms
    ++n;
  }
  CHECK(n == 3);
  CHECK(call({"build-hypergraph", "--in", dir / "d.jsonl", "--mode", "tetrahedron", "--out", "x"}).code == 2);
  CHECK(call({"build-hypergraph", "--in", dir / "d.jsonl", "--radius", "-1", "--out", dir / "h.jsonl"}).code == 2);
  {
    std::ofstream f(dir / "bad.jsonl");
    f << "{\"id\": 3\n";
  }
  const auto bad = call({"build-hypergraph", "--in", dir / "bad.jsonl", "--out", dir / "h.jsonl"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("bad.jsonl:1") != std::string::npos);
}

TEST_CASE("train, sample, evaluate and verify a tiny model") {
  TempDir dir("crysdiff_cli_pipeline");
  REQUIRE(call({"--seed", "2", "synth-data", "--count", "4", "--out", dir / "d.jsonl"}).code == 0);
  {
    std::ofstream f(dir / "cfg.json");
    f << R"({"train": {"hidden": 8, "layers": 1, "message-layers": 2, "fourier-k": 2, "time-dim": 4, "T": 10,
                     "pairwise": true}})";
  }
  const std::vector<std::string> train_args{"--seed",  "3",       "--config",   dir / "cfg.json", "train",
                                            "--data",  dir / "d.jsonl", "--epochs", "2",         "--batch",
                                            "2",       "--loss-csv", dir / "loss.csv", "--out-ckpt"};
  auto a = train_args;
  a.push_back(dir / "m1.json");
  auto b = train_args;
  b.push_back(dir / "m2.json");
  REQUIRE(call(a).code == 0);
  REQUIRE(call(b).code == 0);
  CHECK(slurp(dir / "m1.json") == slurp(dir / "m2.json"));
  const std::string loss = slurp(dir / "loss.csv");
  CHECK(loss.rfind("epoch,mean_loss_L,mean_loss_F\n1,", 0) == 0);
  CHECK(std::count(loss.begin(), loss.end(), '\n') == 3);

  REQUIRE(call({"--seed", "5", "sample", "--ckpt", dir / "m1.json", "--composition-from", dir / "d.jsonl",
                "--num-samples", "2", "--out", dir / "s.jsonl", "--trajectory", dir / "t.jsonl"})
              .code == 0);
  const auto samples = crysdiff::load_jsonl(dir / "s.jsonl");
  const auto truth = crysdiff::load_jsonl(dir / "d.jsonl");
  REQUIRE(samples.size() == 8);
  CHECK(samples.ids[0] == truth.ids[0] + "#0");
  CHECK(samples.crystals[1].species() == truth.crystals[0].species());
  std::ifstream traj(dir / "t.jsonl");
  CHECK(std::count(std::istreambuf_iterator<char>(traj), {}, '\n') == 8 * 11);

  const auto ev = call({"evaluate", "--pred", dir / "s.jsonl", "--truth", dir / "d.jsonl"});
  REQUIRE(ev.code == 0);
  CHECK(nlohmann::json::parse(ev.out).at("summary").at("count") == 4);

  const auto v = call({"verify-symmetry", "--ckpt", dir / "m1.json", "--trials", "2", "--out", dir / "v.json"});
  CHECK(v.code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "v.json")).at("all_passed") == true);
}

TEST_CASE("verify-symmetry on a random network exits 0") {
  const auto r = call({"verify-symmetry", "--random-init", "--trials", "3"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(call({"verify-symmetry", "--random-init", "--mode", "cube", "--trials", "2"}).code == 0);
}
