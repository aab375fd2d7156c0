#include "crysdiff/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "crysdiff/error.hpp"

namespace crysdiff {

void Dataset::add(std::string id, Crystal crystal) {
  ids.push_back(std::move(id));
  crystals.push_back(std::move(crystal));
}

void Dataset::validate() const {
  if (ids.size() != crystals.size()) throw Error(ErrorKind::kShape, "dataset ids and crystals differ in length");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!seen.insert(ids[i]).second) throw Error(ErrorKind::kParse, "duplicate id " + ids[i]);
    if (!species_vocabulary.empty() &&
        crystals[i].num_species() != static_cast<int>(species_vocabulary.size())) {
      throw Error(ErrorKind::kSpecies, ids[i] + ": species width does not match the vocabulary");
    }
  }
}

nlohmann::json crystal_to_json(const std::string& id, const Crystal& c) {
  nlohmann::json coords = nlohmann::json::array();
  for (const auto& f : c.frac_coords()) coords.push_back(f);
  const Mat3 rows = transpose(c.lattice());
  nlohmann::json lattice = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) lattice.push_back({rows(r, 0), rows(r, 1), rows(r, 2)});
  return {{"id", id},
          {"species", c.species()},
          {"num_species", c.num_species()},
          {"frac_coords", coords},
          {"lattice", lattice}};
}

namespace {

struct RawRecord {
  std::size_t line = 0;
  std::string id;
  std::vector<int> species;
  int num_species = 0;
  std::vector<Vec3> frac;
  Mat3 lattice;
};

std::vector<std::string> default_vocabulary(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back("E" + std::to_string(i));
  return v;
}

}  // namespace

Dataset parse_jsonl(std::istream& in, int num_species, const std::string& source) {
  std::vector<RawRecord> records;
  std::string text;
  std::size_t line_no = 0;
  int width = num_species;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    RawRecord r;
    r.line = line_no;
    try {
      const auto j = nlohmann::json::parse(text);
      r.id = j.at("id").get<std::string>();
      r.species = j.at("species").get<std::vector<int>>();
      r.num_species = j.value("num_species", 0);
      for (const auto& f : j.at("frac_coords")) r.frac.push_back(f.get<Vec3>());
      const auto rows = j.at("lattice").get<std::vector<std::vector<double>>>();
      if (rows.size() != 3) throw Error(ErrorKind::kParse, where + ": lattice must have 3 rows");
      for (int i = 0; i < 3; ++i) {
        if (rows[i].size() != 3) throw Error(ErrorKind::kParse, where + ": lattice rows must have 3 entries");
        for (int k = 0; k < 3; ++k) r.lattice(k, i) = rows[i][k];
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kParse, where + ": " + e.what());
    }
    if (num_species == 0) {
      width = std::max(width, r.num_species);
      for (int s : r.species) width = std::max(width, s + 1);
    }
    records.push_back(std::move(r));
  }

  Dataset ds;
  ds.species_vocabulary = default_vocabulary(width);
  for (auto& r : records) {
    for (auto& f : r.frac) {
      for (double& x : f) {
        if (std::isfinite(x) && (x < 0.0 || x >= 1.0)) {
          char msg[160];
          std::snprintf(msg, sizeof msg, "%s (line %zu): coordinate %.17g wrapped into [0, 1)", r.id.c_str(),
                        r.line, x);
          ds.warnings.emplace_back(msg);
          x = wrap(x);
        }
      }
    }
    try {
      ds.add(r.id, Crystal(r.species, width, r.frac, r.lattice));
    } catch (const Error& e) {
      throw Error(e.kind(), "record " + r.id + " (" + source + ":" + std::to_string(r.line) + "): " + e.what());
    }
  }
  ds.validate();
  return ds;
}

Dataset load_jsonl(const std::string& path, int num_species) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path);
  return parse_jsonl(in, num_species, path);
}

void save_jsonl(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  for (std::size_t i = 0; i < dataset.size(); ++i) out << crystal_to_json(dataset.ids[i], dataset.crystals[i]).dump() << '\n';
}

const std::array<Vec3, 5>& perovskite_sites() {
  static const std::array<Vec3, 5> sites{{{0.0, 0.0, 0.0},
                                          {0.5, 0.5, 0.5},
                                          {0.5, 0.5, 0.0},
                                          {0.5, 0.0, 0.5},
                                          {0.0, 0.5, 0.5}}};
  return sites;
}

Dataset synth_perovskite(std::size_t count, double jitter_sigma, Rng& rng) {
  if (!(jitter_sigma >= 0.0)) throw Error(ErrorKind::kDomain, "jitter_sigma must be >= 0");
  Dataset ds;
  ds.species_vocabulary = default_vocabulary(3);
  const auto& sites = perovskite_sites();
  for (std::size_t k = 0; k < count; ++k) {
    // X takes a uniformly drawn species; A gets the lower of the other two so
    // the composition alone fixes the structure.
    const int x = static_cast<int>(rng.uniform_int(0, 2));
    const int a = x == 0 ? 1 : 0;
    const int b = 3 - x - a;
    const std::array<int, 3> roles{a, b, x};
    const double edge = rng.uniform(3.8, 4.2);
    std::vector<int> species{roles[0], roles[1], roles[2], roles[2], roles[2]};
    std::vector<Vec3> frac(5);
    for (int i = 0; i < 5; ++i) {
      Vec3 f = sites[i];
      if (jitter_sigma > 0.0) {
        for (double& x : f) x += jitter_sigma * rng.normal();
      }
      frac[i] = wrap(f);
    }
    char id[32];
    std::snprintf(id, sizeof id, "perov-%06zu", k);
    ds.add(id, Crystal(std::move(species), 3, std::move(frac), Mat3::diag(edge, edge, edge)));
  }
  return ds;
}

Split split(const Dataset& dataset, const std::array<double, 3>& fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw Error(ErrorKind::kConfig, "split fractions must be non-negative");
    sum += f;
  }
  if (sum > 1.0 + 1e-12) throw Error(ErrorKind::kConfig, "split fractions sum to more than 1");

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());

  auto count = [&](double f) { return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9)); };
  const std::size_t n_train = std::min(n, count(fractions[0]));
  const std::size_t n_val = std::min(n - n_train, count(fractions[1]));
  std::size_t n_test = std::min(n - n_train - n_val, count(fractions[2]));
  if (std::fabs(sum - 1.0) <= 1e-12 && fractions[2] > 0.0) n_test = n - n_train - n_val;

  Split s;
  for (Dataset* d : {&s.train, &s.val, &s.test}) d->species_vocabulary = dataset.species_vocabulary;
  for (std::size_t k = 0; k < n_train + n_val + n_test; ++k) {
    Dataset& target = k < n_train ? s.train : (k < n_train + n_val ? s.val : s.test);
    target.add(dataset.ids[order[k]], dataset.crystals[order[k]]);
  }
  return s;
}

}  // namespace crysdiff
