#include "symnet/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>

#include "symnet/io.hpp"
#include "symnet/symmetry.hpp"

namespace symnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  T get(const char* key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return convert<T>(key);
  }

  template <typename T>
  T require(const char* key) {
    if (!j_.contains(key)) throw ConfigError(where_ + ": missing required key '" + key + "'");
    return convert<T>(key);
  }

  const json& sub(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
  }

 private:
  template <typename T>
  T convert(const char* key) {
    used_.insert(key);
    const json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path(key) + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(path(key) + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.get<std::int64_t>() < 0 && !v.is_number_unsigned()) throw ConfigError(path(key) + ": expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path(key) + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path(key) + ": expected a string");
    }
    try {
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
  }

  json j_;  // owned: callers often pass temporaries
  std::string where_;
  std::set<std::string> used_;
};

std::vector<int> int_list(const json& v, const std::string& where) {
  if (v.is_number_integer()) return {v.get<int>()};
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected an integer or a non-empty list");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw ConfigError(where + ": expected integers");
    out.push_back(e.get<int>());
  }
  return out;
}

template <typename E, typename F>
E parse_enum(F&& f, const std::string& s, const std::string& where) {
  try {
    return f(s);
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

TrainConfig default_train(bool binary) {
  TrainConfig t;
  if (binary) {
    t.epochs = 200;
    t.batch_size = 100;
    t.lr0 = 1.0;
    t.momentum = 0.0;
    t.nesterov = false;
    t.schedule = Schedule::kCosine;
    t.loss = LossKind::kBinaryCrossEntropy;
  } else {
    t.epochs = 300;
    t.batch_size = 128;
    t.lr0 = 0.02;
    t.momentum = 0.9;
    t.nesterov = true;
    t.schedule = Schedule::kCosine;
    t.loss = LossKind::kCrossEntropy;
  }
  return t;
}

AlgorithmSpec parse_algorithm(const std::string& name, const json& j, bool binary) {
  AlgorithmSpec a;
  a.name = name;
  ObjectReader r(j, "algorithms." + name);
  a.count = r.get("count", 3);
  if (a.count < 1) throw ConfigError(r.path("count") + ": must be >= 1");
  const TrainConfig base = default_train(binary);
  if (name == "sgd" || name == "rsgd") {
    a.train = r.has("train") ? parse_train_config(r.sub("train"), base) : base;
  }
  if (name == "rsgd") {
    if (r.has("replicas")) {
      ObjectReader rr(r.sub("replicas"), r.path("replicas"));
      a.replicas.num_replicas = rr.get("num_replicas", a.replicas.num_replicas);
      a.replicas.gamma0 = rr.get("gamma0", a.replicas.gamma0);
      a.replicas.gamma1 = rr.get("gamma1", a.replicas.gamma1);
      rr.finish();
    }
    a.replicas.validate();
  }
  if (name == "adv") {
    TrainConfig pre = base, fine = base;
    if (binary) {
      pre.lr0 = 10.0;
      pre.epochs = 500;
      fine.lr0 = 5.0;
    }
    fine.momentum = 0.0;
    fine.nesterov = false;
    a.adv.replication = r.get("replication", 1);
    a.adv.zero_pixel_fraction = r.get("zero_pixel_fraction", 0.1);
    a.adv.keep_clean_copy = r.get("keep_clean_copy", !binary);
    a.adv.pretrain = r.has("pretrain") ? parse_train_config(r.sub("pretrain"), pre) : pre;
    a.adv.finetune = r.has("finetune") ? parse_train_config(r.sub("finetune"), fine) : fine;
    a.adv.validate();
  }
  if (name != "sgd" && name != "rsgd" && name != "adv")
    throw ConfigError("unknown algorithm '" + name + "' (expected sgd, rsgd or adv)");
  r.finish();
  a.train.validate();
  return a;
}

json plane_json(const PlaneSpec& p) {
  return {{"algorithm", p.algorithm},
          {"aligned", p.aligned},
          {"resolution", p.options.resolution},
          {"margin", p.options.margin},
          {"normalized", p.options.normalized},
          {"reproject", p.options.reproject},
          {"binarized", p.options.binarized}};
}

bool is_hamming_mode(const std::string& m) { return m == "hamming" || m == "hamming_raw"; }

}  // namespace

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kHmmSweep:
      return "hmm_sweep";
    case ExperimentKind::kMnistParity:
      return "mnist_parity";
    case ExperimentKind::kFlatness:
      return "flatness";
    case ExperimentKind::kPaths:
      return "paths";
    case ExperimentKind::kPlane:
      return "plane";
    case ExperimentKind::kDistances:
      return "distances";
  }
  return "flatness";
}

ExperimentKind experiment_kind_from_string(std::string_view s) {
  for (auto k : {ExperimentKind::kHmmSweep, ExperimentKind::kMnistParity, ExperimentKind::kFlatness,
                 ExperimentKind::kPaths, ExperimentKind::kPlane, ExperimentKind::kDistances})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown experiment kind '" + std::string(s) + "'");
}

TrainConfig parse_train_config(const json& j, const TrainConfig& defaults) {
  ObjectReader r(j, "train");
  TrainConfig t = defaults;
  t.epochs = r.get("epochs", t.epochs);
  t.batch_size = r.get("batch_size", t.batch_size);
  t.lr0 = r.get("lr0", t.lr0);
  t.momentum = r.get("momentum", t.momentum);
  t.nesterov = r.get("nesterov", t.nesterov);
  if (r.has("schedule"))
    t.schedule = parse_enum<Schedule>(schedule_from_string, r.require<std::string>("schedule"), "schedule");
  if (r.has("loss")) t.loss = parse_enum<LossKind>(loss_from_string, r.require<std::string>("loss"), "loss");
  if (r.has("seed")) t.seed = r.require<std::uint64_t>("seed");
  r.finish();
  t.validate();
  return t;
}

json to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},     {"batch_size", t.batch_size},
          {"lr0", t.lr0},           {"momentum", t.momentum},
          {"nesterov", t.nesterov}, {"schedule", to_string(t.schedule)},
          {"loss", to_string(t.loss)}};
}

ExperimentConfig parse_experiment_config(const json& j) {
  ObjectReader r(j, "config");
  ExperimentConfig c;
  c.kind = parse_enum<ExperimentKind>(experiment_kind_from_string, r.require<std::string>("kind"), "kind");
  c.seed = r.require<std::uint64_t>("seed");
  c.output_dir = r.get<std::string>("output_dir", "");

  {
    const json arch = r.has("architecture") ? r.sub("architecture") : json::object();
    ObjectReader a(arch, "architecture");
    c.architecture.type = a.get<std::string>("type", "perceptron");
    c.architecture.binary = a.get("binary", true);
    c.architecture.bias = a.get("bias", false);
    if (a.has("hidden")) c.architecture.hidden = int_list(a.sub("hidden"), a.path("hidden"));
    a.finish();
    const auto& t = c.architecture.type;
    if (t != "perceptron" && t != "committee" && t != "mlp")
      throw ConfigError("architecture.type must be perceptron, committee or mlp");
    if (t == "committee" && (!c.architecture.binary || c.architecture.hidden.size() != 1))
      throw ConfigError("a committee machine is binary with exactly one hidden width");
    if (t == "mlp" && c.architecture.hidden.empty()) throw ConfigError("an mlp needs hidden widths");
    if (t == "perceptron" && !c.architecture.hidden.empty()) throw ConfigError("a perceptron has no hidden layer");
    if (!c.architecture.binary && t == "perceptron")
      throw ConfigError("continuous networks must be mlps with relu hidden layers");
    for (int h : c.architecture.hidden)
      if (h < 1) throw ConfigError("hidden widths must be positive");
  }
  const bool binary = c.architecture.binary;

  {
    ObjectReader d(r.require<json>("dataset"), "dataset");
    DatasetSpec& s = c.dataset;
    s.type = d.require<std::string>("type");
    if (s.type == "hmm") {
      s.D = d.get("D", s.D);
      s.P = d.get("P", s.P);
      s.P_test = d.get("P_test", s.P_test);
      if (d.has("N")) s.N = int_list(d.sub("N"), d.path("N"));
      for (int n : s.N) HmmConfig{s.D, n, s.P, s.P_test, 0}.validate();
    } else if (s.type == "mnist") {
      s.dir = d.require<std::string>("dir");
      const auto task = d.get<std::string>("task", "parity");
      if (task != "parity" && task != "digits") throw ConfigError("dataset.task must be parity or digits");
      s.task = task == "parity" ? MnistTask::kParity : MnistTask::kMulticlass;
      s.limit = d.get("limit", s.limit);
      s.test_limit = d.get("test_limit", s.test_limit);
      if (s.limit < 0 || s.test_limit < 0) throw ConfigError("dataset limits must be non-negative");
    } else if (s.type == "file") {
      s.train_file = d.require<std::string>("train");
      s.test_file = d.get<std::string>("test", "");
    } else {
      throw ConfigError("dataset.type must be hmm, mnist or file");
    }
    d.finish();
  }
  if (c.kind == ExperimentKind::kHmmSweep && c.dataset.type != "hmm")
    throw ConfigError("hmm_sweep needs an hmm dataset");
  if (c.kind != ExperimentKind::kHmmSweep && c.dataset.type == "hmm" && c.dataset.N.size() != 1)
    throw ConfigError("several N values are only allowed in an hmm_sweep");
  if (c.kind == ExperimentKind::kMnistParity &&
      (c.dataset.type != "mnist" || c.dataset.task != MnistTask::kParity))
    throw ConfigError("mnist_parity needs an mnist dataset with the parity task");

  {
    ObjectReader a(r.require<json>("algorithms"), "algorithms");
    for (const char* name : {"sgd", "rsgd", "adv"})
      if (a.has(name)) c.algorithms.push_back(parse_algorithm(name, a.sub(name), binary));
    a.finish();
    if (c.algorithms.empty()) throw ConfigError("at least one algorithm is required");
  }

  {
    const json probes = r.has("probes") ? r.sub("probes") : json::object();
    ObjectReader p(probes, "probes");
    ProbeSpec& s = c.probes;
    if (p.has("amplitudes")) {
      const json& a = p.sub("amplitudes");
      if (!a.is_array() || a.empty()) throw ConfigError("probes.amplitudes must be a non-empty list");
      for (const auto& v : a) {
        if (!v.is_number() || v.get<double>() < 0.0) throw ConfigError("probes.amplitudes must be non-negative numbers");
        s.amplitudes.push_back(v.get<double>());
      }
    }
    s.samples = p.get("samples", s.samples);
    s.path_points = p.get("path_points", s.path_points);
    s.pairs_per_family = p.get("pairs_per_family", s.pairs_per_family);
    s.path_realizations = p.get("path_realizations", s.path_realizations);
    s.cross_families = p.get("cross_families", s.cross_families);
    s.record_loss = p.get("record_loss", s.record_loss);
    if (p.has("path_modes")) {
      const json& m = p.sub("path_modes");
      if (!m.is_array() || m.empty()) throw ConfigError("probes.path_modes must be a non-empty list");
      for (const auto& v : m) {
        if (!v.is_string()) throw ConfigError("probes.path_modes must hold strings");
        s.path_modes.push_back(v.get<std::string>());
      }
    } else if (binary) {
      s.path_modes = {"hamming_raw", "hamming"};
    } else {
      s.path_modes = {"linear", "linear_aligned", "geodesic_aligned"};
    }
    for (auto& m : s.path_modes) {
      std::replace(m.begin(), m.end(), '-', '_');
      if (m != "hamming_raw") path_mode_from_string(m);
      if (is_hamming_mode(m) != binary && m != "linear" && m != "linear_aligned")
        throw ConfigError("path mode '" + m + "' does not fit the network kind");
    }
    if (p.has("optimize")) s.optimize = parse_train_config(p.sub("optimize"), default_train(binary));
    if (p.has("plane")) {
      ObjectReader q(p.sub("plane"), "probes.plane");
      s.plane.algorithm = q.get<std::string>("algorithm", s.plane.algorithm);
      s.plane.aligned = q.get("aligned", s.plane.aligned);
      s.plane.options.resolution = q.get("resolution", s.plane.options.resolution);
      s.plane.options.margin = q.get("margin", s.plane.options.margin);
      s.plane.options.normalized = q.get("normalized", !binary);
      s.plane.options.reproject = q.get("reproject", s.plane.options.reproject);
      s.plane.options.binarized = q.get("binarized", binary);
      q.finish();
    } else {
      s.plane.options.normalized = !binary;
      s.plane.options.binarized = binary;
    }
    p.finish();
    if (s.samples < 0 || s.path_points < 2 || s.pairs_per_family < 1 || s.path_realizations < 1)
      throw ConfigError("probe counts out of range");
    if (s.plane.options.resolution < 2 || s.plane.options.margin < 0.0)
      throw ConfigError("plane resolution must be >= 2 and margin >= 0");
  }
  r.finish();

  if (c.kind == ExperimentKind::kPlane) {
    auto it = std::find_if(c.algorithms.begin(), c.algorithms.end(),
                           [&](const AlgorithmSpec& a) { return a.name == c.probes.plane.algorithm; });
    if (it == c.algorithms.end() || it->count < 3)
      throw ConfigError("plane experiments need three solutions of probes.plane.algorithm");
  }
  if (c.kind == ExperimentKind::kDistances || c.kind == ExperimentKind::kPaths ||
      c.kind == ExperimentKind::kHmmSweep || c.kind == ExperimentKind::kMnistParity) {
    bool any_pair = false;
    for (const auto& a : c.algorithms) any_pair = any_pair || a.count >= 2;
    if (!any_pair && !(c.probes.cross_families && c.algorithms.size() >= 2))
      throw ConfigError("pair-based experiments need two solutions of some algorithm");
  }
  if (c.kind == ExperimentKind::kDistances)
    for (const auto& a : c.algorithms)
      if (a.count < 2) throw ConfigError("distance studies need two solutions per algorithm");
  return c;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["kind"] = to_string(c.kind);
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  const DatasetSpec& d = c.dataset;
  if (d.type == "hmm")
    j["dataset"] = {{"type", "hmm"}, {"D", d.D}, {"N", d.N}, {"P", d.P}, {"P_test", d.P_test}};
  else if (d.type == "mnist")
    j["dataset"] = {{"type", "mnist"},
                    {"dir", d.dir},
                    {"task", d.task == MnistTask::kParity ? "parity" : "digits"},
                    {"limit", d.limit},
                    {"test_limit", d.test_limit}};
  else
    j["dataset"] = {{"type", "file"}, {"train", d.train_file}, {"test", d.test_file}};
  j["architecture"] = {{"type", c.architecture.type}, {"binary", c.architecture.binary}, {"bias", c.architecture.bias}};
  if (!c.architecture.hidden.empty()) j["architecture"]["hidden"] = c.architecture.hidden;
  json algs = json::object();
  for (const auto& a : c.algorithms) {
    json x = {{"count", a.count}};
    if (a.name != "adv") x["train"] = to_json(a.train);
    if (a.name == "rsgd")
      x["replicas"] = {{"num_replicas", a.replicas.num_replicas},
                       {"gamma0", a.replicas.gamma0},
                       {"gamma1", a.replicas.gamma1}};
    if (a.name == "adv") {
      x["replication"] = a.adv.replication;
      x["zero_pixel_fraction"] = a.adv.zero_pixel_fraction;
      x["keep_clean_copy"] = a.adv.keep_clean_copy;
      x["pretrain"] = to_json(a.adv.pretrain);
      x["finetune"] = to_json(a.adv.finetune);
    }
    algs[a.name] = std::move(x);
  }
  j["algorithms"] = std::move(algs);
  const ProbeSpec& p = c.probes;
  const bool binary = c.architecture.binary;
  j["probes"] = {{"amplitudes", p.amplitudes.empty() ? default_amplitudes(binary) : p.amplitudes},
                 {"samples", p.samples == 0 ? default_energy_samples(binary) : p.samples},
                 {"path_points", p.path_points},
                 {"path_modes", p.path_modes},
                 {"pairs_per_family", p.pairs_per_family},
                 {"path_realizations", p.path_realizations},
                 {"cross_families", p.cross_families},
                 {"record_loss", p.record_loss},
                 {"plane", plane_json(p.plane)}};
  if (p.optimize) j["probes"]["optimize"] = to_json(*p.optimize);
  return j;
}

json load_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

int exit_code_for(const std::exception& e) {
  if (const auto* s = dynamic_cast<const StageError*>(&e)) return s->exit_code();
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  if (dynamic_cast<const IoError*>(&e)) return 4;
  return 1;
}

// ---------------------------------------------------------------------------

namespace {

struct Solution {
  std::string algorithm;
  int index = 0;
  std::uint64_t seed = 0;
  Network net;
  double train_error = 0.0;
  double test_error = std::numeric_limits<double>::quiet_NaN();
};

struct Pair {
  std::string family;
  int pair_id = 0;
  const Solution* a = nullptr;
  const Solution* b = nullptr;
};

struct BarrierStat {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t scans = 0;
};

// Seed tags; every derived stream depends only on (master seed, tags).
enum SeedTag : std::uint64_t {
  kTagData = 1,
  kTagSolution = 2,
  kTagEnergy = 3,
  kTagPaths = 4,
  kTagOptimize = 5,
};

std::uint64_t algorithm_tag(const std::string& name) {
  if (name == "sgd") return 1;
  if (name == "rsgd") return 2;
  return 3;
}

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, fs::path dir) : cfg_(cfg), dir_(std::move(dir)) {
    manifest_["config"] = to_json(cfg);
    manifest_["status"] = "running";
    manifest_["outputs"] = json::array();
    manifest_["solutions"] = json::array();
    manifest_["notes"] = json::array();
  }

  ExperimentOutput run() {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string());
    try {
      if (cfg_.kind == ExperimentKind::kHmmSweep) {
        run_sweep();
      } else {
        run_context(cfg_.dataset.type == "hmm" ? cfg_.dataset.N.front() : 0, "");
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      fail(e);
    }
    manifest_["status"] = "complete";
    manifest_["stage"] = nullptr;
    write_manifest();
    return {dir_, manifest_};
  }

 private:
  struct Context {
    std::string prefix;  // subdirectory for sweep points ("" otherwise)
    int N = 0;
    Dataset train;
    Dataset test;
    bool has_test = false;
    std::map<std::string, std::vector<Solution>> solutions;
    std::map<std::string, std::map<std::string, BarrierStat>> barriers;  // family -> mode -> stat
    std::map<std::string, LocalEnergyProfile> energy;                     // pooled per algorithm
  };

  [[noreturn]] void fail(const std::exception& e) {
    manifest_["status"] = "failed";
    manifest_["stage"] = stage_;
    manifest_["error"] = e.what();
    manifest_["partial"] = true;
    write_manifest();
    throw StageError(stage_, exit_code_for(e), e.what());
  }

  void write_manifest() { write_file(dir_ / "manifest.json", manifest_.dump(2) + "\n"); }

  void emit(const CsvTable& t, const fs::path& rel) {
    t.write(dir_ / rel);
    manifest_["outputs"].push_back(rel.generic_string());
  }

  void run_sweep() {
    std::map<int, Context> points;
    for (int n : cfg_.dataset.N) {
      Context ctx = run_context(n, "N" + std::to_string(n));
      points.emplace(n, std::move(ctx));
    }
    stage_ = "sweep_summary";
    std::set<std::string> families;
    for (const auto& [n, ctx] : points)
      for (const auto& [fam, modes] : ctx.barriers) families.insert(fam);
    for (const auto& fam : families) {
      CsvTable t({"N", "mode", "mean_barrier", "std_barrier", "scans"});
      for (const auto& [n, ctx] : points) {
        auto it = ctx.barriers.find(fam);
        if (it == ctx.barriers.end()) continue;
        for (const auto& [mode, st] : it->second) t.cell(n).cell(mode).cell(st.mean).cell(st.stddev).cell(st.scans).end_row();
      }
      emit(t, "barrier_vs_N_" + fam + ".csv");
    }
    CsvTable le({"N", "algorithm", "amplitude", "mean_dE", "std_dE", "samples"});
    CsvTable er({"N", "algorithm", "mean_train_error", "mean_test_error", "solutions"});
    for (const auto& [n, ctx] : points) {
      for (const auto& [alg, prof] : ctx.energy)
        for (std::size_t i = 0; i < prof.amplitudes.size(); ++i)
          le.cell(n).cell(alg).cell(prof.amplitudes[i]).cell(prof.mean[i]).cell(prof.stddev[i]).cell(prof.samples).end_row();
      for (const auto& [alg, sols] : ctx.solutions) {
        std::vector<double> tr, te;
        for (const auto& s : sols) {
          tr.push_back(s.train_error);
          te.push_back(s.test_error);
        }
        er.cell(n).cell(alg).cell(mean_std(tr).first).cell(mean_std(te).first).cell(sols.size()).end_row();
      }
    }
    emit(le, "local_energy_vs_N.csv");
    emit(er, "errors_vs_N.csv");
  }

  Context run_context(int n, const std::string& prefix) {
    Context ctx;
    ctx.prefix = prefix;
    ctx.N = n;
    current_prefix_ = prefix;
    load_data(ctx);
    for (const auto& alg : cfg_.algorithms) {
      stage_ = tagged("train_" + alg.name);
      train_algorithm(ctx, alg);
    }
    write_solutions(ctx);
    const auto k = cfg_.kind;
    const bool suite = k == ExperimentKind::kHmmSweep || k == ExperimentKind::kMnistParity;
    if (suite || k == ExperimentKind::kFlatness) {
      stage_ = tagged("local_energy");
      probe_energy(ctx);
    }
    if (suite || k == ExperimentKind::kPaths) {
      stage_ = tagged("paths");
      probe_paths(ctx);
      if (cfg_.probes.optimize) {
        stage_ = tagged("optimized_paths");
        probe_optimized(ctx);
      }
    }
    if (suite || k == ExperimentKind::kDistances) {
      stage_ = tagged("distances");
      probe_distances(ctx);
    }
    if (k == ExperimentKind::kPlane) {
      stage_ = tagged("plane");
      probe_plane(ctx);
    }
    return ctx;
  }

  std::string tagged(const std::string& s) const { return current_prefix_.empty() ? s : current_prefix_ + "/" + s; }

  fs::path rel(const Context& ctx, const std::string& name) const {
    return ctx.prefix.empty() ? fs::path(name) : fs::path(ctx.prefix) / name;
  }

  void load_data(Context& ctx) {
    stage_ = tagged("data");
    const DatasetSpec& d = cfg_.dataset;
    if (d.type == "hmm") {
      HmmConfig h{d.D, ctx.N, d.P, d.P_test, mix_seed(cfg_.seed, kTagData, static_cast<std::uint64_t>(ctx.N))};
      HmmData data = hmm_generate(h);
      ctx.train = std::move(data.train);
      ctx.test = std::move(data.test);
      ctx.has_test = true;
      manifest_["seeds"]["data"][ctx.prefix.empty() ? "hmm" : ctx.prefix] = h.seed;
    } else if (d.type == "mnist") {
      ctx.train = load_mnist(d.dir, true, d.task, static_cast<std::size_t>(d.limit));
      ctx.test = load_mnist(d.dir, false, d.task, static_cast<std::size_t>(d.test_limit));
      ctx.has_test = true;
    } else {
      ctx.train = load_dataset(d.train_file);
      if (!d.test_file.empty()) {
        ctx.test = load_dataset(d.test_file);
        ctx.has_test = true;
      }
    }
  }

  Network make_network(const Dataset& data) const {
    const auto& a = cfg_.architecture;
    const int outputs = data.signed_labels ? 1 : data.num_classes;
    if (a.type == "committee") {
      if (!data.signed_labels) throw ConfigError("committee machines need +-1 labels");
      return make_committee(data.input_dim(), a.hidden.front());
    }
    std::vector<int> widths{data.input_dim()};
    widths.insert(widths.end(), a.hidden.begin(), a.hidden.end());
    widths.push_back(outputs);
    return make_mlp(widths, a.binary, a.bias);
  }

  static void match_loss(TrainConfig& t, const Dataset& data) {
    t.loss = data.signed_labels ? LossKind::kBinaryCrossEntropy : LossKind::kCrossEntropy;
  }

  void train_algorithm(Context& ctx, const AlgorithmSpec& alg) {
    auto& sols = ctx.solutions[alg.name];
    for (int i = 0; i < alg.count; ++i) {
      Solution s;
      s.algorithm = alg.name;
      s.index = i;
      s.seed = mix_seed(cfg_.seed, kTagSolution, algorithm_tag(alg.name) * 1000003ULL + static_cast<std::uint64_t>(i) +
                                                        (static_cast<std::uint64_t>(ctx.N) << 32));
      Network init = make_network(ctx.train);
      Rng rng(mix_seed(s.seed, 1));
      initialize(init, rng);
      TrainResult res;
      if (alg.name == "adv") {
        AdvConfig adv = alg.adv;
        match_loss(adv.pretrain, ctx.train);
        match_loss(adv.finetune, ctx.train);
        adv.pretrain.seed = mix_seed(s.seed, 2);
        adv.finetune.seed = mix_seed(s.seed, 3);
        res = adv_init_train(init, ctx.train, adv, mix_seed(s.seed, 4));
      } else {
        TrainConfig t = alg.train;
        match_loss(t, ctx.train);
        t.seed = mix_seed(s.seed, 2);
        res = alg.name == "rsgd" ? rsgd_train(init, ctx.train, t, alg.replicas) : sgd_train(init, ctx.train, t);
      }
      s.net = std::move(res.net);
      s.train_error = res.final_train_error;
      if (ctx.has_test) s.test_error = train_error(s.net, ctx.test);
      const fs::path ck = rel(ctx, "checkpoints/" + alg.name + "_" + std::to_string(i) + ".ckpt");
      CheckpointInfo info;
      info.seed_lineage = {cfg_.seed, s.seed};
      info.metadata = {{"algorithm", alg.name}, {"index", i}, {"train_error", s.train_error}};
      if (ctx.has_test) info.metadata["test_error"] = s.test_error;
      if (ctx.N) info.metadata["N"] = ctx.N;
      save_checkpoint(s.net, dir_ / ck, info);
      manifest_["outputs"].push_back(ck.generic_string());
      json entry = {{"algorithm", alg.name}, {"index", i}, {"seed", s.seed}, {"train_error", s.train_error},
                    {"solution", s.train_error < 0.01}, {"checkpoint", ck.generic_string()}};
      if (ctx.has_test) entry["test_error"] = s.test_error;
      if (ctx.N) entry["N"] = ctx.N;
      manifest_["solutions"].push_back(std::move(entry));
      sols.push_back(std::move(s));
    }
  }

  void write_solutions(const Context& ctx) {
    CsvTable t({"algorithm", "solution", "seed", "train_error", "test_error"});
    for (const auto& alg : cfg_.algorithms)
      for (const auto& s : ctx.solutions.at(alg.name))
        t.cell(s.algorithm).cell(s.index).cell(std::to_string(s.seed)).cell(s.train_error).cell(s.test_error).end_row();
    emit(t, rel(ctx, "solutions.csv"));
  }

  void probe_energy(Context& ctx) {
    const bool binary = cfg_.architecture.binary;
    const auto amps = cfg_.probes.amplitudes.empty() ? default_amplitudes(binary) : cfg_.probes.amplitudes;
    const int samples = cfg_.probes.samples == 0 ? default_energy_samples(binary) : cfg_.probes.samples;
    CsvTable pooled({"algorithm", "amplitude", "mean_dE", "std_dE", "samples"});
    CsvTable per({"algorithm", "solution", "amplitude", "mean_dE", "std_dE", "samples"});
    for (const auto& alg : cfg_.algorithms) {
      const auto& sols = ctx.solutions.at(alg.name);
      std::vector<LocalEnergyProfile> profs;
      for (const auto& s : sols) {
        profs.push_back(local_energy(s.net, ctx.train, amps, samples, mix_seed(s.seed, kTagEnergy)));
        const auto& p = profs.back();
        for (std::size_t i = 0; i < amps.size(); ++i)
          per.cell(alg.name).cell(s.index).cell(amps[i]).cell(p.mean[i]).cell(p.stddev[i]).cell(samples).end_row();
      }
      // Pool all draws of the group: mean of means, and the standard
      // deviation of the union of the draws.
      LocalEnergyProfile agg;
      agg.amplitudes = amps;
      agg.samples = samples * static_cast<int>(profs.size());
      for (std::size_t i = 0; i < amps.size(); ++i) {
        double m = 0.0;
        for (const auto& p : profs) m += p.mean[i];
        m /= static_cast<double>(profs.size());
        double ss = 0.0;
        for (const auto& p : profs)
          ss += (samples - 1) * p.stddev[i] * p.stddev[i] + samples * (p.mean[i] - m) * (p.mean[i] - m);
        const double sd = agg.samples > 1 ? std::sqrt(ss / (agg.samples - 1)) : 0.0;
        agg.mean.push_back(m);
        agg.stddev.push_back(sd);
        pooled.cell(alg.name).cell(amps[i]).cell(m).cell(sd).cell(agg.samples).end_row();
      }
      ctx.energy[alg.name] = std::move(agg);
    }
    emit(pooled, rel(ctx, "local_energy.csv"));
    emit(per, rel(ctx, "local_energy_solutions.csv"));
  }

  std::vector<Pair> make_pairs(const Context& ctx) const {
    std::vector<Pair> pairs;
    int next_id = 0;
    const auto& algs = cfg_.algorithms;
    for (std::size_t i = 0; i < algs.size(); ++i) {
      for (std::size_t j = i; j < algs.size(); ++j) {
        if (i != j && !cfg_.probes.cross_families) continue;
        const auto& sa = ctx.solutions.at(algs[i].name);
        const auto& sb = ctx.solutions.at(algs[j].name);
        const std::string fam = algs[i].name + "-" + algs[j].name;
        int taken = 0;
        for (std::size_t x = 0; x < sa.size() && taken < cfg_.probes.pairs_per_family; ++x)
          for (std::size_t y = (i == j ? x + 1 : 0); y < sb.size() && taken < cfg_.probes.pairs_per_family; ++y) {
            pairs.push_back({fam, next_id++, &sa[x], &sb[y]});
            ++taken;
          }
      }
    }
    return pairs;
  }

  void probe_paths(Context& ctx) {
    const bool loss = cfg_.probes.record_loss;
    std::vector<std::string> header{"pair_id", "family", "mode", "realization", "x", "train_error"};
    if (loss) header.push_back("loss");
    CsvTable scans(header);
    CsvTable bars({"pair_id", "family", "mode", "realization", "solution_a", "solution_b", "barrier"});
    std::map<std::string, std::map<std::string, std::vector<double>>> collected;
    const auto pairs = make_pairs(ctx);
    for (const Pair& p : pairs) {
      for (std::size_t m = 0; m < cfg_.probes.path_modes.size(); ++m) {
        const std::string& mode = cfg_.probes.path_modes[m];
        const int reps = is_hamming_mode(mode) ? cfg_.probes.path_realizations : 1;
        for (int r = 0; r < reps; ++r) {
          PathOptions opts;
          opts.points = cfg_.probes.path_points;
          opts.seed = mix_seed(cfg_.seed, kTagPaths,
                               (static_cast<std::uint64_t>(ctx.N) << 40) ^ (static_cast<std::uint64_t>(p.pair_id) << 16) ^
                                   (m << 8) ^ static_cast<std::uint64_t>(r));
          opts.align_hamming = mode != "hamming_raw";
          opts.record_loss = loss;
          opts.loss = ctx.train.signed_labels ? LossKind::kBinaryCrossEntropy : LossKind::kCrossEntropy;
          const PathMode pm = mode == "hamming_raw" ? PathMode::kHamming : path_mode_from_string(mode);
          const PathScan s = path_scan(p.a->net, p.b->net, ctx.train, pm, opts);
          for (std::size_t k = 0; k < s.x.size(); ++k) {
            scans.cell(p.pair_id).cell(p.family).cell(mode).cell(r).cell(s.x[k]).cell(s.train_error[k]);
            if (loss) scans.cell(s.loss[k]);
            scans.end_row();
          }
          const double b = barrier(s);
          bars.cell(p.pair_id).cell(p.family).cell(mode).cell(r)
              .cell(p.a->algorithm + "_" + std::to_string(p.a->index))
              .cell(p.b->algorithm + "_" + std::to_string(p.b->index))
              .cell(b).end_row();
          collected[p.family][mode].push_back(b);
        }
      }
    }
    CsvTable summary({"family", "mode", "mean_barrier", "std_barrier", "scans"});
    for (const auto& [fam, modes] : collected)
      for (const auto& [mode, values] : modes) {
        auto [m, sd] = mean_std(values);
        ctx.barriers[fam][mode] = {m, sd, values.size()};
        summary.cell(fam).cell(mode).cell(m).cell(sd).cell(values.size()).end_row();
      }
    emit(scans, rel(ctx, "paths.csv"));
    emit(bars, rel(ctx, "path_barriers.csv"));
    emit(summary, rel(ctx, "barrier_summary.csv"));
  }

  void probe_optimized(Context& ctx) {
    CsvTable scans({"pair_id", "family", "half", "x", "train_error"});
    CsvTable bars({"pair_id", "family", "barrier", "midpoint_error", "midpoint_init", "status"});
    TrainConfig t = *cfg_.probes.optimize;
    match_loss(t, ctx.train);
    for (const Pair& p : make_pairs(ctx)) {
      PathOptions opts;
      opts.points = cfg_.probes.path_points;
      opts.seed = mix_seed(cfg_.seed, kTagOptimize, (static_cast<std::uint64_t>(ctx.N) << 32) ^ static_cast<std::uint64_t>(p.pair_id));
      t.seed = mix_seed(opts.seed, 7);
      try {
        OptimizedPath o = optimized_path(p.a->net, p.b->net, ctx.train, t, opts);
        for (int h = 0; h < 2; ++h) {
          const PathScan& s = h == 0 ? o.first : o.second;
          for (std::size_t k = 0; k < s.x.size(); ++k)
            scans.cell(p.pair_id).cell(p.family).cell(h).cell(s.x[k]).cell(s.train_error[k]).end_row();
        }
        bars.cell(p.pair_id).cell(p.family).cell(o.barrier).cell(o.midpoint_error).cell(o.midpoint_init).cell("ok").end_row();
      } catch (const NonConvergenceError& e) {
        bars.cell(p.pair_id).cell(p.family).cell(std::numeric_limits<double>::quiet_NaN())
            .cell(e.achieved_error()).cell(cfg_.architecture.binary ? "hamming" : "geodesic")
            .cell("midpoint_not_converged").end_row();
      } catch (const PreconditionError& e) {
        bars.cell(p.pair_id).cell(p.family).cell(std::numeric_limits<double>::quiet_NaN())
            .cell(std::numeric_limits<double>::quiet_NaN()).cell(cfg_.architecture.binary ? "hamming" : "geodesic")
            .cell("endpoint_not_solution").end_row();
      }
    }
    emit(scans, rel(ctx, "optimized_paths.csv"));
    emit(bars, rel(ctx, "optimized_barriers.csv"));
  }

  void probe_distances(Context& ctx) {
    std::vector<SolutionGroup> groups;
    for (const auto& alg : cfg_.algorithms) {
      const auto& sols = ctx.solutions.at(alg.name);
      if (sols.size() < 2) continue;
      SolutionGroup g{alg.name, {}};
      for (const auto& s : sols) g.nets.push_back(s.net);
      groups.push_back(std::move(g));
    }
    CsvTable t({"group_a", "group_b", "raw_mean", "raw_std", "aligned_mean", "aligned_std", "pairs"});
    if (!groups.empty())
      for (const auto& r : distance_study(groups))
        t.cell(r.group_a).cell(r.group_b).cell(r.raw_mean).cell(r.raw_std).cell(r.aligned_mean).cell(r.aligned_std).cell(r.pairs).end_row();
    emit(t, rel(ctx, "distances.csv"));
  }

  void probe_plane(Context& ctx) {
    const PlaneSpec& ps = cfg_.probes.plane;
    const auto& sols = ctx.solutions.at(ps.algorithm);
    std::vector<Network> anchors;
    for (int i = 0; i < 3; ++i) anchors.push_back(ps.options.normalized ? normalize(sols[i].net) : sols[i].net);
    if (ps.aligned)
      for (int i = 1; i < 3; ++i) anchors[i] = align(anchors[0], anchors[i], ps.options.normalized).net;
    const PlaneGrid g = plane_scan(anchors[0], anchors[1], anchors[2], ctx.train, ps.options);
    CsvTable t({"i", "j", "u", "v", "train_error"});
    for (std::size_t i = 0; i < g.us.size(); ++i)
      for (std::size_t j = 0; j < g.vs.size(); ++j)
        t.cell(i).cell(j).cell(g.us[i]).cell(g.vs[j]).cell(g.errors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))).end_row();
    CsvTable a({"anchor", "u", "v", "train_error"});
    for (std::size_t k = 0; k < 3; ++k)
      a.cell(k).cell(g.anchors[k].first).cell(g.anchors[k].second).cell(train_error(anchors[k], ctx.train)).end_row();
    emit(t, rel(ctx, "plane.csv"));
    emit(a, rel(ctx, "plane_anchors.csv"));
    manifest_["plane"] = {{"normalized", g.normalized}, {"reprojected", g.reprojected}, {"binarized", g.binarized},
                          {"aligned", ps.aligned}};
  }

  const ExperimentConfig& cfg_;
  fs::path dir_;
  json manifest_;
  std::string stage_ = "setup";
  std::string current_prefix_;
};

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::path dir = out_dir.empty() ? fs::path(cfg.output_dir) : out_dir;
  if (dir.empty()) throw ConfigError("no output directory given");
  Runner runner(cfg, dir);
  return runner.run();
}

}  // namespace symnet
