#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "symnet/errors.hpp"
#include "symnet/experiment.hpp"
#include "symnet/io.hpp"

using namespace symnet;
using namespace testing_helpers;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("symnet_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  return line;
}

json small_sweep() {
  return json::parse(R"({
    "kind": "hmm_sweep",
    "seed": 11,
    "dataset": {"type": "hmm", "D": 21, "N": [41, 61], "P": 60, "P_test": 40},
    "architecture": {"type": "perceptron"},
    "algorithms": {
      "sgd": {"count": 2, "train": {"epochs": 15, "batch_size": 10}},
      "rsgd": {"count": 2, "train": {"epochs": 10, "batch_size": 10}, "replicas": {"num_replicas": 3}}
    },
    "probes": {"samples": 3, "path_points": 5, "path_realizations": 2, "pairs_per_family": 1,
               "optimize": {"epochs": 3, "batch_size": 10}}
  })");
}

}  // namespace

TEST_CASE("config parsing: defaults follow the network kind") {
  json j = {{"kind", "flatness"},
            {"seed", 3},
            {"dataset", {{"type", "hmm"}}},
            {"algorithms", {{"sgd", json::object()}}}};
  ExperimentConfig c = parse_experiment_config(j);
  CHECK(c.kind == ExperimentKind::kFlatness);
  CHECK(c.dataset.D == 501);
  CHECK(c.dataset.P == 1503);
  REQUIRE(c.algorithms.size() == 1);
  const TrainConfig& t = c.algorithms[0].train;
  CHECK(t.epochs == 200);
  CHECK(t.batch_size == 100);
  CHECK(t.lr0 == 1.0);
  CHECK(c.probes.path_modes == std::vector<std::string>{"hamming_raw", "hamming"});
  CHECK(c.probes.plane.options.binarized);

  json k = {{"kind", "paths"},
            {"seed", 3},
            {"dataset", {{"type", "file"}, {"train", "x.bin"}}},
            {"architecture", {{"type", "mlp"}, {"hidden", {16, 16}}, {"binary", false}, {"bias", true}}},
            {"algorithms", {{"sgd", {{"count", 2}}}}}};
  ExperimentConfig d = parse_experiment_config(k);
  CHECK(d.algorithms[0].train.lr0 == 0.02);
  CHECK(d.algorithms[0].train.momentum == 0.9);
  CHECK(d.algorithms[0].train.nesterov);
  CHECK(d.probes.path_modes == std::vector<std::string>{"linear", "linear_aligned", "geodesic_aligned"});
  CHECK(d.probes.plane.options.normalized);
}

TEST_CASE("config parsing: rejects unknown keys, wrong types and missing seeds") {
  const json base = small_sweep();
  CHECK_NOTHROW(parse_experiment_config(base));

  json top = base;
  top["sede"] = 1;
  CHECK_THROWS_AS(parse_experiment_config(top), ConfigError);

  json nested = base;
  nested["algorithms"]["sgd"]["train"]["learning_rate"] = 0.1;
  CHECK_THROWS_AS(parse_experiment_config(nested), ConfigError);

  json deep = base;
  deep["algorithms"]["rsgd"]["replicas"]["gama0"] = 0.1;
  CHECK_THROWS_AS(parse_experiment_config(deep), ConfigError);

  json noseed = base;
  noseed.erase("seed");
  CHECK_THROWS_AS(parse_experiment_config(noseed), ConfigError);

  json type = base;
  type["seed"] = "eleven";
  CHECK_THROWS_AS(parse_experiment_config(type), ConfigError);

  json mode = base;
  mode["probes"]["path_modes"] = {"geodesic_aligned"};
  CHECK_THROWS_AS(parse_experiment_config(mode), ConfigError);

  json algo = base;
  algo["algorithms"]["entropy_sgd"] = json::object();
  CHECK_THROWS_AS(parse_experiment_config(algo), ConfigError);

  json plane = base;
  plane["kind"] = "plane";
  plane["dataset"]["N"] = 41;
  CHECK_THROWS_AS(parse_experiment_config(plane), ConfigError);
}

TEST_CASE("config JSON round trip") {
  ExperimentConfig c = parse_experiment_config(small_sweep());
  json once = to_json(c);
  json twice = to_json(parse_experiment_config(once));
  CHECK(once == twice);
}

TEST_CASE("exit codes by error family") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(PreconditionError("x")) == 2);
  CHECK(exit_code_for(AntipodalError("x")) == 3);
  CHECK(exit_code_for(ChecksumError("x")) == 4);
  CHECK(exit_code_for(StageError("data", 4, "x")) == 4);
  CHECK(exit_code_for(std::runtime_error("x")) == 1);
}

TEST_CASE("hmm sweep run: outputs, schemas, byte-identical reruns") {
  ExperimentConfig c = parse_experiment_config(small_sweep());
  const fs::path a = scratch("run_a");
  const fs::path b = scratch("run_b");
  ExperimentOutput out = run_experiment(c, a);
  run_experiment(c, b);
  CHECK(out.manifest["status"] == "complete");
  CHECK(out.manifest["solutions"].size() == 8);

  std::size_t csvs = 0;
  for (const auto& rel : out.manifest["outputs"]) {
    const fs::path p = a / rel.get<std::string>();
    REQUIRE(fs::exists(p));
    CHECK(slurp(p) == slurp(b / rel.get<std::string>()));
    if (p.extension() == ".csv") ++csvs;
  }
  CHECK(csvs >= 10);

  CHECK(first_line(a / "N41/solutions.csv") == "algorithm,solution,seed,train_error,test_error");
  CHECK(first_line(a / "N41/local_energy.csv") == "algorithm,amplitude,mean_dE,std_dE,samples");
  CHECK(first_line(a / "N41/paths.csv") == "pair_id,family,mode,realization,x,train_error");
  CHECK(first_line(a / "N41/path_barriers.csv") ==
        "pair_id,family,mode,realization,solution_a,solution_b,barrier");
  CHECK(first_line(a / "N61/optimized_barriers.csv") ==
        "pair_id,family,barrier,midpoint_error,midpoint_init,status");
  CHECK(first_line(a / "N61/distances.csv") ==
        "group_a,group_b,raw_mean,raw_std,aligned_mean,aligned_std,pairs");
  CHECK(first_line(a / "barrier_vs_N_sgd-sgd.csv") == "N,mode,mean_barrier,std_barrier,scans");
  CHECK(first_line(a / "local_energy_vs_N.csv") == "N,algorithm,amplitude,mean_dE,std_dE,samples");
  CHECK(first_line(a / "errors_vs_N.csv") == "N,algorithm,mean_train_error,mean_test_error,solutions");

  // Checkpoints load back and carry their lineage.
  LoadedCheckpoint ck = load_checkpoint(a / "N41/checkpoints/sgd_0.ckpt");
  CHECK(ck.info.seed_lineage.front() == 11);
  CHECK(ck.info.metadata["N"] == 41);

  json manifest = json::parse(slurp(a / "manifest.json"));
  CHECK(manifest["config"] == to_json(c));

  ExperimentConfig other = c;
  other.seed = 12;
  const fs::path d = scratch("run_c");
  run_experiment(other, d);
  CHECK(slurp(a / "N41/solutions.csv") != slurp(d / "N41/solutions.csv"));
}

TEST_CASE("plane and distance runs on a file dataset") {
  const fs::path dir = scratch("run_plane");
  fs::create_directories(dir);
  Network teacher = random_mlp({6, 5, 2}, 1, false, true);
  save_dataset(self_labelled(teacher, gaussian_inputs(120, 6, 2)), dir / "train.bin");
  json j = {{"kind", "plane"},
            {"seed", 4},
            {"dataset", {{"type", "file"}, {"train", (dir / "train.bin").string()}}},
            {"architecture", {{"type", "mlp"}, {"hidden", {12}}, {"binary", false}, {"bias", true}}},
            {"algorithms", {{"sgd", {{"count", 3}, {"train", {{"epochs", 5}, {"batch_size", 20}}}}}}},
            {"probes", {{"plane", {{"algorithm", "sgd"}, {"resolution", 4}}}}}};
  ExperimentOutput out = run_experiment(parse_experiment_config(j), dir / "out");
  CHECK(first_line(dir / "out/plane.csv") == "i,j,u,v,train_error");
  CHECK(first_line(dir / "out/plane_anchors.csv") == "anchor,u,v,train_error");
  CHECK(out.manifest["plane"]["reprojected"] == true);

  j["kind"] = "distances";
  run_experiment(parse_experiment_config(j), dir / "dist");
  CHECK(first_line(dir / "dist/distances.csv") ==
        "group_a,group_b,raw_mean,raw_std,aligned_mean,aligned_std,pairs");
}

TEST_CASE("a failing stage is recorded in the manifest and mapped to an exit code") {
  const fs::path dir = scratch("run_fail");
  json j = {{"kind", "flatness"},
            {"seed", 1},
            {"dataset", {{"type", "file"}, {"train", (dir / "missing.bin").string()}}},
            {"algorithms", {{"sgd", json::object()}}}};
  ExperimentConfig c = parse_experiment_config(j);
  try {
    run_experiment(c, dir);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(e.stage() == "data");
    CHECK(e.exit_code() == 4);
  }
  json m = json::parse(slurp(dir / "manifest.json"));
  CHECK(m["status"] == "failed");
  CHECK(m["stage"] == "data");
  CHECK(m["partial"] == true);
  CHECK_THROWS_AS(run_experiment(c, fs::path{}), ConfigError);
}
