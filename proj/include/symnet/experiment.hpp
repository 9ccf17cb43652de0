#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "symnet/datasets.hpp"
#include "symnet/errors.hpp"
#include "symnet/probes.hpp"
#include "symnet/training.hpp"

namespace symnet {

enum class ExperimentKind { kHmmSweep, kMnistParity, kFlatness, kPaths, kPlane, kDistances };

std::string_view to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(std::string_view s);

struct DatasetSpec {
  std::string type = "hmm";  // hmm | mnist | file
  int D = 501;
  std::vector<int> N{1001};  // several values only for hmm_sweep
  int P = 1503;
  int P_test = 5000;
  std::string dir;  // mnist
  MnistTask task = MnistTask::kParity;
  int limit = 10000;
  int test_limit = 10000;
  std::string train_file;  // file
  std::string test_file;
};

struct ArchitectureSpec {
  std::string type = "perceptron";  // perceptron | committee | mlp
  std::vector<int> hidden;
  bool binary = true;
  bool bias = false;
};

struct AlgorithmSpec {
  std::string name;  // sgd | rsgd | adv
  int count = 3;
  TrainConfig train;
  ReplicaConfig replicas;
  AdvConfig adv;
};

struct PathFamilySpec {
  std::string mode;  // linear | linear_aligned | geodesic_aligned | hamming | hamming_raw
};

struct PlaneSpec {
  std::string algorithm = "rsgd";
  bool aligned = true;
  PlaneOptions options;
};

struct ProbeSpec {
  std::vector<double> amplitudes;  // empty: defaults
  int samples = 0;                 // 0: default for the network kind
  int path_points = 25;
  std::vector<std::string> path_modes;
  int pairs_per_family = 5;
  int path_realizations = 5;
  bool cross_families = true;
  bool record_loss = false;
  std::optional<TrainConfig> optimize;
  PlaneSpec plane;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kFlatness;
  std::uint64_t seed = 0;
  std::string output_dir;
  DatasetSpec dataset;
  ArchitectureSpec architecture;
  std::vector<AlgorithmSpec> algorithms;
  ProbeSpec probes;
};

// Parses and validates a configuration. Unknown keys, wrong types, missing
// seeds and inconsistent settings raise ConfigError.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

TrainConfig parse_train_config(const nlohmann::json& j, const TrainConfig& defaults = {});
nlohmann::json to_json(const TrainConfig& cfg);

nlohmann::json load_json(const std::filesystem::path& path);

// Failure of one pipeline stage. Carries the exit-code family of the
// original error.
class StageError : public Error {
 public:
  StageError(std::string stage, int exit_code, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)), exit_code_(exit_code) {}
  const std::string& stage() const noexcept { return stage_; }
  int exit_code() const noexcept { return exit_code_; }

 private:
  std::string stage_;
  int exit_code_;
};

// 2 config, 3 numeric, 4 I/O, 1 anything else.
int exit_code_for(const std::exception& e);

struct ExperimentOutput {
  std::filesystem::path dir;
  nlohmann::json manifest;
};

// Runs the configured pipeline and writes checkpoints, CSV tables and
// manifest.json into `out_dir` (or the configured output_dir). On failure the
// manifest records the failing stage and the files written so far, and a
// StageError is thrown.
ExperimentOutput run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir = {});

}  // namespace symnet
