#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "symnet/network.hpp"

namespace symnet {

enum class LossKind { kCrossEntropy, kBinaryCrossEntropy };
enum class Schedule { kCosine, kConstant };

std::string_view to_string(LossKind k);
std::string_view to_string(Schedule s);
LossKind loss_from_string(std::string_view s);
Schedule schedule_from_string(std::string_view s);

struct TrainConfig {
  int epochs = 1;  // 0 is accepted and returns the input network unchanged
  int batch_size = 128;
  double lr0 = 0.02;
  double momentum = 0.0;
  bool nesterov = false;
  Schedule schedule = Schedule::kCosine;
  LossKind loss = LossKind::kCrossEntropy;
  std::uint64_t seed = 0;

  void validate() const;
  double learning_rate(int epoch) const;
};

// Elastic coupling of replicated SGD. gamma(t) = gamma0 * (1 + gamma1)^t with
// t the epoch index.
struct ReplicaConfig {
  int num_replicas = 5;
  double gamma0 = 0.002;
  double gamma1 = 0.002;
  // When false every replica shares the master seed (identical batch order);
  // only useful to check that uncoupled RSGD reduces to SGD.
  bool split_streams = true;

  void validate() const;
  double gamma(int epoch) const;
};

struct AdvConfig {
  int replication = 1;  // R label-randomized copies
  double zero_pixel_fraction = 0.1;
  // Include the clean training set in the poisoned set (original U R copies).
  // Off reproduces the "randomized labels only" pretraining used for the
  // binary HMM models.
  bool keep_clean_copy = true;
  TrainConfig pretrain;
  TrainConfig finetune;  // momentum is forced to 0

  void validate() const;
};

struct TrainTrace {
  std::vector<double> train_error;
  std::vector<double> test_error;  // NaN when no test set was supplied
  std::vector<double> learning_rate;
  std::vector<double> loss;
  int pretrain_epochs = 0;  // ADV only: leading entries that belong to stage 1

  std::size_t size() const { return train_error.size(); }
};

struct TrainResult {
  Network net;
  TrainTrace trace;
  double final_train_error = 0.0;
};

template <typename T>
struct GradientT {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  std::vector<Mat> weights;  // w.r.t. latent weights on binary layers
  std::vector<Vec> bias;     // empty vectors where the layer has no bias
  T loss = T(0);             // mean batch loss
};

using Gradient = GradientT<float>;
using GradientD = GradientT<double>;

// Gradient of the mean batch loss. Binary layers use the straight-through
// estimator for both sign weights (zeroed where |latent| > 1) and sign
// activations (hardtanh surrogate, see Layer::surrogate_width). Frozen layers get zeros.
Gradient backprop(const Network& net, const Matrix& inputs, std::span<const int> labels,
                  LossKind loss);

// Same computation carried out in double precision; used to verify gradients.
GradientD backprop_double(const Network& net, const MatrixD& inputs,
                          std::span<const int> labels, LossKind loss);

double mean_loss(const Network& net, const Dataset& data, LossKind loss);

double cosine_lr(double lr0, double t, double total);

TrainResult sgd_train(Network net, const Dataset& train, const TrainConfig& cfg,
                      const Dataset* test = nullptr);

TrainResult rsgd_train(const Network& tmpl, const Dataset& train, const TrainConfig& cfg,
                       const ReplicaConfig& rep, const Dataset* test = nullptr);

// w_a <- w_a - min(gamma, 1) (w_a - mean) on every trainable tensor (latent
// weights for binary layers). Binary weights are not re-derived here.
void elastic_coupling(std::vector<Network>& replicas, double gamma);

// original (optional) U R copies with uniformly random labels and a
// zero_pixel_fraction of each copy's inputs zeroed.
Dataset make_poisoned_dataset(const Dataset& data, const AdvConfig& cfg, std::uint64_t seed);

// Stage 1 of ADV: train `init` on the poisoned set.
TrainResult adv_pretrain(const Network& init, const Dataset& data, const AdvConfig& cfg,
                         std::uint64_t seed);

// Both ADV stages: poisoned pretraining, then momentum-free SGD on clean data.
TrainResult adv_init_train(const Network& init, const Dataset& data, const AdvConfig& cfg,
                           std::uint64_t seed, const Dataset* test = nullptr);

}  // namespace symnet
