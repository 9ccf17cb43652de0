#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "symnet/types.hpp"

namespace symnet {

enum class Activation { kRelu, kSign, kLinear };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

struct LayerSpec {
  int fan_in = 0;
  int fan_out = 0;
  Activation activation = Activation::kRelu;
  bool has_bias = false;
  bool weights_binary = false;
  // Frozen layers (e.g. the all-ones readout of a committee machine) are never
  // updated by training, never perturbed by probes and expose no sign symmetry.
  bool trainable = true;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Layer {
  LayerSpec spec;
  Matrix weights;  // fan_out x fan_in
  Vector bias;     // fan_out, or empty when !spec.has_bias
  Matrix latent;   // fan_out x fan_in, or empty when !spec.weights_binary

  // Backward pass of a sign activation: the straight-through surrogate is
  // hardtanh(z / width) with width = sqrt(fan_in), so the window matches the
  // typical size of an integer pre-activation.
  float surrogate_width() const;
};

class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Layer> layers);

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  Layer& mutable_layer(std::size_t i) { return layers_.at(i); }

  std::size_t num_layers() const { return layers_.size(); }
  int input_dim() const { return layers_.front().spec.fan_in; }
  int output_dim() const { return layers_.back().spec.fan_out; }
  bool is_binary() const;
  bool has_latent() const;
  std::vector<LayerSpec> architecture() const;
  bool same_architecture(const Network& other) const;

  // Checks the structural invariants; throws ShapeError / NumericError.
  void validate() const;

  // Total number of trainable weights (biases excluded).
  std::size_t num_trainable_weights() const;

  friend bool operator==(const Network& a, const Network& b);

 private:
  std::vector<Layer> layers_;
};

struct Dataset {
  Matrix inputs;            // P x N
  std::vector<int> labels;  // class index, or +-1 when signed_labels
  int num_classes = 2;
  bool signed_labels = false;

  std::size_t size() const { return labels.size(); }
  int input_dim() const { return static_cast<int>(inputs.cols()); }
  void validate() const;
};

// Builds an MLP with the given widths: widths = {N, H1, ..., HL}. Hidden layers
// use relu (sign when binary); the last layer is linear.
Network make_mlp(std::span<const int> widths, bool binary, bool bias);

// One hidden sign layer of `hidden` units, readout fixed to +1 (frozen, binary).
Network make_committee(int inputs, int hidden);

// Draws parameters: continuous uniform in +-sqrt(6/fan_in), binary latent
// uniform in [-1, 1]; biases start at zero. Frozen layers are left untouched.
void initialize(Network& net, Rng& rng);

Matrix forward(const Network& net, const Matrix& inputs);

// Argmax with lowest-index ties for multi-output logits, sign with sign(0)=+1
// for a single output.
std::vector<int> classify(const Matrix& logits);

std::size_t count_errors(const Network& net, const Dataset& data);
double train_error(const Network& net, const Dataset& data);

// weights <- sign(latent); latent untouched. Throws MissingLatentError.
Network binarize(const Network& net);
void binarize_in_place(Network& net);

}  // namespace symnet
