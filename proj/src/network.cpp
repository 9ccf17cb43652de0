#include "symnet/network.hpp"

#include <algorithm>
#include <cmath>

#include "symnet/errors.hpp"

namespace symnet {

namespace {

constexpr Eigen::Index kEvalChunk = 2048;

void apply_activation(Matrix& z, Activation act) {
  switch (act) {
    case Activation::kRelu:
      z = z.cwiseMax(0.0f);
      break;
    case Activation::kSign:
      z = z.unaryExpr([](float v) { return sign_of(v); });
      break;
    case Activation::kLinear:
      break;
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kSign:
      return "sign";
    case Activation::kLinear:
      return "linear";
  }
  return "?";
}

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "sign") return Activation::kSign;
  if (s == "linear") return Activation::kLinear;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

float Layer::surrogate_width() const { return std::sqrt(static_cast<float>(spec.fan_in)); }

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

bool Network::is_binary() const {
  return std::any_of(layers_.begin(), layers_.end(),
                     [](const Layer& l) { return l.spec.weights_binary; });
}

bool Network::has_latent() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const Layer& l) {
    return !l.spec.weights_binary || l.latent.size() == l.weights.size();
  });
}

std::vector<LayerSpec> Network::architecture() const {
  std::vector<LayerSpec> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(l.spec);
  return out;
}

bool Network::same_architecture(const Network& other) const {
  return architecture() == other.architecture();
}

void Network::validate() const {
  if (layers_.empty()) throw ShapeError("network has no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const auto& s = l.spec;
    if (s.fan_in <= 0 || s.fan_out <= 0) throw ShapeError("layer " + std::to_string(i) + " has empty dimension");
    if (i + 1 < layers_.size() && layers_[i + 1].spec.fan_in != s.fan_out)
      throw ShapeError("layer " + std::to_string(i) + " fan_out does not match next fan_in");
    if (l.weights.rows() != s.fan_out || l.weights.cols() != s.fan_in)
      throw ShapeError("layer " + std::to_string(i) + " weight matrix has wrong shape");
    if (s.has_bias != (l.bias.size() == s.fan_out))
      throw ShapeError("layer " + std::to_string(i) + " bias vector inconsistent with spec");
    if (s.weights_binary) {
      if (l.latent.rows() != s.fan_out || l.latent.cols() != s.fan_in)
        throw ShapeError("binary layer " + std::to_string(i) + " lacks latent weights");
      for (Eigen::Index k = 0; k < l.weights.size(); ++k) {
        if (l.weights.data()[k] != sign_of(l.latent.data()[k]))
          throw NumericError("binary layer " + std::to_string(i) + " weights differ from sign(latent)");
      }
    } else if (l.latent.size() != 0) {
      throw ShapeError("continuous layer " + std::to_string(i) + " carries latent weights");
    }
    if (!l.weights.allFinite() || (s.has_bias && !l.bias.allFinite()))
      throw NumericError("layer " + std::to_string(i) + " has non-finite parameters");
  }
  if (layers_.back().spec.activation != Activation::kLinear)
    throw ShapeError("last layer must be linear");
}

std::size_t Network::num_trainable_weights() const {
  std::size_t n = 0;
  for (const auto& l : layers_)
    if (l.spec.trainable) n += static_cast<std::size_t>(l.weights.size());
  return n;
}

bool operator==(const Network& a, const Network& b) {
  if (!a.same_architecture(b)) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const auto& la = a.layers_[i];
    const auto& lb = b.layers_[i];
    if (la.weights != lb.weights || la.bias != lb.bias || la.latent != lb.latent) return false;
  }
  return true;
}

void Dataset::validate() const {
  if (labels.empty()) throw ShapeError("dataset is empty");
  if (inputs.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeError("dataset has " + std::to_string(inputs.rows()) + " inputs but " +
                     std::to_string(labels.size()) + " labels");
  for (int y : labels) {
    bool ok = signed_labels ? (y == 1 || y == -1) : (y >= 0 && y < num_classes);
    if (!ok) throw LabelError("invalid label " + std::to_string(y));
  }
}

Network make_mlp(std::span<const int> widths, bool binary, bool bias) {
  if (widths.size() < 2) throw ShapeError("an MLP needs at least input and output widths");
  std::vector<Layer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Layer l;
    l.spec.fan_in = widths[i];
    l.spec.fan_out = widths[i + 1];
    bool last = i + 2 == widths.size();
    l.spec.activation = last ? Activation::kLinear : (binary ? Activation::kSign : Activation::kRelu);
    l.spec.has_bias = bias;
    l.spec.weights_binary = binary;
    if (l.spec.fan_in <= 0 || l.spec.fan_out <= 0) throw ShapeError("non-positive layer width");
    l.weights = Matrix::Zero(l.spec.fan_out, l.spec.fan_in);
    if (bias) l.bias = Vector::Zero(l.spec.fan_out);
    if (binary) {
      l.latent = Matrix::Constant(l.spec.fan_out, l.spec.fan_in, 1.0f);
      l.weights.setOnes();
    }
    layers.push_back(std::move(l));
  }
  return Network(std::move(layers));
}

Network make_committee(int inputs, int hidden) {
  const int widths[] = {inputs, hidden, 1};
  Network net = make_mlp(widths, /*binary=*/true, /*bias=*/false);
  net.mutable_layer(1).spec.trainable = false;
  return net;
}

void initialize(Network& net, Rng& rng) {
  for (auto& l : net.mutable_layers()) {
    if (!l.spec.trainable) continue;
    if (l.spec.weights_binary) {
      std::uniform_real_distribution<float> u(-1.0f, 1.0f);
      for (Eigen::Index k = 0; k < l.latent.size(); ++k) l.latent.data()[k] = u(rng);
      l.weights = l.latent.unaryExpr([](float v) { return sign_of(v); });
    } else {
      float a = std::sqrt(6.0f / static_cast<float>(l.spec.fan_in));
      std::uniform_real_distribution<float> u(-a, a);
      for (Eigen::Index k = 0; k < l.weights.size(); ++k) l.weights.data()[k] = u(rng);
    }
    if (l.spec.has_bias) l.bias.setZero();
  }
}

Matrix forward(const Network& net, const Matrix& inputs) {
  if (inputs.cols() != net.input_dim())
    throw ShapeError("input width " + std::to_string(inputs.cols()) + " != network fan_in " +
                     std::to_string(net.input_dim()));
  Matrix a = inputs;
  for (const auto& l : net.layers()) {
    Matrix z = a * l.weights.transpose();
    if (l.spec.has_bias) z.rowwise() += l.bias.transpose();
    apply_activation(z, l.spec.activation);
    a = std::move(z);
  }
  return a;
}

std::vector<int> classify(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  if (logits.cols() == 1) {
    for (Eigen::Index r = 0; r < logits.rows(); ++r) out[r] = logits(r, 0) >= 0.0f ? 1 : -1;
    return out;
  }
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

std::size_t count_errors(const Network& net, const Dataset& data) {
  if (data.input_dim() != net.input_dim())
    throw ShapeError("dataset width " + std::to_string(data.input_dim()) + " != network fan_in " +
                     std::to_string(net.input_dim()));
  if ((net.output_dim() == 1) != data.signed_labels)
    throw ShapeError("single-output networks require +-1 labels and vice versa");
  std::size_t errors = 0;
  const Eigen::Index total = data.inputs.rows();
  for (Eigen::Index start = 0; start < total; start += kEvalChunk) {
    Eigen::Index n = std::min(kEvalChunk, total - start);
    Matrix logits = forward(net, data.inputs.middleRows(start, n));
    auto pred = classify(logits);
    for (Eigen::Index r = 0; r < n; ++r)
      if (pred[r] != data.labels[start + r]) ++errors;
  }
  return errors;
}

double train_error(const Network& net, const Dataset& data) {
  if (data.size() == 0) throw ShapeError("dataset is empty");
  return static_cast<double>(count_errors(net, data)) / static_cast<double>(data.size());
}

void binarize_in_place(Network& net) {
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    auto& l = net.mutable_layer(i);
    if (!l.spec.weights_binary) continue;
    if (l.latent.size() != l.weights.size())
      throw MissingLatentError("layer " + std::to_string(i) + " has no latent weights to binarize");
    l.weights = l.latent.unaryExpr([](float v) { return sign_of(v); });
  }
}

Network binarize(const Network& net) {
  if (!net.is_binary()) throw MissingLatentError("network has no binary layers with latent weights");
  Network out = net;
  binarize_in_place(out);
  return out;
}

}  // namespace symnet
