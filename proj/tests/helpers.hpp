#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "symnet/network.hpp"

namespace testing_helpers {

using namespace symnet;

inline Network random_mlp(std::vector<int> widths, std::uint64_t seed, bool binary = false,
                          bool bias = false) {
  Network net = make_mlp(widths, binary, bias);
  Rng rng(seed);
  initialize(net, rng);
  if (bias) {
    std::normal_distribution<float> g(0.0f, 0.1f);
    for (auto& l : net.mutable_layers())
      for (Eigen::Index k = 0; k < l.bias.size(); ++k) l.bias[k] = g(rng);
  }
  return net;
}

inline Matrix gaussian_inputs(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  Matrix x(rows, cols);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = g(rng);
  return x;
}

inline Matrix sign_inputs(int rows, int cols, std::uint64_t seed) {
  return gaussian_inputs(rows, cols, seed).unaryExpr([](float v) { return sign_of(v); });
}

// Labels produced by the network itself.
inline Dataset self_labelled(const Network& net, Matrix inputs) {
  Dataset d;
  d.inputs = std::move(inputs);
  d.labels = classify(forward(net, d.inputs));
  d.signed_labels = net.output_dim() == 1;
  d.num_classes = d.signed_labels ? 2 : net.output_dim();
  return d;
}

// Random permutation of every hidden layer.
inline std::vector<std::vector<int>> random_perms(const Network& net, Rng& rng) {
  std::vector<std::vector<int>> out;
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    std::vector<int> p(static_cast<std::size_t>(net.layer(l).spec.fan_out));
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = static_cast<int>(k);
    std::shuffle(p.begin(), p.end(), rng);
    out.push_back(std::move(p));
  }
  return out;
}

// Hidden unit k of the result is signs[l][k] times unit perm[l][k] of `net`,
// written with explicit loops. Empty `signs` means all +1.
inline Network shuffle_units(const Network& net, const std::vector<std::vector<int>>& perm,
                             const std::vector<std::vector<int>>& signs = {}) {
  Network out = net;
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    const Network src_net = out;
    const Layer& in = src_net.layer(l);
    const Layer& next_in = src_net.layer(l + 1);
    Layer& o = out.mutable_layer(l);
    Layer& next = out.mutable_layer(l + 1);
    for (int k = 0; k < in.spec.fan_out; ++k) {
      const int src = perm[l][static_cast<std::size_t>(k)];
      const float s = signs.empty() ? 1.0f : static_cast<float>(signs[l][static_cast<std::size_t>(k)]);
      for (int j = 0; j < in.spec.fan_in; ++j) {
        o.weights(k, j) = s * in.weights(src, j);
        if (in.spec.weights_binary) o.latent(k, j) = s * in.latent(src, j);
      }
      if (in.spec.has_bias) o.bias[k] = s * in.bias[src];
      for (int r = 0; r < next_in.spec.fan_out; ++r) {
        next.weights(r, k) = s * next_in.weights(r, src);
        if (next_in.spec.weights_binary) next.latent(r, k) = s * next_in.latent(r, src);
      }
    }
  }
  return out;
}

inline std::vector<std::vector<int>> random_signs(const Network& net, Rng& rng) {
  std::bernoulli_distribution b(0.5);
  std::vector<std::vector<int>> out;
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    std::vector<int> s(static_cast<std::size_t>(net.layer(l).spec.fan_out));
    for (int& v : s) v = b(rng) ? 1 : -1;
    out.push_back(std::move(s));
  }
  return out;
}

inline double max_abs_diff(const Network& a, const Network& b) {
  double m = 0.0;
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    m = std::max(m, static_cast<double>((a.layer(l).weights - b.layer(l).weights).cwiseAbs().maxCoeff()));
    if (a.layer(l).spec.has_bias)
      m = std::max(m, static_cast<double>((a.layer(l).bias - b.layer(l).bias).cwiseAbs().maxCoeff()));
  }
  return m;
}

}  // namespace testing_helpers
