#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "symnet/network.hpp"

namespace symnet {

// Angle between two vectors lying on the sphere of radius n. Throws
// NormPreconditionError when either norm deviates from n by more than 1e-5
// (relative to max(1, n)).
double sphere_angle(const VectorD& u, const VectorD& v, double n);

// Point at fraction x of the great-circle arc from u to v. x <= 0 returns u and
// x >= 1 returns v exactly. Throws AntipodalError when the angle exceeds
// pi - 1e-6.
VectorD sphere_geodesic_point(const VectorD& u, const VectorD& v, double n, double x);

// Interpolates every hidden unit on its unit sphere and the whole last layer
// on the sphere of radius sqrt(H^L), all at the common fraction x. Biases are
// interpolated linearly; frozen layers are copied from `a`.
Network network_geodesic(const Network& a, const Network& b, double x);

// sqrt(sum over spheres of (n phi)^2).
double geodesic_distance(const Network& a, const Network& b);

// Straight line (1 - x) a + x b in parameter space. Binary networks
// interpolate their latent weights and are binarized afterwards.
Network linear_interpolate(const Network& a, const Network& b, double x);

std::size_t hamming_distance(const Network& a, const Network& b);

struct WeightIndex {
  int layer = 0;
  int row = 0;
  int col = 0;

  friend bool operator==(const WeightIndex&, const WeightIndex&) = default;
};

// Random order in which the weights differing between two binary networks
// are switched from their value in A to their value in B.
struct HammingPath {
  std::vector<WeightIndex> flips;
  std::uint64_t seed = 0;

  std::size_t length() const { return flips.size(); }
};

HammingPath random_hamming_path(const Network& a, const Network& b, std::uint64_t seed);

// State after the first k flips: each switched weight takes B's sign and B's
// latent value.
Network hamming_path_state(const Network& a, const Network& b, const HammingPath& path,
                           std::size_t k);

// Continuous: network_geodesic(a, b, 0.5). Binary: A with a uniformly random
// ceil(d/2) of the d differing weights switched to B.
Network midpoint(const Network& a, const Network& b, std::uint64_t seed);

// Trainable parameters (weights, or latent weights when `latent` is set,
// followed by biases) flattened layer by layer, rows contiguous.
VectorD flatten_parameters(const Network& net, bool latent = false);

// Inverse of flatten_parameters on a copy of `tmpl`. With `latent` the values
// are written to the latent weights and the network is binarized.
Network unflatten_parameters(const Network& tmpl, const VectorD& params, bool latent = false);

}  // namespace symnet
