#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace symnet {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXf;
using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorD = Eigen::VectorXd;

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent child seeds from a master
// seed so that every stream depends only on (seed, tag) and never on call order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag_a, std::uint64_t tag_b) {
  return mix_seed(mix_seed(seed, tag_a), tag_b);
}

// sign with the sign(0) = +1 convention used throughout.
template <typename T>
inline T sign_of(T x) {
  return x >= T(0) ? T(1) : T(-1);
}

}  // namespace symnet
