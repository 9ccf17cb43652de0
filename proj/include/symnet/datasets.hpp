#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "symnet/network.hpp"

namespace symnet {

// Hidden Manifold Model: a +-1 teacher in D dimensions labels Gaussian latent
// patterns xi; the student sees x = sign(F xi) in N dimensions. Train and test
// sets share F and the teacher.
struct HmmConfig {
  int D = 501;
  int N = 1001;
  int P = 1503;
  int P_test = 5000;
  std::uint64_t seed = 0;

  void validate() const;
  double alpha_T() const { return static_cast<double>(P) / D; }
  double alpha_D() const { return static_cast<double>(D) / N; }
};

struct HmmData {
  Dataset train;
  Dataset test;
  Vector teacher;     // D
  Matrix projection;  // F, N x D
};

HmmData hmm_generate(const HmmConfig& cfg);

// Raw IDX tensor (unsigned-byte payloads only).
struct IdxTensor {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  std::size_t element_count() const;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// Parses an IDX byte buffer; gzip input is inflated first (detected by the
// 0x1f 0x8b prefix).
IdxTensor parse_idx(std::span<const std::uint8_t> bytes);
IdxTensor read_idx(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_idx(const IdxTensor& t);
void write_idx(const std::filesystem::path& path, const IdxTensor& t);

// Whole-population affine map to zero mean, unit variance.
Matrix standardize(const Matrix& images);

std::vector<int> parity_labels(std::span<const int> digits);

Dataset randomize_labels(const Dataset& data, std::uint64_t seed);

// Zeros exactly floor(fraction * N) coordinates of every pattern, drawn
// without replacement independently per pattern.
Dataset zero_pixels(const Dataset& data, double fraction, std::uint64_t seed);

enum class MnistTask { kMulticlass, kParity };

// Loads `limit` (0 = all) images/labels from an MNIST-layout directory
// (train-images-idx3-ubyte[.gz], ...). Inputs are standardized.
Dataset load_mnist(const std::filesystem::path& dir, bool train_split, MnistTask task,
                   std::size_t limit = 0);

bool mnist_available(const std::filesystem::path& dir);

}  // namespace symnet
