#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "symnet/geometry.hpp"
#include "symnet/training.hpp"

namespace symnet {

// ---- local energy ---------------------------------------------------------

struct LocalEnergyProfile {
  bool binary = false;             // flips (epsilon) instead of multiplicative noise (sigma)
  std::vector<double> amplitudes;
  std::vector<double> mean;        // mean increase of the train error
  std::vector<double> stddev;      // sample standard deviation over the draws
  int samples = 0;
  double base_error = 0.0;
};

std::vector<double> default_amplitudes(bool binary);
int default_energy_samples(bool binary);

// Continuous nets: w -> w + sigma z (.) w on every trainable parameter, z
// standard Gaussian. Binary nets: the signs of floor(eps n) distinct trainable
// weights are flipped. Draw s at amplitude index a uses the stream
// mix_seed(seed, a, s).
LocalEnergyProfile local_energy(const Network& net, const Dataset& data,
                                const std::vector<double>& amplitudes, int samples,
                                std::uint64_t seed);

// ---- path scans -----------------------------------------------------------

enum class PathMode { kLinear, kLinearAligned, kGeodesicAligned, kHamming };

std::string_view to_string(PathMode m);
PathMode path_mode_from_string(std::string_view s);  // accepts '-' or '_' separators

struct PathOptions {
  int points = 25;
  std::uint64_t seed = 0;
  // Hamming mode only: align B onto A before drawing the random path.
  bool align_hamming = true;
  bool record_loss = false;
  LossKind loss = LossKind::kCrossEntropy;
};

struct PathScan {
  PathMode mode = PathMode::kLinear;
  std::vector<double> x;
  std::vector<double> train_error;
  std::vector<double> loss;  // empty unless requested
};

PathScan path_scan(const Network& a, const Network& b, const Dataset& data, PathMode mode,
                   const PathOptions& opts);

double barrier(const PathScan& scan);

// ---- optimized single-bend paths -----------------------------------------

struct OptimizedPath {
  PathScan first;   // endpoint A -> optimized midpoint
  PathScan second;  // optimized midpoint -> endpoint B
  double barrier = 0.0;
  double midpoint_error = 0.0;
  Network midpoint;
  std::string midpoint_init;  // "geodesic" or "hamming"
};

// Canonicalizes the pair, trains the midpoint with `cfg` and scans both
// halves (geodesic for continuous nets, random Hamming for binary ones).
// Throws NonConvergenceError if the trained midpoint keeps >= 1% train error.
OptimizedPath optimized_path(const Network& a, const Network& b, const Dataset& data,
                             const TrainConfig& cfg, const PathOptions& opts);

// ---- plane sections -------------------------------------------------------

struct PlaneOptions {
  int resolution = 21;
  double margin = 0.25;     // fraction of the anchor extent added on every side
  bool normalized = false;  // anchors are normalized networks; grid points are re-projected
  bool reproject = true;    // only meaningful with `normalized`
  bool binarized = false;   // plane through latent weights; grid points are binarized
};

struct PlaneGrid {
  VectorD origin;  // anchor 1
  VectorD u;
  VectorD v;
  std::vector<double> us;  // grid coordinates along u
  std::vector<double> vs;  // grid coordinates along v
  MatrixD errors;          // errors(i, j) at (us[i], vs[j])
  std::vector<std::pair<double, double>> anchors;  // in-plane coordinates of the three anchors
  bool normalized = false;
  bool reprojected = false;
  bool binarized = false;
};

PlaneGrid plane_scan(const Network& w1, const Network& w2, const Network& w3, const Dataset& data,
                     const PlaneOptions& opts);

// Network materialized at in-plane coordinates (a, b), exactly as plane_scan does.
Network plane_point(const Network& tmpl, const PlaneGrid& grid, double a, double b);

// ---- distances ------------------------------------------------------------

struct SolutionGroup {
  std::string label;
  std::vector<Network> nets;
};

struct DistanceRow {
  std::string group_a;
  std::string group_b;
  double raw_mean = 0.0;
  double raw_std = 0.0;
  double aligned_mean = 0.0;
  double aligned_std = 0.0;
  std::size_t pairs = 0;
};

// Every unordered group pair (including a group with itself). Continuous:
// geodesic distance between normalized networks, before and after alignment.
// Binary: Hamming distance before and after alignment.
std::vector<DistanceRow> distance_study(const std::vector<SolutionGroup>& groups);

// Mean and sample standard deviation (0 for fewer than two values).
std::pair<double, double> mean_std(const std::vector<double>& values);

}  // namespace symnet
