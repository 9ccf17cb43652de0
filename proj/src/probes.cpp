#include "symnet/probes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "symnet/errors.hpp"
#include "symnet/symmetry.hpp"

namespace symnet {

namespace {

constexpr double kSolutionThreshold = 0.01;

std::vector<double> fractions(int points) {
  if (points < 2) throw ConfigError("a path scan needs at least two points");
  std::vector<double> x(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) x[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  x.back() = 1.0;
  return x;
}

void perturb_multiplicative(Network& net, double sigma, Rng& rng) {
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  const auto s = static_cast<float>(sigma);
  for (Layer& l : net.mutable_layers()) {
    if (!l.spec.trainable) continue;
    for (Eigen::Index k = 0; k < l.weights.size(); ++k) {
      float& w = l.weights.data()[k];
      w += s * gauss(rng) * w;
    }
    for (Eigen::Index k = 0; k < l.bias.size(); ++k) l.bias[k] += s * gauss(rng) * l.bias[k];
  }
}

// Addresses of the trainable binary weights, in layer/row-major order.
std::vector<float*> binary_weight_slots(Network& net) {
  std::vector<float*> slots;
  for (Layer& l : net.mutable_layers()) {
    if (!l.spec.trainable || !l.spec.weights_binary) continue;
    for (Eigen::Index k = 0; k < l.weights.size(); ++k) slots.push_back(l.weights.data() + k);
  }
  return slots;
}

void record_point(PathScan& scan, const Network& net, const Dataset& data, const PathOptions& opts) {
  scan.train_error.push_back(train_error(net, data));
  if (opts.record_loss) scan.loss.push_back(mean_loss(net, data, opts.loss));
}

void require_solution(const Network& net, const Dataset& data, const char* which) {
  const double e = train_error(net, data);
  if (e >= kSolutionThreshold)
    throw PreconditionError(std::string(which) + " endpoint is not a solution (train error " +
                            std::to_string(e) + ")");
}

}  // namespace

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

std::vector<double> default_amplitudes(bool binary) {
  std::vector<double> a;
  for (int i = 0; i <= 10; ++i) a.push_back(binary ? 0.005 * i : 0.05 * i);
  return a;
}

int default_energy_samples(bool binary) { return binary ? 10 : 100; }

LocalEnergyProfile local_energy(const Network& net, const Dataset& data,
                                const std::vector<double>& amplitudes, int samples,
                                std::uint64_t seed) {
  if (samples < 1) throw ConfigError("local energy needs at least one sample");
  LocalEnergyProfile prof;
  prof.binary = net.is_binary();
  prof.amplitudes = amplitudes;
  prof.samples = samples;
  prof.base_error = train_error(net, data);

  Network work = net;
  std::vector<float*> slots = prof.binary ? binary_weight_slots(work) : std::vector<float*>{};
  std::vector<std::size_t> index(slots.size());
  std::iota(index.begin(), index.end(), std::size_t{0});
  std::vector<std::size_t> chosen;

  for (std::size_t a = 0; a < amplitudes.size(); ++a) {
    const double amp = amplitudes[a];
    if (amp < 0.0 || (prof.binary && amp > 1.0)) throw ConfigError("perturbation amplitude out of range");
    std::vector<double> delta;
    delta.reserve(static_cast<std::size_t>(samples));
    for (int s = 0; s < samples; ++s) {
      Rng rng(mix_seed(seed, a, static_cast<std::uint64_t>(s)));
      if (prof.binary) {
        const auto k = static_cast<std::size_t>(std::floor(amp * static_cast<double>(slots.size()) + 1e-9));
        chosen.clear();
        std::sample(index.begin(), index.end(), std::back_inserter(chosen), k, rng);
        for (std::size_t i : chosen) *slots[i] = -*slots[i];
        delta.push_back(train_error(work, data) - prof.base_error);
        for (std::size_t i : chosen) *slots[i] = -*slots[i];
      } else {
        work = net;
        perturb_multiplicative(work, amp, rng);
        delta.push_back(train_error(work, data) - prof.base_error);
      }
    }
    auto [m, sd] = mean_std(delta);
    prof.mean.push_back(m);
    prof.stddev.push_back(sd);
  }
  return prof;
}

std::string_view to_string(PathMode m) {
  switch (m) {
    case PathMode::kLinear:
      return "linear";
    case PathMode::kLinearAligned:
      return "linear_aligned";
    case PathMode::kGeodesicAligned:
      return "geodesic_aligned";
    case PathMode::kHamming:
      return "hamming";
  }
  return "linear";
}

PathMode path_mode_from_string(std::string_view s) {
  std::string t(s);
  std::replace(t.begin(), t.end(), '-', '_');
  if (t == "linear") return PathMode::kLinear;
  if (t == "linear_aligned") return PathMode::kLinearAligned;
  if (t == "geodesic_aligned") return PathMode::kGeodesicAligned;
  if (t == "hamming") return PathMode::kHamming;
  throw ConfigError("unknown path mode '" + std::string(s) + "'");
}

PathScan path_scan(const Network& a, const Network& b, const Dataset& data, PathMode mode,
                   const PathOptions& opts) {
  if (!a.same_architecture(b)) throw ArchitectureMismatchError("path endpoints differ in architecture");
  PathScan scan;
  scan.mode = mode;
  scan.x = fractions(opts.points);
  switch (mode) {
    case PathMode::kLinear:
    case PathMode::kLinearAligned: {
      const Network bb = mode == PathMode::kLinear ? b : align(a, b, false).net;
      for (double x : scan.x) record_point(scan, linear_interpolate(a, bb, x), data, opts);
      break;
    }
    case PathMode::kGeodesicAligned: {
      if (a.is_binary()) throw PreconditionError("geodesic paths need continuous networks");
      const Network an = normalize(a);
      const Network bn = align(an, normalize(b)).net;
      for (double x : scan.x) record_point(scan, network_geodesic(an, bn, x), data, opts);
      break;
    }
    case PathMode::kHamming: {
      if (!a.is_binary()) throw PreconditionError("Hamming paths need binary networks");
      const Network bb = opts.align_hamming ? align(a, b).net : b;
      const HammingPath path = random_hamming_path(a, bb, opts.seed);
      const double d = static_cast<double>(path.length());
      for (double x : scan.x) {
        const auto k = static_cast<std::size_t>(std::llround(x * d));
        record_point(scan, hamming_path_state(a, bb, path, k), data, opts);
      }
      break;
    }
  }
  return scan;
}

double barrier(const PathScan& scan) {
  if (scan.train_error.empty()) throw PreconditionError("barrier of an empty scan");
  return *std::max_element(scan.train_error.begin(), scan.train_error.end());
}

OptimizedPath optimized_path(const Network& a, const Network& b, const Dataset& data,
                             const TrainConfig& cfg, const PathOptions& opts) {
  if (!a.same_architecture(b)) throw ArchitectureMismatchError("path endpoints differ in architecture");
  require_solution(a, data, "first");
  require_solution(b, data, "second");
  OptimizedPath out;
  Network start, end, init;
  PathMode mode;
  PathOptions half = opts;
  if (a.is_binary()) {
    start = a;
    end = align(a, b).net;
    init = midpoint(start, end, mix_seed(opts.seed, 0));
    mode = PathMode::kHamming;
    half.align_hamming = true;
    out.midpoint_init = "hamming";
  } else {
    start = normalize(a);
    end = align(start, normalize(b)).net;
    init = network_geodesic(start, end, 0.5);
    mode = PathMode::kGeodesicAligned;
    out.midpoint_init = "geodesic";
  }
  TrainResult trained = sgd_train(std::move(init), data, cfg);
  out.midpoint_error = trained.final_train_error;
  if (out.midpoint_error >= kSolutionThreshold)
    throw NonConvergenceError(out.midpoint_error, "optimized midpoint did not reach a solution");
  out.midpoint = std::move(trained.net);
  half.seed = mix_seed(opts.seed, 1);
  out.first = path_scan(start, out.midpoint, data, mode, half);
  half.seed = mix_seed(opts.seed, 2);
  out.second = path_scan(out.midpoint, end, data, mode, half);
  out.barrier = std::max(barrier(out.first), barrier(out.second));
  return out;
}

Network plane_point(const Network& tmpl, const PlaneGrid& grid, double a, double b) {
  VectorD p = grid.origin + a * grid.u + b * grid.v;
  Network net = unflatten_parameters(tmpl, p, grid.binarized);
  if (grid.reprojected) net = normalize(net);
  return net;
}

PlaneGrid plane_scan(const Network& w1, const Network& w2, const Network& w3, const Dataset& data,
                     const PlaneOptions& opts) {
  if (!w1.same_architecture(w2) || !w1.same_architecture(w3))
    throw ArchitectureMismatchError("plane anchors differ in architecture");
  if (opts.resolution < 2) throw ConfigError("plane resolution must be at least 2");
  if (opts.margin < 0.0) throw ConfigError("plane margin must be non-negative");
  if (opts.binarized && !w1.is_binary()) throw PreconditionError("binarized planes need binary networks");
  if (opts.normalized && opts.binarized) throw PreconditionError("binary networks have no normalized form");
  if (opts.normalized && !(is_normalized(w1) && is_normalized(w2) && is_normalized(w3)))
    throw PreconditionError("normalized planes need normalized anchors");

  PlaneGrid g;
  g.normalized = opts.normalized;
  g.reprojected = opts.normalized && opts.reproject;
  g.binarized = opts.binarized;
  g.origin = flatten_parameters(w1, opts.binarized);
  const VectorD d2 = flatten_parameters(w2, opts.binarized) - g.origin;
  const VectorD d3 = flatten_parameters(w3, opts.binarized) - g.origin;
  const double n2 = d2.norm();
  if (!(n2 > 1e-12 * (1.0 + g.origin.norm()))) throw DegeneratePlaneError("first two anchors coincide");
  g.u = d2 / n2;
  VectorD r = d3 - g.u.dot(d3) * g.u;
  r -= g.u.dot(r) * g.u;
  const double n3 = r.norm();
  // Anchors are float-stored, so exact collinearity leaves a float-sized residual.
  if (!(n3 > 1e-5 * std::max(d3.norm(), 1e-300))) throw DegeneratePlaneError("anchors are collinear");
  g.v = r / n3;

  g.anchors = {{0.0, 0.0}, {n2, 0.0}, {g.u.dot(d3), g.v.dot(d3)}};
  auto axis = [&](auto coord) {
    double lo = 0.0, hi = 0.0;
    for (const auto& p : g.anchors) {
      lo = std::min(lo, coord(p));
      hi = std::max(hi, coord(p));
    }
    const double pad = opts.margin * (hi - lo);
    std::vector<double> ax(static_cast<std::size_t>(opts.resolution));
    for (int i = 0; i < opts.resolution; ++i)
      ax[i] = (lo - pad) + (hi - lo + 2.0 * pad) * static_cast<double>(i) / (opts.resolution - 1);
    return ax;
  };
  g.us = axis([](const auto& p) { return p.first; });
  g.vs = axis([](const auto& p) { return p.second; });

  g.errors.resize(opts.resolution, opts.resolution);
  for (int i = 0; i < opts.resolution; ++i)
    for (int j = 0; j < opts.resolution; ++j)
      g.errors(i, j) = train_error(plane_point(w1, g, g.us[i], g.vs[j]), data);
  return g;
}

std::vector<DistanceRow> distance_study(const std::vector<SolutionGroup>& groups) {
  if (groups.empty()) throw ConfigError("distance study needs at least one group");
  const bool binary = groups.front().nets.at(0).is_binary();
  std::vector<std::vector<Network>> canon;
  for (const auto& g : groups) {
    if (g.nets.size() < 2) throw ConfigError("group '" + g.label + "' needs at least two solutions");
    std::vector<Network> c;
    for (const auto& n : g.nets) {
      if (n.is_binary() != binary) throw ConfigError("distance study mixes binary and continuous networks");
      c.push_back(binary ? n : normalize(n));
    }
    canon.push_back(std::move(c));
  }
  auto dist = [binary](const Network& x, const Network& y) {
    return binary ? static_cast<double>(hamming_distance(x, y)) : geodesic_distance(x, y);
  };
  std::vector<DistanceRow> rows;
  for (std::size_t ga = 0; ga < groups.size(); ++ga) {
    for (std::size_t gb = ga; gb < groups.size(); ++gb) {
      std::vector<double> raw, aligned;
      for (std::size_t i = 0; i < canon[ga].size(); ++i) {
        for (std::size_t j = (ga == gb ? i + 1 : 0); j < canon[gb].size(); ++j) {
          const Network& x = canon[ga][i];
          const Network& y = canon[gb][j];
          raw.push_back(dist(x, y));
          aligned.push_back(dist(x, align(x, y).net));
        }
      }
      DistanceRow row;
      row.group_a = groups[ga].label;
      row.group_b = groups[gb].label;
      std::tie(row.raw_mean, row.raw_std) = mean_std(raw);
      std::tie(row.aligned_mean, row.aligned_std) = mean_std(aligned);
      row.pairs = raw.size();
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace symnet
