#include "symnet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "symnet/errors.hpp"

namespace symnet {

namespace {

constexpr double kSameAngle = 1e-7;
constexpr double kAntipodalMargin = 1e-6;
constexpr double kSmallFraction = 1e-9;
constexpr double kNormTolerance = 1e-5;

void require_same(const Network& a, const Network& b) {
  if (!a.same_architecture(b)) throw ArchitectureMismatchError("networks have different architectures");
}

void require_continuous(const Network& a) {
  if (a.is_binary()) throw PreconditionError("geodesic geometry applies to continuous networks");
}

void require_binary(const Network& a) {
  if (!a.is_binary()) throw PreconditionError("Hamming geometry applies to binary networks");
}

VectorD row_of(const Matrix& m, Eigen::Index r) { return m.row(r).transpose().cast<double>(); }

VectorD flat_of(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size()).cast<double>();
}

double output_radius(const Layer& l) { return std::sqrt(static_cast<double>(l.spec.fan_out)); }

template <typename F>
auto naming_unit(std::size_t layer, std::size_t unit, F&& f) {
  try {
    return f();
  } catch (const AntipodalError& e) {
    throw AntipodalError("layer " + std::to_string(layer) + " unit " + std::to_string(unit) + ": " +
                         e.what());
  } catch (const NormPreconditionError& e) {
    throw NormPreconditionError("layer " + std::to_string(layer) + " unit " + std::to_string(unit) +
                                ": " + e.what());
  }
}

float flipped_latent(float v) { return v == 0.0f ? -std::numeric_limits<float>::min() : -v; }

}  // namespace

double sphere_angle(const VectorD& u, const VectorD& v, double n) {
  if (u.size() != v.size()) throw ShapeError("sphere_angle: vectors of different length");
  const double tol = kNormTolerance * std::max(1.0, n);
  if (std::abs(u.norm() - n) > tol || std::abs(v.norm() - n) > tol)
    throw NormPreconditionError("vector does not lie on the sphere of radius " + std::to_string(n));
  if (u == v) return 0.0;
  // Dividing by the actual norms (equal to n within tol) keeps exact
  // antipodes at cos = -1 despite float storage of the endpoints.
  const double c = std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0);
  return std::acos(c);
}

VectorD sphere_geodesic_point(const VectorD& u, const VectorD& v, double n, double x) {
  const double phi = sphere_angle(u, v, n);
  if (x >= 1.0) return v;
  if (phi < kSameAngle || x < kSmallFraction) return u;
  if (phi > std::numbers::pi - kAntipodalMargin)
    throw AntipodalError("antipodal endpoints, geodesic is not unique");
  const double t = 1.0 / (1.0 - std::cos(phi) + std::sin(phi) / std::tan(phi * x));
  VectorD w = u + t * (v - u);
  return n * w / w.norm();
}

Network network_geodesic(const Network& a, const Network& b, double x) {
  require_same(a, b);
  require_continuous(a);
  Network out = a;
  const std::size_t last = a.num_layers() - 1;
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    const Layer& la = a.layer(l);
    const Layer& lb = b.layer(l);
    Layer& lo = out.mutable_layer(l);
    if (!la.spec.trainable) continue;
    if (l < last) {
      for (Eigen::Index k = 0; k < la.weights.rows(); ++k) {
        VectorD p = naming_unit(l, static_cast<std::size_t>(k), [&] {
          return sphere_geodesic_point(row_of(la.weights, k), row_of(lb.weights, k), 1.0, x);
        });
        lo.weights.row(k) = p.transpose().cast<float>();
      }
    } else {
      VectorD p = naming_unit(l, 0, [&] {
        return sphere_geodesic_point(flat_of(la.weights), flat_of(lb.weights), output_radius(la), x);
      });
      Eigen::Map<Vector>(lo.weights.data(), lo.weights.size()) = p.cast<float>();
    }
    if (la.spec.has_bias) {
      if (x >= 1.0)
        lo.bias = lb.bias;
      else if (x > 0.0)
        lo.bias = ((1.0 - x) * la.bias.cast<double>() + x * lb.bias.cast<double>()).cast<float>();
    }
  }
  return out;
}

double geodesic_distance(const Network& a, const Network& b) {
  require_same(a, b);
  require_continuous(a);
  const std::size_t last = a.num_layers() - 1;
  double total = 0.0;
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    const Layer& la = a.layer(l);
    const Layer& lb = b.layer(l);
    if (l < last) {
      for (Eigen::Index k = 0; k < la.weights.rows(); ++k) {
        const double phi = naming_unit(l, static_cast<std::size_t>(k), [&] {
          return sphere_angle(row_of(la.weights, k), row_of(lb.weights, k), 1.0);
        });
        total += phi * phi;
      }
    } else {
      const double n = output_radius(la);
      const double phi =
          naming_unit(l, 0, [&] { return sphere_angle(flat_of(la.weights), flat_of(lb.weights), n); });
      total += n * phi * n * phi;
    }
  }
  return std::sqrt(total);
}

Network linear_interpolate(const Network& a, const Network& b, double x) {
  require_same(a, b);
  Network out = a;
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    const Layer& la = a.layer(l);
    const Layer& lb = b.layer(l);
    Layer& lo = out.mutable_layer(l);
    if (!la.spec.trainable) continue;
    auto mix = [x](const auto& p, const auto& q) {
      return ((1.0 - x) * p.template cast<double>() + x * q.template cast<double>()).template cast<float>();
    };
    if (la.spec.weights_binary) {
      lo.latent = mix(la.latent, lb.latent);
      lo.weights = lo.latent.unaryExpr([](float v) { return sign_of(v); });
    } else {
      lo.weights = mix(la.weights, lb.weights);
    }
    if (la.spec.has_bias) lo.bias = mix(la.bias, lb.bias);
  }
  return out;
}

std::size_t hamming_distance(const Network& a, const Network& b) {
  require_same(a, b);
  require_binary(a);
  std::size_t d = 0;
  for (std::size_t l = 0; l < a.num_layers(); ++l)
    d += static_cast<std::size_t>((a.layer(l).weights.array() != b.layer(l).weights.array()).count());
  return d;
}

HammingPath random_hamming_path(const Network& a, const Network& b, std::uint64_t seed) {
  require_same(a, b);
  require_binary(a);
  HammingPath path;
  path.seed = seed;
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    const Matrix& wa = a.layer(l).weights;
    const Matrix& wb = b.layer(l).weights;
    for (Eigen::Index r = 0; r < wa.rows(); ++r)
      for (Eigen::Index c = 0; c < wa.cols(); ++c)
        if (wa(r, c) != wb(r, c))
          path.flips.push_back({static_cast<int>(l), static_cast<int>(r), static_cast<int>(c)});
  }
  Rng rng(seed);
  std::shuffle(path.flips.begin(), path.flips.end(), rng);
  return path;
}

Network hamming_path_state(const Network& a, const Network& b, const HammingPath& path,
                           std::size_t k) {
  require_same(a, b);
  if (k > path.length()) throw PreconditionError("Hamming path step beyond the path length");
  Network out = a;
  for (std::size_t i = 0; i < k; ++i) {
    const WeightIndex& f = path.flips[i];
    Layer& lo = out.mutable_layer(static_cast<std::size_t>(f.layer));
    const Layer& lb = b.layer(static_cast<std::size_t>(f.layer));
    lo.weights(f.row, f.col) = lb.weights(f.row, f.col);
    if (lo.latent.size() != 0) {
      // Keep the latent consistent with the weight when B carries no latent.
      const bool usable = lb.latent.size() != 0 && sign_of(lb.latent(f.row, f.col)) == lo.weights(f.row, f.col);
      lo.latent(f.row, f.col) = usable ? lb.latent(f.row, f.col) : flipped_latent(lo.latent(f.row, f.col));
    }
  }
  return out;
}

Network midpoint(const Network& a, const Network& b, std::uint64_t seed) {
  if (!a.is_binary()) return network_geodesic(a, b, 0.5);
  HammingPath path = random_hamming_path(a, b, seed);
  return hamming_path_state(a, b, path, (path.length() + 1) / 2);
}

VectorD flatten_parameters(const Network& net, bool latent) {
  std::size_t total = 0;
  for (const Layer& l : net.layers())
    if (l.spec.trainable) total += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  VectorD out(static_cast<Eigen::Index>(total));
  Eigen::Index pos = 0;
  for (const Layer& l : net.layers()) {
    if (!l.spec.trainable) continue;
    const Matrix& w = (latent && l.spec.weights_binary) ? l.latent : l.weights;
    if (latent && l.spec.weights_binary && l.latent.size() == 0) throw MissingLatentError("network has no latent weights");
    out.segment(pos, w.size()) = flat_of(w);
    pos += w.size();
    if (l.bias.size() != 0) {
      out.segment(pos, l.bias.size()) = l.bias.cast<double>();
      pos += l.bias.size();
    }
  }
  return out;
}

Network unflatten_parameters(const Network& tmpl, const VectorD& params, bool latent) {
  Network out = tmpl;
  Eigen::Index pos = 0;
  for (Layer& l : out.mutable_layers()) {
    if (!l.spec.trainable) continue;
    const bool into_latent = latent && l.spec.weights_binary;
    Matrix& w = into_latent ? l.latent : l.weights;
    if (into_latent && w.size() == 0) w.resize(l.weights.rows(), l.weights.cols());
    if (pos + w.size() + l.bias.size() > params.size())
      throw ShapeError("parameter vector shorter than the network");
    Eigen::Map<Vector>(w.data(), w.size()) = params.segment(pos, w.size()).cast<float>();
    pos += w.size();
    if (into_latent) l.weights = l.latent.unaryExpr([](float v) { return sign_of(v); });
    if (l.bias.size() != 0) {
      l.bias = params.segment(pos, l.bias.size()).cast<float>();
      pos += l.bias.size();
    }
  }
  if (pos != params.size()) throw ShapeError("parameter vector longer than the network");
  return out;
}

}  // namespace symnet
