#include "symnet/symmetry.hpp"

#include <cmath>
#include <limits>

#include "symnet/assignment.hpp"
#include "symnet/errors.hpp"

namespace symnet {

namespace {

double row_norm(const Matrix& m, Eigen::Index r) { return m.row(r).cast<double>().norm(); }

// Flips a latent weight together with its binary sign. A latent of exactly 0
// would keep sign +1 after negation, so it is replaced by the smallest normal
// float of the required sign.
float flip_latent(float v) {
  if (v == 0.0f) return -std::numeric_limits<float>::min();
  return -v;
}

void permute_unit_rows(Layer& l, const std::vector<int>& perm, const std::vector<int>& signs) {
  Matrix w(l.weights.rows(), l.weights.cols());
  Matrix lat(l.latent.rows(), l.latent.cols());
  Vector b(l.bias.size());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    const auto dst = static_cast<Eigen::Index>(k);
    const auto src = static_cast<Eigen::Index>(perm[k]);
    const bool flip = signs[k] < 0;
    w.row(dst) = flip ? Matrix(-l.weights.row(src)) : Matrix(l.weights.row(src));
    if (l.latent.size() != 0) {
      lat.row(dst) = l.latent.row(src);
      if (flip) lat.row(dst) = lat.row(dst).unaryExpr(&flip_latent);
    }
    if (l.bias.size() != 0) b[dst] = flip ? -l.bias[src] : l.bias[src];
  }
  l.weights = std::move(w);
  if (l.latent.size() != 0) l.latent = std::move(lat);
  if (l.bias.size() != 0) l.bias = std::move(b);
}

void permute_input_columns(Layer& l, const std::vector<int>& perm, const std::vector<int>& signs) {
  Matrix w(l.weights.rows(), l.weights.cols());
  Matrix lat(l.latent.rows(), l.latent.cols());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    const auto dst = static_cast<Eigen::Index>(k);
    const auto src = static_cast<Eigen::Index>(perm[k]);
    const bool flip = signs[k] < 0;
    w.col(dst) = flip ? Matrix(-l.weights.col(src)) : Matrix(l.weights.col(src));
    if (l.latent.size() != 0) {
      lat.col(dst) = l.latent.col(src);
      if (flip) lat.col(dst) = lat.col(dst).unaryExpr(&flip_latent);
    }
  }
  l.weights = std::move(w);
  if (l.latent.size() != 0) l.latent = std::move(lat);
}

void check_plan_shape(const Network& net, const PermutationPlan& plan) {
  const std::size_t hidden = net.num_layers() - 1;
  if (plan.perm.size() != hidden || plan.signs.size() != hidden)
    throw ShapeError("permutation plan does not cover every hidden layer");
  for (std::size_t l = 0; l < hidden; ++l) {
    const auto h = static_cast<std::size_t>(net.layer(l).spec.fan_out);
    if (plan.perm[l].size() != h || plan.signs[l].size() != h)
      throw ShapeError("permutation plan width mismatch at layer " + std::to_string(l));
    std::vector<char> seen(h, 0);
    for (int p : plan.perm[l]) {
      if (p < 0 || static_cast<std::size_t>(p) >= h || seen[p]) throw ShapeError("plan is not a bijection");
      seen[p] = 1;
    }
  }
}

void apply_layer(Network& net, std::size_t l, const std::vector<int>& perm, const std::vector<int>& signs) {
  permute_unit_rows(net.mutable_layer(l), perm, signs);
  permute_input_columns(net.mutable_layer(l + 1), perm, signs);
}

}  // namespace

PermutationPlan PermutationPlan::identity(const Network& net) {
  PermutationPlan p;
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    const int h = net.layer(l).spec.fan_out;
    std::vector<int> perm(static_cast<std::size_t>(h));
    for (int k = 0; k < h; ++k) perm[k] = k;
    p.perm.push_back(std::move(perm));
    p.signs.emplace_back(static_cast<std::size_t>(h), 1);
  }
  return p;
}

bool PermutationPlan::is_identity() const {
  for (std::size_t l = 0; l < perm.size(); ++l)
    for (std::size_t k = 0; k < perm[l].size(); ++k)
      if (perm[l][k] != static_cast<int>(k) || signs[l][k] != 1) return false;
  return true;
}

PermutationPlan PermutationPlan::inverse() const {
  PermutationPlan inv;
  for (std::size_t l = 0; l < perm.size(); ++l) {
    std::vector<int> p(perm[l].size()), s(perm[l].size());
    for (std::size_t k = 0; k < perm[l].size(); ++k) {
      p[perm[l][k]] = static_cast<int>(k);
      s[perm[l][k]] = signs[l][k];
    }
    inv.perm.push_back(std::move(p));
    inv.signs.push_back(std::move(s));
  }
  return inv;
}

UnitNorms unit_norms(const Network& net) {
  UnitNorms n;
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
    const auto& w = net.layer(l).weights;
    std::vector<double> v(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index k = 0; k < w.rows(); ++k) v[k] = row_norm(w, k);
    n.hidden.push_back(std::move(v));
  }
  n.output = net.layers().back().weights.cast<double>().norm();
  return n;
}

bool is_normalized(const Network& net, double tol) {
  if (net.is_binary()) return false;
  UnitNorms n = unit_norms(net);
  for (const auto& layer : n.hidden)
    for (double v : layer)
      if (std::abs(v - 1.0) > tol) return false;
  const double radius = std::sqrt(static_cast<double>(net.output_dim()));
  return std::abs(n.output - radius) <= tol * radius;
}

Network normalize(const Network& net) {
  if (net.is_binary()) throw PreconditionError("normalization applies to continuous networks only");
  for (std::size_t l = 0; l + 1 < net.num_layers(); ++l)
    if (net.layer(l).spec.activation != Activation::kRelu)
      throw PreconditionError("normalization requires relu hidden layers");
  Network out = net;
  for (std::size_t l = 0; l + 1 < out.num_layers(); ++l) {
    Layer& cur = out.mutable_layer(l);
    Layer& next = out.mutable_layer(l + 1);
    for (Eigen::Index k = 0; k < cur.weights.rows(); ++k) {
      const double norm = row_norm(cur.weights, k);
      if (!(norm > 0.0)) throw DegenerateUnitError(l, static_cast<std::size_t>(k));
      cur.weights.row(k) = (cur.weights.row(k).cast<double>() / norm).cast<float>();
      if (cur.spec.has_bias) cur.bias[k] = static_cast<float>(cur.bias[k] / norm);
      next.weights.col(k) = (next.weights.col(k).cast<double>() * norm).cast<float>();
    }
  }
  Layer& last = out.mutable_layer(out.num_layers() - 1);
  const double frob = last.weights.cast<double>().norm();
  if (!(frob > 0.0)) throw DegenerateUnitError(out.num_layers() - 1, 0);
  const double scale = std::sqrt(static_cast<double>(last.spec.fan_out)) / frob;
  last.weights = (last.weights.cast<double>() * scale).cast<float>();
  if (last.spec.has_bias) last.bias = (last.bias.cast<double>() * scale).cast<float>();
  return out;
}

Network apply_plan(const Network& net, const PermutationPlan& plan) {
  check_plan_shape(net, plan);
  Network out = net;
  for (std::size_t l = 0; l < plan.perm.size(); ++l) apply_layer(out, l, plan.perm[l], plan.signs[l]);
  return out;
}

AlignResult align(const Network& ref, const Network& other, bool require_normalized) {
  if (!ref.same_architecture(other)) throw ArchitectureMismatchError("cannot align networks of different architectures");
  const bool binary = ref.is_binary();
  if (!binary && require_normalized && (!is_normalized(ref) || !is_normalized(other)))
    throw PreconditionError("continuous networks must be normalized before alignment");

  AlignResult result{other, PermutationPlan::identity(other)};
  Network& b = result.net;
  for (std::size_t l = 0; l + 1 < ref.num_layers(); ++l) {
    const Matrix& wa = ref.layer(l).weights;
    const Matrix& wb = b.layer(l).weights;
    const Eigen::Index h = wa.rows();
    // Rows are compared through their cosine; for normalized or binary rows
    // this is a plain (scaled) dot product.
    MatrixD sim = wa.cast<double>() * wb.cast<double>().transpose();
    if (!binary) {
      for (Eigen::Index j = 0; j < h; ++j) {
        double nj = row_norm(wa, j);
        for (Eigen::Index k = 0; k < h; ++k) {
          double nk = row_norm(wb, k);
          sim(j, k) = (nj > 0.0 && nk > 0.0) ? sim(j, k) / (nj * nk) : 0.0;
        }
      }
    }
    // With a frozen readout a unit's sign cannot be compensated downstream,
    // so binary matching keeps the signed similarity there.
    const bool sign_symmetry = binary && b.layer(l + 1).spec.trainable;
    MatrixD cost = sign_symmetry ? MatrixD(-sim.cwiseAbs()) : MatrixD(-sim);
    std::vector<int> perm = solve_assignment(cost);
    std::vector<int> signs(static_cast<std::size_t>(h), 1);
    if (sign_symmetry)
      for (Eigen::Index j = 0; j < h; ++j)
        if (sim(j, perm[j]) < 0.0) signs[j] = -1;
    apply_layer(b, l, perm, signs);
    result.plan.perm[l] = std::move(perm);
    result.plan.signs[l] = std::move(signs);
  }
  return result;
}

}  // namespace symnet
