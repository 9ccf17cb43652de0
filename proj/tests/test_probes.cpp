#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "symnet/datasets.hpp"
#include "symnet/errors.hpp"
#include "symnet/geometry.hpp"
#include "symnet/probes.hpp"
#include "symnet/symmetry.hpp"
#include "symnet/training.hpp"

using namespace symnet;
using namespace testing_helpers;

namespace {

// Teacher-labelled task and a few students trained to zero error on it.
struct Fixture {
  Dataset data;
  std::vector<Network> students;
};

const Fixture& continuous_fixture() {
  static const Fixture f = [] {
    Fixture out;
    Network teacher = random_mlp({8, 6, 2}, 1, false, true);
    out.data = self_labelled(teacher, gaussian_inputs(300, 8, 2));
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.batch_size = 30;
    cfg.lr0 = 0.05;
    cfg.momentum = 0.9;
    cfg.nesterov = true;
    for (std::uint64_t s = 0; s < 4; ++s) {
      cfg.seed = 10 + s;
      TrainResult r = sgd_train(random_mlp({8, 24, 2}, 20 + s, false, true), out.data, cfg);
      REQUIRE(r.final_train_error < 0.01);
      out.students.push_back(r.net);
    }
    return out;
  }();
  return f;
}

const Fixture& binary_fixture() {
  static const Fixture f = [] {
    Fixture out;
    HmmConfig h;
    h.D = 51;
    h.N = 301;
    h.P = 153;
    h.P_test = 1;
    h.seed = 3;
    out.data = hmm_generate(h).train;
    TrainConfig cfg;
    cfg.epochs = 100;
    cfg.batch_size = 20;
    cfg.lr0 = 1.0;
    cfg.loss = LossKind::kBinaryCrossEntropy;
    for (std::uint64_t s = 0; s < 3; ++s) {
      cfg.seed = 30 + s;
      Network init = make_committee(301, 11);
      Rng rng(40 + s);
      initialize(init, rng);
      TrainResult r = sgd_train(init, out.data, cfg);
      REQUIRE(r.final_train_error < 0.01);
      out.students.push_back(r.net);
    }
    return out;
  }();
  return f;
}

}  // namespace

TEST_CASE("local energy: zero amplitude, determinism, spread") {
  const Fixture& f = continuous_fixture();
  const Network& w = f.students[0];
  LocalEnergyProfile p = local_energy(w, f.data, default_amplitudes(false), 20, 7);
  CHECK(p.mean[0] == 0.0);
  CHECK(p.stddev[0] == 0.0);
  CHECK(p.samples == 20);
  for (double s : p.stddev) CHECK(s >= 0.0);
  CHECK(p.mean.back() > p.mean[1]);
  LocalEnergyProfile q = local_energy(w, f.data, default_amplitudes(false), 20, 7);
  CHECK(p.mean == q.mean);
  CHECK(p.stddev == q.stddev);
  CHECK_THROWS_AS(local_energy(w, f.data, {0.1}, 0, 7), ConfigError);
}

TEST_CASE("local energy defaults") {
  CHECK(default_energy_samples(false) == 100);
  CHECK(default_energy_samples(true) == 10);
  auto c = default_amplitudes(false);
  CHECK(c.size() == 11);
  CHECK(c.back() == doctest::Approx(0.5));
  auto b = default_amplitudes(true);
  CHECK(b.size() == 11);
  CHECK(b.back() == doctest::Approx(0.05));
}

TEST_CASE("binary local energy: flipping every weight negates an odd-width perceptron") {
  Network net = random_mlp({31, 1}, 8, true);
  Dataset d;
  d.inputs = sign_inputs(400, 31, 9);
  d.signed_labels = true;
  Rng rng(10);
  std::bernoulli_distribution c(0.5);
  for (int i = 0; i < 400; ++i) d.labels.push_back(c(rng) ? 1 : -1);
  const double base = train_error(net, d);
  LocalEnergyProfile p = local_energy(net, d, {0.0, 1.0}, 3, 11);
  CHECK(p.binary);
  CHECK(p.mean[1] == doctest::Approx(1.0 - 2.0 * base));
  CHECK(p.stddev[1] == 0.0);
}

TEST_CASE("binary local energy: eps * n flips per draw") {
  // A perceptron that is correct on one pattern x = (1,...,1) by a margin of
  // m flips survives any k < ceil(n/2 ... ) flips; with n = 21 and all weights
  // +1, the pre-activation after k flips is 21 - 2k, negative iff k >= 11.
  Network net = make_mlp(std::vector<int>{21, 1}, true, false);
  net.mutable_layer(0).latent.setConstant(0.5f);
  binarize_in_place(net);
  Dataset d;
  d.inputs = Matrix::Ones(1, 21);
  d.labels = {1};
  d.signed_labels = true;
  LocalEnergyProfile p = local_energy(net, d, {10.0 / 21.0, 11.0 / 21.0}, 4, 12);
  CHECK(p.mean[0] == 0.0);
  CHECK(p.mean[1] == 1.0);
}

TEST_CASE("barrier") {
  PathScan s;
  s.train_error = {0.0, 0.0, 0.0};
  CHECK(barrier(s) == 0.0);
  s.train_error = {0.01, 0.37, 0.02};
  CHECK(barrier(s) == 0.37);
  std::reverse(s.train_error.begin(), s.train_error.end());
  CHECK(barrier(s) == 0.37);
  CHECK_THROWS(barrier(PathScan{}));
}

TEST_CASE("path modes parse with either separator") {
  CHECK(path_mode_from_string("linear-aligned") == PathMode::kLinearAligned);
  CHECK(path_mode_from_string("geodesic_aligned") == PathMode::kGeodesicAligned);
  CHECK(to_string(PathMode::kHamming) == "hamming");
  CHECK_THROWS_AS(path_mode_from_string("spline"), ConfigError);
}

TEST_CASE("path scans: grid, endpoint errors, identical endpoints") {
  const Fixture& f = continuous_fixture();
  const Network& a = f.students[0];
  const Network& b = f.students[1];
  PathOptions opts;
  opts.points = 11;
  for (PathMode m : {PathMode::kLinear, PathMode::kLinearAligned, PathMode::kGeodesicAligned}) {
    PathScan s = path_scan(a, b, f.data, m, opts);
    REQUIRE(s.x.size() == 11);
    CHECK(s.x.front() == 0.0);
    CHECK(s.x.back() == 1.0);
    for (std::size_t i = 1; i < s.x.size(); ++i) CHECK(s.x[i] > s.x[i - 1]);
    CHECK(s.train_error.front() == train_error(a, f.data));
    CHECK(s.train_error.back() == train_error(b, f.data));
    CHECK(barrier(s) >= std::max(s.train_error.front(), s.train_error.back()));
    PathScan flat = path_scan(a, a, f.data, m, opts);
    for (double e : flat.train_error) CHECK(e == flat.train_error.front());
  }
  opts.record_loss = true;
  PathScan withloss = path_scan(a, b, f.data, PathMode::kLinear, opts);
  CHECK(withloss.loss.size() == 11);
  CHECK_THROWS_AS(path_scan(a, b, f.data, PathMode::kHamming, opts), PreconditionError);
  opts.points = 1;
  CHECK_THROWS_AS(path_scan(a, b, f.data, PathMode::kLinear, opts), ConfigError);
}

TEST_CASE("geodesic-aligned barriers are not above linear barriers on average") {
  const Fixture& f = continuous_fixture();
  PathOptions opts;
  opts.points = 15;
  double lin = 0.0, geo = 0.0;
  for (std::size_t i = 0; i < f.students.size(); ++i)
    for (std::size_t j = i + 1; j < f.students.size(); ++j) {
      lin += barrier(path_scan(f.students[i], f.students[j], f.data, PathMode::kLinear, opts));
      geo += barrier(path_scan(f.students[i], f.students[j], f.data, PathMode::kGeodesicAligned, opts));
    }
  CHECK(geo <= lin);
}

TEST_CASE("hamming scans: endpoints, seeded order, raw versus aligned") {
  const Fixture& f = binary_fixture();
  const Network& a = f.students[0];
  const Network& b = f.students[1];
  PathOptions opts;
  opts.points = 9;
  opts.seed = 5;
  PathScan s = path_scan(a, b, f.data, PathMode::kHamming, opts);
  CHECK(s.train_error.front() == train_error(a, f.data));
  CHECK(s.train_error.back() == train_error(b, f.data));
  CHECK(path_scan(a, b, f.data, PathMode::kHamming, opts).train_error == s.train_error);
  opts.align_hamming = false;
  PathScan raw = path_scan(a, b, f.data, PathMode::kHamming, opts);
  CHECK(raw.train_error.back() == train_error(b, f.data));
  PathScan flat = path_scan(a, a, f.data, PathMode::kHamming, opts);
  for (double e : flat.train_error) CHECK(e == flat.train_error.front());
}

TEST_CASE("optimized path: continuous pair, preconditions, non-convergence") {
  const Fixture& f = continuous_fixture();
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 30;
  cfg.lr0 = 0.05;
  cfg.momentum = 0.9;
  cfg.nesterov = true;
  cfg.seed = 50;
  PathOptions opts;
  opts.points = 9;
  OptimizedPath p = optimized_path(f.students[0], f.students[1], f.data, cfg, opts);
  CHECK(p.midpoint_init == "geodesic");
  CHECK(p.midpoint_error < 0.01);
  CHECK(p.barrier == std::max(barrier(p.first), barrier(p.second)));
  CHECK(p.first.train_error.back() == p.second.train_error.front());

  OptimizedPath same = optimized_path(f.students[2], f.students[2], f.data, cfg, opts);
  for (double e : same.first.train_error) CHECK(e < 0.01);
  for (double e : same.second.train_error) CHECK(e < 0.01);

  Network bad = random_mlp({8, 24, 2}, 99, false, true);
  CHECK_THROWS_AS(optimized_path(bad, f.students[0], f.data, cfg, opts), PreconditionError);
}

TEST_CASE("optimized path raises a typed error carrying the achieved error") {
  // Random labels: two memorizing solutions whose untrained midpoint is far
  // from a solution.
  Dataset d;
  d.inputs = gaussian_inputs(120, 10, 60);
  d.num_classes = 2;
  Rng rng(61);
  std::bernoulli_distribution c(0.5);
  for (int i = 0; i < 120; ++i) d.labels.push_back(c(rng) ? 1 : 0);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 20;
  cfg.lr0 = 0.05;
  cfg.momentum = 0.9;
  cfg.seed = 62;
  Network a = sgd_train(random_mlp({10, 64, 2}, 63), d, cfg).net;
  cfg.seed = 64;
  Network b = sgd_train(random_mlp({10, 64, 2}, 65), d, cfg).net;
  REQUIRE(train_error(a, d) < 0.01);
  REQUIRE(train_error(b, d) < 0.01);
  TrainConfig none = cfg;
  none.epochs = 0;
  try {
    optimized_path(a, b, d, none, PathOptions{});
    FAIL("expected NonConvergenceError");
  } catch (const NonConvergenceError& e) {
    CHECK(e.achieved_error() >= 0.01);
  }
}

TEST_CASE("binary optimized path uses a Hamming midpoint") {
  const Fixture& f = binary_fixture();
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 20;
  cfg.lr0 = 1.0;
  cfg.loss = LossKind::kBinaryCrossEntropy;
  cfg.seed = 70;
  PathOptions opts;
  opts.points = 7;
  OptimizedPath p = optimized_path(f.students[0], f.students[1], f.data, cfg, opts);
  CHECK(p.midpoint_init == "hamming");
  CHECK(p.midpoint_error < 0.01);
  CHECK(p.first.train_error.front() == train_error(f.students[0], f.data));
}

TEST_CASE("plane scan: orthonormal basis, anchors reproduced, degenerate planes") {
  const Fixture& f = continuous_fixture();
  const Network& w1 = f.students[0];
  const Network& w2 = f.students[1];
  const Network& w3 = f.students[2];
  PlaneOptions opts;
  opts.resolution = 7;
  PlaneGrid g = plane_scan(w1, w2, w3, f.data, opts);
  CHECK(std::abs(g.u.norm() - 1.0) < 1e-6);
  CHECK(std::abs(g.v.norm() - 1.0) < 1e-6);
  CHECK(std::abs(g.u.dot(g.v)) < 1e-6);
  CHECK(g.errors.rows() == 7);
  const Network* anchors[3] = {&w1, &w2, &w3};
  for (int k = 0; k < 3; ++k) {
    const auto [a, b] = g.anchors[static_cast<std::size_t>(k)];
    Network back = plane_point(w1, g, a, b);
    CHECK((flatten_parameters(back) - flatten_parameters(*anchors[k])).cwiseAbs().maxCoeff() < 1e-5);
    CHECK(train_error(back, f.data) == doctest::Approx(train_error(*anchors[k], f.data)).epsilon(0.02));
  }
  // Anchors lie inside the grid span.
  for (const auto& [a, b] : g.anchors) {
    CHECK(a >= g.us.front());
    CHECK(a <= g.us.back());
    CHECK(b >= g.vs.front());
    CHECK(b <= g.vs.back());
  }
  CHECK_THROWS_AS(plane_scan(w1, w1, w3, f.data, opts), DegeneratePlaneError);
  CHECK_THROWS_AS(plane_scan(w1, w2, linear_interpolate(w1, w2, 2.0), f.data, opts), DegeneratePlaneError);
}

TEST_CASE("plane scan: normalized mode re-projects every grid point") {
  const Fixture& f = continuous_fixture();
  Network a = normalize(f.students[0]);
  Network b = align(a, normalize(f.students[1])).net;
  Network c = align(a, normalize(f.students[2])).net;
  PlaneOptions opts;
  opts.resolution = 5;
  opts.normalized = true;
  PlaneGrid g = plane_scan(a, b, c, f.data, opts);
  CHECK(g.reprojected);
  for (double u : g.us)
    for (double v : g.vs) CHECK(is_normalized(plane_point(a, g, u, v), 1e-5));
  CHECK_THROWS_AS(plane_scan(f.students[0], b, c, f.data, opts), PreconditionError);
}

TEST_CASE("plane scan: binarized mode works on latent weights") {
  const Fixture& f = binary_fixture();
  PlaneOptions opts;
  opts.resolution = 5;
  opts.binarized = true;
  PlaneGrid g = plane_scan(f.students[0], f.students[1], f.students[2], f.data, opts);
  CHECK(g.binarized);
  Network p = plane_point(f.students[0], g, g.anchors[0].first, g.anchors[0].second);
  CHECK(hamming_distance(p, f.students[0]) == 0);
  opts.binarized = false;
  opts.normalized = true;
  CHECK_THROWS_AS(plane_scan(f.students[0], f.students[1], f.students[2], f.data, opts), PreconditionError);
}

TEST_CASE("distance study") {
  const Fixture& f = continuous_fixture();
  std::vector<SolutionGroup> groups = {{"x", {f.students[0], f.students[1]}},
                                       {"y", {f.students[2], f.students[3]}},
                                       {"dup", {f.students[0], f.students[0]}}};
  auto rows = distance_study(groups);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0].group_a == "x");
  CHECK(rows[0].group_b == "x");
  CHECK(rows[0].pairs == 1);
  CHECK(rows[1].pairs == 4);
  for (const auto& r : rows) CHECK(r.aligned_mean <= r.raw_mean + 1e-9);
  CHECK(rows.back().raw_mean == 0.0);
  CHECK(rows.back().aligned_mean < 1e-6);
  CHECK_THROWS_AS(distance_study({{"one", {f.students[0]}}}), ConfigError);

  const Fixture& bf = binary_fixture();
  auto brows = distance_study({{"b", bf.students}});
  REQUIRE(brows.size() == 1);
  CHECK(brows[0].pairs == 3);
  CHECK(brows[0].aligned_mean <= brows[0].raw_mean);
  CHECK(brows[0].raw_mean == doctest::Approx((hamming_distance(bf.students[0], bf.students[1]) +
                                              hamming_distance(bf.students[0], bf.students[2]) +
                                              hamming_distance(bf.students[1], bf.students[2])) /
                                             3.0));
}

TEST_CASE("mean_std uses the sample standard deviation") {
  auto [m, s] = mean_std({1.0, 2.0, 3.0, 4.0});
  CHECK(m == 2.5);
  CHECK(s == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(mean_std({2.0}).second == 0.0);
}
