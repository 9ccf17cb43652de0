#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "symnet/errors.hpp"
#include "symnet/geometry.hpp"
#include "symnet/symmetry.hpp"

using namespace symnet;
using namespace testing_helpers;

TEST_CASE("normalize: hand example with a 3-4-5 unit") {
  Network net = make_mlp(std::vector<int>{2, 2, 1}, false, false);
  net.mutable_layer(0).weights << 3, 4, 1, 0;
  net.mutable_layer(1).weights << 1, 1;
  Network n = normalize(net);
  CHECK(n.layer(0).weights(0, 0) == doctest::Approx(0.6));
  CHECK(n.layer(0).weights(0, 1) == doctest::Approx(0.8));
  // Outgoing weights become (5, 1), then the last layer goes to norm sqrt(1).
  CHECK(n.layer(1).weights(0, 0) == doctest::Approx(5.0 / std::sqrt(26.0)));
  CHECK(n.layer(1).weights(0, 1) == doctest::Approx(1.0 / std::sqrt(26.0)));
}

TEST_CASE("normalize: manifold invariants, idempotence and bias handling") {
  Network net = random_mlp({5, 16, 16, 3}, 1, false, true);
  for (auto& l : net.mutable_layers()) l.weights *= 3.0f;
  Network n = normalize(net);
  CHECK(is_normalized(n));
  CHECK_FALSE(is_normalized(net));
  for (std::size_t l = 0; l < 2; ++l)
    for (Eigen::Index k = 0; k < 16; ++k)
      CHECK(std::abs(n.layer(l).weights.row(k).cast<double>().norm() - 1.0) < 1e-6);
  CHECK(std::abs(n.layer(2).weights.cast<double>().norm() - std::sqrt(3.0)) < 1e-5);
  // Unit 0 of layer 0: the bias follows its row.
  const double r0 = net.layer(0).weights.row(0).cast<double>().norm();
  CHECK(n.layer(0).bias[0] == doctest::Approx(net.layer(0).bias[0] / r0).epsilon(1e-5));

  CHECK(max_abs_diff(normalize(n), n) < 1e-7);
}

TEST_CASE("normalize preserves predictions") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Network net = random_mlp({2, 16, 16, 3}, 10 + seed, false, seed % 2 == 1);
    Matrix x = gaussian_inputs(100, 2, 20 + seed);
    CHECK(classify(forward(normalize(net), x)) == classify(forward(net, x)));
  }
}

TEST_CASE("normalize rejects binary nets and dead units") {
  CHECK_THROWS_AS(normalize(random_mlp({4, 3, 1}, 1, true)), PreconditionError);
  Network net = random_mlp({4, 3, 2}, 2);
  net.mutable_layer(0).weights.row(1).setZero();
  CHECK_THROWS_AS(normalize(net), DegenerateUnitError);
}

TEST_CASE("align recovers a random shuffle of a continuous net") {
  Rng rng(3);
  Network a = normalize(random_mlp({6, 12, 10, 4}, 4, false, true));
  auto perms = random_perms(a, rng);
  Network b = shuffle_units(a, perms);
  CHECK(geodesic_distance(a, b) > 1.0);
  AlignResult r = align(a, b);
  CHECK(geodesic_distance(a, r.net) < 1e-6);
  CHECK(max_abs_diff(a, r.net) < 1e-7);
  // unit k of the aligned net is unit plan[k] of b, i.e. unit k of a.
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t k = 0; k < perms[l].size(); ++k) CHECK(perms[l][static_cast<std::size_t>(r.plan.perm[l][k])] == static_cast<int>(k));
}

TEST_CASE("align recovers shuffles and sign flips of a binary net") {
  Rng rng(5);
  Network a = random_mlp({15, 11, 9, 1}, 6, true);
  Network b = shuffle_units(a, random_perms(a, rng), random_signs(a, rng));
  CHECK(hamming_distance(a, b) > 0);
  Matrix x = sign_inputs(200, 15, 7);
  CHECK(classify(forward(b, x)) == classify(forward(a, x)));
  AlignResult r = align(a, b);
  CHECK(hamming_distance(a, r.net) == 0);
  CHECK(r.net.layer(0).latent == a.layer(0).latent);
}

TEST_CASE("align(net, net) is the identity plan and leaves the reference untouched") {
  Network a = normalize(random_mlp({4, 8, 8, 2}, 8));
  const Network keep = a;
  CHECK(align(a, a).plan.is_identity());
  CHECK(a == keep);
  Network c = random_mlp({4, 8, 1}, 9, true);
  CHECK(align(c, c).plan.is_identity());
}

TEST_CASE("align preserves the function of the moved net and never increases the distance") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Network a = normalize(random_mlp({6, 20, 20, 3}, 100 + seed, false, true));
    Network b = normalize(random_mlp({6, 20, 20, 3}, 200 + seed, false, true));
    AlignResult r = align(a, b);
    Matrix x = gaussian_inputs(100, 6, 300 + seed);
    CHECK(classify(forward(r.net, x)) == classify(forward(b, x)));
    CHECK(geodesic_distance(a, r.net) <= geodesic_distance(a, b) + 1e-9);
    CHECK(is_normalized(r.net));
  }
  // Odd fan-ins: with +-1 inputs no pre-activation is 0, where sign(0) = +1
  // would break the sign-reversal symmetry.
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Network a = random_mlp({31, 21, 21, 1}, 400 + seed, true);
    Network b = random_mlp({31, 21, 21, 1}, 500 + seed, true);
    AlignResult r = align(a, b);
    Matrix x = sign_inputs(100, 31, 600 + seed);
    CHECK(classify(forward(r.net, x)) == classify(forward(b, x)));
    CHECK(hamming_distance(a, r.net) <= hamming_distance(a, b));
  }
}

TEST_CASE("align on a committee machine permutes without flipping signs") {
  Network a = make_committee(20, 7);
  Network b = make_committee(20, 7);
  Rng r1(10), r2(11);
  initialize(a, r1);
  initialize(b, r2);
  AlignResult r = align(a, b);
  for (int s : r.plan.signs[0]) CHECK(s == 1);
  Matrix x = sign_inputs(100, 20, 12);
  CHECK(classify(forward(r.net, x)) == classify(forward(b, x)));
  CHECK(r.net.layer(1).weights == b.layer(1).weights);
}

TEST_CASE("apply_plan then its inverse restores the net bit-exactly") {
  Rng rng(13);
  Network a = random_mlp({5, 9, 7, 2}, 14, true, true);
  PermutationPlan plan;
  plan.perm = random_perms(a, rng);
  plan.signs = random_signs(a, rng);
  Network moved = apply_plan(a, plan);
  CHECK(moved == shuffle_units(a, plan.perm, plan.signs));
  CHECK(apply_plan(moved, plan.inverse()) == a);

  PermutationPlan bad = plan;
  bad.perm[0][0] = bad.perm[0][1];
  CHECK_THROWS_AS(apply_plan(a, bad), ShapeError);
}

TEST_CASE("align errors") {
  Network a = normalize(random_mlp({4, 8, 2}, 15));
  CHECK_THROWS_AS(align(a, normalize(random_mlp({4, 9, 2}, 16))), ArchitectureMismatchError);
  CHECK_THROWS_AS(align(a, random_mlp({4, 8, 2}, 17)), PreconditionError);
  CHECK_NOTHROW(align(a, random_mlp({4, 8, 2}, 17), false));
}
