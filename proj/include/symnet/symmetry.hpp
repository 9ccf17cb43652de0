#pragma once

#include <vector>

#include "symnet/network.hpp"

namespace symnet {

// Per hidden layer: unit k of the aligned network is signs[l][k] times unit
// perm[l][k] of the original. Signs are all +1 for continuous networks.
struct PermutationPlan {
  std::vector<std::vector<int>> perm;
  std::vector<std::vector<int>> signs;

  static PermutationPlan identity(const Network& net);
  bool is_identity() const;
  PermutationPlan inverse() const;
};

// Incoming-weight norms |w_k| of every unit; the last entry holds the single
// Frobenius norm of the output layer.
struct UnitNorms {
  std::vector<std::vector<double>> hidden;
  double output = 0.0;
};

UnitNorms unit_norms(const Network& net);

// True when every hidden unit has unit norm and the last layer has norm
// sqrt(H^L), both within `tol` (relative).
bool is_normalized(const Network& net, double tol = 1e-4);

// Rescales every hidden unit onto its unit sphere (bottom-up, pushing the
// scale into the next layer) and the last layer onto the sphere of radius
// sqrt(H^L). Requires a continuous relu network; throws DegenerateUnitError on
// a zero-norm unit.
Network normalize(const Network& net);

Network apply_plan(const Network& net, const PermutationPlan& plan);

struct AlignResult {
  Network net;
  PermutationPlan plan;
};

// Permutes (and for binary networks sign-flips) the hidden units of `other`
// layer by layer to maximise the cosine similarity with `ref`. Continuous
// networks must be normalized unless `require_normalized` is false, in which
// case raw rows are compared through their cosine. `ref` is never modified.
AlignResult align(const Network& ref, const Network& other, bool require_normalized = true);

}  // namespace symnet
