#pragma once

#include <vector>

#include "symnet/types.hpp"

namespace symnet {

// Exact minimum-cost perfect matching on a square cost matrix. Returns perm
// with perm[row] = column. Among optimal permutations the lexicographically
// smallest one is returned (costs within ~1e-9 relative are treated as ties).
//
// Shortest-augmenting-path Hungarian method with dual potentials, O(n^3);
// ties are then resolved greedily on the graph of zero-reduced-cost edges,
// whose perfect matchings are exactly the optimal assignments.
std::vector<int> solve_assignment(const MatrixD& cost);

double assignment_cost(const MatrixD& cost, const std::vector<int>& perm);

}  // namespace symnet
