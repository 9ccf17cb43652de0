#include "symnet/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "symnet/errors.hpp"

namespace symnet {

namespace {

struct Duals {
  std::vector<double> u;  // rows, 1-based
  std::vector<double> v;  // columns, 1-based
  std::vector<int> col_of_row;
};

Duals hungarian(const MatrixD& c) {
  const int n = static_cast<int>(c.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Duals d{std::move(u), std::move(v), std::vector<int>(n)};
  for (int j = 1; j <= n; ++j) d.col_of_row[p[j] - 1] = j - 1;
  return d;
}

// Alternating-path search inside the tight graph. Rows < `first_free_row`
// and columns flagged in `locked` are off limits. Finds a path from `start_row`
// to `target_col` and rewires the matching along it.
bool reroute(const std::vector<std::vector<int>>& tight, std::vector<int>& col_of_row,
             std::vector<int>& row_of_col, const std::vector<char>& locked, int first_free_row,
             int start_row, int target_col) {
  const int n = static_cast<int>(col_of_row.size());
  std::vector<int> parent_row(n, -1);  // for column c: row from which it was reached
  std::vector<char> seen(n, 0);
  std::vector<int> queue{start_row};
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const int r = queue[q];
    for (int c : tight[r]) {
      if (locked[c] || seen[c]) continue;
      seen[c] = 1;
      parent_row[c] = r;
      if (c == target_col) {
        // Walk back: each row on the path takes the column it reached.
        int col = c;
        while (true) {
          int row = parent_row[col];
          int prev = col_of_row[row];
          col_of_row[row] = col;
          row_of_col[col] = row;
          if (row == start_row) break;
          col = prev;
        }
        return true;
      }
      const int next = row_of_col[c];
      if (next >= first_free_row) queue.push_back(next);
    }
  }
  return false;
}

}  // namespace

std::vector<int> solve_assignment(const MatrixD& cost) {
  if (cost.rows() != cost.cols()) throw ShapeError("assignment cost matrix must be square");
  if (!cost.allFinite()) throw NumericError("assignment cost matrix has non-finite entries");
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {};

  Duals d = hungarian(cost);
  const double scale = 1.0 + cost.cwiseAbs().maxCoeff();
  const double tol = 1e-9 * scale;
  std::vector<std::vector<int>> tight(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (cost(i, j) - d.u[i + 1] - d.v[j + 1] <= tol) tight[i].push_back(j);

  std::vector<int>& col_of_row = d.col_of_row;
  std::vector<int> row_of_col(n);
  for (int i = 0; i < n; ++i) row_of_col[col_of_row[i]] = i;
  std::vector<char> locked(n, 0);

  for (int i = 0; i < n; ++i) {
    for (int j : tight[i]) {
      if (locked[j]) continue;
      if (j == col_of_row[i]) break;
      // Give column j to row i; its current owner must reach i's old column.
      const int owner = row_of_col[j];
      const int freed = col_of_row[i];
      std::vector<char> blocked = locked;
      blocked[j] = 1;
      std::vector<int> trial_cols = col_of_row;
      std::vector<int> trial_rows = row_of_col;
      trial_cols[i] = -1;
      if (reroute(tight, trial_cols, trial_rows, blocked, i + 1, owner, freed)) {
        trial_cols[i] = j;
        trial_rows[j] = i;
        col_of_row = std::move(trial_cols);
        row_of_col = std::move(trial_rows);
        break;
      }
    }
    locked[col_of_row[i]] = 1;
  }
  return col_of_row;
}

double assignment_cost(const MatrixD& cost, const std::vector<int>& perm) {
  double s = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) s += cost(static_cast<Eigen::Index>(i), perm[i]);
  return s;
}

}  // namespace symnet
