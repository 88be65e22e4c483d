#include "orchard/assignment.h"

#include <algorithm>
#include <cmath>

#include "orchard/error.h"

namespace orchard {
namespace {

struct Solution {
  std::vector<int> col_of;  // row -> column
  std::vector<int> row_of;  // column -> row
  std::vector<double> u;    // row potentials
  std::vector<double> v;    // column potentials
};

// Shortest augmenting path Hungarian algorithm on a square matrix.
Solution SolveSquare(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based with a virtual column 0.
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
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
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
  Solution s;
  s.col_of.assign(n, -1);
  s.row_of.assign(n, -1);
  s.u.assign(n, 0.0);
  s.v.assign(n, 0.0);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) {
      s.col_of[p[j] - 1] = j - 1;
      s.row_of[j - 1] = p[j] - 1;
    }
    s.v[j - 1] = v[j];
  }
  for (int i = 1; i <= n; ++i) s.u[i - 1] = u[i];
  return s;
}

// Rearranges an optimal assignment into the lexicographically smallest one
// among all optima. Every optimal assignment uses only zero reduced-cost edges
// of the optimal dual, so the search is restricted to that subgraph.
class LexicographicRefiner {
 public:
  LexicographicRefiner(const Eigen::MatrixXd& a, Solution& s, double tol)
      : a_(a), s_(s), tol_(tol), n_(static_cast<int>(a.rows())) {}

  void Run() {
    for (int r = 0; r < n_; ++r) {
      for (int c = 0; c < s_.col_of[r]; ++c) {
        if (!Tight(r, c)) continue;
        const int owner = s_.row_of[c];
        if (owner < r) continue;
        visited_.assign(n_, 0);
        visited_[c] = 1;
        path_.clear();
        if (Augment(owner, r, s_.col_of[r])) {
          // Apply the alternating path: owner -> path_[0], ... and r -> c.
          for (const auto& [row, col] : path_) {
            s_.col_of[row] = col;
            s_.row_of[col] = row;
          }
          s_.col_of[r] = c;
          s_.row_of[c] = r;
          break;
        }
      }
    }
  }

 private:
  bool Tight(int r, int c) const {
    return std::abs(a_(r, c) - s_.u[r] - s_.v[c]) <= tol_;
  }

  // Finds new columns for `row` (which lost its column) ending at `target`.
  bool Augment(int row, int fixed_below, int target) {
    for (int c = 0; c < n_; ++c) {
      if (visited_[c] || !Tight(row, c)) continue;
      visited_[c] = 1;
      if (c == target) {
        path_.emplace_back(row, c);
        return true;
      }
      const int owner = s_.row_of[c];
      if (owner <= fixed_below) continue;
      if (Augment(owner, fixed_below, target)) {
        path_.emplace_back(row, c);
        return true;
      }
    }
    return false;
  }

  const Eigen::MatrixXd& a_;
  Solution& s_;
  double tol_;
  int n_;
  std::vector<char> visited_;
  std::vector<std::pair<int, int>> path_;
};

}  // namespace

Assignment HungarianAssign(const Eigen::MatrixXd& cost, double gate) {
  const int m = static_cast<int>(cost.rows());
  const int n = static_cast<int>(cost.cols());
  if (m == 0 || n == 0) return {};
  if (!cost.allFinite() || cost.minCoeff() < 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "assignment costs must be finite and nonnegative");
  }
  const int size = std::max(m, n);
  const double max_cost = cost.maxCoeff();
  const bool gated = max_cost > gate;
  // Any forbidden pair costs more than every admissible assignment combined,
  // so the solver first maximizes the number of admissible pairs.
  const double forbidden = gated ? (gate + 1.0) * (size + 1) : 0.0;

  Eigen::MatrixXd square = Eigen::MatrixXd::Zero(size, size);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      square(i, j) = cost(i, j) > gate ? forbidden : cost(i, j);
    }
  }
  Solution solution = SolveSquare(square);
  const double scale = std::max(1.0, gated ? forbidden : max_cost);
  LexicographicRefiner(square, solution, 1e-12 * scale * size).Run();

  Assignment pairs;
  for (int i = 0; i < m; ++i) {
    const int j = solution.col_of[i];
    if (j >= 0 && j < n && cost(i, j) <= gate) pairs.emplace_back(i, j);
  }
  return pairs;
}

double AssignmentCost(const Eigen::MatrixXd& cost, const Assignment& pairs) {
  double total = 0.0;
  for (const auto& [i, j] : pairs) total += cost(i, j);
  return total;
}

}  // namespace orchard
