#pragma once

#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace orchard {

using Assignment = std::vector<std::pair<int, int>>;

// Minimum-cost one-to-one assignment of rows to columns (Hungarian method,
// shortest augmenting path form). Rectangular inputs are padded to square.
// Pairs costing more than `gate` are forbidden and never reported; with an
// infinite gate every row (or column, whichever is fewer) is matched. Among
// equal-cost optima the lexicographically smallest (row, col) assignment is
// returned. Costs must be nonnegative. Pairs are sorted by row.
Assignment HungarianAssign(
    const Eigen::MatrixXd& cost,
    double gate = std::numeric_limits<double>::infinity());

double AssignmentCost(const Eigen::MatrixXd& cost, const Assignment& pairs);

}  // namespace orchard
