#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ego {

/// Minimum-cost assignment for an M x N cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Returns min(M, N) (row, col) pairs sorted by row.
std::vector<std::pair<int, int>> hungarian(const Eigen::MatrixXd& cost);

}  // namespace ego
