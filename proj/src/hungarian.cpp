#include "ego/hungarian.hpp"

#include <algorithm>
#include <limits>

#include "ego/error.hpp"

namespace ego {

namespace {

// Rows <= cols. 1-based potentials formulation; p[j] is the row matched to column j.
std::vector<int> solve(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows()), m = static_cast<int>(a.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
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
      for (int j = 1; j <= m; ++j) {
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
      for (int j = 0; j <= m; ++j) {
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
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

std::vector<std::pair<int, int>> hungarian(const Eigen::MatrixXd& cost) {
  if (!cost.allFinite()) fail(ErrorCode::kInvalidArgument, "assignment costs must be finite");
  std::vector<std::pair<int, int>> out;
  if (cost.rows() == 0 || cost.cols() == 0) return out;
  if (cost.rows() <= cost.cols()) {
    const auto r2c = solve(cost);
    for (int r = 0; r < static_cast<int>(r2c.size()); ++r) out.emplace_back(r, r2c[r]);
  } else {
    const auto c2r = solve(cost.transpose());
    for (int c = 0; c < static_cast<int>(c2r.size()); ++c) out.emplace_back(c2r[c], c);
    std::sort(out.begin(), out.end());
  }
  return out;
}

}  // namespace ego
