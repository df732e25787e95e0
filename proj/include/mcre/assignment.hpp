#pragma once

// Exact linear assignment (Hungarian algorithm, potentials form), O(n^3).

#include <cstddef>
#include <limits>
#include <vector>

#include "mcre/errors.hpp"

namespace mcre {

struct Assignment {
    std::vector<std::size_t> column_of_row;
    double total_cost = 0.0;
};

/// Minimizes sum_i cost[i][column_of_row[i]] over permutations. `cost` is a
/// row-major n x n matrix.
inline Assignment solve_assignment(const std::vector<double>& cost, std::size_t n) {
    if (cost.size() != n * n) throw ArgumentError("solve_assignment: cost matrix is not n x n");
    Assignment out;
    if (n == 0) return out;
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; row 0 / column 0 are sentinels.
    std::vector<double> u(n + 1, 0.0);
    std::vector<double> v(n + 1, 0.0);
    std::vector<std::size_t> row_of_col(n + 1, 0);
    std::vector<std::size_t> way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        row_of_col[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = row_of_col[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of_col[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    out.column_of_row.assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j) out.column_of_row[row_of_col[j] - 1] = j - 1;
    for (std::size_t i = 0; i < n; ++i) out.total_cost += cost[i * n + out.column_of_row[i]];
    return out;
}

}  // namespace mcre
