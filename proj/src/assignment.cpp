#include "trinity/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trinity/error.hpp"

namespace trinity {

CostMatrix::CostMatrix(size_t n_pred_, size_t n_gt_, std::vector<double> costs_)
    : n_pred(n_pred_), n_gt(n_gt_), costs(std::move(costs_)) {
  if (costs.size() != n_pred * n_gt) {
    throw DimensionError("cost matrix: " + std::to_string(costs.size()) + " entries for " +
                         std::to_string(n_pred) + "x" + std::to_string(n_gt));
  }
  for (double v : costs) {
    if (std::isnan(v)) throw ValueError("cost matrix contains NaN");
    if (std::isinf(v)) throw ValueError("cost matrix contains Inf");
  }
}

size_t Assignment::pred_of(size_t gt) const {
  for (const auto& [p, g] : pairs) {
    if (g == gt) return p;
  }
  return npos;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Classic potentials-based Hungarian solve on a square matrix given through
// an indexed view: cost(i, j) reads row rows[i], column cols[j] of the
// original matrix, with columns beyond n_gt acting as zero-cost dummies.
// Returns the minimum total cost and, via match_row_of_col, the pairing.
double solve_square(const std::vector<size_t>& rows, const std::vector<size_t>& cols,
                    size_t n_real_cols, const CostMatrix& c,
                    std::vector<size_t>* match_row_of_col = nullptr) {
  const size_t n = rows.size();
  auto cost = [&](size_t i, size_t j) -> double {
    if (j >= n_real_cols) return 0.0;  // dummy column
    return c.at(rows[i], cols[j]);
  };

  // 1-based arrays per the standard formulation; p[j] = row assigned to col j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<size_t> p(n + 1, 0), way(n + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    p[0] = i;
    size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const size_t i0 = p[j0];
      double delta = kInf;
      size_t j1 = 0;
      for (size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (size_t j = 0; j <= n; ++j) {
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
      const size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  double total = 0.0;
  for (size_t j = 1; j <= n; ++j) {
    if (j - 1 < n_real_cols) total += cost(p[j] - 1, j - 1);
  }
  if (match_row_of_col) {
    match_row_of_col->assign(n, 0);
    for (size_t j = 1; j <= n; ++j) (*match_row_of_col)[j - 1] = p[j] - 1;
  }
  return total;
}

// Minimum cost of matching every column in `cols` to a distinct row in
// `rows` (|rows| >= |cols|), padding with dummy columns to square.
double min_cost(const std::vector<size_t>& rows, const std::vector<size_t>& cols,
                const CostMatrix& c) {
  return solve_square(rows, cols, cols.size(), c);
}

}  // namespace

Assignment hungarian(const CostMatrix& c) {
  if (c.n_gt > c.n_pred) {
    throw DimensionError("hungarian: n_gt " + std::to_string(c.n_gt) + " exceeds n_pred " +
                         std::to_string(c.n_pred));
  }
  Assignment result;
  if (c.n_gt == 0) return result;

  std::vector<size_t> all_rows(c.n_pred), all_cols(c.n_gt);
  for (size_t i = 0; i < c.n_pred; ++i) all_rows[i] = i;
  for (size_t j = 0; j < c.n_gt; ++j) all_cols[j] = j;
  const double optimum = min_cost(all_rows, all_cols, c);

  // Canonical tie-break: fix predictions in ascending index order, each to
  // the lowest-indexed ground truth that still admits an optimal completion
  // of the remainder; a prediction stays unmatched only when no ground truth
  // does. Equal-cost optima therefore resolve in favor of low pred indices.
  std::vector<size_t> free_rows = all_rows;
  std::vector<size_t> free_cols = all_cols;
  std::vector<std::pair<size_t, size_t>> pairs;
  double fixed_cost = 0.0;
  const double tol = 1e-9 * (1.0 + std::abs(optimum));

  for (size_t pred = 0; pred < c.n_pred && !free_cols.empty(); ++pred) {
    std::vector<size_t> rest_rows;
    rest_rows.reserve(free_rows.size() - 1);
    for (size_t r : free_rows) {
      if (r != pred) rest_rows.push_back(r);
    }
    size_t chosen = Assignment::npos;
    double fallback_cost = kInf;
    size_t fallback = Assignment::npos;
    for (size_t gt : free_cols) {
      std::vector<size_t> rest_cols;
      rest_cols.reserve(free_cols.size() - 1);
      for (size_t g : free_cols) {
        if (g != gt) rest_cols.push_back(g);
      }
      const double candidate = fixed_cost + c.at(pred, gt) + min_cost(rest_rows, rest_cols, c);
      if (candidate <= optimum + tol) {
        chosen = gt;
        break;
      }
      if (candidate < fallback_cost) {
        fallback_cost = candidate;
        fallback = gt;
      }
    }
    // A square remainder forces this pred to match; numeric noise beyond tol
    // falls back to the cheapest candidate.
    if (chosen == Assignment::npos && rest_rows.size() < free_cols.size()) chosen = fallback;
    if (chosen != Assignment::npos) {
      pairs.emplace_back(pred, chosen);
      fixed_cost += c.at(pred, chosen);
      free_cols.erase(std::find(free_cols.begin(), free_cols.end(), chosen));
    }
    free_rows = std::move(rest_rows);
  }

  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  result.pairs = std::move(pairs);
  result.total_cost = 0.0;
  for (const auto& [p, g] : result.pairs) result.total_cost += c.at(p, g);
  return result;
}

Assignment brute_force_assignment(const CostMatrix& c) {
  if (c.n_pred > 8) {
    throw ContractError("brute_force_assignment: size limit 8 exceeded (n_pred " +
                        std::to_string(c.n_pred) + ")");
  }
  if (c.n_gt > c.n_pred) {
    throw DimensionError("brute_force_assignment: n_gt " + std::to_string(c.n_gt) +
                         " exceeds n_pred " + std::to_string(c.n_pred));
  }
  Assignment best;
  if (c.n_gt == 0) return best;

  std::vector<size_t> pred_of_gt(c.n_gt, Assignment::npos);
  std::vector<char> used(c.n_pred, 0);
  std::vector<size_t> best_choice;
  double best_cost = kInf;

  // Lexicographic enumeration over (pred for gt0, pred for gt1, ...); strict
  // improvement keeps the first-found optimum, making the result canonical.
  auto recurse = [&](auto&& self, size_t gt, double acc) -> void {
    if (gt == c.n_gt) {
      if (acc < best_cost) {
        best_cost = acc;
        best_choice = pred_of_gt;
      }
      return;
    }
    for (size_t p = 0; p < c.n_pred; ++p) {
      if (used[p]) continue;
      used[p] = 1;
      pred_of_gt[gt] = p;
      self(self, gt + 1, acc + c.at(p, gt));
      used[p] = 0;
    }
  };
  recurse(recurse, 0, 0.0);

  best.total_cost = best_cost;
  for (size_t g = 0; g < c.n_gt; ++g) best.pairs.emplace_back(best_choice[g], g);
  return best;
}

}  // namespace trinity
