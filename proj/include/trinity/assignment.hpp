#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace trinity {

// Rectangular cost matrix for matching prediction slots (rows) against
// ground-truth regions (columns). Predictions are always the larger side.
struct CostMatrix {
  size_t n_pred = 0;
  size_t n_gt = 0;
  std::vector<double> costs;  // row-major [n_pred][n_gt]

  CostMatrix() = default;
  CostMatrix(size_t n_pred_, size_t n_gt_, std::vector<double> costs_);

  double at(size_t pred, size_t gt) const { return costs[pred * n_gt + gt]; }
};

// Injective gt -> pred pairing; |pairs| == n_gt.
struct Assignment {
  std::vector<std::pair<size_t, size_t>> pairs;  // (pred_index, gt_index), sorted by gt
  double total_cost = 0.0;

  // pred matched to gt g, or npos when g is out of range.
  size_t pred_of(size_t gt) const;
  static constexpr size_t npos = static_cast<size_t>(-1);
};

// Minimum-total-cost assignment via the Hungarian method (O(n^3) with row
// potentials). Ties between equal-cost optima are broken deterministically:
// scanning predictions in ascending index, each takes the lowest-indexed
// ground truth consistent with some optimal completion.
Assignment hungarian(const CostMatrix& c);

// Exhaustive oracle over all injective gt -> pred maps; n_pred <= 8.
Assignment brute_force_assignment(const CostMatrix& c);

}  // namespace trinity
