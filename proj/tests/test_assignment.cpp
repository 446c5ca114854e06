#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "trinity/assignment.hpp"
#include "trinity/error.hpp"
#include "trinity/rng.hpp"

using namespace trinity;

namespace {

CostMatrix random_matrix(size_t n_pred, size_t n_gt, Rng& rng) {
  std::vector<double> costs(n_pred * n_gt);
  for (auto& v : costs) v = rng.uniform(0.0, 10.0);
  return CostMatrix(n_pred, n_gt, std::move(costs));
}

}  // namespace

TEST_CASE("hungarian identity-favoring matrix") {
  std::vector<double> costs(9, 1.0);
  costs[0] = costs[4] = costs[8] = 0.0;
  Assignment a = hungarian(CostMatrix(3, 3, costs));
  REQUIRE(a.pairs.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(a.pairs[i].first == i);
    CHECK(a.pairs[i].second == i);
  }
  CHECK(a.total_cost == 0.0);
}

TEST_CASE("hungarian with no ground truth is empty") {
  Assignment a = hungarian(CostMatrix(4, 0, {}));
  CHECK(a.pairs.empty());
  CHECK(a.total_cost == 0.0);
}

TEST_CASE("hungarian input validation") {
  CHECK_THROWS_AS(CostMatrix(2, 2, {1.0, 2.0, std::nan(""), 0.0}), ValueError);
  CHECK_THROWS_AS(hungarian(CostMatrix(2, 3, std::vector<double>(6, 1.0))), DimensionError);
}

TEST_CASE("brute force hand cases") {
  Assignment one = brute_force_assignment(CostMatrix(1, 1, {5.0}));
  CHECK(one.total_cost == 5.0);
  REQUIRE(one.pairs.size() == 1);
  CHECK(one.pairs[0] == std::pair<size_t, size_t>{0, 0});

  Assignment two = brute_force_assignment(CostMatrix(2, 2, {1, 2, 2, 1}));
  CHECK(two.total_cost == 2.0);
  CHECK(two.pairs[0] == std::pair<size_t, size_t>{0, 0});
  CHECK(two.pairs[1] == std::pair<size_t, size_t>{1, 1});

  CHECK_THROWS_AS(brute_force_assignment(CostMatrix(9, 3, std::vector<double>(27, 1.0))),
                  ContractError);
}

TEST_CASE("hungarian matches brute-force minimum on 1000 random instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    CostMatrix m = trial % 2 == 0 ? random_matrix(6, 6, rng) : random_matrix(7, 4, rng);
    Assignment fast = hungarian(m);
    Assignment slow = brute_force_assignment(m);
    REQUIRE(fast.pairs.size() == m.n_gt);
    CHECK(fast.total_cost == slow.total_cost);

    // total_cost equals the sum of matched entries
    double direct = 0.0;
    std::vector<char> pred_seen(m.n_pred, 0);
    std::vector<char> gt_seen(m.n_gt, 0);
    for (const auto& [p, g] : fast.pairs) {
      direct += m.at(p, g);
      CHECK(!pred_seen[p]);
      CHECK(!gt_seen[g]);
      pred_seen[p] = 1;
      gt_seen[g] = 1;
    }
    CHECK(std::abs(direct - fast.total_cost) <= 1e-9);
  }
}

TEST_CASE("permutation equivariance on generic instances") {
  Rng rng(555);
  for (int trial = 0; trial < 50; ++trial) {
    CostMatrix m = random_matrix(6, 4, rng);
    Assignment base = hungarian(m);

    // random row permutation
    std::vector<size_t> perm(m.n_pred);
    for (size_t i = 0; i < m.n_pred; ++i) perm[i] = i;
    for (size_t i = m.n_pred; i > 1; --i) {
      std::swap(perm[i - 1], perm[rng.uniform_int(i)]);
    }
    std::vector<double> shuffled(m.costs.size());
    for (size_t p = 0; p < m.n_pred; ++p) {
      for (size_t g = 0; g < m.n_gt; ++g) shuffled[perm[p] * m.n_gt + g] = m.at(p, g);
    }
    Assignment moved = hungarian(CostMatrix(m.n_pred, m.n_gt, shuffled));

    CHECK(moved.total_cost == doctest::Approx(base.total_cost).epsilon(1e-12));
    REQUIRE(moved.pairs.size() == base.pairs.size());
    for (size_t g = 0; g < m.n_gt; ++g) {
      CHECK(moved.pred_of(g) == perm[base.pred_of(g)]);
    }
  }
}

TEST_CASE("adding a constant shifts cost but not the pairing") {
  Rng rng(777);
  for (int trial = 0; trial < 50; ++trial) {
    CostMatrix m = random_matrix(5, 3, rng);
    const double shift = rng.uniform(-4.0, 4.0);
    std::vector<double> shifted = m.costs;
    for (auto& v : shifted) v += shift;
    Assignment base = hungarian(m);
    Assignment moved = hungarian(CostMatrix(m.n_pred, m.n_gt, shifted));
    CHECK(moved.pairs == base.pairs);
    CHECK(moved.total_cost ==
          doctest::Approx(base.total_cost + shift * static_cast<double>(m.n_gt)).epsilon(1e-10));
  }
}

TEST_CASE("tie-break favors low prediction indices") {
  // two equally good preds for one gt: pred 0 wins
  Assignment a = hungarian(CostMatrix(2, 1, {5.0, 5.0}));
  REQUIRE(a.pairs.size() == 1);
  CHECK(a.pairs[0].first == 0);

  // all-zero square: canonical result is the identity pairing
  Assignment b = hungarian(CostMatrix(3, 3, std::vector<double>(9, 0.0)));
  for (size_t i = 0; i < 3; ++i) CHECK(b.pairs[i] == std::pair<size_t, size_t>{i, i});
}
