// Self-checks for the brute-force oracles on hand-computed instances.
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "purelu/matrix.hpp"

namespace purelu {
namespace {

DenseMatrix make(std::size_t r, std::size_t c, std::vector<double> v) {
  return DenseMatrix(r, c, std::move(v));
}

TEST(Oracles, NaiveNormsHandValues) {
  const DenseMatrix a = make(2, 2, {0, 2, -3, 0});
  EXPECT_DOUBLE_EQ(oracle::naive_col_norm(a), 3.0);
  EXPECT_DOUBLE_EQ(oracle::naive_row_norm(a), 3.0);
  EXPECT_DOUBLE_EQ(oracle::naive_max_norm(a), 3.0);

  const DenseMatrix b = make(2, 3, {1, -2, 3, -4, 5, -6});
  EXPECT_DOUBLE_EQ(oracle::naive_col_norm(b), 9.0);   // |3| + |-6|
  EXPECT_DOUBLE_EQ(oracle::naive_row_norm(b), 15.0);  // |-4|+|5|+|-6|
  EXPECT_DOUBLE_EQ(oracle::naive_col_norm(b),
                   oracle::naive_row_norm(b.transposed()));
}

TEST(Oracles, NaiveMatmulHandValue) {
  const DenseMatrix a = make(2, 2, {1, 2, 3, 4});
  const DenseMatrix b = make(2, 2, {5, 6, 7, 8});
  const DenseMatrix c = oracle::naive_matmul(a, b);
  EXPECT_DOUBLE_EQ(c(0, 0), 19.0);
  EXPECT_DOUBLE_EQ(c(0, 1), 22.0);
  EXPECT_DOUBLE_EQ(c(1, 0), 43.0);
  EXPECT_DOUBLE_EQ(c(1, 1), 50.0);
}

TEST(Oracles, RowL1BruteForceDiagonalEmbed) {
  const DenseMatrix a = make(3, 2, {1, 0, 0, 1, 0, 0});
  const auto r0 = oracle::min_l1_row_bruteforce(a, 0);
  ASSERT_TRUE(r0.feasible);
  EXPECT_NEAR(r0.value, 1.0, 1e-12);
  EXPECT_NEAR(r0.z[0], 1.0, 1e-12);
  EXPECT_NEAR(r0.z[1], 0.0, 1e-12);
  EXPECT_NEAR(r0.z[2], 0.0, 1e-12);
  const auto r1 = oracle::min_l1_row_bruteforce(a, 1);
  ASSERT_TRUE(r1.feasible);
  EXPECT_NEAR(r1.value, 1.0, 1e-12);
}

TEST(Oracles, RowL1BruteForceRedundantRows) {
  // z1 + z2 = 1: any split has l1 cost exactly 1.
  const DenseMatrix a = make(2, 1, {1, 1});
  const auto r = oracle::min_l1_row_bruteforce(a, 0);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.value, 1.0, 1e-12);

  const DenseMatrix b = make(2, 1, {2, 0});
  const auto r2 = oracle::min_l1_row_bruteforce(b, 0);
  ASSERT_TRUE(r2.feasible);
  EXPECT_NEAR(r2.value, 0.5, 1e-12);
}

TEST(Oracles, RowL1BruteForceThreeRows) {
  // Constraints: z1+z2+z3 = 1, z1-z2 = 0; optimum value 1 (e.g. (0,0,1)).
  const DenseMatrix a = make(3, 2, {1, 1, 1, -1, 1, 0});
  const auto r = oracle::min_l1_row_bruteforce(a, 0);
  ASSERT_TRUE(r.feasible);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
}

TEST(Oracles, RowL1BruteForceInfeasible) {
  const DenseMatrix a = make(2, 2, {1, 0, 0, 0});
  const auto r = oracle::min_l1_row_bruteforce(a, 1);
  EXPECT_FALSE(r.feasible);
}

TEST(Oracles, PairExpectationBernoulliIdentity) {
  // Identity world, fair coin weights, exact decode (alpha = 0):
  // the update expectation is 2 Cov(w) = diag(1/2, 1/2).
  const DenseMatrix eye = DenseMatrix::identity(2);
  const std::vector<std::vector<std::pair<double, double>>> sup = {
      {{0.0, 0.5}, {1.0, 0.5}}, {{0.0, 0.5}, {1.0, 0.5}}};
  const std::vector<double> nu(2, 0.0);
  const auto outcomes = oracle::enumerate_outcomes(eye, sup, nu, eye, 0.0);
  ASSERT_EQ(outcomes.size(), 4u);
  double total_prob = 0;
  for (const auto& oc : outcomes) total_prob += oc.prob;
  EXPECT_NEAR(total_prob, 1.0, 1e-15);

  const DenseMatrix delta = oracle::pair_expectation_closed_form(outcomes, true);
  EXPECT_NEAR(delta(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(delta(1, 1), 0.5, 1e-15);
  EXPECT_NEAR(delta(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(delta(1, 0), 0.0, 1e-15);

  const DenseMatrix wc = oracle::pair_expectation_closed_form(outcomes, false);
  EXPECT_NEAR(wc(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(wc(0, 1), 0.0, 1e-15);
}

TEST(Oracles, PairExpectationThresholdHandValue) {
  // With alpha = 1/4 the decode of w_i = 1 is 3/4, so the diagonal becomes
  // 2 (E[w phi(w)] - E[w] E[phi(w)]) = 2 (3/8 - 1/2 * 3/8) = 3/8.
  const DenseMatrix eye = DenseMatrix::identity(2);
  const std::vector<std::vector<std::pair<double, double>>> sup = {
      {{0.0, 0.5}, {1.0, 0.5}}, {{0.0, 0.5}, {1.0, 0.5}}};
  const std::vector<double> nu(2, 0.0);
  const auto outcomes = oracle::enumerate_outcomes(eye, sup, nu, eye, 0.25);
  const DenseMatrix delta = oracle::pair_expectation_closed_form(outcomes, true);
  EXPECT_NEAR(delta(0, 0), 0.375, 1e-15);
  EXPECT_NEAR(delta(1, 1), 0.375, 1e-15);
  EXPECT_NEAR(delta(0, 1), 0.0, 1e-15);
}

TEST(Oracles, ClosedFormMatchesExplicitPairSum) {
  // Same value through the quadratic pair loop, on an asymmetric instance.
  const DenseMatrix a_star = make(3, 2, {0.7, 0.2, 0.3, 0.5, 0.0, 0.3});
  const std::vector<std::vector<std::pair<double, double>>> sup = {
      {{0.0, 0.3}, {0.8, 0.7}}, {{0.0, 0.6}, {1.0, 0.4}}};
  const std::vector<double> nu = {0.01, -0.02, 0.005};
  DenseMatrix p(2, 3);
  p(0, 0) = 1.1;
  p(0, 1) = -0.2;
  p(1, 1) = 1.3;
  p(1, 2) = 0.4;
  const double alpha = 0.1;
  const auto outcomes = oracle::enumerate_outcomes(a_star, sup, nu, p, alpha);
  const DenseMatrix closed = oracle::pair_expectation_closed_form(outcomes, true);

  DenseMatrix pairwise(3, 2);
  for (const auto& o1 : outcomes)
    for (const auto& o2 : outcomes)
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j)
          pairwise(i, j) += o1.prob * o2.prob * (o1.y[i] - o2.y[i]) *
                            (o1.x[j] - o2.x[j]);
  for (std::size_t k = 0; k < pairwise.size(); ++k)
    EXPECT_NEAR(closed.data()[k], pairwise.data()[k], 1e-14);
}

}  // namespace
}  // namespace purelu
