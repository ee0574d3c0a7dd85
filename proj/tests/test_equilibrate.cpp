// Second-moment equilibration: estimation, selective column updates, and the
// bar-lowering loop.
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "purelu/equilibrate.hpp"
#include "purelu/errors.hpp"
#include "purelu/matrix.hpp"
#include "purelu/model.hpp"
#include "purelu/rng.hpp"

namespace purelu {
namespace {

TEST(Equilibrate, ParamValidation) {
  EquilParams p;
  p.alpha = 0.05;
  p.eta = 0.1;
  p.T_inner = 2;
  p.epsilon = 0.02;
  p.N = 100;
  EXPECT_NO_THROW(p.validate());
  EquilParams bad = p;
  bad.epsilon = 0;
  EXPECT_THROW(bad.validate(), BadParams);
  bad = p;
  bad.epsilon = 1.0;
  EXPECT_THROW(bad.validate(), BadParams);
  bad = p;
  bad.T_inner = 0;
  EXPECT_THROW(bad.validate(), BadParams);
  bad = p;
  bad.lambda0 = -1.0;
  EXPECT_THROW(bad.validate(), BadParams);
}

TEST(Equilibrate, SecondMomentEstimates) {
  ModelSpec spec;
  spec.ground_truth = DenseMatrix::identity(2);
  spec.weights = WeightDist::independent(
      {Marginal::bernoulli(0.5, 1.0), Marginal::bernoulli(0.5, 0.5)});
  const std::vector<double> m = estimate_second_moments(
      spec, spec.ground_truth, 1e-9, 20000, Rng(1, stream::kEstimate));
  ASSERT_EQ(m.size(), 2u);
  EXPECT_NEAR(m[0], 0.5, 0.02);    // E[w^2] = 0.5
  EXPECT_NEAR(m[1], 0.125, 0.01);  // E[w^2] = 0.5 * 0.25
}

ModelSpec two_group_spec(std::size_t seed = 91) {
  ModelSpec spec;
  spec.ground_truth =
      gen_ground_truth(GroundTruthKind::RandomNonnegUnitL1, 6, 4, seed);
  spec.weights = WeightDist::independent(
      {Marginal::bernoulli(0.3, 1.0), Marginal::bernoulli(0.3, 1.0),
       Marginal::bernoulli(0.3, 0.35), Marginal::bernoulli(0.3, 0.35)});
  spec.init.ell = 0.02;
  spec.init.e_sign = InitSpec::ESign::NonNegative;
  return spec;
}

EquilParams small_equil_params(std::uint64_t seed) {
  EquilParams p;
  p.alpha = 0.01;
  p.eta = 0.05;
  p.T_inner = 2;
  p.epsilon = 0.02;
  p.N = 2000;
  p.seed = seed;
  return p;
}

TEST(Equilibrate, ColumnUpdateEmptySelectionIsIdentity) {
  const ModelSpec spec = two_group_spec();
  const DenseMatrix a = spec.ground_truth;
  std::size_t ctr = 0;
  const DenseMatrix out = column_update(
      spec, a, 0.01, 0.05, std::vector<double>(4, 1.0), 3,
      std::vector<char>(4, 0), 500, Rng(1, stream::kEstimate), ctr);
  EXPECT_TRUE(out == a);
  EXPECT_EQ(ctr, 0u);  // no randomness consumed
}

TEST(Equilibrate, ColumnUpdateTouchesOnlySelected) {
  const ModelSpec spec = two_group_spec();
  const DenseMatrix a = spec.ground_truth;
  std::vector<char> sel(4, 0);
  sel[1] = 1;
  std::size_t ctr = 0;
  const DenseMatrix out =
      column_update(spec, a, 0.01, 0.05, std::vector<double>(4, 2.0), 2, sel,
                    500, Rng(2, stream::kEstimate), ctr);
  EXPECT_GT(ctr, 0u);
  bool changed = false;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    EXPECT_EQ(out(i, 0), a(i, 0));
    EXPECT_EQ(out(i, 2), a(i, 2));
    EXPECT_EQ(out(i, 3), a(i, 3));
    if (out(i, 1) != a(i, 1)) changed = true;
  }
  EXPECT_TRUE(changed);
}

TEST(Equilibrate, BalancesImbalancedMoments) {
  const ModelSpec spec = two_group_spec();
  const DenseMatrix a0 = gen_init(spec.ground_truth, spec.init,
                                  Rng(5, stream::kInit));
  const EquilParams p = small_equil_params(7);

  const std::vector<double> before = estimate_second_moments(
      spec, a0, p.alpha, 20000, Rng(77, stream::kAudit));
  const double ratio_before =
      *std::max_element(before.begin(), before.end()) /
      *std::min_element(before.begin(), before.end());
  EXPECT_GT(ratio_before, 4.0);

  const EquilResult res = equilibration(spec, a0, p);
  EXPECT_GT(res.passes, 0u);
  const std::vector<double> after = estimate_second_moments(
      spec, res.a, p.alpha, 20000, Rng(78, stream::kAudit));
  const double ratio_after = *std::max_element(after.begin(), after.end()) /
                             *std::min_element(after.begin(), after.end());
  EXPECT_LT(ratio_after, ratio_before / 2.0);
  EXPECT_LT(ratio_after, 2.5);

  // Scale factors only grow, and the early-settling columns grew the most.
  for (double dj : res.d) EXPECT_GE(dj, 1.0);
  EXPECT_GT(*std::max_element(res.d.begin(), res.d.end()), 1.0);

  // The log tracks a nonincreasing bar and nondecreasing settled set.
  for (std::size_t k = 1; k < res.log.size(); ++k) {
    EXPECT_LE(res.log[k].lambda, res.log[k - 1].lambda + 1e-15);
    EXPECT_GE(res.log[k].set_size, res.log[k - 1].set_size);
    EXPECT_EQ(res.log[k].pass, res.log[k - 1].pass + 1);
  }
  // The logged ratio compares true moments over d^2: imbalanced at entry,
  // within the factor-2 target at exit.
  ASSERT_FALSE(res.log.empty());
  EXPECT_GT(res.log.front().balance_ratio, 4.0);
  EXPECT_LE(res.log.back().balance_ratio, 2.0);
  EXPECT_GT(res.draws, 0u);
}

TEST(Equilibrate, AlreadyBalancedTerminatesQuickly) {
  ModelSpec spec = two_group_spec(92);
  spec.weights = WeightDist::bernoulli_uniform(4, 1.2);
  const DenseMatrix a0 = gen_init(spec.ground_truth, spec.init,
                                  Rng(6, stream::kInit));
  const EquilParams p = small_equil_params(8);
  const EquilResult res = equilibration(spec, a0, p);
  // The bar starts at max / 0.75 and everything settles within the first
  // few bar reductions.
  EXPECT_LT(res.passes, 25u);
  const std::vector<double> after = estimate_second_moments(
      spec, res.a, p.alpha, 20000, Rng(79, stream::kAudit));
  const double ratio = *std::max_element(after.begin(), after.end()) /
                       *std::min_element(after.begin(), after.end());
  EXPECT_LT(ratio, 2.0);
}

TEST(Equilibrate, PassBudgetEnforced) {
  const ModelSpec spec = two_group_spec();
  const DenseMatrix a0 = gen_init(spec.ground_truth, spec.init,
                                  Rng(9, stream::kInit));
  EquilParams p = small_equil_params(10);
  p.max_outer = 2;
  EXPECT_THROW(equilibration(spec, a0, p), MaxOuterExceeded);
}

TEST(Equilibrate, DeterministicAcrossRunsAndThreads) {
  const ModelSpec spec = two_group_spec();
  const DenseMatrix a0 = gen_init(spec.ground_truth, spec.init,
                                  Rng(11, stream::kInit));
  EquilParams p = small_equil_params(12);
  p.N = 600;
  const EquilResult r1 = equilibration(spec, a0, p, 1);
  const EquilResult r2 = equilibration(spec, a0, p, 1);
  const EquilResult r4 = equilibration(spec, a0, p, 4);
  EXPECT_TRUE(r1.a == r2.a);
  EXPECT_TRUE(r1.a == r4.a);
  EXPECT_EQ(r1.passes, r4.passes);
  EXPECT_EQ(r1.d, r4.d);
}

}  // namespace
}  // namespace purelu
