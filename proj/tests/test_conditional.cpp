#include "superbunch/conditional.hpp"
#include "superbunch/liouvillian.hpp"
#include "superbunch/steady_state.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace superbunch;

TEST(FirstClick, ThreeAtoms)
{
  const auto s = first_click_distribution(3);
  ASSERT_EQ(s.populations.size(), 4u);
  const double expected[] = {1.0 / 15, 2.0 / 15, 4.0 / 15, 8.0 / 15};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(s.populations[k], expected[k], 1e-15);
  EXPECT_NEAR(s.mean_excitation(), 34.0 / 15.0, 1e-14);
  EXPECT_EQ(s.scheme, ConditioningScheme::FirstClickNoTrans);
}

TEST(FirstClick, NormalizedAndRatioTwo)
{
  for (int n = 1; n <= 12; ++n) {
    const auto s = first_click_distribution(n);
    EXPECT_NEAR(std::accumulate(s.populations.begin(), s.populations.end(), 0.0), 1.0, 1e-14);
    for (int k = 1; k <= n; ++k) EXPECT_NEAR(s.populations[k] / s.populations[k - 1], 2.0, 1e-13);
    EXPECT_NEAR(s.rho_c.trace().real(), 1.0, 1e-14);
  }
}

TEST(FirstClick, AverageExcitation)
{
  EXPECT_NEAR(avg_excitation_after_first_click(1), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(avg_excitation_after_first_click(3), 34.0 / 15.0, 1e-14);
  EXPECT_NEAR(avg_excitation_after_first_click(10), 9.005374, 5e-7);
  for (int n = 1; n <= 12; ++n)
    EXPECT_NEAR(avg_excitation_after_first_click(n), first_click_distribution(n).mean_excitation(), 1e-12);
}

TEST(Schemes, Ordering)
{
  for (int n = 1; n <= 8; ++n) {
    const double any = conditional_any_click(n).mean_excitation();
    const double first = first_click_distribution(n).mean_excitation();
    const double full = fully_excited_conditional(n).mean_excitation();
    EXPECT_NEAR(any, n / 2.0, 1e-13);
    EXPECT_LT(any, first);
    EXPECT_LT(first, full);
    EXPECT_EQ(full, n);
  }
}

TEST(Schemes, Reflections)
{
  EXPECT_EQ(conditional_after_k_reflections(4, 1).populations[3], 1.0);
  EXPECT_EQ(conditional_after_k_reflections(4, 0).populations[4], 1.0);
  EXPECT_THROW(conditional_after_k_reflections(4, 5), std::invalid_argument);
  EXPECT_THROW(conditional_after_k_reflections(4, -1), std::invalid_argument);
  EXPECT_THROW(first_click_distribution(0), std::invalid_argument);
}

TEST(AnyClick, MatchesConditioningOfSteadyState)
{
  for (int n = 1; n <= 5; ++n)
    for (double g : {0.5, 1.0, 20.0}) {
      const auto p = SystemParams::from_g(n, 1.0, g);
      const CMatrix cond = condition_on_click(steady_rho(p).rho, p, Channel::R);
      const double tol = 1e-12 * std::max(1.0, std::pow(g, -2.0 * (n + 1)));
      EXPECT_LT(max_abs(CMatrix(cond - conditional_any_click(n).rho_c)), tol) << n << ' ' << g;
    }
}
