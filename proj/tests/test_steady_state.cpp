#include "superbunch/liouvillian.hpp"
#include "superbunch/steady_state.hpp"

#include <gtest/gtest.h>

using namespace superbunch;

TEST(Normalization, ExactValues)
{
  EXPECT_NEAR(normalization_D(1, 1.0), 3.0, 1e-14);
  EXPECT_NEAR(normalization_D(2, 0.1), 40403.0, 40403.0 * 1e-13);
  EXPECT_NEAR(normalization_D(3, 1.0), 4.0 + 10.0 + 24.0 + 36.0, 1e-12);
  EXPECT_THROW(normalization_D(2, 0.0), std::domain_error);
}

TEST(Normalization, Asymptotes)
{
  EXPECT_NEAR(normalization_D(2, 0.1) / normalization_D_weak(2, 0.1), 1.0, 0.011);
  EXPECT_NEAR(normalization_D(3, 1e-3) / normalization_D_weak(3, 1e-3), 1.0, 1e-5);
  EXPECT_NEAR(normalization_D(4, 1e4) / normalization_D_strong(4), 1.0, 1e-6);
}

TEST(Normalization, RatiosAvoidCancellation)
{
  const auto r = d_ratios(3, 1e3);
  EXPECT_NEAR(r.ground + r.excess, 1.0, 1e-14);
  EXPECT_GT(r.excess, 0.0);
  EXPECT_LT(r.excess, 1e-5);
}

TEST(SteadyRho, TraceHermitianPositive)
{
  for (int n = 1; n <= 6; ++n)
    for (double g : {0.01, 0.3, 1.0, 30.0}) {
      const CMatrix rho = steady_rho(SystemParams::from_g(n, 1.0, g)).rho;
      EXPECT_NEAR(rho.trace().real(), 1.0, 1e-13);
      EXPECT_LT(max_abs(CMatrix(rho - rho.adjoint())), 1e-15);
      Eigen::SelfAdjointEigenSolver<CMatrix> es(rho);
      EXPECT_GT(es.eigenvalues().minCoeff(), -1e-14);
    }
}

TEST(SteadyRho, ZeroDrivePolicy)
{
  const SystemParams p(2, 1.0, 0.0);
  EXPECT_THROW(steady_rho(p), std::domain_error);
  const CMatrix rho = steady_rho(p, ZeroDrivePolicy::GroundState).rho;
  EXPECT_EQ(rho(0, 0), Complex(1.0, 0.0));
}

TEST(SteadyRho, MatchesDenseNullSpace)
{
  for (int n = 1; n <= 4; ++n)
    for (double g : {0.2, 1.0, 4.0}) {
      const auto p = SystemParams::from_g(n, 1.0, g);
      const auto numeric = steady_state_numeric(build_liouvillian(p));
      EXPECT_LT(max_abs(CMatrix(numeric.rho - steady_rho(p).rho)), 1e-12) << n << ' ' << g;
    }
}

TEST(Moments, MatchTraces)
{
  for (int n = 1; n <= 4; ++n)
    for (double g : {0.3, 1.0, 3.0}) {
      const auto p = SystemParams::from_g(n, 1.0, g);
      const CMatrix rho = steady_rho(p).rho;
      const CMatrix sm = lowering_matrix(n), sp = raising_matrix(n);
      for (int a = 0; a <= n + 1; ++a)
        for (int b = 0; b <= n + 1; ++b) {
          const Moment m = expval_moment(p, a, b);
          const Complex direct = (CMatrix(matrix_power(sp, a) * matrix_power(sm, b)) * rho).trace();
          EXPECT_EQ(m.nilpotent, a > n || b > n);
          EXPECT_LT(std::abs(direct - m.value), 1e-12 * std::max(1.0, std::abs(m.value)));
        }
    }
}

TEST(Moments, SingleAtomValues)
{
  const auto p = SystemParams::from_g(1, 1.0, 1.0);
  EXPECT_NEAR(expval_s_plus_s_minus(p), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(std::abs(expval_s_plus(p)), 1.0 / 3.0, 1e-15);
}

TEST(Rates, BalanceOverLogGrid)
{
  for (int n = 1; n <= 8; ++n)
    for (double lg = -3.0; lg <= 3.0; lg += 0.25) {
      const auto p = SystemParams::from_g(n, 1.3, std::pow(10.0, lg));
      const auto r = scattered_rates(p);
      const double in = p.alpha_sq();
      EXPECT_NEAR((r.n_ref + r.n_trans) / in, 1.0, 1e-12);
      EXPECT_NEAR(r.n_ref_coh + r.n_inc, r.n_ref, 1e-12 * r.n_ref);
      EXPECT_NEAR(r.n_trans_coh + r.n_inc, r.n_trans, 1e-12 * std::max(r.n_trans, 1e-300));
      EXPECT_GE(r.n_inc, 0.0);
    }
}

TEST(Rates, WeakDriveAsymptotes)
{
  for (int n = 1; n <= 4; ++n) {
    const auto p = SystemParams::from_g(n, 1.0, 1e-3);
    const auto r = scattered_rates(p);
    const auto a = rate_asymptotes(p);
    EXPECT_NEAR(r.n_ref / a.weak_n_ref, 1.0, 1e-3);
    EXPECT_NEAR(r.n_trans / a.weak_n_trans, 1.0, 1e-3);
    EXPECT_NEAR(r.n_inc / a.weak_n_inc, 1.0, 1e-3);
    EXPECT_NEAR(r.n_trans_coh / a.weak_n_trans_coh, 1.0, 1e-3);
  }
}

TEST(Rates, StrongDriveAsymptotes)
{
  const auto p = SystemParams::from_g(3, 1.0, 100.0);
  const auto r = scattered_rates(p);
  EXPECT_NEAR(r.n_ref, 2.5, 0.025);
  EXPECT_NEAR(r.n_ref / rate_asymptotes(p).strong_n_ref, 1.0, 0.01);
  EXPECT_NEAR(r.n_ref_coh / rate_asymptotes(p).strong_n_ref_coh, 1.0, 0.01);
}

TEST(Correlations, ResummedEqualsDoubleSum)
{
  for (int n = 1; n <= 4; ++n)
    for (double g : {0.7, 1.0, 2.0, 10.0}) {
      const auto p = SystemParams::from_g(n, 1.0, g);
      for (int k = 1; k <= n + 3; ++k)
        EXPECT_NEAR(correlation_trans_double_sum(p, k) / correlation_trans(p, k), 1.0, 1e-9) << n << g << k;
    }
}

TEST(Correlations, MatchOperatorTraces)
{
  for (int n = 1; n <= 4; ++n)
    for (double g : {0.5, 1.0, 3.0}) {
      const auto p = SystemParams::from_g(n, 1.0, g);
      const CMatrix rho = steady_rho(p).rho;
      const auto ops = output_matrices(p);
      for (int k = 1; k <= n + 2; ++k) {
        const CMatrix ar = matrix_power(ops.right, k), al = matrix_power(ops.left, k);
        EXPECT_NEAR((ar * rho * ar.adjoint()).trace().real() / correlation_trans(p, k), 1.0, 1e-10);
        const double gl = (al * rho * al.adjoint()).trace().real();
        if (k > n)
          EXPECT_EQ(correlation_ref(p, k), 0.0);
        else
          EXPECT_NEAR(gl / correlation_ref(p, k), 1.0, 1e-10);
      }
    }
}

TEST(Correlations, WeakAndStrongLimits)
{
  for (int n = 1; n <= 4; ++n) {
    const auto weak = SystemParams::from_g(n, 1.0, 1e-3);
    const auto strong = SystemParams::from_g(n, 1.0, 1e3);
    for (int k = 1; k <= n + 2; ++k) {
      EXPECT_NEAR(correlation_trans(weak, k) / correlation_trans_weak(weak, k), 1.0, 1e-2) << n << k;
      EXPECT_NEAR(correlation_trans(strong, k) / correlation_trans_strong(strong, k), 1.0, 1e-2);
    }
    for (int k = 1; k <= n; ++k) {
      EXPECT_NEAR(correlation_ref(weak, k) / correlation_ref_weak(weak, k), 1.0, 1e-2);
      EXPECT_NEAR(correlation_ref(strong, k) / correlation_ref_strong(strong, k), 1.0, 1e-2);
    }
  }
}

TEST(Coherence, SingleAtomTransmission)
{
  const auto p = SystemParams::from_g(1, 1.0, 0.1);
  const double g2 = coherence_g_n(p, 2, Channel::R);
  EXPECT_NEAR(g2, 2601.0, 1e-6 * 2601.0);
  EXPECT_NEAR(g2 / 2500.0, 1.0, 0.05);
  EXPECT_NEAR(coherence_trans_weak(p, 2), 2500.0, 1e-9);
}

TEST(Coherence, OrderOneIsUnity)
{
  for (Channel c : {Channel::L, Channel::R})
    EXPECT_NEAR(coherence_g_n(SystemParams::from_g(3, 1.0, 0.4), 1, c), 1.0, 1e-14);
}

TEST(Coherence, StrongReflection)
{
  for (int n = 1; n <= 4; ++n)
    for (int k = 1; k <= n; ++k)
      EXPECT_NEAR(coherence_g_n(SystemParams::from_g(n, 1.0, 1e4), k, Channel::L) / coherence_ref_strong(n, k), 1.0,
                  1e-3);
}

TEST(Coherence, TransmittedSuperbunchingGrowsAtWeakDrive)
{
  const auto a = coherence_g_n(SystemParams::from_g(3, 1.0, 0.1), 4, Channel::R);
  const auto b = coherence_g_n(SystemParams::from_g(3, 1.0, 0.05), 4, Channel::R);
  EXPECT_GT(b, a);
  EXPECT_GT(a, 1e20);
}
