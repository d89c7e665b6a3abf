#ifndef SUPERBUNCH_VERIFY_HPP
#define SUPERBUNCH_VERIFY_HPP

#include "superbunch/bunches.hpp"
#include "superbunch/conditional.hpp"
#include "superbunch/experiment.hpp"
#include "superbunch/liouvillian.hpp"
#include "superbunch/steady_state.hpp"
#include "superbunch/timescales.hpp"
#include "superbunch/trajectory.hpp"

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace superbunch {

// Self-check suite run by the `verify` command: analytics against the dense
// Liouvillian, trajectories against analytics, the relaxation CDF against the
// master equation and the bunch model fit against its own samples.

enum class VerifyLevel { Quick, Full };

struct VerifyOptions {
  VerifyLevel level = VerifyLevel::Quick;
  bool canary = false; // flip the sign of S_z to prove the suite can fail
  std::uint64_t seed = 20240611;
};

struct CheckResult {
  std::string name;
  bool passed;
  std::string detail;
};

struct AlgebraResiduals {
  double plus_minus; // |[S+,S-] - 2 Sz|
  double z_plus;     // |[Sz,S+] - S+|
  double z_minus;    // |[Sz,S-] + S-|
};

inline AlgebraResiduals algebra_residuals(int n_atoms, const CMatrix& sz)
{
  const CMatrix sm = lowering_matrix(n_atoms);
  const CMatrix sp = raising_matrix(n_atoms);
  return {max_abs(CMatrix(sp * sm - sm * sp - 2.0 * sz)), max_abs(CMatrix(sz * sp - sp * sz - sp)),
          max_abs(CMatrix(sz * sm - sm * sz + sm))};
}

namespace detail {

inline std::string fmt(double v)
{
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

inline CheckResult check_algebra(const VerifyOptions& o)
{
  const int n_max = o.level == VerifyLevel::Full ? 12 : 6;
  double worst = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    CMatrix sz = sz_matrix(n);
    if (o.canary) sz = -sz;
    const auto r = algebra_residuals(n, sz);
    worst = std::max({worst, r.plus_minus, r.z_plus, r.z_minus});
  }
  return {"commutators [S+,S-]=2Sz, [Sz,S+-]=+-S+-", worst < 1e-12, "max residual " + fmt(worst)};
}

inline CheckResult check_identity(const VerifyOptions& o)
{
  const int n_max = o.level == VerifyLevel::Full ? 5 : 3;
  double worst = 0.0;
  for (int n = 1; n <= n_max; ++n)
    for (double g : {0.1, 1.0, 5.0}) {
      const auto p = SystemParams::from_g(n, 1.0, g);
      worst = std::max(worst, max_abs(CMatrix(build_liouvillian(p).matrix - doubled_transmission_dissipator(p))));
    }
  return {"full generator equals 2 D(a_R)", worst <= 1e-12, "max residual " + fmt(worst)};
}

inline CheckResult check_steady_state(const VerifyOptions& o)
{
  const int n_max = o.level == VerifyLevel::Full ? 5 : 3;
  double worst_rho = 0.0, worst_moment = 0.0, worst_corr = 0.0;
  for (int n = 1; n <= n_max; ++n)
    for (double g : {0.5, 1.0, 5.0}) {
      const auto p = SystemParams::from_g(n, 1.0, g);
      const CMatrix rho = steady_state_numeric(build_liouvillian(p)).rho;
      worst_rho = std::max(worst_rho, max_abs(CMatrix(rho - steady_rho(p).rho)));
      const CMatrix sm = lowering_matrix(n);
      const CMatrix sp = raising_matrix(n);
      for (int a = 0; a <= n; ++a)
        for (int b = 0; b <= n; ++b) {
          const Complex direct = (CMatrix(matrix_power(sp, a) * matrix_power(sm, b)) * rho).trace();
          const Moment m = expval_moment(p, a, b);
          worst_moment = std::max(worst_moment, std::abs(direct - m.value) / std::max(std::abs(m.value), 1e-12));
        }
      if (g < 1.0) continue;
      const auto ops = output_matrices(p);
      for (int k = 1; k <= n + 2; ++k) {
        const CMatrix ar = matrix_power(ops.right, k);
        const double direct = (ar * rho * ar.adjoint()).trace().real();
        worst_corr = std::max(worst_corr, rel_err(direct, correlation_trans(p, k)));
      }
    }
  const bool ok = worst_rho <= 1e-10 && worst_moment <= 1e-9 && worst_corr <= 1e-9;
  return {"closed-form steady state, moments and G(n) vs dense null space", ok,
          "rho " + fmt(worst_rho) + ", moments " + fmt(worst_moment) + ", G(n) " + fmt(worst_corr)};
}

inline CheckResult check_relaxation_cdf(const VerifyOptions& o)
{
  const int n_max = o.level == VerifyLevel::Full ? 5 : 3;
  double worst = 0.0;
  for (int n = 1; n <= n_max; ++n) {
    const SystemParams p(n, 1.0, 0.0);
    const auto s = build_liouvillian(p);
    const auto model = hypoexp_model(n);
    CMatrix rho = CMatrix::Zero(n + 1, n + 1);
    rho(n, n) = 1.0;
    const double dt = std::min(1e-3, max_time_step(s));
    for (int step = 1; step <= 20; ++step) {
      rho = time_evolve(s, rho, 0.5, dt);
      worst = std::max(worst, std::abs(rho(0, 0).real() - hypoexp_cdf(model, 0.5 * step)));
    }
  }
  return {"relaxation CDF vs master-equation ground population", worst <= 1e-6, "max deviation " + fmt(worst)};
}

inline CheckResult check_trajectory_rates(const VerifyOptions& o)
{
  const bool full = o.level == VerifyLevel::Full;
  std::vector<int> atoms = full ? std::vector<int>{1, 2, 3} : std::vector<int>{2};
  std::vector<double> drives = full ? std::vector<double>{0.3, 1.0} : std::vector<double>{1.0};
  double worst_sigma = 0.0;
  for (int n : atoms)
    for (double d : drives) {
      TrajectoryConfig c;
      c.params = SystemParams::from_effective_drive(n, 1.0, d);
      c.t_end = full ? 210.0 : 60.0;
      c.burn_in = 10.0;
      c.seed = o.seed;
      c.n_trajectories = full ? 2000 : 200;
      const auto measured = measure_click_rates(run_batch(c));
      const auto exact = scattered_rates(c.params);
      worst_sigma = std::max(worst_sigma, std::abs(measured.right.rate - exact.n_trans) / measured.right.std_error);
      worst_sigma = std::max(worst_sigma, std::abs(measured.left.rate - exact.n_ref) / measured.left.std_error);
    }
  return {"trajectory click rates vs exact rates", worst_sigma <= 4.0, "worst deviation " + fmt(worst_sigma) + " sigma"};
}

inline CheckResult check_model_fit(const VerifyOptions& o)
{
  const int n = 3;
  const double t_in_true = 0.37, t_out_true = 0.93;
  const std::vector<double> drives{0.3, 0.5, 0.75, 1.0, 1.5};
  std::vector<BunchHistogram> hs;
  Philox4x32 rng(o.seed, 7);
  const std::size_t samples = o.level == VerifyLevel::Full ? 400000 : 100000;
  for (double d : drives)
    hs.push_back(synthetic_histogram({n, alpha_sq_from_drive(n, d), t_in_true, t_out_true}, d, samples, rng));
  const auto fit = fit_timescales(hs, n);
  const double err = std::max(rel_err(fit.t_in_hat, t_in_true), rel_err(fit.t_out_hat, t_out_true));
  return {"bunch model round trip", err <= 0.02,
          "fitted (" + fmt(fit.t_in_hat) + ", " + fmt(fit.t_out_hat) + "), max rel error " + fmt(err)};
}

} // namespace detail

inline std::vector<CheckResult> run_verification(const VerifyOptions& o = {})
{
  std::vector<CheckResult> out;
  auto guarded = [&](const char* name, auto&& fn) {
    try {
      out.push_back(fn(o));
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("exception: ") + e.what()});
    }
  };
  guarded("algebra", detail::check_algebra);
  guarded("identity", detail::check_identity);
  guarded("steady state", detail::check_steady_state);
  guarded("relaxation cdf", detail::check_relaxation_cdf);
  guarded("trajectory rates", detail::check_trajectory_rates);
  guarded("model fit", detail::check_model_fit);
  return out;
}

/// Checks that a simulate output directory is complete and single-manifest.
inline CheckResult verify_inputs(const std::filesystem::path& dir)
{
  try {
    const auto e = load_experiment(dir);
    std::size_t clicks = 0;
    for (const auto& s : e.streams) clicks += s.clicks.size();
    return {"inputs " + dir.string(), true,
            "manifest " + e.manifest_hash + ", " + std::to_string(e.streams.size()) + " drive points, " +
                std::to_string(clicks) + " clicks"};
  } catch (const std::exception& ex) {
    return {"inputs " + dir.string(), false, ex.what()};
  }
}

} // namespace superbunch

#endif // SUPERBUNCH_VERIFY_HPP
