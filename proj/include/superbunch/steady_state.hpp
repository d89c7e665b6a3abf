#ifndef SUPERBUNCH_STEADY_STATE_HPP
#define SUPERBUNCH_STEADY_STATE_HPP

#include "superbunch/dicke.hpp"
#include "superbunch/numeric.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace superbunch {

// Closed-form steady state of the driven Dicke model in the waveguide and
// the scattered-field quantities derived from it. Every finite sum over the
// coefficients H_r = C(N+r+1, 2r+1) (r!)^2 is carried out in log space.

/// log H_r for 0 <= r <= N.
inline double log_h_coefficient(int n_atoms, int r)
{
  if (r < 0 || r > n_atoms) throw std::out_of_range("log_h_coefficient: r outside [0, N]");
  return log_binomial(n_atoms + r + 1, 2 * r + 1) + 2.0 * log_factorial(r);
}

inline double h_coefficient(int n_atoms, int r) { return std::exp(log_h_coefficient(n_atoms, r)); }

namespace detail {

inline void require_positive_g(double g_abs, const char* where)
{
  if (!(g_abs > 0.0) || !std::isfinite(g_abs))
    throw std::domain_error(std::string(where) + ": requires a nonzero finite drive (|g| > 0)");
}

/// log sum_{r=lo}^{N} H_r |g|^{-2r}.
inline double log_h_tail(int n_atoms, double g_abs, int lo)
{
  std::vector<double> terms;
  const double log_g = std::log(g_abs);
  for (int r = std::max(lo, 0); r <= n_atoms; ++r)
    terms.push_back(log_h_coefficient(n_atoms, r) - 2.0 * r * log_g);
  return log_sum_exp(terms);
}

} // namespace detail

/// log D with D = sum_{r=0}^{N} C(N+r+1, 2r+1) (r!)^2 |g|^{-2r}.
inline double log_normalization_D(int n_atoms, double g_abs)
{
  (void)DickeBasis{n_atoms};
  detail::require_positive_g(g_abs, "normalization_D");
  return detail::log_h_tail(n_atoms, g_abs, 0);
}

inline double normalization_D(int n_atoms, double g_abs)
{
  const double d = std::exp(log_normalization_D(n_atoms, g_abs));
  if (!std::isfinite(d))
    throw std::overflow_error("normalization_D: D overflows double precision; use log_normalization_D");
  return d;
}

/// Weak-drive asymptote (N!)^2 |g|^{-2N}.
inline double normalization_D_weak(int n_atoms, double g_abs)
{
  detail::require_positive_g(g_abs, "normalization_D_weak");
  return std::exp(2.0 * log_factorial(n_atoms) - 2.0 * n_atoms * std::log(g_abs));
}

/// Strong-drive limit N + 1.
inline double normalization_D_strong(int n_atoms) { return n_atoms + 1.0; }

/// (N+1)/D and (D-(N+1))/D, the second computed without cancellation.
struct DRatios {
  double ground;  // (N+1)/D
  double excess;  // 1 - (N+1)/D
};

inline DRatios d_ratios(int n_atoms, double g_abs)
{
  const double log_d = log_normalization_D(n_atoms, g_abs);
  const double log_excess = detail::log_h_tail(n_atoms, g_abs, 1);
  return {std::exp(std::log(n_atoms + 1.0) - log_d), std::exp(log_excess - log_d)};
}

struct SteadyStateResult {
  CMatrix rho;
  double D;
  SystemParams params;
};

enum class ZeroDrivePolicy { Reject, GroundState };

/// rho = (1/D) sum_{m,n} (S_-/g*)^m (S_+/g)^n.
///
/// Assembled as B B^dagger / Tr(B B^dagger) with B = sum_m (S_-/g*)^m, which
/// is Hermitian and positive by construction. At Omega = 0 the state is the
/// ground state; it is only returned when explicitly requested.
inline SteadyStateResult steady_rho(const SystemParams& params,
                                    ZeroDrivePolicy zero_drive = ZeroDrivePolicy::Reject)
{
  const int n = params.n_atoms();
  const int dim = n + 1;
  if (params.omega() == 0.0) {
    if (zero_drive == ZeroDrivePolicy::Reject)
      throw std::domain_error("steady_rho: the closed-form steady state needs a nonzero drive; "
                              "pass ZeroDrivePolicy::GroundState to get the ground state");
    CMatrix rho = CMatrix::Zero(dim, dim);
    rho(0, 0) = 1.0;
    return {rho, std::numeric_limits<double>::infinity(), params};
  }
  const CMatrix step = lowering_matrix(n) / std::conj(params.g());
  CMatrix term = CMatrix::Identity(dim, dim);
  CMatrix b = term;
  for (int m = 1; m <= n; ++m) {
    term = (term * step).eval();
    b += term;
  }
  // Rescale before the product to keep B B^dagger finite at very weak drive.
  const double scale = max_abs(b);
  b /= scale;
  CMatrix rho = b * b.adjoint();
  const Complex tr = rho.trace();
  if (!std::isfinite(tr.real()) || tr.real() <= 0.0)
    throw std::overflow_error("steady_rho: steady state not representable at this drive");
  rho /= tr.real();
  rho = (0.5 * (rho + rho.adjoint())).eval();
  return {rho, normalization_D(n, params.g_abs()), params};
}

/// Value of <S_+^n S_-^m>; `nilpotent` flags n > N or m > N, where the
/// operator product vanishes identically.
struct Moment {
  Complex value;
  bool nilpotent;
};

/// <S_+^n S_-^m> = (1/D) sum_{r=max(n,m)}^{N} g^{n-r} (g*)^{m-r} H_r.
inline Moment expval_moment(const SystemParams& params, int n, int m)
{
  if (n < 0 || m < 0) throw std::invalid_argument("expval_moment: negative power");
  const int na = params.n_atoms();
  if (n > na || m > na) return {Complex{0.0, 0.0}, true};
  if (params.omega() == 0.0) return {Complex{(n == 0 && m == 0) ? 1.0 : 0.0, 0.0}, false};
  const double g_abs = params.g_abs();
  const double log_g = std::log(g_abs);
  std::vector<double> terms;
  for (int r = std::max(n, m); r <= na; ++r)
    terms.push_back((n + m - 2.0 * r) * log_g + log_h_coefficient(na, r));
  const double magnitude = std::exp(log_sum_exp(terms) - log_normalization_D(na, g_abs));
  return {unit_power(params.g() / g_abs, n - m) * magnitude, false};
}

/// <S_+> = g (1 - (N+1)/D).
inline Complex expval_s_plus(const SystemParams& params)
{
  if (params.omega() == 0.0) return {0.0, 0.0};
  return params.g() * d_ratios(params.n_atoms(), params.g_abs()).excess;
}

/// <S_+ S_-> = |g|^2 (1 - (N+1)/D).
inline double expval_s_plus_s_minus(const SystemParams& params)
{
  if (params.omega() == 0.0) return 0.0;
  return params.g_abs_sq() * d_ratios(params.n_atoms(), params.g_abs()).excess;
}

/// <S_+^n S_-^n> = (|g|^{2n}/D) sum_{r=n}^{N} |g|^{-2r} H_r; zero for n > N.
inline double expval_s_plus_n_s_minus_n(const SystemParams& params, int n)
{
  return expval_moment(params, n, n).value.real();
}

struct ScatteredRates {
  double n_ref;
  double n_trans;
  double n_ref_coh;
  double n_trans_coh;
  double n_inc;
};

/// Photon fluxes into the reflected (L) and transmitted (R) directions.
inline ScatteredRates scattered_rates(const SystemParams& params)
{
  if (params.omega() == 0.0) return {0.0, 0.0, 0.0, 0.0, 0.0};
  const auto [q, c] = d_ratios(params.n_atoms(), params.g_abs());
  const double flux = params.gamma() * params.g_abs_sq();
  return {flux * c, flux * q, flux * c * c, flux * q * q, flux * q * c};
}

/// Leading-order fluxes for |g| << 1 and |g| >> 1.
struct RateAsymptotes {
  double weak_n_ref;
  double weak_n_trans;
  double weak_n_ref_coh;
  double weak_n_trans_coh;
  double weak_n_inc;
  double strong_n_ref;
  double strong_n_trans;
  double strong_n_ref_coh;
  double strong_n_trans_coh;
  double strong_n_inc;
};

inline RateAsymptotes rate_asymptotes(const SystemParams& params)
{
  const int n = params.n_atoms();
  const double gamma = params.gamma();
  const double g2 = params.g_abs_sq();
  const double log_g2 = std::log(g2);
  const double lf = log_factorial(n);
  const double weak_inc = gamma * std::exp((n + 1) * log_g2 - 2.0 * lf) * (n + 1);
  const double weak_coh =
      gamma * std::exp((2 * n + 1) * log_g2 - 4.0 * lf) * (n + 1.0) * (n + 1.0);
  const double strong_inc = gamma * n * (n + 2.0) / 6.0;
  const double ref_coh_amp = (n + 2.0) * n / (6.0 * params.g_abs());
  return {gamma * g2,     weak_inc,
          gamma * g2,     weak_coh,
          weak_inc,       strong_inc,
          gamma * g2,     gamma * ref_coh_amp * ref_coh_amp,
          gamma * g2,     strong_inc};
}

/// log G^{(n)}_trans(0).
///
/// The double binomial sum over <S_+^k S_-^j> collapses, using
/// sum_{k<=r} C(n,k)(-1)^k = (-1)^r C(n-1, r), to the positive series
///   G^{(n)} = (gamma^n |g|^{2n} / D) sum_{r=0}^{min(n-1, N)} C(n-1, r)^2 H_r |g|^{-2r},
/// valid on both sides of n = N and free of the cancellations that make the
/// raw double sum lose all digits at weak drive.
inline double log_correlation_trans(const SystemParams& params, int n)
{
  if (n < 1) throw std::invalid_argument("correlation_trans: order must be >= 1");
  if (params.omega() == 0.0) return kNegInf;
  const int na = params.n_atoms();
  const double log_g = std::log(params.g_abs());
  std::vector<double> terms;
  for (int r = 0; r <= std::min(n - 1, na); ++r)
    terms.push_back(2.0 * log_binomial(n - 1, r) + log_h_coefficient(na, r) - 2.0 * r * log_g);
  return n * std::log(params.gamma()) + 2.0 * n * log_g + log_sum_exp(terms) -
         log_normalization_D(na, params.g_abs());
}

inline double correlation_trans(const SystemParams& params, int n)
{
  return std::exp(log_correlation_trans(params, n));
}

/// G^{(n)}_trans(0) by the literal binomial expansion
///   gamma^n |g|^{2n} sum_{k,j} C(n,k) C(n,j) (g*)^{-k} g^{-j} <S_+^k S_-^j>.
/// Kept as an independent route; it cancels catastrophically at weak drive.
inline double correlation_trans_double_sum(const SystemParams& params, int n)
{
  if (n < 1) throw std::invalid_argument("correlation_trans: order must be >= 1");
  if (params.omega() == 0.0) return 0.0;
  const int top = std::min(n, params.n_atoms());
  const Complex g = params.g();
  Complex acc{0.0, 0.0};
  for (int k = 0; k <= top; ++k) {
    for (int j = 0; j <= top; ++j) {
      const Complex coeff = binomial(n, k) * binomial(n, j) * std::pow(std::conj(g), -k) * std::pow(g, -j);
      acc += coeff * expval_moment(params, k, j).value;
    }
  }
  return std::pow(params.gamma(), n) * std::pow(params.g_abs(), 2 * n) * acc.real();
}

/// log G^{(n)}_ref(0) = log(gamma^n <S_+^n S_-^n>); -inf for n > N.
inline double log_correlation_ref(const SystemParams& params, int n)
{
  if (n < 1) throw std::invalid_argument("correlation_ref: order must be >= 1");
  const int na = params.n_atoms();
  if (n > na || params.omega() == 0.0) return kNegInf;
  const double g_abs = params.g_abs();
  return n * std::log(params.gamma()) + 2.0 * n * std::log(g_abs) + detail::log_h_tail(na, g_abs, n) -
         log_normalization_D(na, g_abs);
}

inline double correlation_ref(const SystemParams& params, int n)
{
  return std::exp(log_correlation_ref(params, n));
}

inline double correlation(const SystemParams& params, int n, Channel channel)
{
  return channel == Channel::R ? correlation_trans(params, n) : correlation_ref(params, n);
}

/// Weak-drive leading order of G^{(n)}_trans(0):
///   n <= N: gamma^n |g|^{2(N+1)} C(N+n, 2n-1) [(n-1)!/N!]^2
///   n >  N: gamma^n |g|^{2n} C(n-1, N)^2
inline double correlation_trans_weak(const SystemParams& params, int n)
{
  if (n < 1) throw std::invalid_argument("correlation_trans_weak: order must be >= 1");
  const int na = params.n_atoms();
  const double log_g2 = std::log(params.g_abs_sq());
  const double log_gamma_n = n * std::log(params.gamma());
  if (n <= na)
    return std::exp(log_gamma_n + (na + 1) * log_g2 + log_binomial(na + n, 2 * n - 1) +
                    2.0 * (log_factorial(n - 1) - log_factorial(na)));
  return std::exp(log_gamma_n + n * log_g2 + 2.0 * log_binomial(n - 1, na));
}

/// Strong-drive leading order gamma^n |g|^{2n}.
inline double correlation_trans_strong(const SystemParams& params, int n)
{
  return std::pow(params.gamma(), n) * std::pow(params.g_abs_sq(), n);
}

/// Weak-drive leading order gamma^n |g|^{2n} for n <= N, zero beyond.
inline double correlation_ref_weak(const SystemParams& params, int n)
{
  if (n > params.n_atoms()) return 0.0;
  return std::pow(params.gamma(), n) * std::pow(params.g_abs_sq(), n);
}

/// Strong-drive limit gamma^n C(N+n+1, 2n+1) (n!)^2 / (N+1) for n <= N.
inline double correlation_ref_strong(const SystemParams& params, int n)
{
  const int na = params.n_atoms();
  if (n > na) return 0.0;
  return std::pow(params.gamma(), n) * std::exp(log_h_coefficient(na, n)) / (na + 1.0);
}

/// Normalised zero-delay coherence g^{(n)}(0) = G^{(n)} / (G^{(1)})^n.
inline double coherence_g_n(const SystemParams& params, int n, Channel channel)
{
  if (n < 1) throw std::invalid_argument("coherence_g_n: order must be >= 1");
  const double log_g1 = channel == Channel::R ? log_correlation_trans(params, 1)
                                             : log_correlation_ref(params, 1);
  if (!std::isfinite(log_g1) || log_g1 < -700.0)
    throw std::underflow_error("coherence_g_n: first-order correlation vanishes or underflows");
  const double log_gn = channel == Channel::R ? log_correlation_trans(params, n)
                                             : log_correlation_ref(params, n);
  return std::exp(log_gn - n * log_g1);
}

/// Weak-drive transmitted coherence; both branches of the closed form.
inline double coherence_trans_weak(const SystemParams& params, int n)
{
  const int na = params.n_atoms();
  const double log_g2 = std::log(params.g_abs_sq());
  const double lf = log_factorial(na);
  const double log_np1 = std::log(na + 1.0);
  if (n <= na)
    return std::exp(-(na + 1.0) * (n - 1) * log_g2 + log_binomial(na + n, 2 * n - 1) +
                    2.0 * log_factorial(n - 1) - n * log_np1 + 2.0 * (n - 1) * lf);
  return std::exp(-static_cast<double>(na) * n * log_g2 + 2.0 * log_binomial(n - 1, na) +
                  2.0 * n * lf - n * log_np1);
}

/// Strong-drive reflected coherence C(N+n+1, 2n+1) (n!)^2/(N+1) [6/(N(N+2))]^n.
inline double coherence_ref_strong(int n_atoms, int n)
{
  if (n > n_atoms) return 0.0;
  return std::exp(log_h_coefficient(n_atoms, n) - std::log(n_atoms + 1.0) +
                  n * std::log(6.0 / (n_atoms * (n_atoms + 2.0))));
}

} // namespace superbunch

#endif // SUPERBUNCH_STEADY_STATE_HPP
