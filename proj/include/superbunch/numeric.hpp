#ifndef SUPERBUNCH_NUMERIC_HPP
#define SUPERBUNCH_NUMERIC_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace superbunch {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// Largest atom number accepted anywhere in the library. The dense steady
// state holds entries of order (N!)|g|^{-N}, which leave double range soon
// after this for any drive worth simulating.
inline constexpr int kMaxAtoms = 28;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_factorial(int n)
{
  if (n < 0) throw std::domain_error("log_factorial: negative argument");
  return std::lgamma(static_cast<double>(n) + 1.0);
}

/// log C(n, k); -inf outside 0 <= k <= n.
inline double log_binomial(int n, int k)
{
  if (k < 0 || n < 0 || k > n) return kNegInf;
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

/// C(n, k) by the multiplicative formula; exact while the result fits 2^53.
inline double binomial(int n, int k)
{
  if (k < 0 || n < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double result = 1.0;
  for (int i = 1; i <= k; ++i) result = result * (n - k + i) / i;
  return std::round(result);
}

inline double factorial(int n) { return std::round(std::exp(log_factorial(n))); }

inline double harmonic_number(int n)
{
  double h = 0.0;
  for (int k = n; k >= 1; --k) h += 1.0 / k;
  return h;
}

/// log(sum_i exp(x_i)), stable for widely spread exponents. Empty -> -inf.
inline double log_sum_exp(std::span<const double> terms)
{
  double top = kNegInf;
  for (double x : terms) top = std::max(top, x);
  if (top == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double x : terms) acc += std::exp(x - top);
  return top + std::log(acc);
}

/// log Pr(X = k) for X ~ Poisson(lambda).
inline double poisson_log_pmf(int k, double lambda)
{
  if (k < 0) return kNegInf;
  if (lambda == 0.0) return k == 0 ? 0.0 : kNegInf;
  return k * std::log(lambda) - lambda - log_factorial(k);
}

/// Exact integer powers of a unit complex number (keeps i^k free of
/// cos(pi/2) rounding noise).
inline Complex unit_power(Complex u, int k)
{
  if (k < 0) {
    u = std::conj(u);
    k = -k;
  }
  Complex r{1.0, 0.0};
  for (int i = 0; i < k; ++i) r *= u;
  return r;
}

/// Largest absolute entry; works for any Eigen expression.
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m)
{
  return m.size() == 0 ? 0.0 : static_cast<double>(m.cwiseAbs().maxCoeff());
}

/// m^k by repeated multiplication, k >= 0.
template <typename Derived>
typename Derived::PlainObject matrix_power(const Eigen::MatrixBase<Derived>& m, int k)
{
  if (k < 0) throw std::invalid_argument("matrix_power: negative exponent");
  using Plain = typename Derived::PlainObject;
  Plain r = Plain::Identity(m.rows(), m.cols());
  for (int i = 0; i < k; ++i) r = (r * m).eval();
  return r;
}

} // namespace superbunch

#endif // SUPERBUNCH_NUMERIC_HPP
