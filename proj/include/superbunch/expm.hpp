#ifndef SUPERBUNCH_EXPM_HPP
#define SUPERBUNCH_EXPM_HPP

#include <Eigen/Dense>

#include <stdexcept>

namespace superbunch {

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// Generic in the scalar type so that the same routine serves the double
/// precision timescale code and the multiprecision oracles; Eigen's own
/// MatrixFunctions module only covers float, double and long double.
/// The argument is scaled to 1-norm <= 1/2, where the Taylor remainder after
/// m terms is bounded by 2^{-m}/m!, and the series is summed until the next
/// term falls below machine epsilon of the scalar type.
template <typename Derived>
typename Derived::PlainObject expm(const Eigen::MatrixBase<Derived>& a)
{
  using Plain = typename Derived::PlainObject;
  using Scalar = typename Derived::Scalar;
  using Real = typename Eigen::NumTraits<Scalar>::Real;

  if (a.rows() != a.cols()) throw std::invalid_argument("expm: matrix must be square");
  const Eigen::Index n = a.rows();
  if (n == 0) return Plain(0, 0);

  Real norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  const Real half(0.5);
  while (norm > half) {
    norm /= Real(2);
    ++squarings;
  }

  Plain x = a;
  Real scale(1);
  for (int i = 0; i < squarings; ++i) scale *= Real(2);
  x /= Scalar(scale);

  const Real eps = Eigen::NumTraits<Real>::epsilon();
  Plain result = Plain::Identity(n, n);
  Plain term = Plain::Identity(n, n);
  for (int k = 1; k < 400; ++k) {
    term = (term * x).eval();
    term /= Scalar(Real(k));
    result += term;
    const Real term_norm = term.cwiseAbs().colwise().sum().maxCoeff();
    if (term_norm <= eps * Real(1e-2)) break;
  }
  for (int i = 0; i < squarings; ++i) result = (result * result).eval();
  return result;
}

} // namespace superbunch

#endif // SUPERBUNCH_EXPM_HPP
