#ifndef SUPERBUNCH_DICKE_HPP
#define SUPERBUNCH_DICKE_HPP

#include "superbunch/numeric.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace superbunch {

// Detector channels. L watches the reflected field, R the transmitted one.
enum class Channel { L, R };

inline std::string_view to_string(Channel c) { return c == Channel::L ? "L" : "R"; }

inline Channel channel_from_string(std::string_view s)
{
  if (s == "L") return Channel::L;
  if (s == "R") return Channel::R;
  throw std::invalid_argument("unknown channel '" + std::string(s) + "'");
}

/// Symmetric (N+1)-dimensional Dicke subspace of N two-level atoms.
///
/// Basis index k counts EXCITED atoms, k = 0 is the ground state. The
/// ground-state-count label is p = N - k.
class DickeBasis {
public:
  explicit DickeBasis(int n_atoms) : n_atoms_(n_atoms)
  {
    if (n_atoms < 1 || n_atoms > kMaxAtoms)
      throw std::invalid_argument("DickeBasis: atom number must lie in [1, " +
                                  std::to_string(kMaxAtoms) + "], got " +
                                  std::to_string(n_atoms));
  }

  int n_atoms() const { return n_atoms_; }
  int dim() const { return n_atoms_ + 1; }

  int excited_from_ground_count(int p) const
  {
    check(p);
    return n_atoms_ - p;
  }

  int ground_count_from_excited(int k) const
  {
    check(k);
    return n_atoms_ - k;
  }

  friend bool operator==(const DickeBasis&, const DickeBasis&) = default;

private:
  void check(int i) const
  {
    if (i < 0 || i > n_atoms_) throw std::out_of_range("DickeBasis: index out of range");
  }

  int n_atoms_;
};

/// Physical parameters (N, gamma, Omega).
///
/// gamma is the decay rate into each waveguide direction and Omega the Rabi
/// frequency of the collective drive. The drive enters as the rate amplitude
/// alpha = i Omega / sqrt(gamma) and the normalised amplitude
/// g = alpha / sqrt(gamma) = i Omega / gamma.
class SystemParams {
public:
  SystemParams(int n_atoms, double gamma, double omega)
      : n_atoms_(n_atoms), gamma_(gamma), omega_(omega)
  {
    (void)DickeBasis{n_atoms};
    if (!(gamma > 0.0) || !std::isfinite(gamma))
      throw std::invalid_argument("SystemParams: gamma must be positive and finite");
    if (!(omega >= 0.0) || !std::isfinite(omega))
      throw std::invalid_argument("SystemParams: omega must be non-negative and finite");
  }

  /// Parameters from the effective drive amplitude Omega / (gamma sqrt(N)).
  static SystemParams from_effective_drive(int n_atoms, double gamma, double drive)
  {
    return SystemParams(n_atoms, gamma, drive * gamma * std::sqrt(static_cast<double>(n_atoms)));
  }

  /// Parameters from |g| = Omega / gamma.
  static SystemParams from_g(int n_atoms, double gamma, double g_abs)
  {
    return SystemParams(n_atoms, gamma, g_abs * gamma);
  }

  int n_atoms() const { return n_atoms_; }
  double gamma() const { return gamma_; }
  double omega() const { return omega_; }
  DickeBasis basis() const { return DickeBasis{n_atoms_}; }

  Complex g() const { return {0.0, omega_ / gamma_}; }
  Complex alpha() const { return {0.0, omega_ / std::sqrt(gamma_)}; }
  double g_abs() const { return omega_ / gamma_; }
  double g_abs_sq() const { return g_abs() * g_abs(); }
  /// Incoming photon flux |alpha|^2 = Omega^2 / gamma.
  double alpha_sq() const { return omega_ * omega_ / gamma_; }
  double effective_drive() const { return omega_ / (gamma_ * std::sqrt(static_cast<double>(n_atoms_))); }

private:
  int n_atoms_;
  double gamma_;
  double omega_;
};

enum class OperatorLabel { SMinus, SPlus, Sz, AOutL, AOutR, Identity };

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Matrix builders, generic in the scalar so that the oracles can run in
// extended precision. Entries come straight from the closed forms, never from
// products of single-atom operators.

/// S_- |k> = sqrt(k (N - k + 1)) |k - 1>  (k excited atoms).
template <typename Scalar = Complex>
Matrix<Scalar> lowering_matrix(int n_atoms)
{
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  using std::sqrt;
  const DickeBasis basis{n_atoms};
  Matrix<Scalar> m = Matrix<Scalar>::Zero(basis.dim(), basis.dim());
  for (int k = 1; k <= n_atoms; ++k) m(k - 1, k) = Scalar(sqrt(Real(k * (n_atoms - k + 1))));
  return m;
}

template <typename Scalar = Complex>
Matrix<Scalar> raising_matrix(int n_atoms)
{
  return lowering_matrix<Scalar>(n_atoms).adjoint();
}

/// S_z = diag(k - N/2).
template <typename Scalar = Complex>
Matrix<Scalar> sz_matrix(int n_atoms)
{
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  const DickeBasis basis{n_atoms};
  Matrix<Scalar> m = Matrix<Scalar>::Zero(basis.dim(), basis.dim());
  for (int k = 0; k <= n_atoms; ++k) m(k, k) = Scalar(Real(2 * k - n_atoms) / Real(2));
  return m;
}

/// Drive rate amplitude alpha in the requested scalar type (purely imaginary).
template <typename Scalar = Complex>
Scalar alpha_scalar(const SystemParams& p)
{
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  using std::sqrt;
  return Scalar(Real(0), Real(p.omega()) / sqrt(Real(p.gamma())));
}

/// Outgoing field operators restricted to the Dicke space:
/// a_L = sqrt(gamma) S_-,  a_R = alpha I + sqrt(gamma) S_-.
template <typename Scalar = Complex>
struct OutputMatrices {
  Matrix<Scalar> left;
  Matrix<Scalar> right;
};

template <typename Scalar = Complex>
OutputMatrices<Scalar> output_matrices(const SystemParams& p)
{
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  using std::sqrt;
  const Matrix<Scalar> sm = lowering_matrix<Scalar>(p.n_atoms());
  const Scalar root_gamma(sqrt(Real(p.gamma())));
  OutputMatrices<Scalar> out;
  out.left = root_gamma * sm;
  out.right = out.left;
  out.right.diagonal().array() += alpha_scalar<Scalar>(p);
  return out;
}

/// Drive Hamiltonian (Omega/2)(S_+ + S_-).
template <typename Scalar = Complex>
Matrix<Scalar> drive_hamiltonian(const SystemParams& p)
{
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  const Matrix<Scalar> sm = lowering_matrix<Scalar>(p.n_atoms());
  return Scalar(Real(p.omega()) / Real(2)) * (sm + sm.adjoint());
}

/// A labelled dense operator on the Dicke space.
struct CollectiveOperator {
  DickeBasis basis;
  OperatorLabel label;
  CMatrix matrix;
};

inline CollectiveOperator build_lowering(const DickeBasis& basis)
{
  return {basis, OperatorLabel::SMinus, lowering_matrix(basis.n_atoms())};
}

inline CollectiveOperator build_raising(const DickeBasis& basis)
{
  return {basis, OperatorLabel::SPlus, raising_matrix(basis.n_atoms())};
}

inline CollectiveOperator build_sz(const DickeBasis& basis)
{
  return {basis, OperatorLabel::Sz, sz_matrix(basis.n_atoms())};
}

inline CollectiveOperator build_identity(const DickeBasis& basis)
{
  return {basis, OperatorLabel::Identity, CMatrix::Identity(basis.dim(), basis.dim())};
}

struct OutputOperators {
  CollectiveOperator left;
  CollectiveOperator right;
};

inline OutputOperators build_output_ops(const SystemParams& params)
{
  auto m = output_matrices(params);
  return {{params.basis(), OperatorLabel::AOutL, std::move(m.left)},
          {params.basis(), OperatorLabel::AOutR, std::move(m.right)}};
}

/// Output operator for one detector channel.
inline CMatrix output_operator(const SystemParams& params, Channel channel)
{
  auto m = output_matrices(params);
  return channel == Channel::L ? m.left : m.right;
}

/// Populations <k|rho|k> over k = 0..N excited.
inline std::vector<double> populations(const CMatrix& rho)
{
  std::vector<double> pops(static_cast<std::size_t>(rho.rows()));
  for (Eigen::Index k = 0; k < rho.rows(); ++k) pops[static_cast<std::size_t>(k)] = rho(k, k).real();
  return pops;
}

} // namespace superbunch

#endif // SUPERBUNCH_DICKE_HPP
