#ifndef SUPERBUNCH_LIOUVILLIAN_HPP
#define SUPERBUNCH_LIOUVILLIAN_HPP

#include "superbunch/dicke.hpp"
#include "superbunch/expm.hpp"

#include <Eigen/LU>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

namespace superbunch {

// Brute-force Lindblad machinery on the (N+1)^2-dimensional operator space.
//
// Vectorization is column-major throughout: vec(rho)[i + dim*j] = rho(i, j),
// so that vec(A X B) = (B^T kron A) vec(X).

enum class SuperoperatorKind {
  Full,         // Lindblad generator with both jump terms
  NoTransClick, // transmitted jump term a_R rho a_R^dagger removed
  NoAnyClick,   // both jump terms removed
};

template <typename Scalar = Complex>
struct Superoperator {
  Matrix<Scalar> matrix;       // linear part acting on vec(rho)
  Matrix<Scalar> compensation; // sum of L^dagger L over removed jumps (dim x dim)
  SuperoperatorKind kind;
  int dim;

  bool trace_preserving() const { return kind == SuperoperatorKind::Full; }
};

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
Vector<Scalar> vectorize(const Matrix<Scalar>& rho)
{
  Vector<Scalar> v(rho.size());
  for (Eigen::Index j = 0; j < rho.cols(); ++j)
    for (Eigen::Index i = 0; i < rho.rows(); ++i) v(i + rho.rows() * j) = rho(i, j);
  return v;
}

template <typename Scalar>
Matrix<Scalar> unvectorize(const Vector<Scalar>& v, int dim)
{
  if (v.size() != static_cast<Eigen::Index>(dim) * dim)
    throw std::invalid_argument("unvectorize: size mismatch");
  Matrix<Scalar> rho(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i) rho(i, j) = v(i + dim * j);
  return rho;
}

template <typename Scalar>
Matrix<Scalar> kron(const Matrix<Scalar>& a, const Matrix<Scalar>& b)
{
  Matrix<Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Superoperator of X -> A X B.
template <typename Scalar>
Matrix<Scalar> sandwich(const Matrix<Scalar>& a, const Matrix<Scalar>& b)
{
  return kron<Scalar>(b.transpose(), a);
}

/// Superoperator of X -> A X.
template <typename Scalar>
Matrix<Scalar> left_multiply(const Matrix<Scalar>& a)
{
  return kron<Scalar>(Matrix<Scalar>::Identity(a.rows(), a.cols()), a);
}

/// Superoperator of X -> X B.
template <typename Scalar>
Matrix<Scalar> right_multiply(const Matrix<Scalar>& b)
{
  return kron<Scalar>(b.transpose(), Matrix<Scalar>::Identity(b.rows(), b.cols()));
}

/// D(L) X = L X L^dagger - {L^dagger L, X}/2.
template <typename Scalar>
Matrix<Scalar> dissipator(const Matrix<Scalar>& l)
{
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  const Matrix<Scalar> ldl = l.adjoint() * l;
  const Scalar half(Real(1) / Real(2));
  return sandwich<Scalar>(l, l.adjoint()) - half * left_multiply<Scalar>(ldl) - half * right_multiply<Scalar>(ldl);
}

/// X -> -i [H, X].
template <typename Scalar>
Matrix<Scalar> commutator_generator(const Matrix<Scalar>& h)
{
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  const Scalar minus_i(Real(0), Real(-1));
  return minus_i * (left_multiply<Scalar>(h) - right_multiply<Scalar>(h));
}

/// Generator of rho' = -i(Omega/2)[S_+ + S_-, rho] + D(a_R) rho + D(a_L) rho,
/// with jump terms dropped for the no-click kinds. The dropped terms are
/// recorded in `compensation` so the trace-restoring drift Tr(C rho) rho can
/// be added when the nonlinear flow is wanted.
template <typename Scalar = Complex>
Superoperator<Scalar> build_liouvillian(const SystemParams& params,
                                        SuperoperatorKind kind = SuperoperatorKind::Full)
{
  const auto out = output_matrices<Scalar>(params);
  const int dim = params.n_atoms() + 1;
  Superoperator<Scalar> s;
  s.kind = kind;
  s.dim = dim;
  s.matrix = commutator_generator<Scalar>(drive_hamiltonian<Scalar>(params)) + dissipator<Scalar>(out.right) +
             dissipator<Scalar>(out.left);
  s.compensation = Matrix<Scalar>::Zero(dim, dim);
  if (kind != SuperoperatorKind::Full) {
    s.matrix -= sandwich<Scalar>(out.right, out.right.adjoint());
    s.compensation += out.right.adjoint() * out.right;
  }
  if (kind == SuperoperatorKind::NoAnyClick) {
    s.matrix -= sandwich<Scalar>(out.left, out.left.adjoint());
    s.compensation += out.left.adjoint() * out.left;
  }
  return s;
}

/// 2 D(a_R) as a superoperator; equals the full generator identically.
template <typename Scalar = Complex>
Matrix<Scalar> doubled_transmission_dissipator(const SystemParams& params)
{
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  return Scalar(Real(2)) * dissipator<Scalar>(output_matrices<Scalar>(params).right);
}

/// Time derivative of rho, including the trace-restoring drift for no-click kinds.
template <typename Scalar>
Matrix<Scalar> apply_generator(const Superoperator<Scalar>& s, const Matrix<Scalar>& rho)
{
  Matrix<Scalar> d = unvectorize<Scalar>(Vector<Scalar>(s.matrix * vectorize<Scalar>(rho)), s.dim);
  if (!s.trace_preserving()) d += Scalar((s.compensation * rho).trace()) * rho;
  return d;
}

template <typename Scalar = Complex>
Matrix<Scalar> ground_state_rho(int dim)
{
  Matrix<Scalar> rho = Matrix<Scalar>::Zero(dim, dim);
  rho(0, 0) = Scalar(1);
  return rho;
}

template <typename Scalar>
Matrix<Scalar> hermitize_normalize(const Matrix<Scalar>& rho)
{
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  Matrix<Scalar> h = (rho + rho.adjoint()) * Scalar(Real(1) / Real(2));
  using std::real;
  const Real tr = real(h.trace());
  if (!(tr > Real(0))) throw std::runtime_error("hermitize_normalize: non-positive trace");
  h /= Scalar(tr);
  return h;
}

template <typename Scalar>
struct NumericSteadyState {
  Matrix<Scalar> rho;
  double residual;   // max |L vec(rho)|
  int null_dimension;
};

/// Null-space state of the full generator.
///
/// The rank of L is checked with a full-pivoting LU; the state itself comes
/// from the system in which the (0,0) population equation, which is linearly
/// dependent through trace preservation, is replaced by Tr(rho) = 1.
template <typename Scalar>
NumericSteadyState<Scalar> steady_state_numeric(const Superoperator<Scalar>& s)
{
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  using std::abs;
  using std::pow;
  if (s.kind != SuperoperatorKind::Full)
    throw std::invalid_argument("steady_state_numeric: needs the full (trace-preserving) generator");
  const Eigen::Index d2 = s.matrix.rows();

  Eigen::FullPivLU<Matrix<Scalar>> rank_lu(s.matrix);
  rank_lu.setThreshold(Real(pow(Eigen::NumTraits<Real>::epsilon(), Real(0.6))));
  const int null_dim = static_cast<int>(d2 - rank_lu.rank());
  if (null_dim != 1) {
    std::ostringstream msg;
    msg << "steady_state_numeric: null space of the " << d2 << "x" << d2 << " generator has dimension "
        << null_dim << " (expected 1)";
    throw std::runtime_error(msg.str());
  }

  Matrix<Scalar> a = s.matrix;
  a.row(0).setZero();
  for (int i = 0; i < s.dim; ++i) a(0, i + s.dim * i) = Scalar(1);
  Vector<Scalar> rhs = Vector<Scalar>::Zero(d2);
  rhs(0) = Scalar(1);
  const Vector<Scalar> x = a.fullPivLu().solve(rhs);

  Matrix<Scalar> rho = hermitize_normalize<Scalar>(unvectorize<Scalar>(x, s.dim));
  const Vector<Scalar> res = s.matrix * vectorize<Scalar>(rho);
  Real worst(0);
  for (Eigen::Index i = 0; i < res.size(); ++i) worst = std::max<Real>(worst, Real(abs(res(i))));
  return {rho, static_cast<double>(worst), null_dim};
}

struct NoClickOptions {
  double initial_interval = 0.5; // first propagation interval [1/gamma]
  double tolerance = 1e-10;      // on max |rho'|
  double max_time = 1e6;         // total propagated time budget
};

class NoClickConvergenceError : public std::runtime_error {
public:
  NoClickConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual)
  {
  }
  double last_residual() const { return residual_; }

private:
  double residual_;
};

/// Fixed point of the trace-compensated no-click equation
///   rho' = L_nc rho + Tr(C rho) rho
/// relaxed from the ground state.
///
/// The normalised solution of the nonlinear equation equals the normalised
/// solution of its linear part, so each step propagates with the exact
/// exponential exp(L_nc dt) and renormalises. The interval doubles after every
/// step (P <- P^2) until max |rho'| drops below the tolerance.
template <typename Scalar>
Matrix<Scalar> noclick_steady(const Superoperator<Scalar>& s, const NoClickOptions& options = {})
{
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  using std::abs;
  Matrix<Scalar> rho = ground_state_rho<Scalar>(s.dim);
  Matrix<Scalar> step = expm(Matrix<Scalar>(s.matrix * Scalar(Real(options.initial_interval))));
  double interval = options.initial_interval;
  double elapsed = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  while (elapsed <= options.max_time) {
    Vector<Scalar> v = step * vectorize<Scalar>(rho);
    rho = hermitize_normalize<Scalar>(unvectorize<Scalar>(v, s.dim));
    elapsed += interval;
    const Matrix<Scalar> d = apply_generator<Scalar>(s, rho);
    Real worst(0);
    for (Eigen::Index i = 0; i < d.size(); ++i) worst = std::max<Real>(worst, Real(abs(d(i))));
    residual = static_cast<double>(worst);
    if (residual <= options.tolerance) return rho;
    step = (step * step).eval();
    const Real scale = step.cwiseAbs().maxCoeff();
    if (scale > Real(0)) step /= Scalar(scale);
    interval *= 2.0;
  }
  throw NoClickConvergenceError("noclick_steady: no convergence within the time budget", residual);
}

/// a rho a^dagger / Tr(a rho a^dagger).
template <typename Scalar>
Matrix<Scalar> condition_on_click(const Matrix<Scalar>& rho, const Matrix<Scalar>& jump)
{
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  using std::real;
  Matrix<Scalar> out = jump * rho * jump.adjoint();
  const Real rate = real(out.trace());
  if (!(rate > Real(0))) throw std::domain_error("condition_on_click: click rate vanishes for this state");
  out /= Scalar(rate);
  return out;
}

inline CMatrix condition_on_click(const CMatrix& rho, const SystemParams& params, Channel channel)
{
  return condition_on_click<Complex>(rho, output_operator(params, channel));
}

/// Largest stable RK4 step accepted by time_evolve: 0.05 over the row-sum
/// norm of the generator (an upper bound on its fastest rate).
template <typename Scalar>
double max_time_step(const Superoperator<Scalar>& s)
{
  const double scale = static_cast<double>(s.matrix.cwiseAbs().rowwise().sum().maxCoeff());
  return scale > 0.0 ? 0.05 / scale : std::numeric_limits<double>::infinity();
}

/// Classic fourth-order Runge-Kutta with fixed step dt; the last step is
/// shortened to land on t_end.
template <typename Scalar>
Matrix<Scalar> time_evolve(const Superoperator<Scalar>& s, const Matrix<Scalar>& rho0, double t_end, double dt)
{
  using Real = typename Eigen::NumTraits<Scalar>::Real;
  if (!(t_end >= 0.0)) throw std::invalid_argument("time_evolve: t_end must be non-negative");
  if (!(dt > 0.0)) throw std::invalid_argument("time_evolve: dt must be positive");
  if (dt > max_time_step(s) * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "time_evolve: dt = " << dt << " exceeds the stable step " << max_time_step(s);
    throw std::invalid_argument(msg.str());
  }
  Matrix<Scalar> rho = rho0;
  double t = 0.0;
  while (t < t_end) {
    const double h = std::min(dt, t_end - t);
    const Scalar hs = Scalar(Real(h));
    const Scalar half(Real(1) / Real(2));
    const Matrix<Scalar> k1 = apply_generator<Scalar>(s, rho);
    const Matrix<Scalar> k2 = apply_generator<Scalar>(s, Matrix<Scalar>(rho + half * hs * k1));
    const Matrix<Scalar> k3 = apply_generator<Scalar>(s, Matrix<Scalar>(rho + half * hs * k2));
    const Matrix<Scalar> k4 = apply_generator<Scalar>(s, Matrix<Scalar>(rho + hs * k3));
    rho += (hs / Scalar(Real(6))) * (k1 + Scalar(Real(2)) * k2 + Scalar(Real(2)) * k3 + k4);
    t = (h == dt) ? t + dt : t_end;
  }
  return rho;
}

} // namespace superbunch

#endif // SUPERBUNCH_LIOUVILLIAN_HPP
