#ifndef SUPERBUNCH_TIMESCALES_HPP
#define SUPERBUNCH_TIMESCALES_HPP

#include "superbunch/dicke.hpp"
#include "superbunch/expm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace superbunch {

/// Cascade rates Gamma_k = 2 gamma k (N - k + 1), stored for k = N down to 1.
struct CascadeRates {
  int n_atoms;
  double gamma;
  std::vector<double> rates;

  /// Gamma_k for k excited atoms.
  double rate(int k) const { return rates.at(static_cast<std::size_t>(n_atoms - k)); }
};

inline CascadeRates cascade_rates(int n_atoms, double gamma = 1.0)
{
  (void)DickeBasis{n_atoms};
  if (!(gamma > 0.0)) throw std::invalid_argument("cascade_rates: gamma must be positive");
  CascadeRates c{n_atoms, gamma, {}};
  for (int k = n_atoms; k >= 1; --k) c.rates.push_back(2.0 * gamma * k * (n_atoms - k + 1));
  return c;
}

/// Concurrent-arrival time (1/gamma) (2(N+1)/N!)^{1/N}.
inline double t_in(int n_atoms, double gamma = 1.0)
{
  (void)DickeBasis{n_atoms};
  if (!(gamma > 0.0)) throw std::invalid_argument("t_in: gamma must be positive");
  const double log_value = (std::log(2.0 * (n_atoms + 1)) - log_factorial(n_atoms)) / n_atoms;
  return std::exp(log_value) / gamma;
}

/// Large-N asymptote e/(gamma N) of t_in.
inline double t_in_asymptote(int n_atoms, double gamma = 1.0) { return std::exp(1.0) / (gamma * n_atoms); }

/// Mean cascade time H_N / (gamma (N+1)).
inline double t_out_avg(int n_atoms, double gamma = 1.0)
{
  (void)DickeBasis{n_atoms};
  if (!(gamma > 0.0)) throw std::invalid_argument("t_out_avg: gamma must be positive");
  return harmonic_number(n_atoms) / (gamma * (n_atoms + 1));
}

/// Large-N asymptote ln(N)/(gamma N) of t_out_avg.
inline double t_out_avg_asymptote(int n_atoms, double gamma = 1.0)
{
  return std::log(static_cast<double>(n_atoms)) / (gamma * n_atoms);
}

/// Phase-type description of the cascade: start in stage 0 (N excited),
/// leave stage j at rate rates[j], absorb after the last stage.
class HypoexponentialModel {
public:
  explicit HypoexponentialModel(CascadeRates rates) : rates_(std::move(rates))
  {
    const auto n = static_cast<Eigen::Index>(rates_.rates.size());
    q_ = RMatrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      q_(j, j) = -rates_.rates[static_cast<std::size_t>(j)];
      if (j + 1 < n) q_(j, j + 1) = rates_.rates[static_cast<std::size_t>(j)];
    }
  }

  const CascadeRates& rates() const { return rates_; }
  const RMatrix& q() const { return q_; }
  double mean() const
  {
    double m = 0.0;
    for (double r : rates_.rates) m += 1.0 / r;
    return m;
  }

private:
  CascadeRates rates_;
  RMatrix q_;
};

inline HypoexponentialModel hypoexp_model(int n_atoms, double gamma = 1.0)
{
  return HypoexponentialModel{cascade_rates(n_atoms, gamma)};
}

/// F(t) = 1 - e_1^T exp(tQ) 1.
inline double hypoexp_cdf(const HypoexponentialModel& model, double t)
{
  if (!(t >= 0.0)) throw std::invalid_argument("hypoexp_cdf: t must be non-negative");
  if (t == 0.0) return 0.0;
  const RMatrix e = expm(RMatrix(t * model.q()));
  const double survival = e.row(0).sum();
  return std::clamp(1.0 - survival, 0.0, 1.0);
}

/// Inverse CDF by bisection; the bracket grows geometrically from the mean.
inline double t_out_quantile(const HypoexponentialModel& model, double p)
{
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("t_out_quantile: p must lie in (0, 1)");
  double lo = 0.0;
  double hi = model.mean();
  while (hypoexp_cdf(model, hi) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12 * model.mean()) throw std::runtime_error("t_out_quantile: bracket search failed");
  }
  while (hi - lo > 1e-12 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (hypoexp_cdf(model, mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double t_out_quantile(int n_atoms, double p, double gamma = 1.0)
{
  return t_out_quantile(hypoexp_model(n_atoms, gamma), p);
}

} // namespace superbunch

#endif // SUPERBUNCH_TIMESCALES_HPP
