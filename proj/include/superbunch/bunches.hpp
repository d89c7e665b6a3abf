#ifndef SUPERBUNCH_BUNCHES_HPP
#define SUPERBUNCH_BUNCHES_HPP

#include "superbunch/numeric.hpp"
#include "superbunch/rng.hpp"
#include "superbunch/timescales.hpp"
#include "superbunch/trajectory.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace superbunch {

// ---------------------------------------------------------------------------
// First transmitted clicks

enum class FirstClickVariant {
  RecountAll, // (a) every transmitted click
  QuietTrans, // (b) no transmitted click in the preceding window
  QuietAll,   // (c) no click of either channel in the preceding window
};

inline char variant_letter(FirstClickVariant v)
{
  switch (v) {
  case FirstClickVariant::RecountAll: return 'a';
  case FirstClickVariant::QuietTrans: return 'b';
  case FirstClickVariant::QuietAll: return 'c';
  }
  return '?';
}

inline FirstClickVariant variant_from_string(std::string_view s)
{
  if (s == "a" || s == "recount_all") return FirstClickVariant::RecountAll;
  if (s == "b" || s == "quiet_trans") return FirstClickVariant::QuietTrans;
  if (s == "c" || s == "quiet_all") return FirstClickVariant::QuietAll;
  throw std::invalid_argument("unknown first-click definition '" + std::string(s) + "'");
}

class FirstClickDefinition {
public:
  FirstClickDefinition(FirstClickVariant variant, double t_in_window) : variant_(variant), window_(t_in_window)
  {
    if (variant != FirstClickVariant::RecountAll && !(t_in_window > 0.0))
      throw std::invalid_argument("FirstClickDefinition: variants b and c need a positive look-back window");
  }

  FirstClickVariant variant() const { return variant_; }
  double t_in_window() const { return window_; }
  char letter() const { return variant_letter(variant_); }

private:
  FirstClickVariant variant_;
  double window_;
};

/// Indices of the first transmitted clicks. The look-back window
/// (t - T_in, t) excludes the click itself and never reaches into another
/// trajectory. The input must be ordered by (trajectory_id, t).
inline std::vector<std::size_t> find_first_clicks(std::span<const ClickRecord> clicks,
                                                  const FirstClickDefinition& def)
{
  for (std::size_t i = 1; i < clicks.size(); ++i) {
    const auto& a = clicks[i - 1];
    const auto& b = clicks[i];
    if (b.trajectory_id < a.trajectory_id || (b.trajectory_id == a.trajectory_id && b.t < a.t))
      throw std::invalid_argument("find_first_clicks: click stream is not time-sorted");
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < clicks.size(); ++i) {
    const auto& c = clicks[i];
    if (c.channel != Channel::R) continue;
    bool first = true;
    if (def.variant() != FirstClickVariant::RecountAll) {
      const double start = c.t - def.t_in_window();
      for (std::size_t j = i; j-- > 0;) {
        const auto& p = clicks[j];
        if (p.trajectory_id != c.trajectory_id || p.t <= start) break;
        if (p.t >= c.t) continue;
        if (def.variant() == FirstClickVariant::QuietAll || p.channel == Channel::R) {
          first = false;
          break;
        }
      }
    }
    if (first) out.push_back(i);
  }
  return out;
}

inline std::vector<std::size_t> find_first_clicks(const ClickStream& stream, const FirstClickDefinition& def)
{
  return find_first_clicks(std::span<const ClickRecord>(stream.clicks), def);
}

/// First clicks whose full bunch window lies inside the post-burn-in run:
/// burn_in <= t <= t_end - t_out_window.
inline std::vector<std::size_t> eligible_first_clicks(const ClickStream& stream,
                                                      const std::vector<std::size_t>& first, double t_out_window)
{
  std::vector<std::size_t> out;
  for (std::size_t i : first) {
    const double t = stream.clicks.at(i).t;
    if (t >= stream.burn_in && t <= stream.t_end - t_out_window) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bunch histograms

struct BunchProbability {
  double p;
  double std_error; // binomial
  std::size_t count;
};

struct BunchHistogram {
  std::map<int, BunchProbability> probabilities; // bunch size -> estimate
  std::size_t n_first_clicks = 0;
  double drive = 0.0; // Omega / (gamma sqrt(N))
  FirstClickDefinition definition{FirstClickVariant::RecountAll, 0.0};
  double t_out_window = 0.0;

  double probability(int size) const
  {
    const auto it = probabilities.find(size);
    return it == probabilities.end() ? 0.0 : it->second.p;
  }

  double total_probability() const
  {
    double s = 0.0;
    for (const auto& [k, v] : probabilities) s += v.p;
    return s;
  }
};

inline BunchHistogram histogram_from_counts(const std::map<int, std::size_t>& counts, std::size_t n,
                                            const FirstClickDefinition& def, double t_out_window, double drive)
{
  BunchHistogram h;
  h.n_first_clicks = n;
  h.definition = def;
  h.t_out_window = t_out_window;
  h.drive = drive;
  for (const auto& [size, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    h.probabilities[size] = {p, std::sqrt(p * (1.0 - p) / static_cast<double>(n)), c};
  }
  return h;
}

/// Bunch size = the first click plus every click of either channel in
/// (t, t + t_out_window] of the same trajectory. Normalised per first click.
inline BunchHistogram bunch_sizes(const ClickStream& stream, const std::vector<std::size_t>& first_clicks,
                                  double t_out_window, const FirstClickDefinition& def, double drive = 0.0)
{
  if (!(t_out_window > 0.0)) throw std::invalid_argument("bunch_sizes: t_out_window must be positive");
  std::map<int, std::size_t> counts;
  for (std::size_t i : first_clicks) {
    const auto& c = stream.clicks.at(i);
    if (c.channel != Channel::R) throw std::invalid_argument("bunch_sizes: first click is not transmitted");
    int size = 1;
    for (std::size_t j = i + 1; j < stream.clicks.size(); ++j) {
      const auto& n = stream.clicks[j];
      if (n.trajectory_id != c.trajectory_id || n.t > c.t + t_out_window) break;
      ++size;
    }
    ++counts[size];
  }
  if (first_clicks.empty()) {
    BunchHistogram h;
    h.definition = def;
    h.t_out_window = t_out_window;
    h.drive = drive;
    return h;
  }
  return histogram_from_counts(counts, first_clicks.size(), def, t_out_window, drive);
}

struct PopulationEstimate {
  std::vector<double> mean;      // k = 0..N excited
  std::vector<double> std_error; // standard error of the mean
  std::size_t n_samples = 0;
};

/// Average post-click populations over the given first clicks.
inline PopulationEstimate conditional_populations(const ClickStream& stream,
                                                  const std::vector<std::size_t>& first_clicks)
{
  PopulationEstimate est;
  if (first_clicks.empty()) return est;
  std::vector<const ConditionalSnapshot*> picked;
  picked.reserve(first_clicks.size());
  for (std::size_t i : first_clicks) {
    const auto it = std::lower_bound(stream.snapshots.begin(), stream.snapshots.end(), i,
                                     [](const ConditionalSnapshot& s, std::size_t v) { return s.click_index < v; });
    if (it == stream.snapshots.end() || it->click_index != i)
      throw std::invalid_argument("conditional_populations: no snapshot recorded for a first click");
    picked.push_back(&*it);
  }
  const std::size_t dim = picked.front()->populations.size();
  std::vector<double> sum(dim, 0.0), sum_sq(dim, 0.0);
  for (const auto* s : picked)
    for (std::size_t k = 0; k < dim; ++k) {
      sum[k] += s->populations[k];
      sum_sq[k] += s->populations[k] * s->populations[k];
    }
  const auto n = static_cast<double>(picked.size());
  est.n_samples = picked.size();
  est.mean.resize(dim);
  est.std_error.resize(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    est.mean[k] = sum[k] / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq[k] - n * est.mean[k] * est.mean[k]) / (n - 1.0)) : 0.0;
    est.std_error[k] = std::sqrt(var / n);
  }
  return est;
}

// ---------------------------------------------------------------------------
// Bunch-size model: size = Y + Z with Y an N-truncated Poisson(|alpha|^2 T_in)
// and Z an independent Poisson(|alpha|^2 T_out).

struct BunchModel {
  int n_atoms;
  double alpha_sq; // incoming photon flux [1/time]
  double t_in_hat;
  double t_out_hat;
};

/// |alpha|^2 = Omega^2 / gamma at effective drive Omega / (gamma sqrt(N)).
inline double alpha_sq_from_drive(int n_atoms, double drive, double gamma = 1.0)
{
  return drive * drive * gamma * n_atoms;
}

struct ModelPk {
  double probability;
  bool in_support; // false for k <= N, where the probability is exactly 0
};

namespace detail {

/// log Pr(X >= m) for X ~ Poisson(lambda), lambda > 0.
inline double log_poisson_upper_tail(int m, double lambda)
{
  if (m <= 0) return 0.0;
  const double p = boost::math::gamma_p(static_cast<double>(m), lambda);
  if (p > 1e-280) return std::log(p);
  std::vector<double> terms;
  for (int j = m; j < m + 200; ++j) {
    terms.push_back(poisson_log_pmf(j, lambda));
    if (terms.back() < terms.front() - 60.0) break;
  }
  return log_sum_exp(terms);
}

inline void check_model(const BunchModel& m)
{
  (void)DickeBasis{m.n_atoms};
  if (!(m.alpha_sq >= 0.0) || !(m.t_in_hat >= 0.0) || !(m.t_out_hat >= 0.0) || !std::isfinite(m.alpha_sq) ||
      !std::isfinite(m.t_in_hat) || !std::isfinite(m.t_out_hat))
    throw std::invalid_argument("BunchModel: parameters must be finite and non-negative");
}

/// log Pr(Y = j) for the N-truncated Poisson.
inline double log_truncated_pmf(int n_atoms, double lambda, double log_tail, int j)
{
  if (j < n_atoms + 1) return kNegInf;
  if (lambda == 0.0) return j == n_atoms + 1 ? 0.0 : kNegInf;
  return poisson_log_pmf(j, lambda) - log_tail;
}

} // namespace detail

/// p(k) = sum_{i=0}^{k-N-1} Pr(Y = k - i) Pr(Z = i).
inline ModelPk model_pk(const BunchModel& m, int k)
{
  detail::check_model(m);
  const int n = m.n_atoms;
  if (k <= n) return {0.0, false};
  const double lambda_in = m.alpha_sq * m.t_in_hat;
  const double lambda_out = m.alpha_sq * m.t_out_hat;
  const double log_tail = lambda_in > 0.0 ? detail::log_poisson_upper_tail(n + 1, lambda_in) : 0.0;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(k - n));
  for (int i = 0; i <= k - n - 1; ++i)
    terms.push_back(detail::log_truncated_pmf(n, lambda_in, log_tail, k - i) + poisson_log_pmf(i, lambda_out));
  return {std::exp(log_sum_exp(terms)), true};
}

/// Sum of p(k) for k = N+1 .. k_max.
inline double model_mass(const BunchModel& m, int k_max)
{
  double s = 0.0;
  for (int k = m.n_atoms + 1; k <= k_max; ++k) s += model_pk(m, k).probability;
  return s;
}

/// A size beyond which the model mass is negligible (mean plus many widths).
inline int model_support_cutoff(const BunchModel& m)
{
  const double lam = m.alpha_sq * (m.t_in_hat + m.t_out_hat);
  return m.n_atoms + 1 + static_cast<int>(std::ceil(lam + 12.0 * std::sqrt(lam + 1.0) + 40.0));
}

/// e^{-|alpha|^2 T_out}: the weak-drive limit of p(N+1).
inline double weak_bunch_probability(double alpha_sq, double t_out) { return std::exp(-alpha_sq * t_out); }

struct Bracket {
  double lower;
  double upper;
};

/// Stirling / Chernoff bracket on p(N+1), valid for |alpha|^2 T_in < N+2.
inline Bracket weak_bunch_bracket(int n_atoms, double alpha_sq, double t_in, double t_out)
{
  const double lam = alpha_sq * t_in;
  if (!(lam < n_atoms + 2.0)) throw std::domain_error("weak_bunch_bracket: needs |alpha|^2 T_in < N + 2");
  const double head = std::exp(-alpha_sq * t_out);
  const double m = n_atoms + 2.0;
  return {head / (1.0 + lam * std::sqrt(2.0 * M_PI * m) / m), head / (1.0 + lam / m)};
}

/// Draws bunch sizes Y + Z from the model.
inline std::vector<int> sample_bunch_sizes(const BunchModel& m, std::size_t n, Philox4x32& rng)
{
  detail::check_model(m);
  const double lambda_in = m.alpha_sq * m.t_in_hat;
  const double lambda_out = m.alpha_sq * m.t_out_hat;
  const double log_tail = lambda_in > 0.0 ? detail::log_poisson_upper_tail(m.n_atoms + 1, lambda_in) : 0.0;
  std::vector<double> cdf;
  double acc = 0.0;
  const int j_max = model_support_cutoff(m);
  for (int j = m.n_atoms + 1; j <= j_max; ++j) {
    acc += std::exp(detail::log_truncated_pmf(m.n_atoms, lambda_in, log_tail, j));
    cdf.push_back(acc);
  }
  std::poisson_distribution<int> z_dist(lambda_out > 0.0 ? lambda_out : 1.0);
  std::vector<int> out(n);
  for (auto& s : out) {
    const double u = rng.uniform() * acc;
    const auto pos = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    const int y = m.n_atoms + 1 + static_cast<int>(pos);
    const int z = lambda_out > 0.0 ? z_dist(rng) : 0;
    s = y + z;
  }
  return out;
}

/// Histogram of model samples, as a first-click histogram at the given drive.
inline BunchHistogram synthetic_histogram(const BunchModel& m, double drive, std::size_t n, Philox4x32& rng)
{
  std::map<int, std::size_t> counts;
  for (int s : sample_bunch_sizes(m, n, rng)) ++counts[s];
  return histogram_from_counts(counts, n, FirstClickDefinition{FirstClickVariant::QuietAll, m.t_in_hat},
                               m.t_out_hat, drive);
}

// ---------------------------------------------------------------------------
// Timescale fit

struct FitOptions {
  int max_size_offset = 6;  // sizes 1 .. N + offset enter the objective
  double gamma = 1.0;
  double start_quantile = 0.99;
  int max_iterations = 4000;
  double size_tolerance = 1e-10; // simplex size in log-parameter space
};

struct FitResult {
  double t_in_hat;
  double t_out_hat;
  double residual; // weighted sum of squares at the optimum
  int n_points;    // (drive, size) pairs used
  int iterations;
  bool converged;
};

namespace detail {

struct FitData {
  struct Point {
    double alpha_sq;
    int size;
    double measured;
    double weight;
  };
  int n_atoms;
  std::vector<Point> points;
};

inline double fit_objective(const FitData& d, double t_in_hat, double t_out_hat)
{
  double s = 0.0;
  for (const auto& p : d.points) {
    const double model = model_pk({d.n_atoms, p.alpha_sq, t_in_hat, t_out_hat}, p.size).probability;
    s += p.weight * (p.measured - model) * (p.measured - model);
  }
  return s;
}

inline double gsl_fit_objective(const gsl_vector* x, void* params)
{
  const auto* d = static_cast<const FitData*>(params);
  const double a = gsl_vector_get(x, 0);
  const double b = gsl_vector_get(x, 1);
  if (std::abs(a) > 50.0 || std::abs(b) > 50.0) return GSL_POSINF;
  return fit_objective(*d, std::exp(a), std::exp(b));
}

} // namespace detail

/// Weighted least-squares fit of (T_in_hat, T_out_hat) shared across the
/// drive grid. Weights are inverse binomial variances, with the variance of
/// an empty bin taken as 1/n^2.
inline FitResult fit_timescales(const std::vector<BunchHistogram>& histograms, int n_atoms,
                                const FitOptions& opt = {})
{
  (void)DickeBasis{n_atoms};
  detail::FitData data{n_atoms, {}};
  std::vector<int> dominant;
  int used = 0;
  for (const auto& h : histograms) {
    if (h.n_first_clicks == 0) continue;
    ++used;
    const double n = static_cast<double>(h.n_first_clicks);
    const double a2 = alpha_sq_from_drive(n_atoms, h.drive, opt.gamma);
    for (int k = 1; k <= n_atoms + opt.max_size_offset; ++k) {
      const double p = h.probability(k);
      const double var = (p * (1.0 - p) + 1.0 / n) / n;
      data.points.push_back({a2, k, p, 1.0 / var});
    }
    int best = 0;
    double best_p = -1.0;
    for (const auto& [k, v] : h.probabilities)
      if (v.p > best_p) {
        best_p = v.p;
        best = k;
      }
    dominant.push_back(best_p >= 1.0 ? best : -1);
  }
  if (used < 2) throw std::invalid_argument("fit_timescales: need at least two drive points with first clicks");
  if (std::all_of(dominant.begin(), dominant.end(), [&](int d) { return d >= 0 && d == dominant.front(); }))
    throw std::invalid_argument("fit_timescales: degenerate data, a single bunch size everywhere");

  gsl_set_error_handler_off();
  gsl_multimin_function f{&detail::gsl_fit_objective, 2, &data};
  gsl_vector* x = gsl_vector_alloc(2);
  gsl_vector* step = gsl_vector_alloc(2);
  gsl_vector_set(x, 0, std::log(t_in(n_atoms, opt.gamma)));
  gsl_vector_set(x, 1, std::log(t_out_quantile(n_atoms, opt.start_quantile, opt.gamma)));
  gsl_vector_set_all(step, 0.3);
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
  gsl_multimin_fminimizer_set(s, &f, x, step);

  int iter = 0;
  int status = GSL_CONTINUE;
  while (status == GSL_CONTINUE && iter < opt.max_iterations) {
    ++iter;
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), opt.size_tolerance);
  }
  FitResult r{std::exp(gsl_vector_get(s->x, 0)), std::exp(gsl_vector_get(s->x, 1)), s->fval,
              static_cast<int>(data.points.size()), iter, status == GSL_SUCCESS};
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(step);
  gsl_vector_free(x);
  return r;
}

} // namespace superbunch

#endif // SUPERBUNCH_BUNCHES_HPP
