#ifndef SUPERBUNCH_TRAJECTORY_HPP
#define SUPERBUNCH_TRAJECTORY_HPP

#include "superbunch/dicke.hpp"
#include "superbunch/expm.hpp"
#include "superbunch/rng.hpp"
#include "superbunch/timescales.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

namespace superbunch {

// Monte Carlo wavefunction unravelling with detectors on the reflected (L)
// and transmitted (R) output fields.
//
// Between clicks the unnormalised state obeys psi' = A psi with
// A = -i H_eff, H_eff = (Omega/2)(S_+ + S_-) - (i/2)(a_L^dag a_L + a_R^dag a_R).
// Whole steps apply the exact propagator exp(A dt); the click time, where
// |psi|^2 meets a pre-drawn uniform threshold, is located by bisection on a
// Taylor expansion of psi over the step.

enum class InitialKind { Ground, FullyExcited, Custom };

struct InitialState {
  InitialKind kind = InitialKind::Ground;
  CVector custom; // used when kind == Custom; normalised on use

  static InitialState ground() { return {}; }
  static InitialState fully_excited() { return {InitialKind::FullyExcited, {}}; }
  static InitialState from_vector(CVector v) { return {InitialKind::Custom, std::move(v)}; }
};

struct TrajectoryConfig {
  SystemParams params{1, 1.0, 0.0};
  double t_end = 50.0;
  double burn_in = 10.0;
  double dt = 0.0; // 0 selects default_time_step(params)
  std::uint64_t seed = 1;
  int n_trajectories = 1;
  InitialState initial_state;
  bool record_conditional_states = false;
  int n_threads = 0; // 0 = hardware concurrency
};

struct ClickRecord {
  double t;
  Channel channel;
  int trajectory_id;
};

struct ConditionalSnapshot {
  std::size_t click_index; // into the owning click list, always an R click
  int trajectory_id;
  double t;
  std::vector<double> populations; // post-jump, k = 0..N excited
};

struct TrajectoryResult {
  std::vector<ClickRecord> clicks;
  std::vector<ConditionalSnapshot> snapshots;
  CVector final_state; // normalised
  double t_stop;       // t_end, or the time the state went dark
};

/// Clicks of many trajectories ordered by (trajectory_id, t).
struct ClickStream {
  std::vector<ClickRecord> clicks;
  std::vector<ConditionalSnapshot> snapshots;
  double t_end = 0.0;
  double burn_in = 0.0;
  int n_trajectories = 0;
};

/// Fastest rate in the problem: max(Gamma_max, |alpha|^2, gamma|g|^2, |A|_1).
inline double rate_scale(const SystemParams& p, const CMatrix& generator)
{
  const auto cascade = cascade_rates(p.n_atoms(), p.gamma());
  const double gamma_max = *std::max_element(cascade.rates.begin(), cascade.rates.end());
  const double norm1 = generator.cwiseAbs().colwise().sum().maxCoeff();
  return std::max({gamma_max, p.alpha_sq(), p.gamma() * p.g_abs_sq(), norm1});
}

/// -i H_eff.
inline CMatrix drift_generator(const SystemParams& p)
{
  const auto out = output_matrices(p);
  const CMatrix h_eff = drive_hamiltonian(p) - Complex(0.0, 0.5) * (out.left.adjoint() * out.left +
                                                                    out.right.adjoint() * out.right);
  return Complex(0.0, -1.0) * h_eff;
}

inline double default_time_step(const SystemParams& p) { return 0.25 / rate_scale(p, drift_generator(p)); }

/// Largest accepted step; the Taylor refinement needs dt |A| <= 1.
inline double max_trajectory_step(const SystemParams& p) { return 1.0 / rate_scale(p, drift_generator(p)); }

inline void validate(const TrajectoryConfig& c)
{
  if (!(c.t_end > 0.0)) throw std::invalid_argument("TrajectoryConfig: t_end must be positive");
  if (!(c.burn_in >= 0.0 && c.burn_in < c.t_end))
    throw std::invalid_argument("TrajectoryConfig: burn_in must lie in [0, t_end)");
  if (!(c.dt >= 0.0) || !std::isfinite(c.dt)) throw std::invalid_argument("TrajectoryConfig: dt must be >= 0");
  if (c.dt > 0.0 && c.dt > max_trajectory_step(c.params) * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "TrajectoryConfig: dt = " << c.dt << " exceeds the largest accepted step " << max_trajectory_step(c.params);
    throw std::invalid_argument(msg.str());
  }
  if (c.n_trajectories < 1) throw std::invalid_argument("TrajectoryConfig: n_trajectories must be >= 1");
  if (c.initial_state.kind == InitialKind::Custom) {
    if (c.initial_state.custom.size() != c.params.n_atoms() + 1)
      throw std::invalid_argument("TrajectoryConfig: custom initial state has the wrong dimension");
    if (!(c.initial_state.custom.norm() > 0.0) || !c.initial_state.custom.allFinite())
      throw std::invalid_argument("TrajectoryConfig: custom initial state must be finite and nonzero");
  }
}

/// Precomputed operators shared read-only by every trajectory of a config.
class TrajectoryEngine {
public:
  explicit TrajectoryEngine(const TrajectoryConfig& config) : config_(config)
  {
    validate(config_);
    const auto out = output_matrices(config_.params);
    a_left_ = out.left;
    a_right_ = out.right;
    generator_ = drift_generator(config_.params);
    dt_ = config_.dt > 0.0 ? config_.dt : default_time_step(config_.params);
    propagator_ = expm(CMatrix(generator_ * dt_));
    undriven_ = config_.params.omega() == 0.0;
  }

  const TrajectoryConfig& config() const { return config_; }
  double dt() const { return dt_; }

  CVector initial_state() const
  {
    const int dim = config_.params.n_atoms() + 1;
    CVector psi = CVector::Zero(dim);
    switch (config_.initial_state.kind) {
    case InitialKind::Ground: psi(0) = 1.0; break;
    case InitialKind::FullyExcited: psi(dim - 1) = 1.0; break;
    case InitialKind::Custom: psi = config_.initial_state.custom.normalized(); break;
    }
    return psi;
  }

  TrajectoryResult run(int index) const
  {
    Philox4x32 rng(config_.seed, static_cast<std::uint64_t>(index));
    TrajectoryResult result;
    CVector psi = initial_state();
    double t = 0.0;
    double threshold = rng.uniform();
    const double t_end = config_.t_end;

    while (t < t_end) {
      const double norm_sq = psi.squaredNorm();
      if (!std::isfinite(norm_sq)) throw std::runtime_error("run_trajectory: non-finite state");
      if (undriven_) {
        // Only undriven dynamics has dark states; stop once nothing can happen.
        const double leak = (a_left_ * psi).squaredNorm() + (a_right_ * psi).squaredNorm();
        if (leak <= 1e-300 * norm_sq) break;
      }

      const bool whole = t + dt_ <= t_end;
      const double h = whole ? dt_ : t_end - t;
      CVector next = whole ? CVector(propagator_ * psi) : evolve_taylor(psi, h);
      const double next_sq = next.squaredNorm();
      if (!std::isfinite(next_sq)) throw std::runtime_error("run_trajectory: non-finite state");
      if (next_sq > threshold) {
        psi = std::move(next);
        t = whole ? t + dt_ : t_end;
        continue;
      }
      if (!(norm_sq >= threshold))
        throw std::runtime_error("run_trajectory: norm fell below the threshold without a crossing");

      const double tau = crossing_time(psi, h, threshold);
      psi = evolve_taylor(psi, tau);
      t += tau;

      const CVector out_l = a_left_ * psi;
      const CVector out_r = a_right_ * psi;
      const double w_l = out_l.squaredNorm();
      const double w_r = out_r.squaredNorm();
      if (!(w_l + w_r > 0.0)) throw std::runtime_error("run_trajectory: click with vanishing jump rates");
      const Channel ch = rng.uniform() * (w_l + w_r) <= w_l ? Channel::L : Channel::R;
      psi = (ch == Channel::L ? out_l : out_r).normalized();
      result.clicks.push_back({t, ch, index});
      if (ch == Channel::R && config_.record_conditional_states) {
        std::vector<double> pops(static_cast<std::size_t>(psi.size()));
        for (Eigen::Index k = 0; k < psi.size(); ++k) pops[static_cast<std::size_t>(k)] = std::norm(psi(k));
        result.snapshots.push_back({result.clicks.size() - 1, index, t, std::move(pops)});
      }
      threshold = rng.uniform();
    }
    result.final_state = psi.normalized();
    result.t_stop = std::min(t, t_end);
    return result;
  }

private:
  /// Coefficients c_k = A^k psi / k! of psi(tau) = sum_k c_k tau^k, truncated
  /// once |c_k| h^k is negligible.
  std::vector<CVector> taylor_coefficients(const CVector& psi, double h) const
  {
    std::vector<CVector> c{psi};
    const double scale = psi.norm();
    double hk = 1.0;
    for (int k = 1; k < 80; ++k) {
      c.push_back(generator_ * c.back() / static_cast<double>(k));
      hk *= h;
      if (c.back().norm() * hk <= 1e-18 * scale) break;
    }
    return c;
  }

  static CVector taylor_value(const std::vector<CVector>& c, double tau)
  {
    CVector v = c.back();
    for (std::size_t k = c.size() - 1; k-- > 0;) v = v * tau + c[k];
    return v;
  }

  static CVector taylor_derivative(const std::vector<CVector>& c, double tau)
  {
    CVector v = CVector::Zero(c.front().size());
    for (std::size_t k = c.size() - 1; k >= 1; --k) v = v * tau + c[k] * static_cast<double>(k);
    return v;
  }

  CVector evolve_taylor(const CVector& psi, double tau) const
  {
    return taylor_value(taylor_coefficients(psi, tau), tau);
  }

  /// Root of |psi(tau)|^2 = threshold on (0, h] by Newton's method kept
  /// inside a shrinking bisection bracket; |psi|^2 decreases monotonically.
  double crossing_time(const CVector& psi, double h, double threshold) const
  {
    const auto c = taylor_coefficients(psi, h);
    double lo = 0.0;
    double hi = h;
    double tau = 0.5 * h;
    for (int it = 0; it < 100; ++it) {
      const CVector v = taylor_value(c, tau);
      const double f = v.squaredNorm() - threshold;
      if (f == 0.0) return tau;
      if (f > 0.0)
        lo = tau;
      else
        hi = tau;
      const double df = 2.0 * v.dot(taylor_derivative(c, tau)).real();
      double next = df < 0.0 ? tau - f / df : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - tau) <= 1e-14 * h || hi - lo <= 1e-14 * h) return next;
      tau = next;
    }
    return 0.5 * (lo + hi);
  }

  TrajectoryConfig config_;
  CMatrix a_left_;
  CMatrix a_right_;
  CMatrix generator_;
  CMatrix propagator_;
  double dt_;
  bool undriven_;
};

inline TrajectoryResult run_trajectory(const TrajectoryConfig& config, int index)
{
  return TrajectoryEngine(config).run(index);
}

/// All trajectories of a config, merged in index order. Trajectory i draws
/// from the Philox stream (seed, i), so the output does not depend on the
/// number of threads.
inline ClickStream run_batch(const TrajectoryConfig& config)
{
  const TrajectoryEngine engine(config);
  const int n = config.n_trajectories;
  std::vector<TrajectoryResult> results(static_cast<std::size_t>(n));
  int threads = config.n_threads > 0 ? config.n_threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, n);

  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  auto worker = [&](int w) {
    try {
      for (int i = next++; i < n; i = next++) results[static_cast<std::size_t>(i)] = engine.run(i);
    } catch (...) {
      errors[static_cast<std::size_t>(w)] = std::current_exception();
      next = n;
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ClickStream stream;
  stream.t_end = config.t_end;
  stream.burn_in = config.burn_in;
  stream.n_trajectories = n;
  for (auto& r : results) {
    const std::size_t offset = stream.clicks.size();
    stream.clicks.insert(stream.clicks.end(), r.clicks.begin(), r.clicks.end());
    for (auto& s : r.snapshots) {
      s.click_index += offset;
      stream.snapshots.push_back(std::move(s));
    }
  }
  return stream;
}

struct RateEstimate {
  double rate;
  double std_error;
};

struct ChannelRates {
  RateEstimate left;  // reflected
  RateEstimate right; // transmitted
};

/// Click rates after burn-in. Standard errors come from the spread of
/// per-trajectory counts (Poisson counting error for a single trajectory).
inline ChannelRates measure_click_rates(const ClickStream& stream)
{
  if (stream.n_trajectories < 1) throw std::invalid_argument("measure_click_rates: empty stream");
  const double window = stream.t_end - stream.burn_in;
  const auto n = static_cast<std::size_t>(stream.n_trajectories);
  std::vector<double> left(n, 0.0), right(n, 0.0);
  for (const auto& c : stream.clicks) {
    if (c.t < stream.burn_in) continue;
    auto& v = c.channel == Channel::L ? left : right;
    v.at(static_cast<std::size_t>(c.trajectory_id)) += 1.0;
  }
  auto estimate = [&](const std::vector<double>& counts) {
    double mean = 0.0;
    for (double x : counts) mean += x;
    mean /= static_cast<double>(n);
    double se;
    if (n > 1) {
      double var = 0.0;
      for (double x : counts) var += (x - mean) * (x - mean);
      var /= static_cast<double>(n - 1);
      se = std::sqrt(var / static_cast<double>(n));
    } else {
      se = std::sqrt(mean);
    }
    return RateEstimate{mean / window, se / window};
  };
  return {estimate(left), estimate(right)};
}

struct RelaxationSamples {
  std::vector<double> times;     // time of the final (N-th) click
  std::vector<int> left_clicks;  // reflected clicks in each cascade
};

/// Undriven cascades from |N>_ex, one per sample.
inline RelaxationSamples relaxation_samples(int n_atoms, double gamma, int n_samples, std::uint64_t seed,
                                            int n_threads = 0)
{
  if (n_samples < 1) throw std::invalid_argument("relaxation_samples: n_samples must be >= 1");
  TrajectoryConfig cfg;
  cfg.params = SystemParams(n_atoms, gamma, 0.0);
  cfg.t_end = 1e6 / gamma;
  cfg.burn_in = 0.0;
  cfg.seed = seed;
  cfg.n_trajectories = n_samples;
  cfg.initial_state = InitialState::fully_excited();
  cfg.n_threads = n_threads;
  const ClickStream stream = run_batch(cfg);

  RelaxationSamples out;
  out.times.assign(static_cast<std::size_t>(n_samples), 0.0);
  out.left_clicks.assign(static_cast<std::size_t>(n_samples), 0);
  std::vector<int> total(static_cast<std::size_t>(n_samples), 0);
  for (const auto& c : stream.clicks) {
    const auto i = static_cast<std::size_t>(c.trajectory_id);
    out.times[i] = std::max(out.times[i], c.t);
    ++total[i];
    if (c.channel == Channel::L) ++out.left_clicks[i];
  }
  for (int k : total)
    if (k != n_atoms) throw std::runtime_error("relaxation_samples: a cascade did not emit exactly N photons");
  return out;
}

} // namespace superbunch

#endif // SUPERBUNCH_TRAJECTORY_HPP
