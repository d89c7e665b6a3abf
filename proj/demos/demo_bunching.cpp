// Three atoms driven at a few effective drive strengths: analytic rates and
// coherences, then simulated bunch-size histograms next to the bunch model.
//
//   demo_bunching [trajectories] [length]

#include "superbunch/superbunch.hpp"

#include <cstdio>
#include <cstdlib>

using namespace superbunch;

int main(int argc, char** argv)
{
  const int n = 3;
  const int trajectories = argc > 1 ? std::atoi(argv[1]) : 100;
  const double length = argc > 2 ? std::atof(argv[2]) : 1000.0;
  if (trajectories < 1 || !(length > 0.0)) {
    std::fprintf(stderr, "usage: demo_bunching [trajectories >= 1] [length > 0]\n");
    return 2;
  }

  const double t_in_w = t_in(n);
  const double t_out_w = t_out_quantile(n, 0.99);
  std::printf("N = %d, T_in = %.4f, T_out(0.99) = %.4f, mean cascade time = %.4f\n\n", n, t_in_w, t_out_w,
              t_out_avg(n));

  std::printf("%-6s %-12s %-12s %-12s %-12s\n", "drive", "n_ref", "n_trans", "g2_trans", "g4_trans");
  for (double d : {0.3, 0.5, 1.0, 2.0}) {
    const auto p = SystemParams::from_effective_drive(n, 1.0, d);
    const auto r = scattered_rates(p);
    std::printf("%-6.2f %-12.5g %-12.5g %-12.5g %-12.5g\n", d, r.n_ref, r.n_trans, coherence_g_n(p, 2, Channel::R),
                coherence_g_n(p, 4, Channel::R));
  }

  const FirstClickDefinition def{FirstClickVariant::QuietAll, t_in_w};
  std::vector<BunchHistogram> hists;
  for (double d : {0.5, 0.75, 1.0}) {
    TrajectoryConfig c;
    c.params = SystemParams::from_effective_drive(n, 1.0, d);
    c.t_end = 10.0 + length;
    c.burn_in = 10.0;
    c.n_trajectories = trajectories;
    c.seed = 2024;
    c.record_conditional_states = true;
    const auto a = analyze_stream(run_batch(c), d, def, t_out_w);
    hists.push_back(a.histogram);

    std::printf("\ndrive %.2f: %zu first clicks (no click in the preceding T_in)\n", d, a.histogram.n_first_clicks);
    if (a.populations.n_samples > 0)
      std::printf("  populations after first click: %.3f %.3f %.3f %.3f\n", a.populations.mean[0],
                  a.populations.mean[1], a.populations.mean[2], a.populations.mean[3]);
    const BunchModel m{n, alpha_sq_from_drive(n, d), 0.37, 0.93};
    std::printf("  %-5s %-10s %-10s\n", "size", "simulated", "model");
    for (int k = 1; k <= n + 5; ++k)
      std::printf("  %-5d %-10.4f %-10.4f\n", k, a.histogram.probability(k), model_pk(m, k).probability);
  }

  try {
    const auto fit = fit_timescales(hists, n);
    std::printf("\nfitted T_in_hat = %.4f, T_out_hat = %.4f (residual %.3g)\n", fit.t_in_hat, fit.t_out_hat,
                fit.residual);
  } catch (const std::exception& e) {
    std::printf("\nfit skipped: %s\n", e.what());
  }
  return 0;
}
