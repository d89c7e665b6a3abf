#include "superbunch/superbunch.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace superbunch;

namespace {

struct DriveFlags {
  double gamma = 1.0;
  std::optional<double> g_abs;
  std::optional<double> omega;
  std::optional<double> drive;

  void add_to(CLI::App* app)
  {
    app->add_option("--gamma", gamma, "decay rate into each direction")->check(CLI::PositiveNumber);
    auto* g = app->add_option("-g,--g-abs", g_abs, "normalised drive |g| = Omega/gamma")->check(CLI::NonNegativeNumber);
    auto* o = app->add_option("--omega", omega, "Rabi frequency Omega")->check(CLI::NonNegativeNumber);
    auto* d = app->add_option("--drive", drive, "effective drive Omega/(gamma sqrt(N))")->check(CLI::NonNegativeNumber);
    g->excludes(o)->excludes(d);
    o->excludes(d);
  }

  bool given() const { return g_abs || omega || drive; }

  SystemParams params(int n) const
  {
    if (g_abs) return SystemParams::from_g(n, gamma, *g_abs);
    if (omega) return SystemParams(n, gamma, *omega);
    if (drive) return SystemParams::from_effective_drive(n, gamma, *drive);
    throw CLI::ValidationError("one of -g, --omega or --drive is required");
  }
};

std::pair<int, int> parse_orders(const std::string& s)
{
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      const int v = std::stoi(s);
      return {v, v};
    }
    return {std::stoi(s.substr(0, dots)), std::stoi(s.substr(dots + 2))};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--orders", "expected 'n' or 'lo..hi', got '" + s + "'");
  }
}

void print_row(const std::string& key, double v) { std::cout << key << ',' << fmt_double(v) << '\n'; }

void print_timescales(int n, double gamma, const std::vector<double>& quantiles)
{
  std::cout << "quantity,value\n";
  print_row("t_in", t_in(n, gamma));
  print_row("t_in_asymptote", t_in_asymptote(n, gamma));
  print_row("t_out_avg", t_out_avg(n, gamma));
  print_row("t_out_avg_asymptote", t_out_avg_asymptote(n, gamma));
  const auto model = hypoexp_model(n, gamma);
  for (double p : quantiles)
    std::cout << "t_out_quantile," << fmt_double(p) << ',' << fmt_double(t_out_quantile(model, p)) << '\n';
}

void print_populations(const ConditionalState& s)
{
  std::cout << "scheme," << to_string(s.scheme) << "\nk_excited,population\n";
  for (std::size_t k = 0; k < s.populations.size(); ++k) std::cout << k << ',' << fmt_double(s.populations[k]) << '\n';
  print_row("mean_excitation", s.mean_excitation());
}

int cmd_analytic(int n, const DriveFlags& df, const std::string& orders, bool timescales,
                 const std::vector<double>& quantiles, const std::string& conditional, int reflections)
{
  if (df.given()) {
    const auto p = df.params(n);
    const auto r = scattered_rates(p);
    std::cout << "quantity,value\n";
    print_row("N", n);
    print_row("gamma", p.gamma());
    print_row("omega", p.omega());
    print_row("g_abs", p.g_abs());
    print_row("effective_drive", p.effective_drive());
    print_row("D", normalization_D(n, p.g_abs()));
    print_row("n_ref", r.n_ref);
    print_row("n_trans", r.n_trans);
    print_row("n_ref_coh", r.n_ref_coh);
    print_row("n_trans_coh", r.n_trans_coh);
    print_row("n_inc", r.n_inc);
    const double total = p.gamma() * p.g_abs_sq();
    const double balance = std::abs(r.n_ref + r.n_trans - total);
    std::cout << "balance_check," << (balance <= 1e-12 * std::max(total, 1e-300) ? "pass" : "FAIL") << '\n';

    const auto [lo, hi] = parse_orders(orders);
    if (lo < 1 || hi < lo) throw CLI::ValidationError("--orders", "need 1 <= lo <= hi");
    std::cout << "order,G_trans,g_trans,G_ref,g_ref\n";
    for (int k = lo; k <= hi; ++k) {
      const double gt = correlation_trans(p, k);
      const double gr = correlation_ref(p, k);
      std::cout << k << ',' << fmt_double(gt) << ',' << fmt_double(coherence_g_n(p, k, Channel::R)) << ','
                << fmt_double(gr) << ',' << (gr > 0.0 ? fmt_double(coherence_g_n(p, k, Channel::L)) : "0") << '\n';
    }
  } else if (!timescales && conditional.empty()) {
    throw CLI::ValidationError("analytic: give a drive (-g, --omega, --drive), --timescales or --conditional");
  }
  if (timescales) print_timescales(n, df.gamma, quantiles);
  if (!conditional.empty()) {
    if (conditional == "first")
      print_populations(first_click_distribution(n));
    else if (conditional == "any")
      print_populations(conditional_any_click(n));
    else if (conditional == "full")
      print_populations(fully_excited_conditional(n));
    else
      print_populations(conditional_after_k_reflections(n, reflections));
  }
  return 0;
}

int cmd_steady(int n, const DriveFlags& df, bool numeric)
{
  const auto p = df.params(n);
  const auto closed = steady_rho(p);
  std::cout << "k_excited,population\n";
  for (Eigen::Index k = 0; k <= n; ++k) std::cout << k << ',' << fmt_double(closed.rho(k, k).real()) << '\n';
  if (numeric) {
    const auto num = steady_state_numeric(build_liouvillian(p));
    print_row("max_abs_difference", max_abs(CMatrix(num.rho - closed.rho)));
    print_row("residual", num.residual);
  }
  return 0;
}

int cmd_bunches(const std::string& input, const std::string& definition, bool fit, std::string output)
{
  const auto e = load_experiment(input);
  if (output.empty()) output = input;
  std::filesystem::create_directories(output);
  const double t_in_window = resolve_t_in(e.config);
  const double t_out_window = resolve_t_out(e.config);

  std::vector<FirstClickVariant> variants;
  if (definition == "all")
    variants = {FirstClickVariant::RecountAll, FirstClickVariant::QuietTrans, FirstClickVariant::QuietAll};
  else
    variants = {variant_from_string(definition)};

  std::ofstream bunches(std::filesystem::path(output) / "bunches.csv");
  std::ofstream pops(std::filesystem::path(output) / "populations.csv");
  if (!bunches || !pops) throw std::runtime_error("cannot write into " + output);
  bunches << "# manifest_hash " << e.manifest_hash << '\n' << kBunchCsvHeader << '\n';
  pops << "# manifest_hash " << e.manifest_hash << '\n' << kPopulationCsvHeader << '\n';

  std::vector<BunchHistogram> quiet_all;
  for (auto v : variants) {
    const FirstClickDefinition def(v, t_in_window);
    for (std::size_t i = 0; i < e.streams.size(); ++i) {
      const auto a = analyze_stream(e.streams[i], e.drives[i], def, t_out_window);
      write_bunch_rows(bunches, a.histogram);
      write_population_rows(pops, a.drive, def.letter(), a.populations);
      if (v == FirstClickVariant::QuietAll) quiet_all.push_back(a.histogram);
      std::cerr << "drive " << e.drives[i] << " definition " << def.letter() << ": "
                << a.histogram.n_first_clicks << " first clicks\n";
    }
  }
  if (fit) {
    if (quiet_all.empty()) {
      const FirstClickDefinition def(FirstClickVariant::QuietAll, t_in_window);
      for (std::size_t i = 0; i < e.streams.size(); ++i)
        quiet_all.push_back(analyze_stream(e.streams[i], e.drives[i], def, t_out_window).histogram);
    }
    FitOptions opt;
    opt.gamma = e.config.gamma;
    const auto r = fit_timescales(quiet_all, e.config.n_atoms, opt);
    std::ofstream f(std::filesystem::path(output) / "fit.csv");
    f << "# manifest_hash " << e.manifest_hash << '\n';
    f << "# t_in_hat " << fmt_double(r.t_in_hat) << " t_out_hat " << fmt_double(r.t_out_hat) << " residual "
      << fmt_double(r.residual) << '\n';
    f << kFitCsvHeader << '\n';
    const int n = e.config.n_atoms;
    for (std::size_t i = 0; i < e.drives.size(); ++i) {
      if (quiet_all[i].n_first_clicks == 0) continue;
      const double d = e.drives[i];
      const BunchModel m{n, alpha_sq_from_drive(n, d, e.config.gamma), r.t_in_hat, r.t_out_hat};
      for (int k = n + 1; k <= n + 6; ++k)
        f << fmt_double(d) << ',' << k << ',' << fmt_double(model_pk(m, k).probability) << ','
          << fmt_double(r.t_in_hat) << ',' << fmt_double(r.t_out_hat) << '\n';
    }
    std::cout << "t_in_hat," << fmt_double(r.t_in_hat) << "\nt_out_hat," << fmt_double(r.t_out_hat)
              << "\nt_in_window," << fmt_double(t_in_window) << "\nt_out_window," << fmt_double(t_out_window)
              << '\n';
  }
  return 0;
}

int cmd_verify(bool full, bool canary, const std::string& inputs)
{
  std::vector<CheckResult> results;
  if (!inputs.empty()) {
    results.push_back(verify_inputs(inputs));
  } else {
    VerifyOptions o;
    o.level = full ? VerifyLevel::Full : VerifyLevel::Quick;
    o.canary = canary;
    results = run_verification(o);
  }
  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  (" << r.detail << ")\n";
    ok = ok && r.passed;
  }
  std::cout << (ok ? "all checks passed\n" : "verification FAILED\n");
  return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Photon superbunching laboratory: analytics, oracles, trajectories and bunch statistics"};
  app.require_subcommand(1);

  // analytic
  auto* analytic = app.add_subcommand("analytic", "closed-form steady-state quantities");
  int a_n = 1;
  DriveFlags a_drive;
  std::string a_orders = "1..3";
  bool a_timescales = false;
  std::vector<double> a_quantiles{0.99};
  std::string a_conditional;
  int a_reflections = 0;
  analytic->add_option("-N,--atoms", a_n, "number of atoms")->required()->check(CLI::Range(1, kMaxAtoms));
  a_drive.add_to(analytic);
  analytic->add_option("--orders", a_orders, "correlation orders, 'n' or 'lo..hi'");
  analytic->add_flag("--timescales", a_timescales, "print T_in, T_out,avg and quantiles");
  analytic->add_option("--quantile", a_quantiles, "relaxation-time quantiles")->check(CLI::Range(0.0, 1.0));
  analytic->add_option("--conditional", a_conditional, "conditional state after a transmitted click")
      ->check(CLI::IsMember({"first", "any", "full", "reflections"}));
  analytic->add_option("--reflections", a_reflections, "k for --conditional reflections")->check(CLI::NonNegativeNumber);

  // timescales
  auto* ts = app.add_subcommand("timescales", "T_in, mean relaxation time and quantiles");
  int t_n = 1;
  double t_gamma = 1.0;
  std::vector<double> t_quantiles{0.99};
  ts->add_option("-N,--atoms", t_n, "number of atoms")->required()->check(CLI::Range(1, kMaxAtoms));
  ts->add_option("--gamma", t_gamma, "decay rate")->check(CLI::PositiveNumber);
  ts->add_option("--quantile", t_quantiles, "quantiles p in (0,1)")->check(CLI::Range(0.0, 1.0));

  // steady
  auto* steady = app.add_subcommand("steady", "steady-state populations, optionally against the dense oracle");
  int s_n = 1;
  DriveFlags s_drive;
  bool s_numeric = false;
  steady->add_option("-N,--atoms", s_n, "number of atoms")->required()->check(CLI::Range(1, kMaxAtoms));
  s_drive.add_to(steady);
  steady->add_flag("--numeric", s_numeric, "compare with the Liouvillian null space");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo trajectories over a drive grid");
  std::string sim_config;
  std::string sim_write_config;
  ExperimentConfig cfg;
  double sim_t_in = 0.0;
  double sim_t_out = 0.0;
  double sim_quantile = 0.99;
  sim->add_option("--config", sim_config, "JSON experiment config")->check(CLI::ExistingFile);
  sim->add_option("-N,--atoms", cfg.n_atoms, "number of atoms")->check(CLI::Range(1, kMaxAtoms));
  sim->add_option("--gamma", cfg.gamma, "decay rate")->check(CLI::PositiveNumber);
  sim->add_option("--drives", cfg.drive_grid, "effective drive grid Omega/(gamma sqrt(N))");
  sim->add_option("--t-end", cfg.t_end, "trajectory length")->check(CLI::PositiveNumber);
  sim->add_option("--burn-in", cfg.burn_in, "burn-in time")->check(CLI::NonNegativeNumber);
  sim->add_option("--dt", cfg.dt, "propagation step (0 = automatic)")->check(CLI::NonNegativeNumber);
  sim->add_option("--seed", cfg.seed, "RNG seed");
  sim->add_option("--trajectories", cfg.n_trajectories, "trajectories per drive point")->check(CLI::PositiveNumber);
  sim->add_option("--threads", cfg.n_threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  sim->add_option("-o,--output", cfg.output_dir, "output directory");
  sim->add_option("--t-in", sim_t_in, "explicit T_in window (default: closed form)")->check(CLI::PositiveNumber);
  sim->add_option("--t-out", sim_t_out, "explicit T_out window")->check(CLI::PositiveNumber);
  sim->add_option("--t-out-quantile", sim_quantile, "T_out as a relaxation quantile")->check(CLI::Range(0.0, 1.0));
  sim->add_option("--write-config", sim_write_config, "write the effective config to this file");

  // bunches
  auto* bun = app.add_subcommand("bunches", "bunch histograms, first-click populations and timescale fit");
  std::string b_input;
  std::string b_definition = "all";
  bool b_fit = false;
  std::string b_output;
  bun->add_option("-i,--input", b_input, "simulate output directory")->required()->check(CLI::ExistingDirectory);
  bun->add_option("--definition", b_definition, "first-click definition a|b|c|all")
      ->check(CLI::IsMember({"a", "b", "c", "all"}));
  bun->add_flag("--fit", b_fit, "fit (T_in_hat, T_out_hat) to the quiet-in-both histograms");
  bun->add_option("-o,--output", b_output, "directory for CSV output (default: input)");

  // verify
  auto* ver = app.add_subcommand("verify", "oracle self-check suite");
  bool v_quick = false;
  bool v_full = false;
  bool v_canary = false;
  std::string v_inputs;
  auto* q = ver->add_flag("--quick", v_quick, "small N range and sample counts");
  auto* f = ver->add_flag("--full", v_full, "N <= 5 oracle coverage and larger samples");
  q->excludes(f);
  ver->add_flag("--canary", v_canary, "flip the sign of S_z; the suite must fail");
  ver->add_option("--inputs", v_inputs, "check a simulate directory for manifest consistency");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (analytic->parsed())
      return cmd_analytic(a_n, a_drive, a_orders, a_timescales, a_quantiles, a_conditional, a_reflections);
    if (ts->parsed()) {
      print_timescales(t_n, t_gamma, t_quantiles);
      return 0;
    }
    if (steady->parsed()) return cmd_steady(s_n, s_drive, s_numeric);
    if (sim->parsed()) {
      if (!sim_config.empty()) {
        ExperimentConfig from_file = load_config(sim_config);
        if (sim->count("--output") > 0) from_file.output_dir = cfg.output_dir;
        if (sim->count("--threads") > 0) from_file.n_threads = cfg.n_threads;
        cfg = from_file;
      } else {
        if (sim->count("--t-in") > 0) {
          cfg.t_in_policy = TInPolicy::Explicit;
          cfg.t_in_value = sim_t_in;
        }
        if (sim->count("--t-out") > 0) {
          cfg.t_out_policy = TOutPolicy::Explicit;
          cfg.t_out_value = sim_t_out;
        } else {
          cfg.t_out_value = sim_quantile;
        }
      }
      validate(cfg);
      if (!sim_write_config.empty()) save_config(cfg, sim_write_config);
      const auto summary = simulate_experiment(cfg);
      std::cout << "manifest_hash," << summary.manifest_hash << "\ndrive,clicks\n";
      for (std::size_t i = 0; i < cfg.drive_grid.size(); ++i)
        std::cout << fmt_double(cfg.drive_grid[i]) << ',' << summary.clicks_per_drive[i] << '\n';
      return 0;
    }
    if (bun->parsed()) return cmd_bunches(b_input, b_definition, b_fit, b_output);
    if (ver->parsed()) return cmd_verify(v_full, v_canary, v_inputs);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
