#ifndef SUPERBUNCH_EXPERIMENT_HPP
#define SUPERBUNCH_EXPERIMENT_HPP

#include "superbunch/bunches.hpp"
#include "superbunch/timescales.hpp"
#include "superbunch/trajectory.hpp"
#include "superbunch/version.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace superbunch {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Experiment configuration (JSON on disk)

enum class TInPolicy { Formula, Explicit };
enum class TOutPolicy { Quantile, Explicit };

struct ExperimentConfig {
  int n_atoms = 3;
  double gamma = 1.0;
  std::vector<double> drive_grid{0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0}; // Omega / (gamma sqrt(N))
  double t_end = 50.0;
  double burn_in = 10.0;
  double dt = 0.0; // 0 = automatic
  std::uint64_t seed = 1;
  int n_trajectories = 100;
  TInPolicy t_in_policy = TInPolicy::Formula;
  double t_in_value = 0.0; // used when t_in_policy == Explicit
  TOutPolicy t_out_policy = TOutPolicy::Quantile;
  double t_out_value = 0.99; // quantile p, or a time when Explicit
  std::string output_dir = "out";
  int n_threads = 0;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

inline void validate(const ExperimentConfig& c)
{
  (void)DickeBasis{c.n_atoms};
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string("ExperimentConfig: ") + name + " must be positive and finite");
  };
  positive(c.gamma, "gamma");
  positive(c.t_end, "t_end");
  if (c.drive_grid.empty()) throw std::invalid_argument("ExperimentConfig: drive_grid must not be empty");
  for (double d : c.drive_grid)
    if (!(d >= 0.0) || !std::isfinite(d))
      throw std::invalid_argument("ExperimentConfig: drive values must be non-negative and finite");
  if (!(c.burn_in >= 0.0 && c.burn_in < c.t_end))
    throw std::invalid_argument("ExperimentConfig: burn_in must lie in [0, t_end)");
  if (!(c.dt >= 0.0)) throw std::invalid_argument("ExperimentConfig: dt must be >= 0");
  if (c.n_trajectories < 1) throw std::invalid_argument("ExperimentConfig: n_trajectories must be >= 1");
  if (c.t_in_policy == TInPolicy::Explicit) positive(c.t_in_value, "t_in value");
  if (c.t_out_policy == TOutPolicy::Quantile) {
    if (!(c.t_out_value > 0.0 && c.t_out_value < 1.0))
      throw std::invalid_argument("ExperimentConfig: t_out quantile must lie in (0, 1)");
  } else {
    positive(c.t_out_value, "t_out value");
  }
  if (c.output_dir.empty()) throw std::invalid_argument("ExperimentConfig: output_dir must not be empty");
}

inline json to_json(const ExperimentConfig& c)
{
  json j;
  j["n_atoms"] = c.n_atoms;
  j["gamma"] = c.gamma;
  j["drive_grid"] = c.drive_grid;
  j["t_end"] = c.t_end;
  j["burn_in"] = c.burn_in;
  j["dt"] = c.dt;
  j["seed"] = c.seed;
  j["n_trajectories"] = c.n_trajectories;
  j["t_in_policy"] = {{"kind", c.t_in_policy == TInPolicy::Formula ? "formula" : "explicit"}, {"value", c.t_in_value}};
  j["t_out_policy"] = {{"kind", c.t_out_policy == TOutPolicy::Quantile ? "quantile" : "explicit"},
                       {"value", c.t_out_value}};
  j["output_dir"] = c.output_dir;
  j["n_threads"] = c.n_threads;
  return j;
}

inline ExperimentConfig config_from_json(const json& j)
{
  static const std::set<std::string> known{"n_atoms",        "gamma",       "drive_grid",   "t_end",
                                           "burn_in",        "dt",          "seed",         "n_trajectories",
                                           "t_in_policy",    "t_out_policy", "output_dir",  "n_threads"};
  if (!j.is_object()) throw std::invalid_argument("ExperimentConfig: config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw std::invalid_argument("ExperimentConfig: unknown key '" + key + "'");
  for (const char* key : {"n_atoms", "drive_grid"})
    if (!j.contains(key)) throw std::invalid_argument(std::string("ExperimentConfig: missing key '") + key + "'");
  ExperimentConfig c;
  c.n_atoms = j.at("n_atoms").get<int>();
  c.gamma = j.value("gamma", c.gamma);
  c.drive_grid = j.at("drive_grid").get<std::vector<double>>();
  c.t_end = j.value("t_end", c.t_end);
  c.burn_in = j.value("burn_in", c.burn_in);
  c.dt = j.value("dt", c.dt);
  c.seed = j.value("seed", c.seed);
  c.n_trajectories = j.value("n_trajectories", c.n_trajectories);
  if (j.contains("t_in_policy")) {
    const auto& p = j.at("t_in_policy");
    const auto kind = p.at("kind").get<std::string>();
    if (kind == "formula")
      c.t_in_policy = TInPolicy::Formula;
    else if (kind == "explicit")
      c.t_in_policy = TInPolicy::Explicit;
    else
      throw std::invalid_argument("ExperimentConfig: unknown t_in_policy '" + kind + "'");
    c.t_in_value = p.value("value", 0.0);
  }
  if (j.contains("t_out_policy")) {
    const auto& p = j.at("t_out_policy");
    const auto kind = p.at("kind").get<std::string>();
    if (kind == "quantile")
      c.t_out_policy = TOutPolicy::Quantile;
    else if (kind == "explicit")
      c.t_out_policy = TOutPolicy::Explicit;
    else
      throw std::invalid_argument("ExperimentConfig: unknown t_out_policy '" + kind + "'");
    c.t_out_value = p.value("value", c.t_out_value);
  }
  c.output_dir = j.value("output_dir", c.output_dir);
  c.n_threads = j.value("n_threads", c.n_threads);
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  return config_from_json(json::parse(in));
}

inline void save_config(const ExperimentConfig& c, const std::filesystem::path& path)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file " + path.string());
  out << to_json(c).dump(2) << '\n';
}

inline double resolve_t_in(const ExperimentConfig& c)
{
  return c.t_in_policy == TInPolicy::Formula ? t_in(c.n_atoms, c.gamma) : c.t_in_value;
}

inline double resolve_t_out(const ExperimentConfig& c)
{
  return c.t_out_policy == TOutPolicy::Quantile ? t_out_quantile(c.n_atoms, c.t_out_value, c.gamma)
                                                : c.t_out_value;
}

// ---------------------------------------------------------------------------
// Manifest

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes)
{
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Hash over the canonical config dump (output_dir and thread count excluded,
/// since neither changes the data) and the code version.
inline std::string manifest_hash(const ExperimentConfig& c)
{
  json j = to_json(c);
  j.erase("output_dir");
  j.erase("n_threads");
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump() + "|" + kVersion);
  return s.str();
}

inline json make_manifest(const ExperimentConfig& c)
{
  json files = json::array();
  for (std::size_t i = 0; i < c.drive_grid.size(); ++i)
    files.push_back({{"drive", c.drive_grid[i]},
                     {"clicks", "clicks_" + std::to_string(i) + ".jsonl"},
                     {"snapshots", "snapshots_" + std::to_string(i) + ".jsonl"}});
  return {{"manifest_hash", manifest_hash(c)}, {"code_version", kVersion}, {"config", to_json(c)},
          {"files", files}};
}

// ---------------------------------------------------------------------------
// Line-delimited click and snapshot records

inline void write_clicks_jsonl(std::ostream& out, const ClickStream& s, const std::string& hash)
{
  out << json{{"manifest_hash", hash}}.dump() << '\n';
  for (const auto& c : s.clicks)
    out << json{{"traj", c.trajectory_id}, {"t", c.t}, {"ch", std::string(to_string(c.channel))}}.dump() << '\n';
}

inline void write_snapshots_jsonl(std::ostream& out, const ClickStream& s, const std::string& hash)
{
  out << json{{"manifest_hash", hash}}.dump() << '\n';
  for (const auto& sn : s.snapshots)
    out << json{{"traj", sn.trajectory_id}, {"t", sn.t}, {"pop", sn.populations}}.dump() << '\n';
}

struct JsonlFile {
  std::string manifest_hash;
  std::vector<json> records;
};

inline JsonlFile read_jsonl(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  JsonlFile f;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing manifest header line");
  f.manifest_hash = json::parse(line).at("manifest_hash").get<std::string>();
  while (std::getline(in, line))
    if (!line.empty()) f.records.push_back(json::parse(line));
  return f;
}

/// Rebuilds a stream from its click and snapshot records; snapshot click
/// indices are recovered by matching (traj, t) exactly.
inline ClickStream stream_from_records(const JsonlFile& clicks, const JsonlFile& snapshots, double t_end,
                                       double burn_in, int n_trajectories)
{
  ClickStream s;
  s.t_end = t_end;
  s.burn_in = burn_in;
  s.n_trajectories = n_trajectories;
  s.clicks.reserve(clicks.records.size());
  for (const auto& r : clicks.records)
    s.clicks.push_back({r.at("t").get<double>(), channel_from_string(r.at("ch").get<std::string>()),
                        r.at("traj").get<int>()});
  std::size_t cursor = 0;
  for (const auto& r : snapshots.records) {
    ConditionalSnapshot sn{0, r.at("traj").get<int>(), r.at("t").get<double>(),
                           r.at("pop").get<std::vector<double>>()};
    while (cursor < s.clicks.size() &&
           !(s.clicks[cursor].trajectory_id == sn.trajectory_id && s.clicks[cursor].t == sn.t &&
             s.clicks[cursor].channel == Channel::R))
      ++cursor;
    if (cursor == s.clicks.size()) throw std::runtime_error("snapshot record without a matching R click");
    sn.click_index = cursor;
    s.snapshots.push_back(std::move(sn));
  }
  return s;
}

// ---------------------------------------------------------------------------
// CSV summaries

inline constexpr const char* kBunchCsvHeader = "drive,definition,bunch_size,probability,stderr";
inline constexpr const char* kPopulationCsvHeader = "drive,definition,k_excited,population,stderr";
inline constexpr const char* kFitCsvHeader = "drive,bunch_size,model_probability,t_in_hat,t_out_hat";

inline std::string fmt_double(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void write_bunch_rows(std::ostream& out, const BunchHistogram& h)
{
  for (const auto& [size, v] : h.probabilities)
    out << fmt_double(h.drive) << ',' << h.definition.letter() << ',' << size << ',' << fmt_double(v.p) << ','
        << fmt_double(v.std_error) << '\n';
}

inline void write_population_rows(std::ostream& out, double drive, char definition, const PopulationEstimate& p)
{
  for (std::size_t k = 0; k < p.mean.size(); ++k)
    out << fmt_double(drive) << ',' << definition << ',' << k << ',' << fmt_double(p.mean[k]) << ','
        << fmt_double(p.std_error[k]) << '\n';
}

// ---------------------------------------------------------------------------
// Pipeline

inline TrajectoryConfig trajectory_config(const ExperimentConfig& c, double drive)
{
  TrajectoryConfig t;
  t.params = SystemParams::from_effective_drive(c.n_atoms, c.gamma, drive);
  t.t_end = c.t_end;
  t.burn_in = c.burn_in;
  t.dt = c.dt;
  t.seed = c.seed;
  t.n_trajectories = c.n_trajectories;
  t.initial_state = InitialState::ground();
  t.record_conditional_states = true;
  t.n_threads = c.n_threads;
  return t;
}

struct SimulationSummary {
  std::string manifest_hash;
  std::vector<std::size_t> clicks_per_drive;
};

/// Runs every drive point and writes clicks, snapshots and manifest.json.
inline SimulationSummary simulate_experiment(const ExperimentConfig& c)
{
  validate(c);
  namespace fs = std::filesystem;
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());

  const json manifest = make_manifest(c);
  const std::string hash = manifest.at("manifest_hash").get<std::string>();
  SimulationSummary summary{hash, {}};
  for (std::size_t i = 0; i < c.drive_grid.size(); ++i) {
    const ClickStream s = run_batch(trajectory_config(c, c.drive_grid[i]));
    const auto& entry = manifest.at("files").at(i);
    std::ofstream clicks(dir / entry.at("clicks").get<std::string>());
    std::ofstream snaps(dir / entry.at("snapshots").get<std::string>());
    if (!clicks || !snaps) throw std::runtime_error("cannot write into " + dir.string());
    write_clicks_jsonl(clicks, s, hash);
    write_snapshots_jsonl(snaps, s, hash);
    summary.clicks_per_drive.push_back(s.clicks.size());
  }
  std::ofstream m(dir / "manifest.json");
  if (!m) throw std::runtime_error("cannot write manifest into " + dir.string());
  m << manifest.dump(2) << '\n';
  return summary;
}

struct LoadedExperiment {
  ExperimentConfig config;
  std::string manifest_hash;
  std::vector<double> drives;
  std::vector<ClickStream> streams;
};

/// Reads a simulate output directory, refusing files from other manifests.
inline LoadedExperiment load_experiment(const std::filesystem::path& dir)
{
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("missing manifest.json in " + dir.string());
  const json manifest = json::parse(in);
  LoadedExperiment e;
  e.config = config_from_json(manifest.at("config"));
  e.manifest_hash = manifest.at("manifest_hash").get<std::string>();
  if (e.manifest_hash != manifest_hash(e.config))
    throw std::runtime_error("manifest hash does not match its config (edited manifest or other code version)");
  for (const auto& entry : manifest.at("files")) {
    const auto clicks = read_jsonl(dir / entry.at("clicks").get<std::string>());
    const auto snaps = read_jsonl(dir / entry.at("snapshots").get<std::string>());
    if (clicks.manifest_hash != e.manifest_hash || snaps.manifest_hash != e.manifest_hash)
      throw std::runtime_error("mixed-manifest inputs in " + dir.string());
    e.drives.push_back(entry.at("drive").get<double>());
    e.streams.push_back(stream_from_records(clicks, snaps, e.config.t_end, e.config.burn_in,
                                            e.config.n_trajectories));
  }
  return e;
}

struct DriveAnalysis {
  double drive;
  BunchHistogram histogram;
  PopulationEstimate populations;
};

/// Bunch histogram and first-click populations for one stream.
inline DriveAnalysis analyze_stream(const ClickStream& s, double drive, const FirstClickDefinition& def,
                                    double t_out_window)
{
  const auto first = eligible_first_clicks(s, find_first_clicks(s, def), t_out_window);
  return {drive, bunch_sizes(s, first, t_out_window, def, drive), conditional_populations(s, first)};
}

} // namespace superbunch

#endif // SUPERBUNCH_EXPERIMENT_HPP
