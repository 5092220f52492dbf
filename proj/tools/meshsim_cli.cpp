#include "meshsim/config.hpp"
#include "meshsim/simulation.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

using namespace meshsim;

namespace {

int
cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::size_t> reps,
        const std::string& out_dir, bool log_events, unsigned jobs, const std::vector<std::string>& protocols)
{
  auto config = load_scenario(config_path);
  if (seed)
    config.base_seed = *seed;
  if (reps)
    config.replications = *reps;
  if (!protocols.empty())
    {
      config.protocols.clear();
      for (const auto& p : protocols)
        config.protocols.push_back(parse_protocol(p));
    }
  ExperimentOptions opts;
  opts.jobs = jobs;
  const std::filesystem::path dir(out_dir);
  if (log_events)
    opts.event_dir = dir / "events";
  const auto t0 = std::chrono::steady_clock::now();
  auto runs = run_experiment(config, opts);
  write_results(dir, runs);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::size_t excluded = 0;
  for (const auto& r : runs)
    if (!r.converged)
      ++excluded;
  std::cerr << config.name << ": " << runs.size() << " runs (" << excluded << " excluded) in " << wall << " s, results in "
            << dir.string() << "\n";
  return 0;
}

int
cmd_gen_mobility(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::size_t> reps,
                 const std::string& out_dir)
{
  auto config = load_scenario(config_path);
  if (seed)
    config.base_seed = *seed;
  if (reps)
    config.replications = *reps;
  if (config.mobility_mode == MobilityMode::Static || config.mobility_mode == MobilityMode::Trace)
    throw ConfigError("mobility.model: gen-mobility needs rwp or rpgm");
  const auto topology = build_topology(config.topology, config.radio_range());
  std::filesystem::create_directories(out_dir);
  for (std::size_t r = 0; r < config.replications; ++r)
    {
      const auto s = config.base_seed + r;
      auto motion = client_motion(config, topology, s);
      const auto path = std::filesystem::path(out_dir) / (config.name + "_seed" + std::to_string(s) + ".trace");
      std::ofstream f(path);
      f << export_trace(*motion.trace);
      std::cerr << "wrote " << path.string() << "\n";
    }
  return 0;
}

int
cmd_report(const std::string& dir_text)
{
  const std::filesystem::path dir(dir_text);
  const auto rows = read_results(dir / "results.csv");
  std::cout << format_aggregate(rows);

  const auto events = dir / "events";
  if (!std::filesystem::is_directory(events))
    return 0;
  // recompute every run from its event log and compare with the stored row
  std::size_t checked = 0, mismatched = 0;
  for (const auto& row : rows)
    {
      std::ifstream f(events / event_log_name(row));
      if (!f)
        continue;
      const auto again = summarize(read_run_log(f));
      ++checked;
      if (format_result_row(again) != format_result_row(row))
        {
          ++mismatched;
          std::cerr << "mismatch: " << format_result_row(row) << " vs " << format_result_row(again) << "\n";
        }
    }
  std::cerr << "event logs: " << checked << " recomputed, " << mismatched << " mismatched\n";
  return mismatched == 0 ? 0 : 1;
}

} // namespace

int
main(int argc, char** argv)
{
  CLI::App app{"Wireless mesh routing simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "results", results_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  bool log_events = false;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::string> protocols;

  auto* run = app.add_subcommand("run", "Run every replication of a scenario");
  run->add_option("config", config_path, "Scenario INI file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Base seed (overrides scenario.base_seed)");
  run->add_option("--replications", reps, "Replication count");
  run->add_option("--out-dir", out_dir, "Output directory");
  run->add_flag("--log-events", log_events, "Write one event log per run");
  run->add_option("--jobs", jobs, "Worker threads");
  run->add_option("--protocol", protocols, "Restrict to these protocols");

  auto* gen = app.add_subcommand("gen-mobility", "Write the client mobility traces of a scenario");
  gen->add_option("config", config_path, "Scenario INI file")->required()->check(CLI::ExistingFile);
  gen->add_option("--seed", seed, "Base seed");
  gen->add_option("--replications", reps, "Number of traces");
  gen->add_option("--out-dir", out_dir, "Output directory");

  auto* report = app.add_subcommand("report", "Aggregate a results directory and re-check its event logs");
  report->add_option("results-dir", results_dir, "Directory holding results.csv")->required();

  CLI11_PARSE(app, argc, argv);
  try
    {
      if (*run)
        return cmd_run(config_path, seed, reps, out_dir, log_events, jobs, protocols);
      if (*gen)
        return cmd_gen_mobility(config_path, seed, reps, out_dir);
      if (*report)
        return cmd_report(results_dir);
    }
  catch (const std::exception& e)
    {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  return 0;
}
