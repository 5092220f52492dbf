#pragma once

#include "meshsim/config.hpp"
#include "meshsim/metrics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace meshsim {

struct RunResult
{
  ProtocolKind protocol = ProtocolKind::Olsr;
  std::uint64_t seed = 0;
  bool converged = false;
  /// Convergence time, the start of the overhead window.
  double converged_at = 0.0;
  /// Mobility and traffic start.
  double mobility_start = 0.0;
  double end = 0.0;
  RunLog log;
  std::optional<RunSummary> summary;
  PacketCounts counts;
  std::uint64_t arp_broadcasts = 0;
  std::uint64_t events = 0;
  std::vector<RerouteRecord> reroutes;
};

/// Seed-dependent client placement: a trace for mobile runs, fixed points otherwise.
struct ClientMotion
{
  std::optional<MobilityTrace> trace;
  std::vector<Position> fixed;
};

ClientMotion client_motion(const ScenarioConfig& config, const Topology& topology, std::uint64_t seed);

/// One replication: convergence, quiet window, then mobility with traffic and probes.
RunResult run_single(const ScenarioConfig& config, const Topology& topology, ProtocolKind protocol,
                     std::uint64_t seed);
RunResult run_single(const ScenarioConfig& config, ProtocolKind protocol, std::uint64_t seed);

struct ExperimentOptions
{
  unsigned jobs = 1;
  /// Directory for per-run event logs; none when empty.
  std::filesystem::path event_dir;
  /// Keep full logs in the returned results.
  bool keep_logs = false;
};

/// Runs every protocol for seeds base_seed .. base_seed + replications - 1,
/// ordered by protocol then seed regardless of `jobs`.
std::vector<RunResult> run_experiment(const ScenarioConfig& config, const ExperimentOptions& options);

inline constexpr const char* kResultsHeader =
  "protocol,topology,mobility,traffic,seed,loss_pct,control_kbps,slowpath_ms,fastpath_ms";

std::string format_result_row(const RunSummary& s);
std::string event_log_name(const RunSummary& s);

/// results.csv, aggregate.csv and excluded.csv.
void write_results(const std::filesystem::path& dir, const std::vector<RunResult>& runs);

/// Rows of the aggregate table: one per (protocol, topology, mobility, traffic).
std::string format_aggregate(const std::vector<RunSummary>& rows);

std::vector<RunSummary> read_results(const std::filesystem::path& csv);

} // namespace meshsim
