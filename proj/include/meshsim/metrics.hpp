#pragma once

#include "meshsim/messages.hpp"
#include "meshsim/network.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace meshsim {

enum class Outcome : std::uint8_t
{
  InFlight,
  Delivered,
  Dropped,
};

struct PacketRecord
{
  std::uint64_t flow_id = 0;
  std::uint64_t sequence = 0;
  double sent_at = 0.0;
  std::uint32_t size = 0;
  Outcome outcome = Outcome::InFlight;
  /// Delivery or drop time; unused while in flight.
  double at = 0.0;
  DropReason reason = DropReason::NoRoute;
};

/// One control frame put on the air (each hop of a forwarded frame counts).
struct TransmissionRecord
{
  double at;
  FrameKind kind;
  NodeId src;
  NodeId dst;
  std::uint32_t size;
};

/// Everything the run-level metrics are computed from.
struct RunLog
{
  std::string protocol;
  std::string topology;
  std::string mobility;
  std::string traffic;
  std::uint64_t seed = 0;
  double window_start = 0.0;
  double window_end = 0.0;
  std::vector<TransmissionRecord> control;
  std::vector<PacketRecord> packets;
  /// Probe round-trip times in seconds; nullopt marks a timeout.
  std::vector<std::optional<double>> probes;
};

struct RunSummary
{
  std::string protocol;
  std::string topology;
  std::string mobility;
  std::string traffic;
  std::uint64_t seed = 0;
  std::optional<double> loss_pct;
  double control_kbps = 0.0;
  std::optional<double> slowpath_ms;
  std::optional<double> fastpath_ms;
  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

struct PacketCounts
{
  std::size_t sent = 0;
  std::size_t delivered = 0;
  std::size_t dropped = 0;
  std::size_t in_flight = 0;
};

PacketCounts count_outcomes(const std::vector<PacketRecord>& records);

/// 100 * dropped / (delivered + dropped); in-flight packets are left out.
/// Absent when nothing was delivered or dropped.
std::optional<double> packet_loss(const std::vector<PacketRecord>& records);

/// Aggregate control rate in kb/s over [start, end). Throws std::invalid_argument
/// for an empty window.
double control_overhead(const std::vector<TransmissionRecord>& frames, double start, double end);

struct RttSplit
{
  std::optional<double> slowpath;
  std::optional<double> fastpath;
};

/// Sample 1 is the slow path; the mean of the remaining answered samples is
/// the fast path.
RttSplit rtt_split(const std::vector<std::optional<double>>& samples);

struct CiResult
{
  double mean = 0.0;
  double half_width = 0.0;
  double level = 0.95;
  std::size_t n = 0;
  double lower() const { return mean - half_width; }
  double upper() const { return mean + half_width; }
};

/// Two-sided quantile of Student's t with `dof` degrees of freedom.
double student_t_quantile(double p, double dof);

/// mean +- t(1 - (1 - level) / 2, n - 1) * s / sqrt(n). Throws for n < 2.
CiResult confidence_interval(const std::vector<double>& samples, double level = 0.95);

bool intervals_overlap(const CiResult& a, const CiResult& b);

RunSummary summarize(const RunLog& log);

/// Text event log; numbers are written so that reading them back gives the same doubles.
void write_run_log(std::ostream& out, const RunLog& log);
RunLog read_run_log(std::istream& in);

/// Shortest text that parses back to exactly `value`.
std::string format_double(double value);

} // namespace meshsim
