#pragma once

#include "meshsim/radio.hpp"

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace meshsim {

enum class MobilityModel : std::uint8_t
{
  RandomWaypoint,
  ReferencePointGroup,
};

struct Area
{
  double width = 0.0;
  double height = 0.0;
  bool contains(Position p, double slack = 1e-9) const
  {
    return p.x >= -slack && p.y >= -slack && p.x <= width + slack && p.y <= height + slack;
  }
};

struct MobilityConfig
{
  MobilityModel model = MobilityModel::RandomWaypoint;
  double min_speed = 2.0;
  double max_speed = 6.0;
  double pause = 0.0;
  Area area{240.0, 360.0};
  double warmup_discard = 900.0;
  double group_size_mean = 3.0;
  double group_deviation_radius = 30.0;

  void validate() const;
};

struct Waypoint
{
  double time;
  Position pos;
  /// Speed of the segment starting here; 0 for the last waypoint and pauses.
  double speed;
};

/// Per-node piecewise-linear position over time.
class MobilityTrace
{
public:
  MobilityTrace() = default;
  explicit MobilityTrace(std::vector<std::vector<Waypoint>> tracks) : m_tracks(std::move(tracks)) {}

  std::size_t node_count() const { return m_tracks.size(); }
  const std::vector<Waypoint>& track(std::size_t node) const { return m_tracks.at(node); }
  std::vector<Waypoint>& track(std::size_t node) { return m_tracks.at(node); }
  void add_track(std::vector<Waypoint> track) { m_tracks.push_back(std::move(track)); }

  double start_time(std::size_t node) const { return track(node).front().time; }
  double end_time(std::size_t node) const { return track(node).back().time; }

  /// Linear interpolation; throws std::out_of_range outside the node's span.
  Position position_at(std::size_t node, double t) const;

  friend bool operator==(const MobilityTrace&, const MobilityTrace&);

private:
  std::vector<std::vector<Waypoint>> m_tracks;
};

bool operator==(const Waypoint& a, const Waypoint& b);

/// Random Waypoint. Each node draws its own stream from (seed, node); the
/// first `warmup_discard` seconds are generated and then cut off, so the
/// returned trace spans [0, duration].
MobilityTrace generate_rwp(const MobilityConfig& config, std::size_t n_nodes, double duration,
                           std::uint64_t seed);

/// Reference Point Group Mobility. Group reference points follow Random
/// Waypoint; members sit at a uniform offset within the deviation radius that
/// is redrawn at every reference waypoint.
MobilityTrace generate_rpgm(const MobilityConfig& config, std::size_t n_nodes, double duration,
                            std::uint64_t seed);

/// Group sizes drawn from {m-1, m, m+1}; the last group is truncated to the
/// remaining nodes and a trailing singleton is merged into its predecessor.
std::vector<std::size_t> partition_groups(std::size_t n_nodes, double mean_size, RngStream& rng);

MobilityTrace generate_trace(const MobilityConfig& config, std::size_t n_nodes, double duration,
                             std::uint64_t seed);

/// Cuts [from, from + duration] out of a track and rebases it to start at 0.
std::vector<Waypoint> cut_window(const std::vector<Waypoint>& track, double from, double duration);

/// Trace text, one line per node: repeating "t x y" triples.
std::string export_trace(const MobilityTrace& trace);

class TraceParseError : public std::runtime_error
{
public:
  TraceParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), m_line(line)
  {
  }
  std::size_t line() const { return m_line; }

private:
  std::size_t m_line;
};

MobilityTrace import_trace(std::string_view text);

} // namespace meshsim
