#pragma once

// Deterministic discrete-event core: simulation clock, event queue and
// purpose-labelled random streams.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace meshsim {

using NodeId = std::uint32_t;
inline constexpr NodeId kBroadcast = std::numeric_limits<NodeId>::max();
inline constexpr NodeId kGlobal = std::numeric_limits<NodeId>::max() - 1;

/// Continuous simulation time in seconds.
class SimTime
{
public:
  constexpr SimTime() = default;
  constexpr explicit SimTime(double seconds) : m_seconds(seconds) {}

  constexpr double seconds() const { return m_seconds; }

  friend constexpr auto operator<=>(SimTime, SimTime) = default;
  friend constexpr SimTime operator+(SimTime t, double dt) { return SimTime{t.m_seconds + dt}; }
  friend constexpr SimTime operator-(SimTime t, double dt) { return SimTime{t.m_seconds - dt}; }
  friend constexpr double operator-(SimTime a, SimTime b) { return a.m_seconds - b.m_seconds; }

private:
  double m_seconds = 0.0;
};

enum class EventKind : std::uint8_t
{
  FrameDelivery,
  Timer,
  MobilityWaypoint,
  TrafficDeparture,
  MetricSample,
};

std::string_view to_string(EventKind kind);

struct EventId
{
  std::uint64_t sequence = 0;
  friend constexpr bool operator==(EventId, EventId) = default;
};

/// What the scheduler reports for every dispatched event when tracing is on.
struct EventRecord
{
  SimTime fire_at;
  std::uint64_t sequence;
  EventKind kind;
  NodeId target;
};

class Scheduler
{
public:
  using Action = std::function<void()>;

  SimTime now() const { return m_now; }

  /// Enqueue `action` at `fire_at`. Throws std::logic_error when fire_at < now().
  EventId schedule(SimTime fire_at, EventKind kind, NodeId target, Action action);
  EventId schedule_in(double delay, EventKind kind, NodeId target, Action action);

  /// Returns false when the event already fired or was cancelled.
  bool cancel(EventId id);

  /// Dispatch every event with fire_at <= end in (fire_at, sequence) order and
  /// leave the clock at `end`.
  std::size_t run_until(SimTime end);

  std::size_t pending() const { return m_live.size(); }
  std::uint64_t dispatched() const { return m_dispatched; }

  void set_trace(std::function<void(const EventRecord&)> trace) { m_trace = std::move(trace); }

private:
  struct Entry
  {
    SimTime fire_at;
    std::uint64_t sequence;
    EventKind kind;
    NodeId target;
    Action action;
  };
  struct Later
  {
    bool operator()(const Entry& a, const Entry& b) const
    {
      if (a.fire_at != b.fire_at)
        return a.fire_at > b.fire_at;
      return a.sequence > b.sequence;
    }
  };

  SimTime m_now{0.0};
  std::uint64_t m_next_sequence = 1;
  std::uint64_t m_dispatched = 0;
  std::vector<Entry> m_heap;
  std::unordered_set<std::uint64_t> m_live;
  std::unordered_set<std::uint64_t> m_cancelled;
  std::function<void(const EventRecord&)> m_trace;
};

/// Random stream identified by (replication seed, purpose label, node).
/// The same triple always reproduces the same draw sequence, independent of
/// how many other streams exist.
class RngStream
{
public:
  RngStream(std::uint64_t seed, std::string_view label, std::uint64_t node = 0);

  std::uint64_t next_u64() { return m_engine(); }
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  double exponential(double rate);
  double normal(double mean, double stddev);

private:
  std::mt19937_64 m_engine;
};

std::uint64_t stream_seed(std::uint64_t seed, std::string_view label, std::uint64_t node);

} // namespace meshsim
