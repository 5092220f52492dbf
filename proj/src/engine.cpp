#include "meshsim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace meshsim {

std::string_view
to_string(EventKind kind)
{
  switch (kind)
    {
    case EventKind::FrameDelivery: return "frame";
    case EventKind::Timer: return "timer";
    case EventKind::MobilityWaypoint: return "waypoint";
    case EventKind::TrafficDeparture: return "departure";
    case EventKind::MetricSample: return "sample";
    }
  return "unknown";
}

EventId
Scheduler::schedule(SimTime fire_at, EventKind kind, NodeId target, Action action)
{
  if (fire_at < m_now)
    throw std::logic_error("event scheduled in the past: " + std::to_string(fire_at.seconds()) +
                           " < " + std::to_string(m_now.seconds()));
  const std::uint64_t seq = m_next_sequence++;
  m_heap.push_back(Entry{fire_at, seq, kind, target, std::move(action)});
  m_live.insert(seq);
  std::push_heap(m_heap.begin(), m_heap.end(), Later{});
  return EventId{seq};
}

EventId
Scheduler::schedule_in(double delay, EventKind kind, NodeId target, Action action)
{
  return schedule(m_now + delay, kind, target, std::move(action));
}

bool
Scheduler::cancel(EventId id)
{
  if (m_live.erase(id.sequence) == 0)
    return false;
  m_cancelled.insert(id.sequence);
  return true;
}

std::size_t
Scheduler::run_until(SimTime end)
{
  std::size_t count = 0;
  while (!m_heap.empty() && m_heap.front().fire_at <= end)
    {
      std::pop_heap(m_heap.begin(), m_heap.end(), Later{});
      Entry entry = std::move(m_heap.back());
      m_heap.pop_back();
      if (!m_cancelled.empty() && m_cancelled.erase(entry.sequence) > 0)
        continue;
      m_live.erase(entry.sequence);
      m_now = entry.fire_at;
      if (m_trace)
        m_trace(EventRecord{entry.fire_at, entry.sequence, entry.kind, entry.target});
      entry.action();
      ++count;
      ++m_dispatched;
    }
  if (end > m_now)
    m_now = end;
  return count;
}

namespace {

std::uint64_t
splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t
fnv1a(std::string_view text)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text)
    {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  return h;
}

} // namespace

std::uint64_t
stream_seed(std::uint64_t seed, std::string_view label, std::uint64_t node)
{
  return splitmix64(splitmix64(seed) ^ splitmix64(fnv1a(label) + node));
}

RngStream::RngStream(std::uint64_t seed, std::string_view label, std::uint64_t node)
  : m_engine(stream_seed(seed, label, node))
{
}

double
RngStream::uniform()
{
  // 53 random mantissa bits; std::uniform_real_distribution is not
  // guaranteed identical across standard libraries.
  return static_cast<double>(m_engine() >> 11) * 0x1.0p-53;
}

std::int64_t
RngStream::uniform_int(std::int64_t lo, std::int64_t hi)
{
  if (hi < lo)
    throw std::invalid_argument("uniform_int: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  const auto offset = static_cast<std::uint64_t>(uniform() * static_cast<double>(span));
  return lo + static_cast<std::int64_t>(std::min(offset, span - 1));
}

double
RngStream::exponential(double rate)
{
  if (!(rate > 0))
    throw std::invalid_argument("exponential: rate must be positive");
  return -std::log1p(-uniform()) / rate;
}

double
RngStream::normal(double mean, double stddev)
{
  // Box-Muller, one value per call.
  double u1 = uniform();
  while (u1 <= 0.0)
    u1 = uniform();
  const double u2 = uniform();
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace meshsim
