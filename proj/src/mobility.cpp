#include "meshsim/mobility.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

namespace meshsim {

void
MobilityConfig::validate() const
{
  if (!(min_speed > 0))
    throw std::invalid_argument("mobility.min_speed: must be > 0");
  if (!(max_speed >= min_speed))
    throw std::invalid_argument("mobility.max_speed: must be >= min_speed");
  if (!(pause >= 0))
    throw std::invalid_argument("mobility.pause: must be >= 0");
  if (!(warmup_discard >= 0))
    throw std::invalid_argument("mobility.warmup_discard: must be >= 0");
  if (!(area.width > 0) || !(area.height > 0))
    throw std::invalid_argument("mobility.area: width and height must be > 0");
  if (!(group_size_mean >= 1))
    throw std::invalid_argument("mobility.group_size_mean: must be >= 1");
  if (!(group_deviation_radius >= 0))
    throw std::invalid_argument("mobility.group_deviation_radius: must be >= 0");
}

bool
operator==(const Waypoint& a, const Waypoint& b)
{
  return a.time == b.time && a.pos == b.pos && a.speed == b.speed;
}

bool
operator==(const MobilityTrace& a, const MobilityTrace& b)
{
  return a.m_tracks == b.m_tracks;
}

Position
MobilityTrace::position_at(std::size_t node, double t) const
{
  const auto& wps = track(node);
  if (wps.empty() || t < wps.front().time || t > wps.back().time)
    throw std::out_of_range("position_at: t=" + std::to_string(t) + " outside trace span of node " +
                            std::to_string(node));
  auto next = std::upper_bound(wps.begin(), wps.end(), t,
                               [](double value, const Waypoint& w) { return value < w.time; });
  if (next == wps.end())
    return wps.back().pos;
  const Waypoint& a = *(next - 1);
  const Waypoint& b = *next;
  const double f = (t - a.time) / (b.time - a.time);
  return Position{a.pos.x + f * (b.pos.x - a.pos.x), a.pos.y + f * (b.pos.y - a.pos.y)};
}

namespace {

Position
uniform_in(const Area& area, RngStream& rng)
{
  return Position{rng.uniform(0.0, area.width), rng.uniform(0.0, area.height)};
}

Position
clamp_to(const Area& area, Position p)
{
  return Position{std::clamp(p.x, 0.0, area.width), std::clamp(p.y, 0.0, area.height)};
}

std::vector<Waypoint>
rwp_track(const MobilityConfig& config, double total, RngStream& rng)
{
  std::vector<Waypoint> wps;
  double t = 0.0;
  wps.push_back(Waypoint{t, uniform_in(config.area, rng), 0.0});
  while (t < total)
    {
      const Position from = wps.back().pos;
      const Position dest = uniform_in(config.area, rng);
      const double speed = rng.uniform(config.min_speed, config.max_speed);
      const double travel = distance(from, dest) / speed;
      if (!(travel > 0))
        continue;
      wps.back().speed = speed;
      t += travel;
      wps.push_back(Waypoint{t, dest, 0.0});
      if (config.pause > 0)
        {
          t += config.pause;
          wps.push_back(Waypoint{t, dest, 0.0});
        }
    }
  return wps;
}

Position
lerp(const Waypoint& a, const Waypoint& b, double t)
{
  const double f = (t - a.time) / (b.time - a.time);
  return Position{a.pos.x + f * (b.pos.x - a.pos.x), a.pos.y + f * (b.pos.y - a.pos.y)};
}

} // namespace

std::vector<Waypoint>
cut_window(const std::vector<Waypoint>& track, double from, double duration)
{
  if (track.empty())
    throw std::invalid_argument("cut_window: empty track");
  const double to = from + duration;
  std::vector<Waypoint> out;
  if (track.size() == 1 || from >= track.back().time)
    {
      const Position p = track.back().pos;
      out.push_back(Waypoint{0.0, p, 0.0});
      out.push_back(Waypoint{duration, p, 0.0});
      return out;
    }
  for (std::size_t i = 0; i + 1 < track.size(); ++i)
    {
      const Waypoint& a = track[i];
      const Waypoint& b = track[i + 1];
      if (b.time <= from)
        continue;
      if (a.time >= to)
        break;
      if (out.empty())
        {
          const double t0 = std::max(a.time, from);
          out.push_back(Waypoint{t0 - from, t0 == a.time ? a.pos : lerp(a, b, t0), a.speed});
        }
      if (b.time < to)
        out.push_back(Waypoint{b.time - from, b.pos, b.speed});
      else
        {
          out.push_back(Waypoint{duration, b.time == to ? b.pos : lerp(a, b, to), 0.0});
          return out;
        }
    }
  // Track ends before the window does: hold the last position.
  if (out.empty())
    out.push_back(Waypoint{0.0, track.back().pos, 0.0});
  if (out.back().time < duration)
    {
      out.back().speed = 0.0;
      out.push_back(Waypoint{duration, out.back().pos, 0.0});
    }
  return out;
}

MobilityTrace
generate_rwp(const MobilityConfig& config, std::size_t n_nodes, double duration, std::uint64_t seed)
{
  config.validate();
  if (!(duration > 0))
    throw std::invalid_argument("generate_rwp: duration must be > 0");
  MobilityTrace trace;
  const double total = config.warmup_discard + duration;
  for (std::size_t node = 0; node < n_nodes; ++node)
    {
      RngStream rng(seed, "mobility.rwp", node);
      trace.add_track(cut_window(rwp_track(config, total, rng), config.warmup_discard, duration));
    }
  return trace;
}

std::vector<std::size_t>
partition_groups(std::size_t n_nodes, double mean_size, RngStream& rng)
{
  const auto m = static_cast<std::int64_t>(std::llround(mean_size));
  const std::int64_t lo = std::max<std::int64_t>(1, m - 1);
  std::vector<std::size_t> sizes;
  std::size_t remaining = n_nodes;
  while (remaining > 0)
    {
      auto s = static_cast<std::size_t>(rng.uniform_int(lo, m + 1));
      s = std::min(s, remaining);
      sizes.push_back(s);
      remaining -= s;
    }
  if (sizes.size() > 1 && sizes.back() == 1)
    {
      sizes.pop_back();
      sizes.back() += 1;
    }
  return sizes;
}

MobilityTrace
generate_rpgm(const MobilityConfig& config, std::size_t n_nodes, double duration, std::uint64_t seed)
{
  config.validate();
  if (n_nodes < 1)
    throw std::invalid_argument("generate_rpgm: n_nodes must be >= 1");
  if (!(duration > 0))
    throw std::invalid_argument("generate_rpgm: duration must be > 0");
  const double total = config.warmup_discard + duration;
  const double radius = config.group_deviation_radius;

  RngStream partition_rng(seed, "mobility.rpgm.partition");
  const auto sizes = partition_groups(n_nodes, config.group_size_mean, partition_rng);

  MobilityTrace trace;
  std::size_t node = 0;
  for (std::size_t group = 0; group < sizes.size(); ++group)
    {
      RngStream ref_rng(seed, "mobility.rpgm.reference", group);
      const auto reference = rwp_track(config, total, ref_rng);
      for (std::size_t member = 0; member < sizes[group]; ++member, ++node)
        {
          RngStream offset_rng(seed, "mobility.rpgm.offset", node);
          std::vector<Waypoint> wps;
          wps.reserve(reference.size());
          for (const Waypoint& ref : reference)
            {
              const double r = radius * std::sqrt(offset_rng.uniform());
              const double theta = 2.0 * std::numbers::pi * offset_rng.uniform();
              const Position p = clamp_to(
                config.area, Position{ref.pos.x + r * std::cos(theta), ref.pos.y + r * std::sin(theta)});
              wps.push_back(Waypoint{ref.time, p, 0.0});
            }
          for (std::size_t i = 0; i + 1 < wps.size(); ++i)
            wps[i].speed = distance(wps[i].pos, wps[i + 1].pos) / (wps[i + 1].time - wps[i].time);
          trace.add_track(cut_window(wps, config.warmup_discard, duration));
        }
    }
  return trace;
}

MobilityTrace
generate_trace(const MobilityConfig& config, std::size_t n_nodes, double duration, std::uint64_t seed)
{
  switch (config.model)
    {
    case MobilityModel::RandomWaypoint: return generate_rwp(config, n_nodes, duration, seed);
    case MobilityModel::ReferencePointGroup: return generate_rpgm(config, n_nodes, duration, seed);
    }
  throw std::logic_error("unknown mobility model");
}

namespace {

void
append_number(std::string& out, double value)
{
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  std::string_view text(buf, static_cast<std::size_t>(end - buf));
  out += text;
  if (text.find_first_of(".eEn") == std::string_view::npos)
    out += ".0";
}

} // namespace

std::string
export_trace(const MobilityTrace& trace)
{
  std::string out;
  for (std::size_t node = 0; node < trace.node_count(); ++node)
    {
      bool first = true;
      for (const Waypoint& w : trace.track(node))
        {
          for (double v : {w.time, w.pos.x, w.pos.y})
            {
              if (!first)
                out += ' ';
              append_number(out, v);
              first = false;
            }
        }
      out += '\n';
    }
  return out;
}

MobilityTrace
import_trace(std::string_view text)
{
  MobilityTrace trace;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size())
    {
      auto eol = text.find('\n', pos);
      if (eol == std::string_view::npos)
        eol = text.size();
      std::string_view line = text.substr(pos, eol - pos);
      pos = eol + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r')
        line.remove_suffix(1);
      if (line.find_first_not_of(" \t") == std::string_view::npos)
        continue;

      std::vector<double> values;
      std::size_t i = 0;
      while (i < line.size())
        {
          while (i < line.size() && (line[i] == ' ' || line[i] == '\t'))
            ++i;
          if (i >= line.size())
            break;
          std::size_t j = i;
          while (j < line.size() && line[j] != ' ' && line[j] != '\t')
            ++j;
          double v = 0.0;
          auto [ptr, ec] = std::from_chars(line.data() + i, line.data() + j, v);
          if (ec != std::errc{} || ptr != line.data() + j || !std::isfinite(v))
            throw TraceParseError(line_no, "malformed number '" + std::string(line.substr(i, j - i)) + "'");
          values.push_back(v);
          i = j;
        }
      if (values.size() % 3 != 0)
        throw TraceParseError(line_no, "expected repeating 't x y' triples, got " +
                                         std::to_string(values.size()) + " values");
      std::vector<Waypoint> wps;
      for (std::size_t k = 0; k < values.size(); k += 3)
        {
          Waypoint w{values[k], Position{values[k + 1], values[k + 2]}, 0.0};
          if (!wps.empty())
            {
              if (!(w.time > wps.back().time))
                throw TraceParseError(line_no, "waypoint times must be strictly increasing");
              wps.back().speed = distance(wps.back().pos, w.pos) / (w.time - wps.back().time);
            }
          wps.push_back(w);
        }
      trace.add_track(std::move(wps));
    }
  return trace;
}

} // namespace meshsim
