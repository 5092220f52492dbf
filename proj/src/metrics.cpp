#include "meshsim/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace meshsim {

PacketCounts
count_outcomes(const std::vector<PacketRecord>& records)
{
  PacketCounts c;
  c.sent = records.size();
  for (const auto& r : records)
    switch (r.outcome)
      {
      case Outcome::Delivered: ++c.delivered; break;
      case Outcome::Dropped: ++c.dropped; break;
      case Outcome::InFlight: ++c.in_flight; break;
      }
  return c;
}

std::optional<double>
packet_loss(const std::vector<PacketRecord>& records)
{
  const auto c = count_outcomes(records);
  const auto denom = c.delivered + c.dropped;
  if (denom == 0)
    return std::nullopt;
  return 100.0 * static_cast<double>(c.dropped) / static_cast<double>(denom);
}

double
control_overhead(const std::vector<TransmissionRecord>& frames, double start, double end)
{
  if (!(end > start))
    throw std::invalid_argument("control_overhead: empty window");
  std::uint64_t bytes = 0;
  for (const auto& f : frames)
    if (is_control(f.kind) && f.at >= start && f.at < end)
      bytes += f.size;
  return static_cast<double>(bytes) * 8.0 / (end - start) / 1000.0;
}

RttSplit
rtt_split(const std::vector<std::optional<double>>& samples)
{
  RttSplit out;
  if (samples.empty())
    return out;
  out.slowpath = samples.front();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i])
      {
        sum += *samples[i];
        ++n;
      }
  if (n > 0)
    out.fastpath = sum / static_cast<double>(n);
  return out;
}

double
student_t_quantile(double p, double dof)
{
  boost::math::students_t dist(dof);
  return boost::math::quantile(dist, p);
}

CiResult
confidence_interval(const std::vector<double>& samples, double level)
{
  if (samples.size() < 2)
    throw std::invalid_argument("confidence_interval: need at least 2 samples, got " +
                                std::to_string(samples.size()));
  if (!(level > 0 && level < 1))
    throw std::invalid_argument("confidence_interval: level must be in (0, 1)");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : samples)
    ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1));
  const double t = student_t_quantile(1.0 - (1.0 - level) / 2.0, n - 1);
  return CiResult{mean, t * sd / std::sqrt(n), level, samples.size()};
}

bool
intervals_overlap(const CiResult& a, const CiResult& b)
{
  return a.lower() <= b.upper() && b.lower() <= a.upper();
}

RunSummary
summarize(const RunLog& log)
{
  RunSummary s;
  s.protocol = log.protocol;
  s.topology = log.topology;
  s.mobility = log.mobility;
  s.traffic = log.traffic;
  s.seed = log.seed;
  s.loss_pct = packet_loss(log.packets);
  s.control_kbps = control_overhead(log.control, log.window_start, log.window_end);
  const auto rtt = rtt_split(log.probes);
  if (rtt.slowpath)
    s.slowpath_ms = *rtt.slowpath * 1000.0;
  if (rtt.fastpath)
    s.fastpath_ms = *rtt.fastpath * 1000.0;
  return s;
}

std::string
format_double(double value)
{
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{})
    throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, end);
}

namespace {

const std::map<std::string, FrameKind>&
kinds_by_name()
{
  static const std::map<std::string, FrameKind> table = [] {
    std::map<std::string, FrameKind> t;
    for (auto k : {FrameKind::Hello, FrameKind::Tc, FrameKind::Ogm, FrameKind::GraphReport, FrameKind::PacketIn,
                   FrameKind::FlowMod, FrameKind::GratuitousArp, FrameKind::ArpRequest, FrameKind::ArpReply,
                   FrameKind::Data, FrameKind::Probe})
      t.emplace(std::string(to_string(k)), k);
    return t;
  }();
  return table;
}

double
parse_double(const std::string& text, std::size_t line)
{
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw std::runtime_error("event log line " + std::to_string(line) + ": bad number '" + text + "'");
  return v;
}

std::uint64_t
parse_uint(const std::string& text, std::size_t line)
{
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw std::runtime_error("event log line " + std::to_string(line) + ": bad integer '" + text + "'");
  return v;
}

std::string_view
outcome_name(Outcome o)
{
  switch (o)
    {
    case Outcome::Delivered: return "delivered";
    case Outcome::Dropped: return "dropped";
    case Outcome::InFlight: return "inflight";
    }
  return "inflight";
}

constexpr DropReason kReasons[] = {DropReason::StaleNextHop, DropReason::NoRoute,  DropReason::TtlExpired,
                                   DropReason::BufferTimeout, DropReason::Rejected, DropReason::ArpFailure};

} // namespace

void
write_run_log(std::ostream& out, const RunLog& log)
{
  out << "# meshsim event log v1\n";
  out << "run " << log.protocol << ' ' << log.topology << ' ' << log.mobility << ' ' << log.traffic << ' ' << log.seed
      << '\n';
  out << "window " << format_double(log.window_start) << ' ' << format_double(log.window_end) << '\n';
  for (const auto& t : log.control)
    out << "tx " << format_double(t.at) << ' ' << to_string(t.kind) << ' ' << t.src << ' ' << t.dst << ' ' << t.size
        << '\n';
  for (const auto& p : log.packets)
    {
      out << "pkt " << p.flow_id << ' ' << p.sequence << ' ' << format_double(p.sent_at) << ' ' << p.size << ' '
          << outcome_name(p.outcome) << ' ' << format_double(p.at) << ' ' << static_cast<int>(p.reason) << '\n';
    }
  for (std::size_t i = 0; i < log.probes.size(); ++i)
    {
      out << "probe " << i << ' ';
      if (log.probes[i])
        out << format_double(*log.probes[i]);
      else
        out << "timeout";
      out << '\n';
    }
}

RunLog
read_run_log(std::istream& in)
{
  RunLog log;
  std::string line;
  std::size_t line_no = 0;
  bool have_run = false;
  while (std::getline(in, line))
    {
      ++line_no;
      if (line.empty() || line[0] == '#')
        continue;
      std::istringstream fields(line);
      std::vector<std::string> f;
      for (std::string tok; fields >> tok;)
        f.push_back(tok);
      auto expect = [&](std::size_t n) {
        if (f.size() != n)
          throw std::runtime_error("event log line " + std::to_string(line_no) + ": expected " + std::to_string(n) +
                                   " fields");
      };
      if (f[0] == "run")
        {
          expect(6);
          log.protocol = f[1];
          log.topology = f[2];
          log.mobility = f[3];
          log.traffic = f[4];
          log.seed = parse_uint(f[5], line_no);
          have_run = true;
        }
      else if (f[0] == "window")
        {
          expect(3);
          log.window_start = parse_double(f[1], line_no);
          log.window_end = parse_double(f[2], line_no);
        }
      else if (f[0] == "tx")
        {
          expect(6);
          auto kind = kinds_by_name().find(f[2]);
          if (kind == kinds_by_name().end())
            throw std::runtime_error("event log line " + std::to_string(line_no) + ": unknown frame kind " + f[2]);
          log.control.push_back(TransmissionRecord{parse_double(f[1], line_no), kind->second,
                                                   static_cast<NodeId>(parse_uint(f[3], line_no)),
                                                   static_cast<NodeId>(parse_uint(f[4], line_no)),
                                                   static_cast<std::uint32_t>(parse_uint(f[5], line_no))});
        }
      else if (f[0] == "pkt")
        {
          expect(8);
          PacketRecord p;
          p.flow_id = parse_uint(f[1], line_no);
          p.sequence = parse_uint(f[2], line_no);
          p.sent_at = parse_double(f[3], line_no);
          p.size = static_cast<std::uint32_t>(parse_uint(f[4], line_no));
          if (f[5] == "delivered")
            p.outcome = Outcome::Delivered;
          else if (f[5] == "dropped")
            p.outcome = Outcome::Dropped;
          else if (f[5] == "inflight")
            p.outcome = Outcome::InFlight;
          else
            throw std::runtime_error("event log line " + std::to_string(line_no) + ": unknown outcome " + f[5]);
          p.at = parse_double(f[6], line_no);
          const auto reason = parse_uint(f[7], line_no);
          if (reason >= std::size(kReasons))
            throw std::runtime_error("event log line " + std::to_string(line_no) + ": unknown drop reason");
          p.reason = kReasons[reason];
          log.packets.push_back(p);
        }
      else if (f[0] == "probe")
        {
          expect(3);
          if (parse_uint(f[1], line_no) != log.probes.size())
            throw std::runtime_error("event log line " + std::to_string(line_no) + ": probe out of order");
          if (f[2] == "timeout")
            log.probes.emplace_back(std::nullopt);
          else
            log.probes.emplace_back(parse_double(f[2], line_no));
        }
      else
        throw std::runtime_error("event log line " + std::to_string(line_no) + ": unknown record '" + f[0] + "'");
    }
  if (!have_run)
    throw std::runtime_error("event log: missing run header");
  return log;
}

} // namespace meshsim
