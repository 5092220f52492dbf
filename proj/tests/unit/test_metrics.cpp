#include "meshsim/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

using namespace meshsim;

namespace {

std::vector<PacketRecord>
records(std::size_t delivered, std::size_t dropped, std::size_t in_flight = 0)
{
  std::vector<PacketRecord> out;
  std::uint64_t seq = 0;
  auto add = [&](Outcome o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
      out.push_back(PacketRecord{1, seq++, 60.0, 1400, o, 61.0, DropReason::NoRoute});
  };
  add(Outcome::Delivered, delivered);
  add(Outcome::Dropped, dropped);
  add(Outcome::InFlight, in_flight);
  return out;
}

} // namespace

TEST_CASE("packet loss")
{
  CHECK(packet_loss(records(100, 0)) == 0.0);
  CHECK(packet_loss(records(75, 25)) == 25.0);
  // In-flight packets stay out of the denominator.
  CHECK(packet_loss(records(75, 25, 50)) == 25.0);
  CHECK_FALSE(packet_loss(records(0, 0, 3)));
  CHECK_FALSE(packet_loss({}));
  const auto c = count_outcomes(records(3, 2, 1));
  CHECK(c.sent == 6);
  CHECK(c.sent == c.delivered + c.dropped + c.in_flight);
}

TEST_CASE("control overhead")
{
  std::vector<TransmissionRecord> frames;
  CHECK(control_overhead(frames, 0.0, 60.0) == 0.0);
  for (NodeId n = 0; n < 20; ++n)
    frames.push_back({0.5, FrameKind::Ogm, n, kBroadcast, 52});
  CHECK(std::abs(control_overhead(frames, 0.0, 1.0) - 8.32) < 1e-12);

  // Data and probe frames never count; the window is half open.
  frames.push_back({0.5, FrameKind::Data, 0, 1, 1400});
  frames.push_back({0.5, FrameKind::Probe, 0, 1, 64});
  frames.push_back({1.0, FrameKind::Ogm, 0, kBroadcast, 52});
  CHECK(std::abs(control_overhead(frames, 0.0, 1.0) - 8.32) < 1e-12);

  CHECK_THROWS_AS(control_overhead(frames, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(control_overhead(frames, 2.0, 1.0), std::invalid_argument);
}

TEST_CASE("rtt split")
{
  auto r = rtt_split({0.259, 0.001, 0.001, 0.001});
  CHECK(r.slowpath == 0.259);
  CHECK(std::abs(*r.fastpath - 0.001) < 1e-15);
  r = rtt_split({5.0, 5.0});
  CHECK(r.slowpath == 5.0);
  CHECK(r.fastpath == 5.0);
  r = rtt_split({std::nullopt, 2.0, std::nullopt, 4.0});
  CHECK_FALSE(r.slowpath);
  CHECK(r.fastpath == 3.0);
  r = rtt_split({std::nullopt, std::nullopt});
  CHECK_FALSE(r.slowpath);
  CHECK_FALSE(r.fastpath);
}

TEST_CASE("confidence interval")
{
  auto ci = confidence_interval({5, 5, 5, 5});
  CHECK(ci.mean == 5.0);
  CHECK(ci.half_width == 0.0);

  // t(0.975, 2) = 4.302653 from tables; s = 1.
  ci = confidence_interval({1, 2, 3});
  CHECK(ci.mean == 2.0);
  CHECK(std::abs(ci.half_width - 4.302653 / std::sqrt(3.0)) < 1e-5);
  CHECK(std::round(ci.half_width * 1e4) / 1e4 == 2.4841);
  CHECK(ci.n == 3);

  CHECK(std::abs(student_t_quantile(0.975, 29) - 2.045230) < 1e-5);
  CHECK_THROWS_AS(confidence_interval({1.0}), std::invalid_argument);
  CHECK_THROWS_AS(confidence_interval({}), std::invalid_argument);
}

TEST_CASE("confidence interval coverage is about 95%")
{
  RngStream rng(31, "test.ci");
  int covered = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t)
    {
      std::vector<double> s(30);
      for (auto& x : s)
        x = rng.normal(10.0, 3.0);
      const auto ci = confidence_interval(s);
      if (ci.lower() <= 10.0 && 10.0 <= ci.upper())
        ++covered;
    }
  CHECK(std::abs(covered / double(trials) - 0.95) <= 0.01);
}

TEST_CASE("interval overlap")
{
  CiResult a{1.0, 0.5}, b{2.0, 0.5}, c{2.1, 0.5};
  CHECK(intervals_overlap(a, b));
  CHECK_FALSE(intervals_overlap(a, c));
  CHECK(intervals_overlap(c, b));
}

TEST_CASE("event log round trip reproduces metrics exactly")
{
  RunLog log;
  log.protocol = "sdn";
  log.topology = "T2";
  log.mobility = "rwp";
  log.traffic = "cbr";
  log.seed = 7;
  log.window_start = 12.0 + 1.0 / 3.0;
  log.window_end = log.window_start + 60.0;
  RngStream rng(5, "test.log");
  for (int i = 0; i < 200; ++i)
    log.control.push_back({log.window_start + rng.uniform() * 60.0, FrameKind::GraphReport,
                           static_cast<NodeId>(i % 20), 0, static_cast<std::uint32_t>(20 + 10 * (i % 5))});
  log.control.push_back({log.window_start + 1.0, FrameKind::ArpRequest, 3, kBroadcast, 42});
  for (int i = 0; i < 50; ++i)
    {
      PacketRecord p{static_cast<std::uint64_t>(1 + i % 3), static_cast<std::uint64_t>(i), 72.0 + i * 0.02, 1400,
                     Outcome::Delivered, 72.0 + i * 0.02 + rng.uniform() * 1e-3, DropReason::NoRoute};
      if (i % 7 == 0)
        {
          p.outcome = Outcome::Dropped;
          p.reason = DropReason::StaleNextHop;
        }
      if (i == 49)
        p.outcome = Outcome::InFlight;
      log.packets.push_back(p);
    }
  log.probes = {0.0881234567, std::nullopt, 3.51e-5, 3.49e-5};

  std::stringstream text;
  write_run_log(text, log);
  const auto back = read_run_log(text);
  CHECK(summarize(back) == summarize(log));
  REQUIRE(back.packets.size() == log.packets.size());
  for (std::size_t i = 0; i < log.packets.size(); ++i)
    {
      CHECK(back.packets[i].at == log.packets[i].at);
      CHECK(back.packets[i].outcome == log.packets[i].outcome);
      CHECK(back.packets[i].reason == log.packets[i].reason);
    }
  CHECK(back.probes == log.probes);
  CHECK(back.window_start == log.window_start);

  std::istringstream bad("run sdn T2 rwp cbr 1\nbogus 1 2\n");
  CHECK_THROWS(read_run_log(bad));
}

TEST_CASE("format_double round trips")
{
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.123456789, 0.0})
    CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.5) == "0.5");
}
