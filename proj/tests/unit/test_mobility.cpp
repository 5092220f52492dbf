#include "meshsim/mobility.hpp"

#include <doctest.h>

#include <cmath>

using namespace meshsim;

namespace {

MobilityConfig
t1_config()
{
  MobilityConfig c;
  c.area = Area{240.0, 360.0};
  return c;
}

} // namespace

TEST_CASE("degenerate speed range gives exact segment speed")
{
  auto c = t1_config();
  c.min_speed = c.max_speed = 3.5;
  auto trace = generate_rwp(c, 4, 120.0, 11);
  for (std::size_t n = 0; n < trace.node_count(); ++n)
    {
      const auto& wps = trace.track(n);
      for (std::size_t i = 0; i + 1 < wps.size(); ++i)
        {
          const double v = distance(wps[i].pos, wps[i + 1].pos) / (wps[i + 1].time - wps[i].time);
          CHECK(v == doctest::Approx(3.5).epsilon(1e-9));
        }
    }
}

TEST_CASE("rwp stays inside the area and spans the requested duration")
{
  auto c = t1_config();
  auto trace = generate_rwp(c, 10, 120.0, 3);
  for (std::size_t n = 0; n < trace.node_count(); ++n)
    {
      CHECK(trace.start_time(n) == 0.0);
      CHECK(trace.end_time(n) == 120.0);
      for (double t = 0; t <= 120.0; t += 0.25)
        CHECK(c.area.contains(trace.position_at(n, t)));
    }
}

TEST_CASE("rwp mean segment speed")
{
  auto c = t1_config();
  c.warmup_discard = 0;
  auto trace = generate_rwp(c, 200, 5000.0, 5);
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < trace.node_count(); ++n)
    for (const auto& w : trace.track(n))
      if (w.speed > 0)
        {
          sum += w.speed;
          ++count;
        }
  REQUIRE(count >= 10000);
  CHECK(std::abs(sum / static_cast<double>(count) - 4.0) < 0.05);
}

TEST_CASE("warm-up discard rebases the trace")
{
  auto c = t1_config();
  auto with = generate_rwp(c, 2, 60.0, 9);
  c.warmup_discard = 0;
  auto without = generate_rwp(c, 2, 60.0, 9);
  CHECK_FALSE(with == without);
  CHECK(with.start_time(0) == 0.0);
}

TEST_CASE("rpgm zero radius collapses members onto the reference")
{
  auto c = t1_config();
  c.model = MobilityModel::ReferencePointGroup;
  c.group_deviation_radius = 0.0;
  c.group_size_mean = 6.0;
  auto trace = generate_rpgm(c, 6, 60.0, 21);
  RngStream rng(21, "mobility.rpgm.partition");
  auto sizes = partition_groups(6, 6.0, rng);
  REQUIRE(sizes.size() == 1);
  for (double t = 0; t <= 60.0; t += 0.5)
    for (std::size_t n = 1; n < 6; ++n)
      CHECK(distance(trace.position_at(0, t), trace.position_at(n, t)) < 1e-9);
}

TEST_CASE("rpgm single group stays within twice the radius")
{
  auto c = t1_config();
  c.model = MobilityModel::ReferencePointGroup;
  c.group_size_mean = 8.0;
  c.group_deviation_radius = 25.0;
  auto trace = generate_rpgm(c, 8, 120.0, 4);
  for (double t = 0; t <= 120.0; t += 0.5)
    for (std::size_t a = 0; a < 8; ++a)
      for (std::size_t b = a + 1; b < 8; ++b)
        CHECK(distance(trace.position_at(a, t), trace.position_at(b, t)) <= 50.0 + 1e-9);
}

TEST_CASE("rpgm partition mean size")
{
  double total_nodes = 0;
  double total_groups = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed)
    {
      RngStream rng(seed, "mobility.rpgm.partition");
      auto sizes = partition_groups(30, 3.0, rng);
      std::size_t sum = 0;
      for (auto s : sizes)
        {
          CHECK(s >= 2);
          sum += s;
        }
      REQUIRE(sum == 30);
      total_nodes += 30;
      total_groups += static_cast<double>(sizes.size());
    }
  CHECK(std::abs(total_nodes / total_groups - 3.0) < 0.1);
}

TEST_CASE("position_at interpolates and rejects out-of-span times")
{
  MobilityTrace trace({{Waypoint{0.0, {0, 0}, 1.0}, Waypoint{10.0, {10, 0}, 0.0}}});
  CHECK(trace.position_at(0, 0.0) == Position{0, 0});
  CHECK(trace.position_at(0, 10.0) == Position{10, 0});
  CHECK(trace.position_at(0, 5.0) == Position{5, 0});
  CHECK_THROWS_AS(trace.position_at(0, 10.5), std::out_of_range);
  CHECK_THROWS_AS(trace.position_at(0, -0.1), std::out_of_range);
}

TEST_CASE("position_at is Lipschitz in the speed bound")
{
  auto c = t1_config();
  auto trace = generate_rwp(c, 5, 120.0, 8);
  const double eps = 0.01;
  for (std::size_t n = 0; n < 5; ++n)
    for (double t = 0; t + eps <= 120.0; t += 0.37)
      CHECK(distance(trace.position_at(n, t), trace.position_at(n, t + eps)) <= c.max_speed * eps + 1e-9);
}

TEST_CASE("trace export and import round trip")
{
  auto c = t1_config();
  auto trace = generate_rwp(c, 3, 120.0, 1);
  auto back = import_trace(export_trace(trace));
  REQUIRE(back.node_count() == 3);
  for (std::size_t n = 0; n < 3; ++n)
    {
      REQUIRE(back.track(n).size() == trace.track(n).size());
      for (std::size_t i = 0; i < back.track(n).size(); ++i)
        {
          CHECK(back.track(n)[i].time == trace.track(n)[i].time);
          CHECK(back.track(n)[i].pos == trace.track(n)[i].pos);
        }
    }
}

TEST_CASE("stationary node exports as two triples")
{
  MobilityTrace trace({cut_window({Waypoint{0.0, {12, 34}, 0.0}}, 0.0, 120.0)});
  CHECK(export_trace(trace) == "0.0 12.0 34.0 120.0 12.0 34.0\n");
}

TEST_CASE("hand-built trace line parses")
{
  auto trace = import_trace("0.0 10.5 20.0 30.0 40.5 60.0\n\n");
  REQUIRE(trace.node_count() == 1);
  REQUIRE(trace.track(0).size() == 2);
  CHECK(trace.track(0)[1].time == 30.0);
  CHECK(trace.track(0)[1].pos == Position{40.5, 60.0});
  CHECK(trace.track(0)[0].speed == doctest::Approx(50.0 / 30.0));
}

TEST_CASE("malformed trace reports the line")
{
  try
    {
      import_trace("0 1 2 3 4 5\n0 1 2 3 4\n");
      FAIL("expected throw");
    }
  catch (const TraceParseError& e)
    {
      CHECK(e.line() == 2);
    }
  CHECK_THROWS_AS(import_trace("0 1 x\n"), TraceParseError);
  CHECK_THROWS_AS(import_trace("5 0 0 1 0 0\n"), TraceParseError);
}

TEST_CASE("config validation names the field")
{
  MobilityConfig c;
  c.min_speed = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("mobility.min_speed"), std::invalid_argument);
  MobilityConfig d;
  d.max_speed = 1.0;
  CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("mobility.max_speed"), std::invalid_argument);
}
