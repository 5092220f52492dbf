#include "meshsim/sdn.hpp"

#include "../support/oracles.hpp"
#include "../support/static_net.hpp"

#include <doctest.h>

using namespace meshsim;
using testnet::StaticNet;

namespace {

NetworkGraph
graph_from(const oracle::Matrix& m, const std::vector<NodeRole>& roles)
{
  NetworkGraph g(roles);
  for (NodeId a = 0; a < m.size(); ++a)
    for (NodeId b = a + 1; b < m.size(); ++b)
      if (m[a][b])
        g.add_edge(a, b);
  return g;
}

// Lexicographically smallest shortest path, by enumerating every simple path.
void
all_paths(const oracle::Matrix& m, const std::vector<bool>& relay, NodeId at, NodeId dst, Path& cur,
          std::vector<Path>& out)
{
  if (at == dst)
    {
      out.push_back(cur);
      return;
    }
  if (cur.size() > 1 && !relay[at])
    return;
  for (NodeId v = 0; v < m.size(); ++v)
    if (m[at][v] && std::find(cur.begin(), cur.end(), v) == cur.end())
      {
        cur.push_back(v);
        all_paths(m, relay, v, dst, cur, out);
        cur.pop_back();
      }
}

std::optional<Path>
best_path(const oracle::Matrix& m, const std::vector<bool>& relay, NodeId src, NodeId dst)
{
  std::vector<Path> paths;
  Path cur{src};
  all_paths(m, relay, src, dst, cur, paths);
  if (paths.empty())
    return std::nullopt;
  return *std::min_element(paths.begin(), paths.end(), [](const Path& a, const Path& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
}

std::set<Edge>
radio_edges(const Medium& medium)
{
  std::set<Edge> out;
  for (NodeId a = 0; a < medium.node_count(); ++a)
    for (NodeId b = a + 1; b < medium.node_count(); ++b)
      if (medium.link_up(a, b))
        out.insert({a, b});
  return out;
}

std::set<Edge>
graph_edges(const NetworkGraph& g)
{
  std::set<Edge> out;
  for (const auto& [e, signal] : g.edges())
    out.insert(e);
  return out;
}

std::size_t
broadcast_arps(const std::vector<Frame>& frames)
{
  std::size_t n = 0;
  for (const auto& f : frames)
    if (f.kind == FrameKind::ArpRequest && f.dst == kBroadcast)
      ++n;
  return n;
}

} // namespace

TEST_CASE("hop-count path examples")
{
  std::vector<NodeRole> roles(4, NodeRole::Backbone);
  NetworkGraph g(roles);
  g.add_edge(0, 1);
  g.add_edge(0, 2);
  g.add_edge(1, 3);
  g.add_edge(2, 3);
  CHECK(compute_path_hc(g, 0, 1) == Path{0, 1});
  // Two shortest paths; the smaller sequence wins.
  CHECK(compute_path_hc(g, 0, 3) == Path{0, 1, 3});
  CHECK(compute_path_hc(g, 3, 0) == Path{3, 1, 0});

  NetworkGraph split(roles);
  split.add_edge(0, 1);
  split.add_edge(2, 3);
  CHECK_FALSE(compute_path_hc(split, 0, 3));
}

TEST_CASE("clients are never relays")
{
  std::vector<NodeRole> roles{NodeRole::Backbone, NodeRole::Client, NodeRole::Backbone, NodeRole::Backbone};
  NetworkGraph g(roles);
  g.add_edge(0, 1);
  g.add_edge(1, 3);
  g.add_edge(0, 2);
  g.add_edge(2, 3);
  CHECK(compute_path_hc(g, 0, 3) == Path{0, 2, 3});
  g.remove_edge(2, 3);
  CHECK_FALSE(compute_path_hc(g, 0, 3));
  CHECK(compute_path_hc(g, 0, 1) == Path{0, 1});
}

TEST_CASE("hop-count paths match bfs on random graphs")
{
  RngStream rng(19, "test.sdn.paths");
  for (int i = 0; i < 200; ++i)
    {
      const auto n = static_cast<std::size_t>(rng.uniform_int(2, 12));
      const auto m = oracle::random_graph(n, 0.3, rng);
      std::vector<NodeRole> roles(n);
      std::vector<bool> relay(n);
      for (std::size_t v = 0; v < n; ++v)
        {
          relay[v] = rng.uniform() < 0.7;
          roles[v] = relay[v] ? NodeRole::Backbone : NodeRole::Client;
        }
      const auto g = graph_from(m, roles);
      for (NodeId s = 0; s < n; ++s)
        {
          const auto dist = oracle::bfs(m, s, relay);
          for (NodeId d = 0; d < n; ++d)
            {
              if (s == d)
                continue;
              const auto p = compute_path_hc(g, s, d);
              if (dist[d] < 0)
                {
                  CHECK_FALSE(p);
                  continue;
                }
              REQUIRE(p);
              CHECK(p->size() == static_cast<std::size_t>(dist[d]) + 1);
              if (n <= 8)
                CHECK(*p == *best_path(m, relay, s, d));
            }
        }
    }
}

TEST_CASE("controller graph matches radio links in a static network")
{
  RngStream rng(23, "test.sdn.graph");
  for (int trial = 0; trial < 5; ++trial)
    {
      const auto pos = oracle::random_connected(12, 400, 150, rng);
      StaticNet net(pos, std::vector<NodeRole>(12, NodeRole::Backbone), 0, 150, 40 + trial);
      SdnProtocol p(net.ctx, {});
      net.attach(p);
      p.start();
      net.sched.run_until(SimTime{2.0});
      CHECK(graph_edges(p.graph()) == radio_edges(net.medium));
    }
}

TEST_CASE("report size follows the neighbor count")
{
  StaticNet net({{0, 0}, {100, 0}, {200, 0}, {1000, 0}}, std::vector<NodeRole>(4, NodeRole::Backbone));
  SdnProtocol p(net.ctx, {});
  net.attach(p);
  p.start();
  net.sched.run_until(SimTime{3.0});
  std::map<NodeId, std::set<std::uint32_t>> sizes;
  for (const auto& f : net.sent)
    if (f.kind == FrameKind::GraphReport)
      {
        const auto& r = f.as<NeighborReport>();
        CHECK(f.size == 20 + 10 * r.observed.size());
        sizes[r.reporter].insert(f.size);
      }
  CHECK(sizes[1] == std::set<std::uint32_t>{40});
  CHECK(sizes[2] == std::set<std::uint32_t>{30});
  // Node 2's reports transit its tree parent.
  bool relayed = false;
  for (const auto& f : net.sent)
    if (f.kind == FrameKind::GraphReport && f.src == 1 && f.as<NeighborReport>().reporter == 2)
      relayed = true;
  CHECK(relayed);
  // The isolated node has no route to the controller, so nothing of it shows up.
  CHECK_FALSE(sizes.contains(3));
  CHECK_FALSE(p.graph().known(3));
}

TEST_CASE("packet-in on a line installs entries at a and b")
{
  StaticNet net({{0, 0}, {100, 0}, {200, 0}}, std::vector<NodeRole>(3, NodeRole::Backbone), 1);
  SdnProtocol p(net.ctx, {});
  net.attach(p);
  p.start();
  net.sched.run_until(SimTime{5.0});
  p.send(0, net.packet(0, 2, 0));
  net.sched.run_until(SimTime{6.0});
  REQUIRE(net.delivered.size() == 1);
  CHECK(p.packet_ins() >= 1);
  CHECK(p.flow_next_hop(0, {0, 2}) == NodeId{1});
  CHECK(p.flow_next_hop(1, {0, 2}) == NodeId{2});
  CHECK_FALSE(p.flow_next_hop(2, {0, 2}));
  CHECK(p.registered_path({0, 2}) == Path{0, 1, 2});
  CHECK(broadcast_arps(net.sent) == 0);

  // Later packets use the installed entries; the first one paid for setup.
  const auto first = net.delivered[0].at - 5.0;
  p.send(0, net.packet(0, 2, 1));
  const double sent = net.sched.now().seconds();
  net.sched.run_until(SimTime{6.5});
  REQUIRE(net.delivered.size() == 2);
  CHECK(net.delivered[1].at - sent < first);
}

TEST_CASE("installed flows form simple paths and no arp is broadcast")
{
  RngStream rng(29, "test.sdn.loops");
  for (int trial = 0; trial < 5; ++trial)
    {
      const std::size_t n = 12;
      const auto pos = oracle::random_connected(n, 400, 150, rng);
      std::vector<NodeRole> roles(n, NodeRole::Backbone);
      StaticNet net(pos, roles, 0, 150, 60 + trial);
      SdnProtocol p(net.ctx, {});
      net.attach(p);
      p.start();
      net.sched.run_until(SimTime{5.0});
      std::uint64_t seq = 0;
      for (NodeId a = 0; a < n; ++a)
        for (NodeId b = 0; b < n; ++b)
          if (a != b)
            p.send(a, net.packet(a, b, seq++));
      net.sched.run_until(SimTime{8.0});
      CHECK(net.dropped.empty());
      CHECK(net.delivered.size() == n * (n - 1));
      CHECK(broadcast_arps(net.sent) == 0);

      for (NodeId a = 0; a < n; ++a)
        for (NodeId b = 0; b < n; ++b)
          {
            if (a == b)
              continue;
            std::set<NodeId> visited{a};
            NodeId at = a;
            while (at != b)
              {
                auto next = p.flow_next_hop(at, {a, b});
                REQUIRE(next);
                REQUIRE(visited.insert(*next).second);
                at = *next;
              }
          }
    }
}

TEST_CASE("flows move to a shorter path without loss")
{
  // Backbone 0-1-2-3 bent into an L; client 4 hangs off 3, then moves to
  // where it also hears 1 while keeping its link to 3.
  auto run = [](bool reoptimize) {
    StaticNet net({{0, 0}, {120, 0}, {240, 0}, {240, 120}, {240, 240}},
                  {NodeRole::Backbone, NodeRole::Backbone, NodeRole::Backbone, NodeRole::Backbone, NodeRole::Client},
                  0);
    SdnConfig cfg;
    cfg.reoptimize = reoptimize;
    SdnProtocol p(net.ctx, cfg);
    net.attach(p);
    p.start();
    net.sched.run_until(SimTime{5.0});
    std::uint64_t seq = 0;
    for (int i = 0; i < 500; ++i)
      net.sched.schedule_in(i * 0.01, EventKind::Timer, 0, [&net, &p, &seq] {
        p.send(0, net.packet(0, 4, seq++));
        p.send(4, net.packet(4, 0, seq++));
      });
    net.sched.schedule_in(1.0, EventKind::Timer, 4, [&net] { net.pos[4] = {150, 130}; });
    net.sched.run_until(SimTime{12.0});
    CHECK(net.dropped.empty());
    CHECK(net.delivered.size() == 1000);
    return std::tuple{p.registered_path({0, 4}), p.registered_path({4, 0}), p.moves(), p.flow_next_hop(2, {0, 4})};
  };

  const auto [down, up, moves, stale] = run(true);
  CHECK(down == Path{0, 1, 4});
  CHECK(up == Path{4, 1, 0});
  CHECK(moves == 2);
  CHECK_FALSE(stale);

  const auto [down_off, up_off, moves_off, stale_off] = run(false);
  CHECK(down_off == Path{0, 1, 2, 3, 4});
  CHECK(moves_off == 0);
  CHECK(stale_off == NodeId{3});
}
