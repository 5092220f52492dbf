#pragma once

#include "meshsim/network.hpp"

#include <map>
#include <optional>
#include <set>
#include <vector>

namespace meshsim {

struct OlsrConfig
{
  double hello_interval = 1.0;
  double tc_interval = 1.0;
  double hold_time = 3.0;
  double tc_validity = 3.0;
  double forward_jitter = 0.0;
  std::uint32_t hello_base_bytes = 24;
  std::uint32_t hello_link_bytes = 8;
  std::uint32_t tc_base_bytes = 20;
  std::uint32_t tc_entry_bytes = 4;
  std::uint8_t ttl = 255;

  void validate() const;
};

struct Route
{
  NodeId next_hop;
  std::uint32_t hops;
  friend bool operator==(const Route&, const Route&) = default;
};

using RouteTable = std::map<NodeId, Route>;
/// Directed reachability: adjacency[u] lists the nodes reachable from u in one hop.
using Adjacency = std::map<NodeId, std::set<NodeId>>;

/// Greedy MPR selection: neighbors that are the only cover of some two-hop
/// node first, then the neighbor covering most uncovered nodes (ties to the
/// lowest id), then removal of selections made redundant.
std::set<NodeId> select_mprs(NodeId self, const std::set<NodeId>& one_hop,
                             const std::map<NodeId, std::set<NodeId>>& two_hop);

/// Minimum-hop routes from `self`; among equal hop counts the lowest next hop wins.
RouteTable compute_routes(NodeId self, const Adjacency& adjacency);

class OlsrProtocol : public RoutingProtocol
{
public:
  OlsrProtocol(NetworkContext& ctx, OlsrConfig config);

  std::string_view name() const override { return "olsr"; }
  void start() override;
  void receive(NodeId at, const Frame& frame) override;
  void send(NodeId at, const DataPacket& packet) override;
  ConvergenceState convergence_state() override;
  int stable_checks_required() const override { return 3; }

  const RouteTable& routes(NodeId node);
  std::set<NodeId> symmetric_neighbors(NodeId node);
  std::set<NodeId> mprs(NodeId node);
  std::set<NodeId> mpr_selectors(NodeId node);
  /// Advertised links (advertiser, selector) currently held in the topology set.
  std::set<std::pair<NodeId, NodeId>> topology_links(NodeId node);
  std::uint64_t tc_forwards() const { return m_tc_forwards; }

  static std::uint32_t hello_size(const OlsrConfig& c, std::size_t links)
  {
    return c.hello_base_bytes + c.hello_link_bytes * static_cast<std::uint32_t>(links);
  }
  static std::uint32_t tc_size(const OlsrConfig& c, std::size_t entries)
  {
    return c.tc_base_bytes + c.tc_entry_bytes * static_cast<std::uint32_t>(entries);
  }

private:
  struct Neighbor
  {
    SimTime last_heard;
    bool sym = false;
    bool selected_me = false;
    std::set<NodeId> two_hop;
  };
  struct TopologyEntry
  {
    std::uint32_t sequence;
    std::set<NodeId> advertised;
    SimTime expires;
  };
  struct NodeState
  {
    explicit NodeState(RngStream rng) : jitter(std::move(rng)) {}
    std::map<NodeId, Neighbor> neighbors;
    std::set<NodeId> mprs;
    std::map<NodeId, TopologyEntry> topology;
    std::map<NodeId, std::uint32_t> processed;
    std::map<NodeId, std::uint32_t> retransmitted;
    std::uint32_t tc_sequence = 0;
    RouteTable routes;
    bool dirty = true;
    SimTime next_expiry{0.0};
    RngStream jitter;
  };

  void emit_hello(NodeId node);
  void emit_tc(NodeId node);
  void on_hello(NodeId at, NodeId from, const HelloMessage& hello);
  void on_tc(NodeId at, NodeId from, const TcMessage& tc);
  void on_data(NodeId at, const DataPacket& packet);
  /// Drops expired state; cheap when nothing is due.
  void refresh(NodeId node);
  void recompute(NodeId node);
  double periodic_delay(NodeId node, double interval);

  OlsrConfig m_config;
  std::vector<NodeState> m_nodes;
  std::uint64_t m_tc_forwards = 0;
};

} // namespace meshsim
