#pragma once

#include "meshsim/network.hpp"

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

namespace meshsim {

struct BatmanConfig
{
  double ogm_interval = 1.0;
  std::uint8_t ttl = 50;
  std::uint32_t ogm_bytes = 52;
  /// Rebroadcasts wait U(0, forward_jitter).
  double forward_jitter = 0.1;
  double purge_timeout = 5.0;
  /// A link stays bidirectional while an echo arrived within this many own sequence numbers.
  std::uint32_t bidirectional_window = 2;

  std::uint32_t arp_bytes = 42;
  /// Each node handling an ARP request or reply (relay or answer) waits
  /// arp_relay_delay + U(0, arp_forward_jitter) before sending it on.
  double arp_relay_delay = 0.11;
  double arp_forward_jitter = 0.02;
  double arp_retry = 1.0;
  int arp_attempts = 3;

  void validate() const;
};

enum class OgmAction : std::uint8_t
{
  AdoptAndRebroadcast,
  DropDuplicate,
  DropEcho,
  DropUnidirectional,
};

class BatmanProtocol : public RoutingProtocol
{
public:
  BatmanProtocol(NetworkContext& ctx, BatmanConfig config);

  std::string_view name() const override { return "batman"; }
  void start() override;
  void receive(NodeId at, const Frame& frame) override;
  void send(NodeId at, const DataPacket& packet) override;
  ConvergenceState convergence_state() override;
  int stable_checks_required() const override { return 3; }

  /// Fresh best next hop towards `destination`, if any.
  std::optional<NodeId> lookup_next_hop(NodeId node, NodeId destination) const;
  OgmAction handle_ogm(NodeId at, NodeId from, const OgmMessage& ogm);
  void emit_ogm(NodeId node);
  bool is_bidirectional(NodeId node, NodeId neighbor) const;
  std::uint32_t own_sequence(NodeId node) const { return m_nodes.at(node).sequence; }
  bool has_arp_binding(NodeId node, NodeId target) const { return m_nodes.at(node).arp.contains(target); }

  std::uint64_t ogm_rebroadcasts() const { return m_rebroadcasts; }

private:
  struct Originator
  {
    NodeId next_hop = kBroadcast;
    std::uint32_t last_sequence = 0;
    SimTime last_updated;
  };
  struct PendingArp
  {
    std::uint32_t sequence = 0;
    int attempts = 0;
    EventId retry;
    std::vector<DataPacket> queued;
  };
  struct NodeState
  {
    explicit NodeState(RngStream rng) : jitter(std::move(rng)) {}
    std::uint32_t sequence = 0;
    bool emitted = false;
    std::map<NodeId, Originator> originators;
    /// Latest own sequence echoed back by each neighbor over a direct link.
    std::map<NodeId, std::uint32_t> echoes;
    std::set<NodeId> arp;
    std::map<NodeId, PendingArp> pending_arp;
    std::uint32_t arp_sequence = 0;
    std::set<std::pair<NodeId, std::uint32_t>> arp_seen;
    RngStream jitter;
  };

  void rebroadcast(NodeId at, OgmMessage ogm);
  void on_data(NodeId at, const DataPacket& packet);
  void route(NodeId at, const DataPacket& packet);
  void on_arp_request(NodeId at, const Frame& frame);
  void on_arp_reply(NodeId at, const Frame& frame);
  void send_arp_request(NodeId at, NodeId target);
  void arp_timeout(NodeId at, NodeId target);
  void arp_relay(NodeId at, std::function<void()> send);
  void forward_arp_reply(NodeId at, const Frame& frame);

  BatmanConfig m_config;
  std::vector<NodeState> m_nodes;
  std::uint64_t m_rebroadcasts = 0;
};

} // namespace meshsim
