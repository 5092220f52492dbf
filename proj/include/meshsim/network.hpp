#pragma once

// What a routing plane sees of the simulated network, plus the interface the
// simulation drives it through.

#include "meshsim/engine.hpp"
#include "meshsim/messages.hpp"
#include "meshsim/radio.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace meshsim {

enum class NodeRole : std::uint8_t
{
  Backbone,
  Client,
};

enum class DropReason : std::uint8_t
{
  StaleNextHop,
  NoRoute,
  TtlExpired,
  BufferTimeout,
  Rejected,
  ArpFailure,
};

std::string_view to_string(DropReason reason);

struct NetworkContext
{
  Scheduler& scheduler;
  Medium& medium;
  std::vector<NodeRole> roles;
  /// Central backbone node; hosts the SDN controller and sources traffic.
  NodeId controller = 0;
  std::uint64_t seed = 0;
  std::function<void(NodeId at, const DataPacket&)> on_deliver;
  std::function<void(NodeId at, const DataPacket&, DropReason)> on_drop;

  std::size_t node_count() const { return roles.size(); }
  bool is_backbone(NodeId n) const { return roles.at(n) == NodeRole::Backbone; }
  SimTime now() const { return scheduler.now(); }
};

/// Snapshot used by the runner's convergence detector.
struct ConvergenceState
{
  /// Opaque text that must stay identical across consecutive checks.
  std::string signature;
  bool complete = false;
};

class RoutingProtocol
{
public:
  explicit RoutingProtocol(NetworkContext& ctx) : m_ctx(ctx) {}
  virtual ~RoutingProtocol() = default;
  RoutingProtocol(const RoutingProtocol&) = delete;
  RoutingProtocol& operator=(const RoutingProtocol&) = delete;

  virtual std::string_view name() const = 0;
  virtual void start() = 0;
  /// Every frame the medium hands to node `at`.
  virtual void receive(NodeId at, const Frame& frame) = 0;
  /// Application hands a packet to its source node.
  virtual void send(NodeId at, const DataPacket& packet) = 0;
  virtual ConvergenceState convergence_state() = 0;
  /// Consecutive identical checks required before declaring convergence.
  virtual int stable_checks_required() const = 0;

protected:
  NetworkContext& ctx() { return m_ctx; }
  const NetworkContext& ctx() const { return m_ctx; }

  /// One hop of a data packet; records a stale-next-hop drop when the link is gone.
  bool forward_data(NodeId at, NodeId next_hop, const DataPacket& packet);
  void deliver(NodeId at, const DataPacket& packet);
  void drop(NodeId at, const DataPacket& packet, DropReason reason);

private:
  NetworkContext& m_ctx;
};

inline FrameKind
data_kind(const DataPacket& p)
{
  return p.probe ? FrameKind::Probe : FrameKind::Data;
}

} // namespace meshsim
