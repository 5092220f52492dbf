#pragma once

// Structured payloads carried by frames. Only their byte sizes reach the
// medium; the field layout is internal.

#include "meshsim/engine.hpp"

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace meshsim {

enum class FrameKind : std::uint8_t
{
  Hello,
  Tc,
  Ogm,
  GraphReport,
  PacketIn,
  FlowMod,
  GratuitousArp,
  ArpRequest,
  ArpReply,
  Data,
  Probe,
};

std::string_view to_string(FrameKind kind);
/// Everything except DATA and PROBE counts toward control overhead.
constexpr bool is_control(FrameKind kind) { return kind != FrameKind::Data && kind != FrameKind::Probe; }

enum class LinkStatus : std::uint8_t
{
  Asym,
  Sym,
};

struct HelloLink
{
  NodeId neighbor;
  LinkStatus status;
  bool is_mpr;
};

struct HelloMessage
{
  NodeId originator;
  std::vector<HelloLink> links;
};

struct TcMessage
{
  NodeId originator;
  std::uint32_t sequence;
  std::uint8_t ttl;
  std::vector<NodeId> advertised;
};

struct OgmMessage
{
  NodeId originator;
  std::uint32_t sequence;
  std::uint8_t ttl;
  bool direct_link;
  /// Node that (re)transmitted this copy.
  NodeId sender;
  /// Echo over a link not yet confirmed bidirectional; only the originator uses it.
  bool unidirectional = false;
};

struct NeighborObservation
{
  NodeId neighbor;
  double signal_dbm;
};

struct NeighborReport
{
  NodeId reporter;
  std::vector<NeighborObservation> observed;
  SimTime at;
};

struct PacketInRequest
{
  NodeId ingress;
  NodeId src;
  NodeId dst;
};

struct FlowMatch
{
  NodeId src;
  NodeId dst;
  friend constexpr auto operator<=>(const FlowMatch&, const FlowMatch&) = default;
};

struct FlowModMessage
{
  NodeId target;
  FlowMatch match;
  NodeId next_hop;
  bool remove;
  std::uint64_t flow_id;
  /// Groups the FLOW_MODs of one repair so its completion can be timed; 0 = none.
  std::uint64_t batch = 0;
};

struct ArpMessage
{
  NodeId requester;
  NodeId target;
  /// Resolved link-layer identity (replies and gratuitous replies only).
  NodeId binding;
  std::uint32_t sequence;
};

struct DataPacket
{
  std::uint64_t flow_id;
  std::uint64_t sequence;
  NodeId src;
  NodeId dst;
  std::uint32_t size;
  SimTime sent_at;
  bool probe = false;
  bool response = false;
  std::uint8_t ttl = 64;
};

using Payload = std::variant<std::monostate, HelloMessage, TcMessage, OgmMessage, NeighborReport,
                             PacketInRequest, FlowModMessage, ArpMessage, DataPacket>;

struct Frame
{
  FrameKind kind;
  /// Transmitter of this hop.
  NodeId src;
  /// Receiver of this hop, or kBroadcast.
  NodeId dst;
  std::uint32_t size;
  SimTime born_at;
  /// End-to-end addressing for frames routed over several hops.
  NodeId origin = kBroadcast;
  NodeId destination = kBroadcast;
  std::shared_ptr<const Payload> payload;

  template <typename T> const T& as() const { return std::get<T>(*payload); }
};

inline constexpr std::uint32_t kMinFrameBytes = 20;

template <typename T>
Frame
make_frame(FrameKind kind, NodeId src, NodeId dst, std::uint32_t size, SimTime born_at, T body)
{
  if (size < kMinFrameBytes)
    throw std::invalid_argument("frame smaller than " + std::to_string(kMinFrameBytes) + " bytes");
  return Frame{kind, src, dst, size, born_at, kBroadcast, kBroadcast,
               std::make_shared<const Payload>(std::move(body))};
}

} // namespace meshsim
