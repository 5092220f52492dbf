#include "meshsim/network.hpp"

namespace meshsim {

std::string_view
to_string(DropReason reason)
{
  switch (reason)
    {
    case DropReason::StaleNextHop: return "stale next hop";
    case DropReason::NoRoute: return "no route";
    case DropReason::TtlExpired: return "ttl expired";
    case DropReason::BufferTimeout: return "buffer timeout";
    case DropReason::Rejected: return "rejected";
    case DropReason::ArpFailure: return "arp failure";
    }
  return "unknown";
}

bool
RoutingProtocol::forward_data(NodeId at, NodeId next_hop, const DataPacket& packet)
{
  if (packet.ttl == 0)
    {
      drop(at, packet, DropReason::TtlExpired);
      return false;
    }
  DataPacket hop = packet;
  hop.ttl = static_cast<std::uint8_t>(packet.ttl - 1);
  Frame frame = make_frame(data_kind(packet), at, next_hop, packet.size, packet.sent_at, hop);
  frame.origin = packet.src;
  frame.destination = packet.dst;
  if (!m_ctx.medium.unicast(at, next_hop, std::move(frame)))
    {
      drop(at, packet, DropReason::StaleNextHop);
      return false;
    }
  return true;
}

void
RoutingProtocol::deliver(NodeId at, const DataPacket& packet)
{
  if (m_ctx.on_deliver)
    m_ctx.on_deliver(at, packet);
}

void
RoutingProtocol::drop(NodeId at, const DataPacket& packet, DropReason reason)
{
  if (m_ctx.on_drop)
    m_ctx.on_drop(at, packet, reason);
}

} // namespace meshsim
