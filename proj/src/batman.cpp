#include "meshsim/batman.hpp"

#include <stdexcept>

namespace meshsim {

void
BatmanConfig::validate() const
{
  if (!(ogm_interval > 0))
    throw std::invalid_argument("batman.ogm_interval: must be > 0");
  if (ttl == 0)
    throw std::invalid_argument("batman.ttl: must be > 0");
  if (!(forward_jitter >= 0))
    throw std::invalid_argument("batman.forward_jitter: must be >= 0");
  if (!(purge_timeout > 0))
    throw std::invalid_argument("batman.purge_timeout: must be > 0");
  if (bidirectional_window == 0)
    throw std::invalid_argument("batman.bidirectional_window: must be > 0");
  if (!(arp_relay_delay >= 0))
    throw std::invalid_argument("batman.arp_relay_delay: must be >= 0");
  if (!(arp_forward_jitter >= 0))
    throw std::invalid_argument("batman.arp_forward_jitter: must be >= 0");
  if (!(arp_retry > 0))
    throw std::invalid_argument("batman.arp_retry: must be > 0");
  if (arp_attempts < 1)
    throw std::invalid_argument("batman.arp_attempts: must be >= 1");
}

BatmanProtocol::BatmanProtocol(NetworkContext& ctx, BatmanConfig config) : RoutingProtocol(ctx), m_config(config)
{
  m_config.validate();
  m_nodes.reserve(ctx.node_count());
  for (NodeId n = 0; n < ctx.node_count(); ++n)
    m_nodes.emplace_back(RngStream(ctx.seed, "batman.jitter", n));
}

void
BatmanProtocol::start()
{
  for (NodeId n = 0; n < m_nodes.size(); ++n)
    {
      const double first = m_nodes[n].jitter.uniform(0.0, m_config.ogm_interval);
      ctx().scheduler.schedule_in(first, EventKind::Timer, n, [this, n] { emit_ogm(n); });
    }
}

void
BatmanProtocol::emit_ogm(NodeId node)
{
  auto& st = m_nodes[node];
  OgmMessage ogm{node, st.sequence++, m_config.ttl, false, node};
  st.emitted = true;
  ctx().medium.broadcast(node,
                         make_frame(FrameKind::Ogm, node, kBroadcast, m_config.ogm_bytes, ctx().now(), ogm));
  const double next = m_config.ogm_interval - st.jitter.uniform(0.0, m_config.ogm_interval / 4.0);
  ctx().scheduler.schedule_in(next, EventKind::Timer, node, [this, node] { emit_ogm(node); });
}

bool
BatmanProtocol::is_bidirectional(NodeId node, NodeId neighbor) const
{
  const auto& st = m_nodes.at(node);
  auto it = st.echoes.find(neighbor);
  if (it == st.echoes.end() || !st.emitted)
    return false;
  return it->second + m_config.bidirectional_window >= st.sequence - 1;
}

OgmAction
BatmanProtocol::handle_ogm(NodeId at, NodeId from, const OgmMessage& ogm)
{
  auto& st = m_nodes[at];
  if (ogm.originator == at)
    {
      if (ogm.direct_link)
        {
          auto [it, inserted] = st.echoes.emplace(from, ogm.sequence);
          if (!inserted && ogm.sequence > it->second)
            it->second = ogm.sequence;
        }
      return OgmAction::DropEcho;
    }
  if (ogm.unidirectional)
    return OgmAction::DropUnidirectional;
  if (!is_bidirectional(at, from))
    {
      // Heard the originator directly: echo so it can confirm the link.
      if (ogm.originator == from && ogm.ttl > 1)
        {
          OgmMessage echo = ogm;
          echo.ttl = static_cast<std::uint8_t>(ogm.ttl - 1);
          echo.sender = at;
          echo.direct_link = true;
          echo.unidirectional = true;
          rebroadcast(at, echo);
        }
      return OgmAction::DropUnidirectional;
    }
  auto it = st.originators.find(ogm.originator);
  if (it != st.originators.end() && ogm.sequence <= it->second.last_sequence)
    return OgmAction::DropDuplicate;

  auto& entry = st.originators[ogm.originator];
  entry.next_hop = from;
  entry.last_sequence = ogm.sequence;
  entry.last_updated = ctx().now();
  if (ogm.ttl > 1)
    {
      OgmMessage copy = ogm;
      copy.ttl = static_cast<std::uint8_t>(ogm.ttl - 1);
      copy.sender = at;
      copy.direct_link = from == ogm.originator;
      rebroadcast(at, copy);
    }
  return OgmAction::AdoptAndRebroadcast;
}

void
BatmanProtocol::rebroadcast(NodeId at, OgmMessage ogm)
{
  ++m_rebroadcasts;
  auto send = [this, at, ogm] {
    ctx().medium.broadcast(at, make_frame(FrameKind::Ogm, at, kBroadcast, m_config.ogm_bytes, ctx().now(), ogm));
  };
  if (m_config.forward_jitter > 0)
    ctx().scheduler.schedule_in(m_nodes[at].jitter.uniform(0.0, m_config.forward_jitter), EventKind::Timer, at,
                                std::move(send));
  else
    send();
}

std::optional<NodeId>
BatmanProtocol::lookup_next_hop(NodeId node, NodeId destination) const
{
  const auto& st = m_nodes.at(node);
  auto it = st.originators.find(destination);
  if (it == st.originators.end() || it->second.next_hop == kBroadcast)
    return std::nullopt;
  if (ctx().now() - it->second.last_updated > m_config.purge_timeout)
    return std::nullopt;
  return it->second.next_hop;
}

void
BatmanProtocol::receive(NodeId at, const Frame& frame)
{
  switch (frame.kind)
    {
    case FrameKind::Ogm: handle_ogm(at, frame.src, frame.as<OgmMessage>()); break;
    case FrameKind::ArpRequest: on_arp_request(at, frame); break;
    case FrameKind::ArpReply: on_arp_reply(at, frame); break;
    case FrameKind::Data:
    case FrameKind::Probe: on_data(at, frame.as<DataPacket>()); break;
    default: break;
    }
}

void
BatmanProtocol::send(NodeId at, const DataPacket& packet)
{
  if (packet.dst == at)
    {
      deliver(at, packet);
      return;
    }
  auto& st = m_nodes[at];
  if (st.arp.contains(packet.dst))
    {
      route(at, packet);
      return;
    }
  auto [it, fresh] = st.pending_arp.try_emplace(packet.dst);
  it->second.queued.push_back(packet);
  if (fresh)
    send_arp_request(at, packet.dst);
}

void
BatmanProtocol::on_data(NodeId at, const DataPacket& packet)
{
  if (packet.dst == at)
    deliver(at, packet);
  else
    route(at, packet);
}

void
BatmanProtocol::route(NodeId at, const DataPacket& packet)
{
  auto next = lookup_next_hop(at, packet.dst);
  if (!next)
    {
      drop(at, packet, DropReason::NoRoute);
      return;
    }
  forward_data(at, *next, packet);
}

void
BatmanProtocol::send_arp_request(NodeId at, NodeId target)
{
  auto& st = m_nodes[at];
  auto& pending = st.pending_arp.at(target);
  pending.sequence = st.arp_sequence++;
  ++pending.attempts;
  st.arp_seen.emplace(at, pending.sequence);
  ArpMessage msg{at, target, kBroadcast, pending.sequence};
  ctx().medium.broadcast(at, make_frame(FrameKind::ArpRequest, at, kBroadcast, m_config.arp_bytes, ctx().now(), msg));
  pending.retry = ctx().scheduler.schedule_in(m_config.arp_retry, EventKind::Timer, at,
                                              [this, at, target] { arp_timeout(at, target); });
}

void
BatmanProtocol::arp_timeout(NodeId at, NodeId target)
{
  auto& st = m_nodes[at];
  auto it = st.pending_arp.find(target);
  if (it == st.pending_arp.end())
    return;
  if (it->second.attempts < m_config.arp_attempts)
    {
      send_arp_request(at, target);
      return;
    }
  auto queued = std::move(it->second.queued);
  st.pending_arp.erase(it);
  for (const auto& p : queued)
    drop(at, p, DropReason::ArpFailure);
}

void
BatmanProtocol::on_arp_request(NodeId at, const Frame& frame)
{
  const auto& msg = frame.as<ArpMessage>();
  auto& st = m_nodes[at];
  if (!st.arp_seen.emplace(msg.requester, msg.sequence).second)
    return;
  if (msg.target == at)
    {
      st.arp.insert(msg.requester);
      ArpMessage reply{msg.requester, at, at, msg.sequence};
      Frame out = make_frame(FrameKind::ArpReply, at, kBroadcast, m_config.arp_bytes, ctx().now(), reply);
      out.origin = at;
      out.destination = msg.requester;
      arp_relay(at, [this, at, out] { forward_arp_reply(at, out); });
      return;
    }
  ArpMessage copy = msg;
  arp_relay(at, [this, at, copy] {
    ctx().medium.broadcast(at,
                           make_frame(FrameKind::ArpRequest, at, kBroadcast, m_config.arp_bytes, ctx().now(), copy));
  });
}

void
BatmanProtocol::arp_relay(NodeId at, std::function<void()> send)
{
  double wait = m_config.arp_relay_delay;
  if (m_config.arp_forward_jitter > 0)
    wait += m_nodes[at].jitter.uniform(0.0, m_config.arp_forward_jitter);
  if (wait > 0)
    ctx().scheduler.schedule_in(wait, EventKind::Timer, at, std::move(send));
  else
    send();
}

void
BatmanProtocol::on_arp_reply(NodeId at, const Frame& frame)
{
  if (frame.destination == at)
    {
      auto& st = m_nodes[at];
      st.arp.insert(frame.origin);
      auto it = st.pending_arp.find(frame.origin);
      if (it == st.pending_arp.end())
        return;
      ctx().scheduler.cancel(it->second.retry);
      auto queued = std::move(it->second.queued);
      st.pending_arp.erase(it);
      for (const auto& p : queued)
        route(at, p);
      return;
    }
  arp_relay(at, [this, at, frame] { forward_arp_reply(at, frame); });
}

void
BatmanProtocol::forward_arp_reply(NodeId at, const Frame& frame)
{
  auto next = lookup_next_hop(at, frame.destination);
  if (!next)
    return;
  Frame hop = frame;
  ctx().medium.unicast(at, *next, std::move(hop));
}

ConvergenceState
BatmanProtocol::convergence_state()
{
  ConvergenceState out;
  out.complete = true;
  const auto n = m_nodes.size();
  for (NodeId node = 0; node < n; ++node)
    {
      std::size_t reachable = 0;
      for (NodeId dst = 0; dst < n; ++dst)
        if (dst != node && lookup_next_hop(node, dst))
          {
            ++reachable;
            out.signature += std::to_string(node) + '>' + std::to_string(dst) + ';';
          }
      if (reachable + 1 != n)
        out.complete = false;
    }
  return out;
}

} // namespace meshsim
