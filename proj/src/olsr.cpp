#include "meshsim/olsr.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <stdexcept>

namespace meshsim {

void
OlsrConfig::validate() const
{
  if (!(hello_interval > 0))
    throw std::invalid_argument("olsr.hello_interval: must be > 0");
  if (!(tc_interval > 0))
    throw std::invalid_argument("olsr.tc_interval: must be > 0");
  if (!(hold_time >= 3 * hello_interval))
    throw std::invalid_argument("olsr.hold_time: must be >= 3 * hello_interval");
  if (!(tc_validity > 0))
    throw std::invalid_argument("olsr.tc_validity: must be > 0");
  if (!(forward_jitter >= 0))
    throw std::invalid_argument("olsr.forward_jitter: must be >= 0");
  if (ttl == 0)
    throw std::invalid_argument("olsr.ttl: must be > 0");
}

std::set<NodeId>
select_mprs(NodeId self, const std::set<NodeId>& one_hop, const std::map<NodeId, std::set<NodeId>>& two_hop)
{
  // Strict two-hop set and who covers each member.
  std::map<NodeId, std::set<NodeId>> coverers;
  for (const auto& [nb, reach] : two_hop)
    {
      if (!one_hop.contains(nb))
        continue;
      for (NodeId w : reach)
        if (w != self && !one_hop.contains(w))
          coverers[w].insert(nb);
    }

  std::set<NodeId> mprs;
  std::set<NodeId> uncovered;
  for (const auto& [w, by] : coverers)
    {
      if (by.size() == 1)
        mprs.insert(*by.begin());
      uncovered.insert(w);
    }
  auto cover_of = [&](NodeId nb) -> const std::set<NodeId>& {
    static const std::set<NodeId> empty;
    auto it = two_hop.find(nb);
    return it == two_hop.end() ? empty : it->second;
  };
  for (NodeId m : mprs)
    for (NodeId w : cover_of(m))
      uncovered.erase(w);

  while (!uncovered.empty())
    {
      NodeId best = kBroadcast;
      std::size_t best_gain = 0;
      for (NodeId nb : one_hop)
        {
          if (mprs.contains(nb))
            continue;
          std::size_t gain = 0;
          for (NodeId w : cover_of(nb))
            gain += uncovered.count(w);
          if (gain > best_gain)
            {
              best_gain = gain;
              best = nb;
            }
        }
      if (best == kBroadcast)
        break;
      mprs.insert(best);
      for (NodeId w : cover_of(best))
        uncovered.erase(w);
    }

  // Drop selections whose two-hop nodes are all covered by the others.
  for (auto it = mprs.begin(); it != mprs.end();)
    {
      const NodeId candidate = *it;
      bool needed = false;
      for (const auto& [w, by] : coverers)
        {
          if (!by.contains(candidate))
            continue;
          bool other = false;
          for (NodeId c : by)
            if (c != candidate && mprs.contains(c))
              {
                other = true;
                break;
              }
          if (!other)
            {
              needed = true;
              break;
            }
        }
      it = needed ? std::next(it) : mprs.erase(it);
    }
  return mprs;
}

RouteTable
compute_routes(NodeId self, const Adjacency& adjacency)
{
  RouteTable table;
  auto self_it = adjacency.find(self);
  if (self_it == adjacency.end())
    return table;
  std::vector<NodeId> frontier;
  for (NodeId nb : self_it->second)
    if (nb != self)
      {
        table.emplace(nb, Route{nb, 1});
        frontier.push_back(nb);
      }
  std::uint32_t hops = 1;
  while (!frontier.empty())
    {
      ++hops;
      std::map<NodeId, NodeId> next_layer;
      for (NodeId u : frontier)
        {
          auto it = adjacency.find(u);
          if (it == adjacency.end())
            continue;
          const NodeId via = table.at(u).next_hop;
          for (NodeId v : it->second)
            {
              if (v == self || table.contains(v))
                continue;
              auto [slot, inserted] = next_layer.emplace(v, via);
              if (!inserted)
                slot->second = std::min(slot->second, via);
            }
        }
      frontier.clear();
      for (const auto& [v, via] : next_layer)
        {
          table.emplace(v, Route{via, hops});
          frontier.push_back(v);
        }
    }
  return table;
}

OlsrProtocol::OlsrProtocol(NetworkContext& ctx, OlsrConfig config) : RoutingProtocol(ctx), m_config(config)
{
  m_config.validate();
  m_nodes.reserve(ctx.node_count());
  for (NodeId n = 0; n < ctx.node_count(); ++n)
    m_nodes.emplace_back(RngStream(ctx.seed, "olsr.jitter", n));
}

double
OlsrProtocol::periodic_delay(NodeId node, double interval)
{
  return interval - m_nodes[node].jitter.uniform(0.0, interval / 4.0);
}

void
OlsrProtocol::start()
{
  auto& s = ctx().scheduler;
  for (NodeId n = 0; n < m_nodes.size(); ++n)
    {
      const double hello_at = m_nodes[n].jitter.uniform(0.0, m_config.hello_interval);
      const double tc_at = m_nodes[n].jitter.uniform(0.0, m_config.tc_interval);
      s.schedule_in(hello_at, EventKind::Timer, n, [this, n] { emit_hello(n); });
      s.schedule_in(tc_at, EventKind::Timer, n, [this, n] { emit_tc(n); });
    }
}

void
OlsrProtocol::emit_hello(NodeId node)
{
  refresh(node);
  auto& st = m_nodes[node];
  if (st.dirty)
    recompute(node);
  HelloMessage hello{node, {}};
  for (const auto& [nb, entry] : st.neighbors)
    hello.links.push_back(HelloLink{nb, entry.sym ? LinkStatus::Sym : LinkStatus::Asym, st.mprs.contains(nb)});
  const auto size = hello_size(m_config, hello.links.size());
  ctx().medium.broadcast(node, make_frame(FrameKind::Hello, node, kBroadcast, size, ctx().now(), std::move(hello)));
  ctx().scheduler.schedule_in(periodic_delay(node, m_config.hello_interval), EventKind::Timer, node,
                              [this, node] { emit_hello(node); });
}

void
OlsrProtocol::emit_tc(NodeId node)
{
  refresh(node);
  auto& st = m_nodes[node];
  std::vector<NodeId> selectors;
  for (const auto& [nb, entry] : st.neighbors)
    if (entry.sym && entry.selected_me)
      selectors.push_back(nb);
  if (!selectors.empty())
    {
      TcMessage tc{node, st.tc_sequence++, m_config.ttl, std::move(selectors)};
      const auto size = tc_size(m_config, tc.advertised.size());
      ctx().medium.broadcast(node, make_frame(FrameKind::Tc, node, kBroadcast, size, ctx().now(), std::move(tc)));
    }
  ctx().scheduler.schedule_in(periodic_delay(node, m_config.tc_interval), EventKind::Timer, node,
                              [this, node] { emit_tc(node); });
}

void
OlsrProtocol::receive(NodeId at, const Frame& frame)
{
  switch (frame.kind)
    {
    case FrameKind::Hello: on_hello(at, frame.src, frame.as<HelloMessage>()); break;
    case FrameKind::Tc: on_tc(at, frame.src, frame.as<TcMessage>()); break;
    case FrameKind::Data:
    case FrameKind::Probe: on_data(at, frame.as<DataPacket>()); break;
    default: break;
    }
}

void
OlsrProtocol::on_hello(NodeId at, NodeId from, const HelloMessage& hello)
{
  refresh(at);
  auto& st = m_nodes[at];
  auto& nb = st.neighbors[from];
  const bool was_sym = nb.sym;
  const bool was_selector = nb.selected_me;
  const auto old_two_hop = nb.two_hop;

  nb.last_heard = ctx().now();
  auto me = std::find_if(hello.links.begin(), hello.links.end(), [at](const HelloLink& l) { return l.neighbor == at; });
  nb.sym = me != hello.links.end();
  nb.selected_me = nb.sym && me->is_mpr;
  nb.two_hop.clear();
  if (nb.sym)
    for (const auto& l : hello.links)
      if (l.status == LinkStatus::Sym && l.neighbor != at)
        nb.two_hop.insert(l.neighbor);

  if (nb.sym != was_sym || nb.selected_me != was_selector || nb.two_hop != old_two_hop)
    st.dirty = true;
  st.next_expiry = std::min(st.next_expiry, nb.last_heard + m_config.hold_time);
}

void
OlsrProtocol::on_tc(NodeId at, NodeId from, const TcMessage& tc)
{
  if (tc.originator == at)
    return;
  refresh(at);
  auto& st = m_nodes[at];
  auto sender = st.neighbors.find(from);
  if (sender == st.neighbors.end() || !sender->second.sym)
    return;

  auto done = st.processed.find(tc.originator);
  if (done == st.processed.end() || tc.sequence > done->second)
    {
      st.processed[tc.originator] = tc.sequence;
      auto& entry = st.topology[tc.originator];
      entry.sequence = tc.sequence;
      std::set<NodeId> advertised(tc.advertised.begin(), tc.advertised.end());
      if (advertised != entry.advertised)
        st.dirty = true;
      entry.advertised = std::move(advertised);
      entry.expires = ctx().now() + m_config.tc_validity;
      st.next_expiry = std::min(st.next_expiry, entry.expires);
    }

  auto retx = st.retransmitted.find(tc.originator);
  const bool already = retx != st.retransmitted.end() && tc.sequence <= retx->second;
  if (already || !sender->second.selected_me || tc.ttl <= 1)
    return;
  st.retransmitted[tc.originator] = tc.sequence;
  ++m_tc_forwards;
  TcMessage copy = tc;
  copy.ttl = static_cast<std::uint8_t>(tc.ttl - 1);
  const auto size = tc_size(m_config, copy.advertised.size());
  auto send = [this, at, copy = std::move(copy), size]() mutable {
    ctx().medium.broadcast(at, make_frame(FrameKind::Tc, at, kBroadcast, size, ctx().now(), std::move(copy)));
  };
  if (m_config.forward_jitter > 0)
    ctx().scheduler.schedule_in(st.jitter.uniform(0.0, m_config.forward_jitter), EventKind::Timer, at,
                                std::move(send));
  else
    send();
}

void
OlsrProtocol::refresh(NodeId node)
{
  auto& st = m_nodes[node];
  const SimTime now = ctx().now();
  if (st.next_expiry > now)
    return;
  SimTime next{std::numeric_limits<double>::infinity()};
  for (auto it = st.neighbors.begin(); it != st.neighbors.end();)
    {
      const SimTime expires = it->second.last_heard + m_config.hold_time;
      if (expires < now)
        {
          it = st.neighbors.erase(it);
          st.dirty = true;
          continue;
        }
      next = std::min(next, expires);
      ++it;
    }
  for (auto it = st.topology.begin(); it != st.topology.end();)
    {
      if (it->second.expires < now)
        {
          it = st.topology.erase(it);
          st.dirty = true;
          continue;
        }
      next = std::min(next, it->second.expires);
      ++it;
    }
  // Expiry is strict (now - last_heard > hold), so re-check just after the instant.
  st.next_expiry = next;
  if (st.next_expiry <= now)
    st.next_expiry = now + 1e-9;
}

void
OlsrProtocol::recompute(NodeId node)
{
  auto& st = m_nodes[node];
  std::set<NodeId> one_hop;
  std::map<NodeId, std::set<NodeId>> two_hop;
  Adjacency adj;
  auto& mine = adj[node];
  for (const auto& [nb, entry] : st.neighbors)
    if (entry.sym)
      {
        one_hop.insert(nb);
        mine.insert(nb);
        two_hop[nb] = entry.two_hop;
        adj[nb].insert(entry.two_hop.begin(), entry.two_hop.end());
      }
  for (const auto& [advertiser, entry] : st.topology)
    adj[advertiser].insert(entry.advertised.begin(), entry.advertised.end());
  st.mprs = select_mprs(node, one_hop, two_hop);
  st.routes = compute_routes(node, adj);
  st.dirty = false;
}

const RouteTable&
OlsrProtocol::routes(NodeId node)
{
  refresh(node);
  if (m_nodes[node].dirty)
    recompute(node);
  return m_nodes[node].routes;
}

std::set<NodeId>
OlsrProtocol::symmetric_neighbors(NodeId node)
{
  refresh(node);
  std::set<NodeId> out;
  for (const auto& [nb, entry] : m_nodes[node].neighbors)
    if (entry.sym)
      out.insert(nb);
  return out;
}

std::set<NodeId>
OlsrProtocol::mprs(NodeId node)
{
  routes(node);
  return m_nodes[node].mprs;
}

std::set<NodeId>
OlsrProtocol::mpr_selectors(NodeId node)
{
  refresh(node);
  std::set<NodeId> out;
  for (const auto& [nb, entry] : m_nodes[node].neighbors)
    if (entry.sym && entry.selected_me)
      out.insert(nb);
  return out;
}

std::set<std::pair<NodeId, NodeId>>
OlsrProtocol::topology_links(NodeId node)
{
  refresh(node);
  std::set<std::pair<NodeId, NodeId>> out;
  for (const auto& [advertiser, entry] : m_nodes[node].topology)
    for (NodeId d : entry.advertised)
      out.emplace(advertiser, d);
  return out;
}

void
OlsrProtocol::send(NodeId at, const DataPacket& packet)
{
  on_data(at, packet);
}

void
OlsrProtocol::on_data(NodeId at, const DataPacket& packet)
{
  if (packet.dst == at)
    {
      deliver(at, packet);
      return;
    }
  const auto& table = routes(at);
  auto it = table.find(packet.dst);
  if (it == table.end())
    {
      drop(at, packet, DropReason::NoRoute);
      return;
    }
  forward_data(at, it->second.next_hop, packet);
}

ConvergenceState
OlsrProtocol::convergence_state()
{
  ConvergenceState out;
  out.complete = true;
  const auto n = m_nodes.size();
  for (NodeId node = 0; node < n; ++node)
    {
      const auto& table = routes(node);
      if (table.size() + 1 != n)
        out.complete = false;
      for (const auto& [dst, r] : table)
        {
          out.signature += std::to_string(node) + '>' + std::to_string(dst) + ':' + std::to_string(r.next_hop) + ';';
        }
    }
  return out;
}

} // namespace meshsim
