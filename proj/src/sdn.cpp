#include "meshsim/sdn.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <stdexcept>

namespace meshsim {

NetworkGraph::NetworkGraph(std::vector<NodeRole> roles) : m_roles(std::move(roles)), m_adjacency(m_roles.size())
{
}

void
NetworkGraph::add_edge(NodeId a, NodeId b, double signal_dbm)
{
  if (a == b)
    throw std::invalid_argument("graph: self edge on node " + std::to_string(a));
  m_adjacency.at(a).insert(b);
  m_adjacency.at(b).insert(a);
  m_edges[make_edge(a, b)] = signal_dbm;
}

bool
NetworkGraph::remove_edge(NodeId a, NodeId b)
{
  if (m_edges.erase(make_edge(a, b)) == 0)
    return false;
  m_adjacency.at(a).erase(b);
  m_adjacency.at(b).erase(a);
  return true;
}

namespace {

constexpr std::uint32_t kUnreached = std::numeric_limits<std::uint32_t>::max();

// Hop distance to `dst` for every node, expanding only through relays.
std::vector<std::uint32_t>
distances_to(const NetworkGraph& g, NodeId dst, NodeId src)
{
  std::vector<std::uint32_t> dist(g.node_count(), kUnreached);
  std::deque<NodeId> queue{dst};
  dist[dst] = 0;
  while (!queue.empty())
    {
      const NodeId u = queue.front();
      queue.pop_front();
      if (u != dst && !g.can_transit(u))
        continue;
      for (NodeId v : g.neighbors(u))
        if (dist[v] == kUnreached)
          {
            dist[v] = dist[u] + 1;
            if (v != src)
              queue.push_back(v);
          }
    }
  return dist;
}

} // namespace

std::optional<Path>
compute_path_hc(const NetworkGraph& graph, NodeId src, NodeId dst)
{
  if (src >= graph.node_count() || dst >= graph.node_count())
    throw std::out_of_range("compute_path_hc: unknown node");
  if (src == dst)
    return Path{src};
  const auto dist = distances_to(graph, dst, src);
  if (dist[src] == kUnreached)
    return std::nullopt;
  Path path{src};
  NodeId cur = src;
  while (cur != dst)
    {
      NodeId next = kBroadcast;
      for (NodeId v : graph.neighbors(cur))
        if (dist[v] + 1 == dist[cur] && (v == dst || graph.can_transit(v)))
          {
            next = v;
            break;
          }
      path.push_back(next);
      cur = next;
    }
  return path;
}

void
SdnConfig::validate() const
{
  if (!(report_interval > 0))
    throw std::invalid_argument("sdn.report_interval: must be > 0");
  if (!(staleness_intervals >= 1))
    throw std::invalid_argument("sdn.staleness_intervals: must be >= 1");
  if (!(controller_processing >= 0))
    throw std::invalid_argument("sdn.controller_processing: must be >= 0");
  if (!(buffer_timeout > 0))
    throw std::invalid_argument("sdn.buffer_timeout: must be > 0");
  if (!(arp_retry > 0))
    throw std::invalid_argument("sdn.arp_retry: must be > 0");
  if (arp_attempts < 1)
    throw std::invalid_argument("sdn.arp_attempts: must be >= 1");
  if (!(teardown_delay >= 0))
    throw std::invalid_argument("sdn.teardown_delay: must be >= 0");
}

SdnProtocol::SdnProtocol(NetworkContext& ctx, SdnConfig config, std::unique_ptr<PathStrategy> strategy)
  : RoutingProtocol(ctx),
    m_config(config),
    m_strategy(strategy ? std::move(strategy) : std::make_unique<HopCountStrategy>()),
    m_graph(ctx.roles),
    m_reports(ctx.node_count())
{
  m_config.validate();
  if (!ctx.is_backbone(ctx.controller))
    throw std::invalid_argument("sdn: controller must be a backbone node");
  m_switches.reserve(ctx.node_count());
  for (NodeId n = 0; n < ctx.node_count(); ++n)
    m_switches.emplace_back(RngStream(ctx.seed, "sdn.jitter", n));
}

void
SdnProtocol::start()
{
  // In-band bootstrap is finished before the clock starts: the controller
  // begins with the neighbourhoods as they are at t = 0.
  for (NodeId n = 0; n < m_switches.size(); ++n)
    {
      auto& r = m_reports[n];
      for (NodeId nb : ctx().medium.neighbors(n))
        {
          r.neighbors.insert(nb);
          r.signal[nb] = ctx().medium.signal(n, nb);
        }
      r.at = ctx().now();
    }
  update_graph();
  for (NodeId n = 0; n < m_switches.size(); ++n)
    {
      const double first = m_switches[n].jitter.uniform(0.0, m_config.report_interval);
      ctx().scheduler.schedule_in(first, EventKind::Timer, n, [this, n] { emit_report(n); });
    }
  ctx().scheduler.schedule_in(m_config.report_interval / 4.0, EventKind::Timer, ctx().controller,
                              [this] { housekeeping(); });
}

// Catches reports going stale between arrivals.
void
SdnProtocol::housekeeping()
{
  update_graph();
  ctx().scheduler.schedule_in(m_config.report_interval / 4.0, EventKind::Timer, ctx().controller,
                              [this] { housekeeping(); });
}

bool
SdnProtocol::fresh(NodeId node) const
{
  return ctx().now() - m_reports[node].at <= m_config.staleness_intervals * m_config.report_interval;
}

// ---------------------------------------------------------------- node side

void
SdnProtocol::emit_report(NodeId node)
{
  NeighborReport report{node, {}, ctx().now()};
  for (NodeId nb : ctx().medium.neighbors(node))
    report.observed.push_back(NeighborObservation{nb, ctx().medium.signal(node, nb)});
  const auto size = m_config.report_base_bytes +
                    m_config.report_neighbor_bytes * static_cast<std::uint32_t>(report.observed.size());
  to_controller(node, make_frame(FrameKind::GraphReport, node, kBroadcast, size, ctx().now(), std::move(report)));
  const double next = m_config.report_interval - m_switches[node].jitter.uniform(0.0, m_config.report_interval / 4.0);
  ctx().scheduler.schedule_in(next, EventKind::Timer, node, [this, node] { emit_report(node); });
}

void
SdnProtocol::receive(NodeId at, const Frame& frame)
{
  switch (frame.kind)
    {
    case FrameKind::Data:
    case FrameKind::Probe: on_data(at, frame.as<DataPacket>()); break;
    case FrameKind::GraphReport:
    case FrameKind::PacketIn:
    case FrameKind::ArpRequest:
    case FrameKind::ArpReply:
    case FrameKind::GratuitousArp:
    case FrameKind::FlowMod: relay_control(at, frame); break;
    default: break;
    }
}

void
SdnProtocol::send(NodeId at, const DataPacket& packet)
{
  if (packet.dst == at)
    {
      deliver(at, packet);
      return;
    }
  auto& sw = m_switches[at];
  auto binding = sw.arp.find(packet.dst);
  if (binding == sw.arp.end())
    {
      auto [it, fresh_request] = sw.pending_arp.try_emplace(packet.dst);
      it->second.queued.push_back(packet);
      if (fresh_request)
        request_arp(at, packet.dst);
      return;
    }
  if (ctx().is_backbone(at))
    switch_packet(at, packet);
  else
    forward_data(at, binding->second, packet);
}

void
SdnProtocol::on_data(NodeId at, const DataPacket& packet)
{
  if (packet.dst == at)
    deliver(at, packet);
  else if (ctx().is_backbone(at))
    switch_packet(at, packet);
  else
    drop(at, packet, DropReason::NoRoute);
}

void
SdnProtocol::switch_packet(NodeId at, const DataPacket& packet)
{
  auto& sw = m_switches[at];
  auto it = sw.flows.find(FlowMatch{packet.src, packet.dst});
  if (it != sw.flows.end())
    forward_data(at, it->second, packet);
  else
    buffer_and_request(at, packet);
}

void
SdnProtocol::buffer_and_request(NodeId at, const DataPacket& packet)
{
  const FlowMatch match{packet.src, packet.dst};
  auto& sw = m_switches[at];
  const std::uint64_t token = m_next_token++;
  sw.buffer[match].push_back(Buffered{packet, token});
  ctx().scheduler.schedule_in(m_config.buffer_timeout, EventKind::Timer, at, [this, at, match, token] {
    auto& s = m_switches[at];
    auto it = s.buffer.find(match);
    if (it == s.buffer.end())
      return;
    auto& q = it->second;
    auto pos = std::find_if(q.begin(), q.end(), [token](const Buffered& b) { return b.token == token; });
    if (pos == q.end())
      return;
    DataPacket expired = pos->packet;
    q.erase(pos);
    if (q.empty())
      {
        s.buffer.erase(it);
        s.packet_in_outstanding.erase(match);
      }
    drop(at, expired, DropReason::BufferTimeout);
  });
  if (!sw.packet_in_outstanding.insert(match).second)
    return;
  PacketInRequest req{at, packet.src, packet.dst};
  to_controller(at, make_frame(FrameKind::PacketIn, at, kBroadcast, m_config.packet_in_bytes, ctx().now(), req));
}

void
SdnProtocol::release(NodeId at, FlowMatch match)
{
  auto& sw = m_switches[at];
  sw.packet_in_outstanding.erase(match);
  auto it = sw.buffer.find(match);
  if (it == sw.buffer.end())
    return;
  auto queued = std::move(it->second);
  sw.buffer.erase(it);
  for (const auto& b : queued)
    switch_packet(at, b.packet);
}

void
SdnProtocol::request_arp(NodeId at, NodeId target)
{
  auto& pending = m_switches[at].pending_arp.at(target);
  ++pending.attempts;
  ArpMessage msg{at, target, kBroadcast, static_cast<std::uint32_t>(pending.attempts)};
  pending.retry = ctx().scheduler.schedule_in(m_config.arp_retry, EventKind::Timer, at,
                                              [this, at, target] { arp_timeout(at, target); });
  to_controller(at, make_frame(FrameKind::ArpRequest, at, kBroadcast, m_config.arp_bytes, ctx().now(), msg));
}

void
SdnProtocol::arp_timeout(NodeId at, NodeId target)
{
  auto& sw = m_switches[at];
  auto it = sw.pending_arp.find(target);
  if (it == sw.pending_arp.end())
    return;
  if (it->second.attempts < m_config.arp_attempts)
    {
      request_arp(at, target);
      return;
    }
  auto queued = std::move(it->second.queued);
  sw.pending_arp.erase(it);
  for (const auto& p : queued)
    drop(at, p, DropReason::ArpFailure);
}

void
SdnProtocol::on_arp_binding(NodeId at, NodeId target, NodeId binding)
{
  auto& sw = m_switches[at];
  sw.arp[target] = binding;
  auto it = sw.pending_arp.find(target);
  if (it == sw.pending_arp.end())
    return;
  ctx().scheduler.cancel(it->second.retry);
  auto queued = std::move(it->second.queued);
  sw.pending_arp.erase(it);
  for (const auto& p : queued)
    send(at, p);
}

void
SdnProtocol::on_flow_mod(NodeId at, const FlowModMessage& mod)
{
  auto& sw = m_switches[at];
  if (mod.remove)
    sw.flows.erase(mod.match);
  else
    sw.flows[mod.match] = mod.next_hop;
  if (!mod.remove)
    release(at, mod.match);
  if (mod.batch != 0)
    batch_arrival(mod.batch);
}

// -------------------------------------------------------- control transport

void
SdnProtocol::to_controller(NodeId at, Frame frame)
{
  frame.origin = at;
  frame.destination = ctx().controller;
  relay_control(at, frame);
}

void
SdnProtocol::from_controller(NodeId target, Frame frame)
{
  frame.origin = ctx().controller;
  frame.destination = target;
  relay_control(ctx().controller, frame);
}

void
SdnProtocol::relay_control(NodeId at, const Frame& frame)
{
  if (frame.destination == at)
    {
      handle_at_target(at, frame);
      return;
    }
  auto next = next_control_hop(at, frame.destination);
  if (!next)
    return;
  ctx().medium.unicast(at, *next, frame);
}

void
SdnProtocol::handle_at_target(NodeId at, const Frame& frame)
{
  switch (frame.kind)
    {
    case FrameKind::GraphReport:
    case FrameKind::PacketIn:
    case FrameKind::ArpRequest:
      if (at == ctx().controller)
        controller_receive(frame);
      break;
    case FrameKind::FlowMod: on_flow_mod(at, frame.as<FlowModMessage>()); break;
    case FrameKind::ArpReply:
    case FrameKind::GratuitousArp: {
      const auto& msg = frame.as<ArpMessage>();
      on_arp_binding(at, msg.target, msg.binding);
      break;
    }
    default: break;
    }
}

std::optional<Path>
SdnProtocol::control_path(NodeId node)
{
  if (!m_tree_valid)
    {
      m_tree.clear();
      m_tree_valid = true;
    }
  auto it = m_tree.find(node);
  if (it == m_tree.end())
    {
      auto p = compute_path_hc(m_graph, ctx().controller, node);
      if (!p)
        return std::nullopt;
      it = m_tree.emplace(node, std::move(*p)).first;
    }
  return it->second;
}

std::optional<NodeId>
SdnProtocol::next_control_hop(NodeId at, NodeId destination)
{
  if (destination == ctx().controller)
    {
      auto p = control_path(at);
      if (!p || p->size() < 2)
        return std::nullopt;
      return (*p)[p->size() - 2];
    }
  if (auto p = control_path(destination))
    {
      auto pos = std::find(p->begin(), p->end(), at);
      if (pos != p->end() && pos + 1 != p->end())
        return *(pos + 1);
    }
  auto p = compute_path_hc(m_graph, at, destination);
  if (!p || p->size() < 2)
    return std::nullopt;
  return (*p)[1];
}

// ----------------------------------------------------------- controller side

void
SdnProtocol::controller_receive(const Frame& frame)
{
  switch (frame.kind)
    {
    case FrameKind::GraphReport: {
      const auto& report = frame.as<NeighborReport>();
      auto& r = m_reports.at(report.reporter);
      r.neighbors.clear();
      r.signal.clear();
      for (const auto& o : report.observed)
        {
          r.neighbors.insert(o.neighbor);
          r.signal[o.neighbor] = o.signal_dbm;
        }
      r.at = ctx().now();
      r.received = true;
      update_graph();
      break;
    }
    case FrameKind::PacketIn: {
      ++m_packet_ins;
      auto req = frame.as<PacketInRequest>();
      enqueue_job([this, req] { handle_packet_in(req); });
      break;
    }
    case FrameKind::ArpRequest: {
      auto req = frame.as<ArpMessage>();
      enqueue_job([this, req] { handle_arp_request(req); });
      break;
    }
    default: break;
    }
}

void
SdnProtocol::enqueue_job(std::function<void()> job)
{
  const SimTime start = std::max(ctx().now(), m_busy_until);
  m_busy_until = start + m_config.controller_processing;
  ctx().scheduler.schedule(m_busy_until, EventKind::Timer, ctx().controller, std::move(job));
}

namespace {

/// Switches that hold an entry for `path`: every hop except the destination
/// and a client source host.
std::map<NodeId, NodeId>
entries_for(const Path& path, const NetworkContext& ctx)
{
  std::map<NodeId, NodeId> out;
  for (std::size_t i = 0; i + 1 < path.size(); ++i)
    if (ctx.is_backbone(path[i]))
      out[path[i]] = path[i + 1];
  return out;
}

bool
uses_edge(const Path& path, Edge edge)
{
  for (std::size_t i = 0; i + 1 < path.size(); ++i)
    if (make_edge(path[i], path[i + 1]) == edge)
      return true;
  return false;
}

} // namespace

void
SdnProtocol::handle_packet_in(const PacketInRequest& req)
{
  const FlowMatch match{req.src, req.dst};
  auto registered = m_flow_by_match.find(match);
  if (registered != m_flow_by_match.end())
    {
      auto& flow = m_flows.at(registered->second);
      const auto entries = entries_for(flow.path, ctx());
      auto at = entries.find(req.ingress);
      if (!flow.suspended && at != entries.end())
        {
          send_flow_mod(req.ingress, match, at->second, false, flow.id, 0);
          return;
        }
    }

  std::optional<Path> path;
  if (req.ingress == req.src)
    path = m_strategy->compute(m_graph, req.src, req.dst);
  else if (!ctx().is_backbone(req.src) && m_graph.has_edge(req.src, req.ingress))
    {
      if (auto rest = m_strategy->compute(m_graph, req.ingress, req.dst))
        if (std::find(rest->begin(), rest->end(), req.src) == rest->end())
          {
            path = Path{req.src};
            path->insert(path->end(), rest->begin(), rest->end());
          }
    }
  else
    return;
  if (!path || !m_graph.known(req.dst))
    return;

  if (registered != m_flow_by_match.end())
    {
      auto& flow = m_flows.at(registered->second);
      flow.suspended = false;
      install(flow, *path, 0);
      return;
    }
  const std::uint64_t id = m_next_flow++;
  auto& flow = m_flows.emplace(id, Flow{id, match, {}, false, std::nullopt}).first->second;
  m_flow_by_match[match] = id;
  install(flow, *path, 0);
}

void
SdnProtocol::handle_arp_request(const ArpMessage& req)
{
  if (!m_graph.known(req.target))
    return;
  NodeId binding = req.target;
  if (!ctx().is_backbone(req.requester))
    {
      auto p = m_strategy->compute(m_graph, req.requester, req.target);
      if (!p || p->size() < 2)
        return;
      binding = (*p)[1];
    }
  ArpMessage reply{req.requester, req.target, binding, req.sequence};
  from_controller(req.requester,
                  make_frame(FrameKind::ArpReply, ctx().controller, kBroadcast, m_config.arp_bytes, ctx().now(), reply));
}

void
SdnProtocol::send_flow_mod(NodeId target, FlowMatch match, NodeId next_hop, bool remove, std::uint64_t flow_id,
                           std::uint64_t batch)
{
  if (batch != 0)
    ++m_batches.at(batch).sent;
  FlowModMessage mod{target, match, next_hop, remove, flow_id, batch};
  from_controller(target,
                  make_frame(FrameKind::FlowMod, ctx().controller, kBroadcast, m_config.flow_mod_bytes, ctx().now(), mod));
}

void
SdnProtocol::install(Flow& flow, const Path& new_path, std::uint64_t batch)
{
  const auto old_entries = entries_for(flow.path, ctx());
  const auto new_entries = entries_for(new_path, ctx());
  flow.path = new_path;
  ++flow.generation;
  flow.moving = false;
  // Downstream switches first so the ingress, which releases buffered
  // packets, is programmed last.
  for (auto it = new_path.rbegin(); it != new_path.rend(); ++it)
    {
      auto e = new_entries.find(*it);
      if (e == new_entries.end())
        continue;
      auto old = old_entries.find(e->first);
      if (old == old_entries.end() || old->second != e->second)
        send_flow_mod(e->first, flow.match, e->second, false, flow.id, batch);
    }
  for (const auto& [node, next] : old_entries)
    if (!new_entries.contains(node))
      send_flow_mod(node, flow.match, next, true, flow.id, batch);
}

void
SdnProtocol::update_graph()
{
  std::map<Edge, double> next;
  for (NodeId r = 0; r < m_reports.size(); ++r)
    {
      if (!fresh(r))
        continue;
      for (NodeId nb : m_reports[r].neighbors)
        {
          if (fresh(nb) && !m_reports[nb].neighbors.contains(r))
            continue;
          next.emplace(make_edge(r, nb), m_reports[r].signal.at(nb));
        }
    }
  std::vector<Edge> lost;
  bool changed = false;
  for (const auto& [e, sig] : m_graph.edges())
    if (!next.contains(e))
      lost.push_back(e);
  for (const auto& e : lost)
    {
      m_graph.remove_edge(e.first, e.second);
      changed = true;
    }
  for (const auto& [e, sig] : next)
    if (!m_graph.has_edge(e.first, e.second))
      {
        m_graph.add_edge(e.first, e.second, sig);
        changed = true;
      }
  if (!changed)
    return;
  m_tree_valid = false;
  for (const auto& e : lost)
    on_edge_lost(e);
  if (m_config.mobility_extension)
    retry_suspended();
  if (!m_config.mobility_extension || !m_config.reoptimize || m_reoptimize_queued)
    return;
  for (const auto& [id, flow] : m_flows)
    if (shorter_path(flow))
      {
        m_reoptimize_queued = true;
        enqueue_job([this] {
          m_reoptimize_queued = false;
          reoptimize();
        });
        break;
      }
}

void
SdnProtocol::on_edge_lost(Edge edge)
{
  bool affected = false;
  for (auto& [id, flow] : m_flows)
    {
      if (flow.suspended || !uses_edge(flow.path, edge))
        continue;
      affected = true;
      if (!m_config.mobility_extension && !flow.teardown)
        {
          const std::uint64_t fid = id;
          flow.teardown = ctx().scheduler.schedule_in(m_config.teardown_delay, EventKind::Timer, ctx().controller,
                                                      [this, fid] { teardown(fid); });
        }
    }
  if (!affected || !m_config.mobility_extension)
    return;
  const SimTime detected = ctx().now();
  enqueue_job([this, edge, detected] { reroute(edge, detected); });
}

void
SdnProtocol::reroute(Edge edge, SimTime detected_at)
{
  const std::size_t record = m_reroutes.size();
  m_reroutes.push_back(RerouteRecord{detected_at, ctx().now(), std::nullopt, edge, 0});
  const std::uint64_t batch = open_batch();

  std::map<NodeId, std::set<NodeId>> peers;
  for (auto& [id, flow] : m_flows)
    {
      if (flow.suspended || !uses_edge(flow.path, edge))
        continue;
      ++m_reroutes.back().flows;
      for (NodeId end : {edge.first, edge.second})
        if (!ctx().is_backbone(end))
          {
            if (flow.match.src == end)
              peers[end].insert(flow.match.dst);
            else if (flow.match.dst == end)
              peers[end].insert(flow.match.src);
          }
      auto path = m_strategy->compute(m_graph, flow.match.src, flow.match.dst);
      if (!path)
        {
          flow.suspended = true;
          continue;
        }
      install(flow, *path, batch);
    }
  // The moved client learns its new first hop towards each peer. Its own
  // outbound flow is moved to that first hop in the same batch, and the
  // gratuitous ARPs go out once the batch is in place.
  auto& garps = m_batch_garps[batch];
  for (const auto& [client, others] : peers)
    for (NodeId peer : others)
      {
        auto p = m_strategy->compute(m_graph, client, peer);
        if (!p || p->size() < 2)
          continue;
        const FlowMatch match{client, peer};
        auto out = m_flow_by_match.find(match);
        if (out == m_flow_by_match.end())
          {
            // a client talking straight to its peer never went through a switch
            const std::uint64_t id = m_next_flow++;
            m_flow_by_match[match] = id;
            install(m_flows.emplace(id, Flow{id, match, {}, false, std::nullopt}).first->second, *p, batch);
          }
        else if (auto& flow = m_flows.at(out->second); flow.suspended || flow.path != *p)
          {
            flow.suspended = false;
            install(flow, *p, batch);
          }
        garps.push_back(ArpMessage{client, peer, (*p)[1], 0});
      }
  close_batch(batch, [this, record, batch] {
    m_reroutes.at(record).installed_at = ctx().now();
    send_garps(batch);
  });
}

void
SdnProtocol::send_garps(std::uint64_t batch)
{
  auto it = m_batch_garps.find(batch);
  if (it == m_batch_garps.end())
    return;
  for (const auto& garp : it->second)
    from_controller(garp.requester, make_frame(FrameKind::GratuitousArp, ctx().controller, kBroadcast,
                                               m_config.arp_bytes, ctx().now(), garp));
  m_batch_garps.erase(it);
}

std::uint64_t
SdnProtocol::open_batch()
{
  const std::uint64_t id = m_next_batch++;
  m_batches.emplace(id, Batch{});
  return id;
}

void
SdnProtocol::close_batch(std::uint64_t batch, std::function<void()> done)
{
  auto& b = m_batches.at(batch);
  b.closed = true;
  b.done = std::move(done);
  if (b.arrived >= b.sent)
    {
      finish_batch(batch);
      return;
    }
  // A FLOW_MOD lost on a broken control path must not hold the step forever.
  ctx().scheduler.schedule_in(m_config.report_interval, EventKind::Timer, ctx().controller,
                              [this, batch] { finish_batch(batch); });
}

void
SdnProtocol::batch_arrival(std::uint64_t batch)
{
  auto it = m_batches.find(batch);
  if (it == m_batches.end())
    return;
  ++it->second.arrived;
  if (it->second.closed && it->second.arrived >= it->second.sent)
    finish_batch(batch);
}

void
SdnProtocol::finish_batch(std::uint64_t batch)
{
  auto it = m_batches.find(batch);
  if (it == m_batches.end())
    return;
  auto done = std::move(it->second.done);
  m_batches.erase(it);
  if (done)
    done();
}

std::optional<Path>
SdnProtocol::shorter_path(const Flow& flow) const
{
  if (flow.suspended || flow.moving || flow.path.empty())
    return std::nullopt;
  auto p = m_strategy->compute(m_graph, flow.match.src, flow.match.dst);
  if (!p || p->size() >= flow.path.size())
    return std::nullopt;
  return p;
}

void
SdnProtocol::reoptimize()
{
  for (auto& [id, flow] : m_flows)
    if (auto p = shorter_path(flow))
      move_flow(flow, *p);
}

void
SdnProtocol::move_flow(Flow& flow, const Path& path)
{
  // Make before break: switches only on the new path first, then the shared
  // ones from the destination end back to the ingress, each once everything
  // downstream of it is in place.
  const auto old_entries = entries_for(flow.path, ctx());
  const auto new_entries = entries_for(path, ctx());
  auto plan = std::make_shared<MovePlan>();
  plan->stages.emplace_back();
  for (const auto& [node, next] : new_entries)
    if (!old_entries.contains(node))
      plan->stages.front().emplace_back(node, next);
  for (auto it = path.rbegin(); it != path.rend(); ++it)
    {
      auto e = new_entries.find(*it);
      if (e == new_entries.end())
        continue;
      auto old = old_entries.find(*it);
      if (old != old_entries.end() && old->second != e->second)
        plan->stages.push_back({*e});
    }
  for (const auto& [node, next] : old_entries)
    if (!new_entries.contains(node))
      plan->removals.emplace_back(node, next);
  if (!ctx().is_backbone(flow.match.src) && path.size() >= 2 && (flow.path.size() < 2 || flow.path[1] != path[1]))
    plan->garp = ArpMessage{flow.match.src, flow.match.dst, path[1], 0};

  ++m_moves;
  flow.path = path;
  ++flow.generation;
  flow.moving = true;
  run_stage(flow.id, flow.generation, std::move(plan), 0);
}

void
SdnProtocol::run_stage(std::uint64_t flow_id, std::uint64_t generation, std::shared_ptr<const MovePlan> plan,
                       std::size_t stage)
{
  auto it = m_flows.find(flow_id);
  if (it == m_flows.end() || it->second.generation != generation)
    return;
  auto& flow = it->second;
  while (stage < plan->stages.size() && plan->stages[stage].empty())
    ++stage;
  if (stage == plan->stages.size())
    {
      if (plan->garp)
        from_controller(plan->garp->requester, make_frame(FrameKind::GratuitousArp, ctx().controller, kBroadcast,
                                                          m_config.arp_bytes, ctx().now(), *plan->garp));
      for (const auto& [node, next] : plan->removals)
        send_flow_mod(node, flow.match, next, true, flow.id, 0);
      flow.moving = false;
      return;
    }
  const auto batch = open_batch();
  for (const auto& [node, next] : plan->stages[stage])
    send_flow_mod(node, flow.match, next, false, flow.id, batch);
  close_batch(batch, [this, flow_id, generation, plan, stage] { run_stage(flow_id, generation, plan, stage + 1); });
}

void
SdnProtocol::retry_suspended()
{
  for (auto& [id, flow] : m_flows)
    {
      if (!flow.suspended)
        continue;
      auto path = m_strategy->compute(m_graph, flow.match.src, flow.match.dst);
      if (!path)
        continue;
      flow.suspended = false;
      install(flow, *path, 0);
      if (!ctx().is_backbone(flow.match.src) && path->size() >= 2)
        {
          ArpMessage garp{flow.match.src, flow.match.dst, (*path)[1], 0};
          from_controller(flow.match.src, make_frame(FrameKind::GratuitousArp, ctx().controller, kBroadcast,
                                                     m_config.arp_bytes, ctx().now(), garp));
        }
    }
}

void
SdnProtocol::teardown(std::uint64_t flow_id)
{
  auto it = m_flows.find(flow_id);
  if (it == m_flows.end())
    return;
  for (const auto& [node, next] : entries_for(it->second.path, ctx()))
    send_flow_mod(node, it->second.match, next, true, flow_id, 0);
  m_flow_by_match.erase(it->second.match);
  m_flows.erase(it);
}

// ------------------------------------------------------------------- queries

std::optional<NodeId>
SdnProtocol::flow_next_hop(NodeId node, FlowMatch match) const
{
  const auto& flows = m_switches.at(node).flows;
  auto it = flows.find(match);
  if (it == flows.end())
    return std::nullopt;
  return it->second;
}

std::optional<NodeId>
SdnProtocol::arp_binding(NodeId node, NodeId target) const
{
  const auto& arp = m_switches.at(node).arp;
  auto it = arp.find(target);
  if (it == arp.end())
    return std::nullopt;
  return it->second;
}

std::optional<Path>
SdnProtocol::registered_path(FlowMatch match) const
{
  auto it = m_flow_by_match.find(match);
  if (it == m_flow_by_match.end())
    return std::nullopt;
  return m_flows.at(it->second).path;
}

ConvergenceState
SdnProtocol::convergence_state()
{
  ConvergenceState out;
  out.complete = std::all_of(m_reports.begin(), m_reports.end(), [](const Report& r) { return r.received; });
  for (const auto& [e, sig] : m_graph.edges())
    out.signature += std::to_string(e.first) + '-' + std::to_string(e.second) + ';';
  return out;
}

} // namespace meshsim
