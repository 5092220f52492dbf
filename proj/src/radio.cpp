#include "meshsim/radio.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace meshsim {

std::string_view
to_string(FrameKind kind)
{
  switch (kind)
    {
    case FrameKind::Hello: return "HELLO";
    case FrameKind::Tc: return "TC";
    case FrameKind::Ogm: return "OGM";
    case FrameKind::GraphReport: return "GRAPH_REPORT";
    case FrameKind::PacketIn: return "PACKET_IN";
    case FrameKind::FlowMod: return "FLOW_MOD";
    case FrameKind::GratuitousArp: return "GRATUITOUS_ARP";
    case FrameKind::ArpRequest: return "ARP_REQUEST";
    case FrameKind::ArpReply: return "ARP_REPLY";
    case FrameKind::Data: return "DATA";
    case FrameKind::Probe: return "PROBE";
    }
  return "UNKNOWN";
}

void
RadioParams::validate() const
{
  if (!std::isfinite(tx_power_dbm))
    throw std::invalid_argument("radio.tx_power: must be finite");
  if (!(rx_sensitivity_dbm < tx_power_dbm))
    throw std::invalid_argument("radio.rx_sensitivity: must be below tx_power");
  if (!(frequency_hz > 0))
    throw std::invalid_argument("radio.frequency: must be positive");
  if (!(phy_rate_bps > 0))
    throw std::invalid_argument("radio.phy_rate: must be positive");
  if (range_override_m && !(*range_override_m > 0))
    throw std::invalid_argument("radio.range: must be positive");
}

double
distance(Position a, Position b)
{
  return std::hypot(a.x - b.x, a.y - b.y);
}

double
fspl_db(double distance_m, double frequency_hz)
{
  return 20.0 * std::log10(distance_m) + 20.0 * std::log10(frequency_hz) +
         20.0 * std::log10(4.0 * std::numbers::pi / kSpeedOfLight);
}

double
received_power(const RadioParams& params, double distance_m)
{
  if (!(distance_m > 0))
    throw std::invalid_argument("received_power: distance must be positive");
  return params.tx_power_dbm + params.gain_tx_dbi + params.gain_rx_dbi -
         fspl_db(distance_m, params.frequency_hz);
}

double
fspl_max_range(const RadioParams& params)
{
  const double budget = params.tx_power_dbm + params.gain_tx_dbi + params.gain_rx_dbi -
                        params.rx_sensitivity_dbm;
  const double fixed = 20.0 * std::log10(params.frequency_hz) +
                       20.0 * std::log10(4.0 * std::numbers::pi / kSpeedOfLight);
  return std::pow(10.0, (budget - fixed) / 20.0);
}

bool
link_up(const RadioParams& params, Position a, Position b)
{
  const double d = distance(a, b);
  if (params.range_override_m)
    return d <= *params.range_override_m;
  if (d <= 0.0)
    return true;
  return received_power(params, d) >= params.rx_sensitivity_dbm;
}

Medium::Medium(Scheduler& scheduler, RadioParams params, std::size_t node_count, PositionFn positions)
  : m_scheduler(scheduler),
    m_params(std::move(params)),
    m_node_count(node_count),
    m_positions(std::move(positions)),
    m_cache(node_count)
{
  m_params.validate();
}

Position
Medium::position(NodeId node) const
{
  auto& slot = m_cache.at(node);
  const SimTime now = m_scheduler.now();
  if (slot.at != now)
    {
      slot.pos = m_positions(node, now);
      slot.at = now;
    }
  return slot.pos;
}

bool
Medium::link_up(NodeId a, NodeId b) const
{
  return meshsim::link_up(m_params, position(a), position(b));
}

double
Medium::signal(NodeId a, NodeId b) const
{
  // Co-located nodes report the power at 1 cm.
  const double d = std::max(distance(position(a), position(b)), 0.01);
  return received_power(m_params, d);
}

std::vector<NodeId>
Medium::neighbors(NodeId node) const
{
  std::vector<NodeId> out;
  for (NodeId other = 0; other < m_node_count; ++other)
    if (other != node && link_up(node, other))
      out.push_back(other);
  return out;
}

double
Medium::tx_delay(std::uint32_t bytes) const
{
  return static_cast<double>(bytes) * 8.0 / m_params.phy_rate_bps;
}

Delivery
Medium::deliver(NodeId src, NodeId receiver, const std::shared_ptr<const Frame>& frame)
{
  const double propagation = distance(position(src), position(receiver)) / kSpeedOfLight;
  const SimTime at = m_scheduler.now() + tx_delay(frame->size) + propagation;
  m_scheduler.schedule(at, EventKind::FrameDelivery, receiver, [this, receiver, frame] {
    if (m_receiver)
      m_receiver(receiver, *frame);
  });
  return Delivery{receiver, at};
}

std::vector<Delivery>
Medium::broadcast(NodeId src, Frame frame)
{
  frame.src = src;
  frame.dst = kBroadcast;
  if (m_on_transmit)
    m_on_transmit(frame, m_scheduler.now());
  auto shared = std::make_shared<const Frame>(std::move(frame));
  std::vector<Delivery> out;
  for (NodeId other = 0; other < m_node_count; ++other)
    if (other != src && link_up(src, other))
      out.push_back(deliver(src, other, shared));
  return out;
}

std::optional<Delivery>
Medium::unicast(NodeId src, NodeId next_hop, Frame frame)
{
  if (next_hop == src)
    throw std::logic_error("unicast: next hop equals source " + std::to_string(src));
  if (next_hop >= m_node_count)
    throw std::out_of_range("unicast: unknown next hop " + std::to_string(next_hop));
  frame.src = src;
  frame.dst = next_hop;
  if (m_on_transmit)
    m_on_transmit(frame, m_scheduler.now());
  if (!link_up(src, next_hop))
    return std::nullopt;
  return deliver(src, next_hop, std::make_shared<const Frame>(std::move(frame)));
}

} // namespace meshsim
