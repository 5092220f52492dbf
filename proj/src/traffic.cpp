#include "meshsim/traffic.hpp"

#include "meshsim/messages.hpp"

#include <stdexcept>
#include <string>

namespace meshsim {

void
TrafficConfig::validate() const
{
  if (!(rate > 0))
    throw std::invalid_argument("traffic.rate: must be > 0");
  if (packet_size < kMinFrameBytes)
    throw std::invalid_argument("traffic.packet_size: must be >= " + std::to_string(kMinFrameBytes));
  if (min_size < kMinFrameBytes)
    throw std::invalid_argument("traffic.min_size: must be >= " + std::to_string(kMinFrameBytes));
  if (min_size > max_size)
    throw std::invalid_argument("traffic.min_size: must be <= traffic.max_size");
}

void
ProbeConfig::validate() const
{
  if (enabled && count == 0)
    throw std::invalid_argument("probe.count: must be > 0");
  if (!(interval > 0))
    throw std::invalid_argument("probe.interval: must be > 0");
  if (size < kMinFrameBytes)
    throw std::invalid_argument("probe.size: must be >= " + std::to_string(kMinFrameBytes));
  if (!(timeout > 0))
    throw std::invalid_argument("probe.timeout: must be > 0");
}

Departure
next_departure(const TrafficConfig& config, RngStream& rng)
{
  if (config.model == TrafficModel::Cbr)
    return {1.0 / config.rate, config.packet_size};
  const double idt = rng.exponential(config.rate);
  const auto size = static_cast<std::uint32_t>(rng.uniform_int(config.min_size, config.max_size));
  return {idt, size};
}

std::vector<FlowSpec>
spawn_flows(NodeId source, const std::vector<NodeId>& sinks, double start, double stop)
{
  if (!(start < stop))
    throw std::invalid_argument("traffic: start must be before stop");
  std::vector<FlowSpec> out;
  std::uint64_t id = 1;
  for (NodeId sink : sinks)
    if (sink != source)
      out.push_back(FlowSpec{id++, source, sink, start, stop});
  return out;
}

FlowSchedule::FlowSchedule(const TrafficConfig& config, const FlowSpec& flow, RngStream rng)
  : m_config(config), m_flow(flow), m_rng(std::move(rng)), m_vbr_clock(flow.start)
{
  m_config.validate();
}

bool
FlowSchedule::next(double& at, std::uint32_t& size)
{
  double t;
  if (m_config.model == TrafficModel::Cbr)
    {
      t = m_flow.start + static_cast<double>(m_count) / m_config.rate;
      size = m_config.packet_size;
    }
  else
    {
      // first packet leaves at start, later ones after exponential gaps
      t = m_vbr_clock;
      auto d = next_departure(m_config, m_rng);
      size = d.size;
      m_vbr_clock += d.idt;
    }
  if (t >= m_flow.stop)
    return false;
  at = t;
  ++m_count;
  return true;
}

} // namespace meshsim
