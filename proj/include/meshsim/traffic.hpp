#pragma once

#include "meshsim/engine.hpp"

#include <cstdint>
#include <vector>

namespace meshsim {

enum class TrafficModel : std::uint8_t
{
  Cbr,
  Vbr,
};

struct TrafficConfig
{
  TrafficModel model = TrafficModel::Cbr;
  double rate = 50.0;
  std::uint32_t packet_size = 1400;
  /// VBR size bounds, drawn uniformly.
  std::uint32_t min_size = 64;
  std::uint32_t max_size = 1400;

  void validate() const;
};

struct ProbeConfig
{
  bool enabled = true;
  std::uint32_t count = 100;
  double interval = 1.0;
  std::uint32_t size = 64;
  double timeout = 1.0;

  void validate() const;
};

struct Departure
{
  double idt;
  std::uint32_t size;
};

/// CBR: fixed gap and size. VBR: exponential gap with mean 1/rate, uniform integer size.
Departure next_departure(const TrafficConfig& config, RngStream& rng);

struct FlowSpec
{
  std::uint64_t flow_id;
  NodeId src;
  NodeId dst;
  double start;
  double stop;
};

/// One flow from `source` to every sink, ids counting up from 1.
std::vector<FlowSpec> spawn_flows(NodeId source, const std::vector<NodeId>& sinks, double start, double stop);

/// Departure times of one flow in [start, stop). CBR times are start + k / rate
/// computed without accumulation.
class FlowSchedule
{
public:
  FlowSchedule(const TrafficConfig& config, const FlowSpec& flow, RngStream rng);

  /// Time and size of the next departure, or false once the flow has stopped.
  bool next(double& at, std::uint32_t& size);
  std::uint64_t emitted() const { return m_count; }

private:
  TrafficConfig m_config;
  FlowSpec m_flow;
  RngStream m_rng;
  std::uint64_t m_count = 0;
  double m_vbr_clock;
};

} // namespace meshsim
