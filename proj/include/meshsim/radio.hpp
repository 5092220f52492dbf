#pragma once

#include "meshsim/engine.hpp"
#include "meshsim/messages.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace meshsim {

inline constexpr double kSpeedOfLight = 299792458.0;

struct RadioParams
{
  double tx_power_dbm = 20.0;
  double rx_sensitivity_dbm = -90.0;
  double gain_tx_dbi = 1.0;
  double gain_rx_dbi = 1.0;
  double frequency_hz = 2.4e9;
  double phy_rate_bps = 54e6;
  /// When set, links are up iff distance <= range (inclusive).
  std::optional<double> range_override_m;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct Position
{
  double x = 0.0;
  double y = 0.0;
  friend constexpr bool operator==(const Position&, const Position&) = default;
};

double distance(Position a, Position b);

/// Free-space path loss in dB.
double fspl_db(double distance_m, double frequency_hz);

/// Link budget: tx power + antenna gains - FSPL. Throws for distance <= 0.
double received_power(const RadioParams& params, double distance_m);

/// Distance at which the FSPL budget meets the receiver sensitivity.
double fspl_max_range(const RadioParams& params);

bool link_up(const RadioParams& params, Position a, Position b);

struct Delivery
{
  NodeId receiver;
  SimTime at;
};

/// Shared broadcast medium with an idealized MAC: no contention or
/// collisions, per-hop delay = serialization + propagation, connectivity
/// sampled at transmission start.
class Medium
{
public:
  using PositionFn = std::function<Position(NodeId, SimTime)>;
  using Receiver = std::function<void(NodeId, const Frame&)>;
  using TransmitHook = std::function<void(const Frame&, SimTime)>;

  Medium(Scheduler& scheduler, RadioParams params, std::size_t node_count, PositionFn positions);

  void set_receiver(Receiver receiver) { m_receiver = std::move(receiver); }
  void set_transmit_hook(TransmitHook hook) { m_on_transmit = std::move(hook); }

  const RadioParams& params() const { return m_params; }
  std::size_t node_count() const { return m_node_count; }

  Position position(NodeId node) const;
  bool link_up(NodeId a, NodeId b) const;
  /// Received signal strength of `b` at `a` in dBm.
  double signal(NodeId a, NodeId b) const;
  std::vector<NodeId> neighbors(NodeId node) const;
  double tx_delay(std::uint32_t bytes) const;

  std::vector<Delivery> broadcast(NodeId src, Frame frame);
  /// Delivers iff the link is up at transmission start. Throws on next_hop == src.
  std::optional<Delivery> unicast(NodeId src, NodeId next_hop, Frame frame);

private:
  Delivery deliver(NodeId src, NodeId receiver, const std::shared_ptr<const Frame>& frame);

  Scheduler& m_scheduler;
  RadioParams m_params;
  std::size_t m_node_count;
  PositionFn m_positions;
  Receiver m_receiver;
  TransmitHook m_on_transmit;

  struct CachedPosition
  {
    SimTime at{-1.0};
    Position pos;
  };
  mutable std::vector<CachedPosition> m_cache;
};

} // namespace meshsim
