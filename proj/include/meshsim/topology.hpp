#pragma once

#include "meshsim/mobility.hpp"
#include "meshsim/network.hpp"

#include <optional>
#include <string>
#include <vector>

namespace meshsim {

struct TopologySpec
{
  std::string name = "T2";
  std::size_t nodes = 20;
  Area area{400.0, 360.0};
  /// Required hop diameter of the backbone graph.
  std::uint32_t diameter = 6;
  /// Explicit backbone positions skip the grid search.
  std::vector<Position> backbone;
  std::optional<NodeId> controller;
};

/// T1, T2, T3. Throws std::invalid_argument for other names.
TopologySpec preset_topology(const std::string& name);

struct Topology
{
  std::string name;
  Area area;
  /// Backbone ids are 0..backbone.size()-1; clients follow.
  std::vector<Position> backbone;
  std::size_t clients = 0;
  NodeId controller = 0;

  std::size_t node_count() const { return backbone.size() + clients; }
  std::vector<NodeRole> roles() const;
  std::vector<NodeId> client_ids() const;
};

std::size_t backbone_count(std::size_t nodes);

/// Every point of the area, sampled on a `step` lattice, is within `range` of some backbone node.
bool covers(const Area& area, const std::vector<Position>& backbone, double range, double step = 5.0);

/// Hop diameter of the unit-disk graph, nullopt when disconnected.
std::optional<std::uint32_t> hop_diameter(const std::vector<Position>& nodes, double range);

/// Backbone node closest to the area centre, ties to the lower id.
NodeId central_node(const Area& area, const std::vector<Position>& backbone);

/// Grid search: rows then columns ascending, spacings 40 m upwards in 5 m steps
/// up to 0.9 * range. The first grid that covers the area with the required
/// diameter wins. Throws std::invalid_argument when none does.
Topology build_topology(const TopologySpec& spec, double range);

/// Uniform client positions inside the area.
std::vector<Position> place_clients(const Area& area, std::size_t count, std::uint64_t seed);

} // namespace meshsim
