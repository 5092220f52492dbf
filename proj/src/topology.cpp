#include "meshsim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace meshsim {

std::vector<NodeRole>
Topology::roles() const
{
  std::vector<NodeRole> out(backbone.size(), NodeRole::Backbone);
  out.resize(node_count(), NodeRole::Client);
  return out;
}

std::vector<NodeId>
Topology::client_ids() const
{
  std::vector<NodeId> out;
  for (std::size_t i = backbone.size(); i < node_count(); ++i)
    out.push_back(static_cast<NodeId>(i));
  return out;
}

TopologySpec
preset_topology(const std::string& name)
{
  TopologySpec s;
  s.name = name;
  if (name == "T1")
    {
      s.nodes = 10;
      s.area = {240.0, 360.0};
      s.diameter = 4;
    }
  else if (name == "T2")
    {
      s.nodes = 20;
      s.area = {400.0, 360.0};
      s.diameter = 6;
    }
  else if (name == "T3")
    {
      s.nodes = 30;
      s.area = {560.0, 360.0};
      s.diameter = 8;
    }
  else
    throw std::invalid_argument("topology.name: unknown preset '" + name + "'");
  return s;
}

std::size_t
backbone_count(std::size_t nodes)
{
  return (nodes + 1) / 2;
}

bool
covers(const Area& area, const std::vector<Position>& backbone, double range, double step)
{
  const auto nx = static_cast<int>(std::floor(area.width / step + 1e-9));
  const auto ny = static_cast<int>(std::floor(area.height / step + 1e-9));
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j)
      {
        const Position p{i * step, j * step};
        bool ok = std::any_of(backbone.begin(), backbone.end(), [&](Position b) { return distance(p, b) <= range; });
        if (!ok)
          return false;
      }
  return true;
}

std::optional<std::uint32_t>
hop_diameter(const std::vector<Position>& nodes, double range)
{
  const auto n = nodes.size();
  std::uint32_t diameter = 0;
  for (std::size_t s = 0; s < n; ++s)
    {
      std::vector<std::uint32_t> dist(n, std::numeric_limits<std::uint32_t>::max());
      std::deque<std::size_t> queue{s};
      dist[s] = 0;
      while (!queue.empty())
        {
          auto u = queue.front();
          queue.pop_front();
          for (std::size_t v = 0; v < n; ++v)
            if (dist[v] == std::numeric_limits<std::uint32_t>::max() && distance(nodes[u], nodes[v]) <= range)
              {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
              }
        }
      for (auto d : dist)
        {
          if (d == std::numeric_limits<std::uint32_t>::max())
            return std::nullopt;
          diameter = std::max(diameter, d);
        }
    }
  return diameter;
}

NodeId
central_node(const Area& area, const std::vector<Position>& backbone)
{
  if (backbone.empty())
    throw std::invalid_argument("topology: no backbone nodes");
  const Position centre{area.width / 2, area.height / 2};
  NodeId best = 0;
  for (NodeId i = 1; i < backbone.size(); ++i)
    if (distance(backbone[i], centre) < distance(backbone[best], centre) - 1e-9)
      best = i;
  return best;
}

namespace {

std::vector<Position>
grid(std::size_t rows, std::size_t cols, std::size_t count, double sx, double sy, const Area& area)
{
  const double x0 = (area.width - static_cast<double>(cols - 1) * sx) / 2;
  const double y0 = (area.height - static_cast<double>(rows - 1) * sy) / 2;
  const std::size_t missing = rows * cols - count;
  const std::size_t skip_front = missing / 2;
  std::vector<Position> out;
  for (std::size_t idx = skip_front; idx < skip_front + count; ++idx)
    out.push_back(Position{x0 + static_cast<double>(idx % cols) * sx, y0 + static_cast<double>(idx / cols) * sy});
  return out;
}

} // namespace

Topology
build_topology(const TopologySpec& spec, double range)
{
  if (spec.nodes < 2)
    throw std::invalid_argument("topology.nodes: need at least 2");
  if (!(spec.area.width > 0 && spec.area.height > 0))
    throw std::invalid_argument("topology.area: width and height must be > 0");
  Topology t;
  t.name = spec.name;
  t.area = spec.area;
  const auto nb = backbone_count(spec.nodes);
  t.clients = spec.nodes - nb;

  if (!spec.backbone.empty())
    {
      if (spec.backbone.size() != nb)
        throw std::invalid_argument("topology.backbone: expected " + std::to_string(nb) + " positions, got " +
                                    std::to_string(spec.backbone.size()));
      for (auto p : spec.backbone)
        if (!spec.area.contains(p))
          throw std::invalid_argument("topology.backbone: position outside the area");
      if (!hop_diameter(spec.backbone, range))
        throw std::invalid_argument("topology.backbone: backbone graph is disconnected");
      t.backbone = spec.backbone;
    }
  else
    {
      const double max_spacing = std::min(0.9 * range, std::max(spec.area.width, spec.area.height));
      bool found = false;
      for (std::size_t rows = 1; rows <= nb && !found; ++rows)
        for (std::size_t cols = 1; cols <= nb && !found; ++cols)
          {
            if (rows * cols < nb || rows * cols - nb >= cols)
              continue;
            for (double sx = 40.0; sx <= max_spacing + 1e-9 && !found; sx += 5.0)
              {
                if (static_cast<double>(cols - 1) * sx > spec.area.width)
                  break;
                for (double sy = 40.0; sy <= max_spacing + 1e-9 && !found; sy += 5.0)
                  {
                    if (static_cast<double>(rows - 1) * sy > spec.area.height)
                      break;
                    auto cand = grid(rows, cols, nb, sx, sy, spec.area);
                    auto d = hop_diameter(cand, range);
                    if (!d || *d != spec.diameter || !covers(spec.area, cand, range))
                      continue;
                    t.backbone = std::move(cand);
                    found = true;
                  }
              }
          }
      if (!found)
        throw std::invalid_argument("topology: no backbone grid reaches coverage and diameter " +
                                    std::to_string(spec.diameter) + " with range " + std::to_string(range) + " m");
    }

  if (spec.controller)
    {
      if (*spec.controller >= nb)
        throw std::invalid_argument("topology.controller: must be a backbone id");
      t.controller = *spec.controller;
    }
  else
    t.controller = central_node(spec.area, t.backbone);
  return t;
}

std::vector<Position>
place_clients(const Area& area, std::size_t count, std::uint64_t seed)
{
  RngStream rng(seed, "topology.clients", 0);
  std::vector<Position> out;
  for (std::size_t i = 0; i < count; ++i)
    {
      const double x = rng.uniform(0.0, area.width);
      const double y = rng.uniform(0.0, area.height);
      out.push_back(Position{x, y});
    }
  return out;
}

} // namespace meshsim
