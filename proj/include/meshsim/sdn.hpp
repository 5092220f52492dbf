#pragma once

#include "meshsim/network.hpp"

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

namespace meshsim {

using Path = std::vector<NodeId>;
using Edge = std::pair<NodeId, NodeId>;

inline Edge
make_edge(NodeId a, NodeId b)
{
  return a < b ? Edge{a, b} : Edge{b, a};
}

/// Controller view of the mesh: undirected adjacency with node roles.
class NetworkGraph
{
public:
  explicit NetworkGraph(std::vector<NodeRole> roles);

  std::size_t node_count() const { return m_roles.size(); }
  NodeRole role(NodeId n) const { return m_roles.at(n); }
  /// Only backbone nodes relay; clients are end hosts.
  bool can_transit(NodeId n) const { return role(n) == NodeRole::Backbone; }

  void add_edge(NodeId a, NodeId b, double signal_dbm = 0.0);
  bool remove_edge(NodeId a, NodeId b);
  bool has_edge(NodeId a, NodeId b) const { return m_edges.contains(make_edge(a, b)); }
  const std::set<NodeId>& neighbors(NodeId n) const { return m_adjacency.at(n); }
  const std::map<Edge, double>& edges() const { return m_edges; }
  bool known(NodeId n) const { return n < node_count() && !m_adjacency[n].empty(); }

private:
  std::vector<NodeRole> m_roles;
  std::vector<std::set<NodeId>> m_adjacency;
  std::map<Edge, double> m_edges;
};

/// Path computation used by the controller. Only hop count ships.
class PathStrategy
{
public:
  virtual ~PathStrategy() = default;
  virtual std::string_view name() const = 0;
  /// Returns nullopt when dst is unreachable from src.
  virtual std::optional<Path> compute(const NetworkGraph& graph, NodeId src, NodeId dst) const = 0;
};

/// Minimum hops through backbone relays; ties go to the lexicographically
/// smallest node sequence.
std::optional<Path> compute_path_hc(const NetworkGraph& graph, NodeId src, NodeId dst);

class HopCountStrategy : public PathStrategy
{
public:
  std::string_view name() const override { return "hc"; }
  std::optional<Path> compute(const NetworkGraph& graph, NodeId src, NodeId dst) const override
  {
    return compute_path_hc(graph, src, dst);
  }
};

struct SdnConfig
{
  double report_interval = 1.0;
  /// A node's reports stop counting after this many silent intervals.
  double staleness_intervals = 2.0;
  double controller_processing = 0.004;
  std::uint32_t report_base_bytes = 20;
  std::uint32_t report_neighbor_bytes = 10;
  std::uint32_t packet_in_bytes = 146;
  std::uint32_t flow_mod_bytes = 88;
  std::uint32_t arp_bytes = 42;
  double buffer_timeout = 3.0;
  double arp_retry = 1.0;
  int arp_attempts = 3;
  /// Mobility extension on: reroute on lost edges. Off: flows on a lost edge
  /// are torn down after `teardown_delay` and re-requested on the next packet.
  bool mobility_extension = true;
  double teardown_delay = 30.0;
  /// With the extension on, move active flows onto a strictly shorter path
  /// when one appears in the graph.
  bool reoptimize = true;

  void validate() const;
};

struct RerouteRecord
{
  SimTime detected_at;
  SimTime processed_at;
  /// When the last FLOW_MOD of the repair reached its switch.
  std::optional<SimTime> installed_at;
  Edge lost;
  std::size_t flows;
};

class SdnProtocol : public RoutingProtocol
{
public:
  SdnProtocol(NetworkContext& ctx, SdnConfig config, std::unique_ptr<PathStrategy> strategy = nullptr);

  std::string_view name() const override { return m_config.mobility_extension ? "sdn" : "sdn-no-mobility"; }
  void start() override;
  void receive(NodeId at, const Frame& frame) override;
  void send(NodeId at, const DataPacket& packet) override;
  ConvergenceState convergence_state() override;
  int stable_checks_required() const override { return 2; }

  const NetworkGraph& graph() const { return m_graph; }
  std::optional<NodeId> flow_next_hop(NodeId node, FlowMatch match) const;
  std::optional<NodeId> arp_binding(NodeId node, NodeId target) const;
  std::optional<Path> registered_path(FlowMatch match) const;
  /// Controller's current in-band path from the controller to `node`.
  std::optional<Path> control_path(NodeId node);
  const std::vector<RerouteRecord>& reroutes() const { return m_reroutes; }
  std::uint64_t packet_ins() const { return m_packet_ins; }
  /// Flows moved onto a shorter path.
  std::uint64_t moves() const { return m_moves; }

private:
  struct Buffered
  {
    DataPacket packet;
    std::uint64_t token;
  };
  struct PendingArp
  {
    int attempts = 0;
    EventId retry;
    std::vector<DataPacket> queued;
  };
  struct Switch
  {
    explicit Switch(RngStream rng) : jitter(std::move(rng)) {}
    std::map<FlowMatch, NodeId> flows;
    std::map<NodeId, NodeId> arp;
    std::map<NodeId, PendingArp> pending_arp;
    std::map<FlowMatch, std::deque<Buffered>> buffer;
    std::set<FlowMatch> packet_in_outstanding;
    RngStream jitter;
  };
  struct Flow
  {
    std::uint64_t id;
    FlowMatch match;
    Path path;
    bool suspended = false;
    std::optional<EventId> teardown;
    /// Bumped on every install so a staged move can tell it was overtaken.
    std::uint64_t generation = 0;
    bool moving = false;
  };
  /// FLOW_MODs whose arrival gates the next step.
  struct Batch
  {
    std::size_t sent = 0;
    std::size_t arrived = 0;
    bool closed = false;
    std::function<void()> done;
  };
  struct MovePlan
  {
    std::vector<std::vector<std::pair<NodeId, NodeId>>> stages;
    std::vector<std::pair<NodeId, NodeId>> removals;
    std::optional<ArpMessage> garp;
  };
  struct Report
  {
    std::set<NodeId> neighbors;
    std::map<NodeId, double> signal;
    SimTime at;
    bool received = false;
  };

  // Node side.
  void emit_report(NodeId node);
  void on_data(NodeId at, const DataPacket& packet);
  void switch_packet(NodeId at, const DataPacket& packet);
  void buffer_and_request(NodeId at, const DataPacket& packet);
  void release(NodeId at, FlowMatch match);
  void request_arp(NodeId at, NodeId target);
  void arp_timeout(NodeId at, NodeId target);
  void on_arp_binding(NodeId at, NodeId target, NodeId binding);
  void on_flow_mod(NodeId at, const FlowModMessage& mod);

  // Control transport: hop-by-hop over the controller's tree.
  void to_controller(NodeId at, Frame frame);
  void from_controller(NodeId target, Frame frame);
  void relay_control(NodeId at, const Frame& frame);
  void handle_at_target(NodeId at, const Frame& frame);
  std::optional<NodeId> next_control_hop(NodeId at, NodeId destination);

  // Controller side.
  void controller_receive(const Frame& frame);
  void enqueue_job(std::function<void()> job);
  void handle_packet_in(const PacketInRequest& req);
  void handle_arp_request(const ArpMessage& req);
  void update_graph();
  void housekeeping();
  void on_edge_lost(Edge edge);
  void reroute(Edge edge, SimTime detected_at);
  void install(Flow& flow, const Path& new_path, std::uint64_t batch);
  void send_flow_mod(NodeId target, FlowMatch match, NodeId next_hop, bool remove, std::uint64_t flow_id,
                     std::uint64_t batch);
  void send_garps(std::uint64_t batch);
  std::uint64_t open_batch();
  void close_batch(std::uint64_t batch, std::function<void()> done);
  void batch_arrival(std::uint64_t batch);
  void finish_batch(std::uint64_t batch);
  std::optional<Path> shorter_path(const Flow& flow) const;
  void reoptimize();
  void move_flow(Flow& flow, const Path& path);
  void run_stage(std::uint64_t flow_id, std::uint64_t generation, std::shared_ptr<const MovePlan> plan,
                 std::size_t stage);
  void teardown(std::uint64_t flow_id);
  void retry_suspended();
  bool fresh(NodeId node) const;

  SdnConfig m_config;
  std::unique_ptr<PathStrategy> m_strategy;
  std::vector<Switch> m_switches;

  NetworkGraph m_graph;
  std::vector<Report> m_reports;
  std::map<NodeId, Path> m_tree;
  bool m_tree_valid = false;
  std::map<std::uint64_t, Flow> m_flows;
  std::map<FlowMatch, std::uint64_t> m_flow_by_match;
  std::uint64_t m_next_flow = 1;
  SimTime m_busy_until{0.0};
  std::uint64_t m_next_token = 1;
  std::uint64_t m_packet_ins = 0;
  std::vector<RerouteRecord> m_reroutes;
  std::map<std::uint64_t, Batch> m_batches;
  std::uint64_t m_next_batch = 1;
  bool m_reoptimize_queued = false;
  std::uint64_t m_moves = 0;
  std::map<std::uint64_t, std::vector<ArpMessage>> m_batch_garps;
};

} // namespace meshsim
