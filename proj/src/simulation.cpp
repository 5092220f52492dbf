#include "meshsim/simulation.hpp"

#include "meshsim/batman.hpp"
#include "meshsim/olsr.hpp"
#include "meshsim/sdn.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace meshsim {

ClientMotion
client_motion(const ScenarioConfig& config, const Topology& topology, std::uint64_t seed)
{
  ClientMotion m;
  switch (config.mobility_mode)
    {
    case MobilityMode::Static: m.fixed = place_clients(topology.area, topology.clients, seed); break;
    case MobilityMode::Rwp:
    case MobilityMode::Rpgm:
      {
        MobilityConfig mc = config.mobility;
        mc.area = topology.area;
        mc.model =
          config.mobility_mode == MobilityMode::Rpgm ? MobilityModel::ReferencePointGroup : MobilityModel::RandomWaypoint;
        m.trace = generate_trace(mc, topology.clients, config.timing.mobility, seed);
        break;
      }
    case MobilityMode::Trace: m.trace = config.trace; break;
    }
  return m;
}

namespace {

class Simulation
{
public:
  Simulation(const ScenarioConfig& config, const Topology& topology, ProtocolKind kind, std::uint64_t seed)
    : m_config(config),
      m_topology(topology),
      m_seed(seed),
      m_motion(client_motion(config, topology, seed)),
      m_medium(m_scheduler, config.radio, topology.node_count(),
               [this](NodeId n, SimTime t) { return position(n, t); }),
      m_ctx{m_scheduler, m_medium, topology.roles(), topology.controller, seed, {}, {}}
  {
    m_ctx.on_deliver = [this](NodeId at, const DataPacket& p) { on_deliver(at, p); };
    m_ctx.on_drop = [this](NodeId at, const DataPacket& p, DropReason r) { on_drop(at, p, r); };
    switch (kind)
      {
      case ProtocolKind::Olsr: m_protocol = std::make_unique<OlsrProtocol>(m_ctx, config.olsr); break;
      case ProtocolKind::Batman: m_protocol = std::make_unique<BatmanProtocol>(m_ctx, config.batman); break;
      case ProtocolKind::Sdn:
      case ProtocolKind::SdnNoMobility:
        {
          SdnConfig sc = config.sdn;
          sc.mobility_extension = kind == ProtocolKind::Sdn;
          auto sdn = std::make_unique<SdnProtocol>(m_ctx, sc);
          m_sdn = sdn.get();
          m_protocol = std::move(sdn);
          break;
        }
      }
    m_medium.set_receiver([this](NodeId at, const Frame& f) { m_protocol->receive(at, f); });
    m_medium.set_transmit_hook([this](const Frame& f, SimTime t) { on_transmit(f, t); });
    m_result.protocol = kind;
    m_result.seed = seed;
    m_result.log.protocol = std::string(to_string(kind));
    m_result.log.topology = topology.name;
    m_result.log.mobility = config.mobility_label();
    m_result.log.traffic = config.traffic_label();
    m_result.log.seed = seed;
  }

  RunResult run()
  {
    const auto& timing = m_config.timing;
    m_protocol->start();

    std::string last;
    int stable = 0;
    std::optional<double> converged;
    for (int k = 1;; ++k)
      {
        const double t = k * timing.convergence_check;
        if (t > timing.convergence_cap + 1e-9)
          break;
        m_scheduler.run_until(SimTime{t});
        auto state = m_protocol->convergence_state();
        if (state.complete && state.signature == last)
          ++stable;
        else
          stable = state.complete ? 1 : 0;
        last = std::move(state.signature);
        if (stable >= m_protocol->stable_checks_required())
          {
            converged = t;
            break;
          }
      }
    m_result.events = m_scheduler.dispatched();
    if (!converged)
      return std::move(m_result);

    m_result.converged = true;
    m_result.converged_at = *converged;
    m_mobility_start = *converged + timing.monotone;
    m_result.mobility_start = m_mobility_start;
    m_result.end = m_mobility_start + timing.mobility;
    m_result.log.window_start = *converged;
    m_result.log.window_end = m_mobility_start;

    start_probes();
    start_flows();
    m_scheduler.run_until(SimTime{m_result.end});

    for (auto& flow : m_packets)
      m_result.log.packets.insert(m_result.log.packets.end(), flow.begin(), flow.end());
    m_result.log.probes = m_probe_rtts;
    m_result.counts = count_outcomes(m_result.log.packets);
    m_result.summary = summarize(m_result.log);
    m_result.events = m_scheduler.dispatched();
    if (m_sdn)
      m_result.reroutes = m_sdn->reroutes();
    return std::move(m_result);
  }

private:
  Position position(NodeId n, SimTime t) const
  {
    const auto nb = m_topology.backbone.size();
    if (n < nb)
      return m_topology.backbone[n];
    const auto c = n - nb;
    if (!m_motion.trace)
      return m_motion.fixed.at(c);
    // clients hold their initial trace position until mobility starts
    double rel = std::max(0.0, t.seconds() - m_mobility_start);
    rel = std::clamp(rel, m_motion.trace->start_time(c), m_motion.trace->end_time(c));
    return m_motion.trace->position_at(c, rel);
  }

  void on_transmit(const Frame& f, SimTime t)
  {
    if (f.kind == FrameKind::ArpRequest && f.dst == kBroadcast)
      ++m_result.arp_broadcasts;
    if (!is_control(f.kind))
      return;
    // only the overhead window is persisted
    if (m_result.converged && t.seconds() >= m_result.log.window_start && t.seconds() < m_result.log.window_end)
      m_result.log.control.push_back(TransmissionRecord{t.seconds(), f.kind, f.src, f.dst, f.size});
  }

  void start_flows()
  {
    const auto clients = m_topology.client_ids();
    const auto flows = spawn_flows(m_topology.controller, clients, m_mobility_start, m_result.end);
    m_packets.resize(flows.size() + 1);
    for (const auto& f : flows)
      {
        auto sched = std::make_shared<FlowSchedule>(m_config.traffic, f, RngStream(m_seed, "traffic.flow", f.flow_id));
        emit_next(sched, f);
      }
  }

  void emit_next(const std::shared_ptr<FlowSchedule>& sched, const FlowSpec& f)
  {
    double at = 0;
    std::uint32_t size = 0;
    if (!sched->next(at, size))
      return;
    m_scheduler.schedule(SimTime{at}, EventKind::TrafficDeparture, f.src, [this, sched, f, size] {
      const auto seq = sched->emitted() - 1;
      DataPacket p{f.flow_id, seq, f.src, f.dst, size, m_scheduler.now(), false, false, 64};
      auto& records = m_packets[f.flow_id];
      records.push_back(PacketRecord{f.flow_id, seq, p.sent_at.seconds(), size});
      m_protocol->send(f.src, p);
      emit_next(sched, f);
    });
  }

  void start_probes()
  {
    const auto& probe = m_config.probe;
    if (!probe.enabled || m_topology.clients == 0)
      return;
    RngStream pick(m_seed, "probe.target", 0);
    const auto clients = m_topology.client_ids();
    m_probe_target = clients[static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(clients.size()) - 1))];
    m_probe_rtts.assign(probe.count, std::nullopt);
    for (std::uint32_t i = 0; i < probe.count; ++i)
      {
        const double at = m_mobility_start + i * probe.interval;
        if (at >= m_result.end)
          break;
        m_scheduler.schedule(SimTime{at}, EventKind::TrafficDeparture, m_topology.controller, [this, i] {
          DataPacket p{0, i, m_topology.controller, m_probe_target, m_config.probe.size, m_scheduler.now(), true, false, 64};
          m_protocol->send(m_topology.controller, p);
        });
      }
  }

  void on_deliver(NodeId at, const DataPacket& p)
  {
    if (p.probe)
      {
        if (!p.response && at == m_probe_target)
          {
            DataPacket reply = p;
            reply.src = at;
            reply.dst = p.src;
            reply.response = true;
            reply.ttl = 64;
            m_protocol->send(at, reply);
          }
        else if (p.response && at == m_topology.controller && p.sequence < m_probe_rtts.size())
          {
            const double rtt = m_scheduler.now() - p.sent_at;
            if (rtt <= m_config.probe.timeout && !m_probe_rtts[p.sequence])
              m_probe_rtts[p.sequence] = rtt;
          }
        return;
      }
    auto& rec = record(p);
    if (at != p.dst)
      throw std::logic_error("data packet delivered at the wrong node");
    rec.outcome = Outcome::Delivered;
    rec.at = m_scheduler.now().seconds();
  }

  void on_drop(NodeId, const DataPacket& p, DropReason reason)
  {
    if (p.probe)
      return;
    auto& rec = record(p);
    rec.outcome = Outcome::Dropped;
    rec.at = m_scheduler.now().seconds();
    rec.reason = reason;
  }

  PacketRecord& record(const DataPacket& p)
  {
    auto& rec = m_packets.at(p.flow_id).at(p.sequence);
    if (rec.outcome != Outcome::InFlight)
      throw std::logic_error("packet " + std::to_string(p.flow_id) + "/" + std::to_string(p.sequence) +
                             " has two outcomes");
    return rec;
  }

  const ScenarioConfig& m_config;
  const Topology& m_topology;
  std::uint64_t m_seed;
  ClientMotion m_motion;
  double m_mobility_start = std::numeric_limits<double>::infinity();
  Scheduler m_scheduler;
  Medium m_medium;
  NetworkContext m_ctx;
  std::unique_ptr<RoutingProtocol> m_protocol;
  SdnProtocol* m_sdn = nullptr;
  RunResult m_result;
  std::vector<std::vector<PacketRecord>> m_packets;
  NodeId m_probe_target = 0;
  std::vector<std::optional<double>> m_probe_rtts;
};

} // namespace

RunResult
run_single(const ScenarioConfig& config, const Topology& topology, ProtocolKind protocol, std::uint64_t seed)
{
  Simulation sim(config, topology, protocol, seed);
  return sim.run();
}

RunResult
run_single(const ScenarioConfig& config, ProtocolKind protocol, std::uint64_t seed)
{
  config.validate();
  const auto topology = build_topology(config.topology, config.radio_range());
  return run_single(config, topology, protocol, seed);
}

std::string
format_result_row(const RunSummary& s)
{
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::ostringstream out;
  out << s.protocol << ',' << s.topology << ',' << s.mobility << ',' << s.traffic << ',' << s.seed << ','
      << opt(s.loss_pct) << ',' << format_double(s.control_kbps) << ',' << opt(s.slowpath_ms) << ','
      << opt(s.fastpath_ms);
  return out.str();
}

std::string
event_log_name(const RunSummary& s)
{
  return s.protocol + "_" + s.topology + "_" + s.mobility + "_" + s.traffic + "_seed" + std::to_string(s.seed) +
         ".log";
}

std::vector<RunResult>
run_experiment(const ScenarioConfig& config, const ExperimentOptions& options)
{
  config.validate();
  const auto topology = build_topology(config.topology, config.radio_range());
  struct Job
  {
    ProtocolKind protocol;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto p : config.protocols)
    for (std::size_t r = 0; r < config.replications; ++r)
      jobs.push_back({p, config.base_seed + r});

  if (!options.event_dir.empty())
    std::filesystem::create_directories(options.event_dir);

  std::vector<RunResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
      {
        try
          {
            auto r = run_single(config, topology, jobs[i].protocol, jobs[i].seed);
            if (!options.event_dir.empty() && r.summary)
              {
                std::ofstream f(options.event_dir / event_log_name(*r.summary));
                write_run_log(f, r.log);
              }
            if (!options.keep_logs)
              r.log = RunLog{r.log.protocol, r.log.topology, r.log.mobility, r.log.traffic, r.log.seed,
                             r.log.window_start, r.log.window_end, {}, {}, {}};
            results[i] = std::move(r);
          }
        catch (...)
          {
            std::lock_guard lock(error_mutex);
            if (!error)
              error = std::current_exception();
          }
      }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < n; ++t)
    threads.emplace_back(worker);
  worker();
  for (auto& t : threads)
    t.join();
  if (error)
    std::rethrow_exception(error);
  return results;
}

std::string
format_aggregate(const std::vector<RunSummary>& rows)
{
  struct Samples
  {
    std::vector<double> loss, control, slow, fast;
  };
  std::vector<std::string> order;
  std::map<std::string, Samples> groups;
  for (const auto& s : rows)
    {
      const auto key = s.protocol + ',' + s.topology + ',' + s.mobility + ',' + s.traffic;
      if (!groups.contains(key))
        order.push_back(key);
      auto& g = groups[key];
      if (s.loss_pct)
        g.loss.push_back(*s.loss_pct);
      g.control.push_back(s.control_kbps);
      if (s.slowpath_ms)
        g.slow.push_back(*s.slowpath_ms);
      if (s.fastpath_ms)
        g.fast.push_back(*s.fastpath_ms);
    }
  std::ostringstream out;
  out << "protocol,topology,mobility,traffic,metric,n,mean,half_width,lower,upper\n";
  auto emit = [&](const std::string& key, const char* metric, const std::vector<double>& v) {
    out << key << ',' << metric << ',' << v.size() << ',';
    if (v.empty())
      {
        out << ",,,\n";
        return;
      }
    if (v.size() < 2)
      {
        out << format_double(v[0]) << ",,,\n";
        return;
      }
    auto ci = confidence_interval(v);
    out << format_double(ci.mean) << ',' << format_double(ci.half_width) << ',' << format_double(ci.lower()) << ','
        << format_double(ci.upper()) << '\n';
  };
  for (const auto& key : order)
    {
      const auto& g = groups[key];
      emit(key, "loss_pct", g.loss);
      emit(key, "control_kbps", g.control);
      emit(key, "slowpath_ms", g.slow);
      emit(key, "fastpath_ms", g.fast);
    }
  return out.str();
}

void
write_results(const std::filesystem::path& dir, const std::vector<RunResult>& runs)
{
  std::filesystem::create_directories(dir);
  std::vector<RunSummary> rows;
  std::ofstream results(dir / "results.csv");
  results << kResultsHeader << '\n';
  std::ofstream excluded(dir / "excluded.csv");
  excluded << "protocol,topology,mobility,traffic,seed,reason\n";
  for (const auto& r : runs)
    {
      if (r.summary)
        {
          results << format_result_row(*r.summary) << '\n';
          rows.push_back(*r.summary);
        }
      else
        excluded << r.log.protocol << ',' << r.log.topology << ',' << r.log.mobility << ',' << r.log.traffic << ','
                 << r.seed << ",not converged\n";
    }
  std::ofstream aggregate(dir / "aggregate.csv");
  aggregate << format_aggregate(rows);
}

std::vector<RunSummary>
read_results(const std::filesystem::path& csv)
{
  std::ifstream in(csv);
  if (!in)
    throw std::runtime_error("cannot open " + csv.string());
  std::string line;
  std::getline(in, line);
  if (line != kResultsHeader)
    throw std::runtime_error(csv.string() + ": unexpected header");
  std::vector<RunSummary> out;
  auto num = [&](const std::string& s) -> std::optional<double> {
    if (s.empty())
      return std::nullopt;
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw std::runtime_error(csv.string() + ": bad number '" + s + "'");
    return v;
  };
  while (std::getline(in, line))
    {
      if (line.empty())
        continue;
      std::vector<std::string> f;
      std::stringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');)
        f.push_back(cell);
      if (f.size() == 8 && line.back() == ',')
        f.emplace_back();
      if (f.size() != 9)
        throw std::runtime_error(csv.string() + ": expected 9 columns in '" + line + "'");
      RunSummary s;
      s.protocol = f[0];
      s.topology = f[1];
      s.mobility = f[2];
      s.traffic = f[3];
      s.seed = static_cast<std::uint64_t>(std::stoull(f[4]));
      s.loss_pct = num(f[5]);
      s.control_kbps = num(f[6]).value_or(0.0);
      s.slowpath_ms = num(f[7]);
      s.fastpath_ms = num(f[8]);
      out.push_back(std::move(s));
    }
  return out;
}

} // namespace meshsim
