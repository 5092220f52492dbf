// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero when any fails.

#include "meshsim/batman.hpp"
#include "meshsim/olsr.hpp"
#include "meshsim/sdn.hpp"
#include "meshsim/simulation.hpp"

#include "../support/oracles.hpp"
#include "../support/static_net.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

using namespace meshsim;

namespace {

const std::filesystem::path kScenarios = MESHSIM_SCENARIO_DIR;

struct Verdict
{
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what)
  {
    if (!ok)
      {
        pass = false;
        detail += (detail.empty() ? "" : "; ") + std::string("not met: ") + what;
      }
  }
  void note(const std::string& text) { detail += (detail.empty() ? "" : "; ") + text; }
};

std::string
fmt(double v, int digits = 3)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string
fmt(const CiResult& ci, int digits = 3)
{
  return fmt(ci.mean, digits) + " [" + fmt(ci.lower(), digits) + ", " + fmt(ci.upper(), digits) + "]";
}

unsigned
jobs()
{
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs (and caches) a scenario for all three protocols.
class Runs
{
public:
  const std::vector<RunResult>& get(const std::string& file, std::size_t replications = 30)
  {
    const auto key = file + "/" + std::to_string(replications);
    auto it = m_cache.find(key);
    if (it != m_cache.end())
      return it->second;
    auto cfg = load_scenario(kScenarios / file);
    cfg.replications = replications;
    cfg.protocols = {ProtocolKind::Olsr, ProtocolKind::Batman, ProtocolKind::Sdn};
    ExperimentOptions opts;
    opts.jobs = jobs();
    const auto t0 = std::chrono::steady_clock::now();
    auto runs = run_experiment(cfg, opts);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "  ran " << file << ": " << runs.size() << " runs in " << fmt(wall, 1) << " s\n";
    return m_cache.emplace(key, std::move(runs)).first->second;
  }

private:
  std::map<std::string, std::vector<RunResult>> m_cache;
};

std::vector<const RunResult*>
of(const std::vector<RunResult>& runs, ProtocolKind p)
{
  std::vector<const RunResult*> out;
  for (const auto& r : runs)
    if (r.protocol == p)
      out.push_back(&r);
  return out;
}

template <typename F>
std::vector<double>
values(const std::vector<RunResult>& runs, ProtocolKind p, F field)
{
  std::vector<double> out;
  for (const auto* r : of(runs, p))
    if (r->summary)
      if (auto v = field(*r->summary))
        out.push_back(*v);
  return out;
}

std::optional<double>
loss(const RunSummary& s)
{
  return s.loss_pct;
}
std::optional<double>
control(const RunSummary& s)
{
  return s.control_kbps;
}
std::optional<double>
slowpath(const RunSummary& s)
{
  return s.slowpath_ms;
}
std::optional<double>
fastpath(const RunSummary& s)
{
  return s.fastpath_ms;
}

constexpr ProtocolKind kAll[] = {ProtocolKind::Olsr, ProtocolKind::Batman, ProtocolKind::Sdn};

std::string
name(ProtocolKind p)
{
  return std::string(to_string(p));
}

std::size_t
unconverged(const std::vector<RunResult>& runs)
{
  std::size_t n = 0;
  for (const auto& r : runs)
    n += !r.converged;
  return n;
}

// 1
Verdict
static_baseline(Runs& runs)
{
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t total = 0;
  for (const char* file : {"t1_static.ini", "t2_static.ini", "t3_static.ini"})
    for (const auto& r : runs.get(file, 5))
      {
        ++total;
        const auto label = std::string(file) + " " + name(r.protocol) + " seed " + std::to_string(r.seed);
        v.require(r.converged, label + " converged");
        if (!r.summary)
          continue;
        v.require(r.summary->loss_pct == 0.0, label + " loss " + fmt(r.summary->loss_pct.value_or(-1)));
      }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.require(total == 45, "45 runs");
  v.require(wall < 300.0, "runtime under 5 min");
  v.note(std::to_string(total) + " runs, all 0% loss, " + fmt(wall, 1) + " s");
  return v;
}

// 2
Verdict
loss_ordering(Runs& runs)
{
  Verdict v;
  const auto& r = runs.get("t3_rwp_cbr.ini");
  v.require(unconverged(r) == 0, "all runs converged");
  const auto olsr = confidence_interval(values(r, ProtocolKind::Olsr, loss));
  const auto bat = confidence_interval(values(r, ProtocolKind::Batman, loss));
  const auto sdn = confidence_interval(values(r, ProtocolKind::Sdn, loss));
  v.require(sdn.mean < bat.mean && bat.mean < olsr.mean, "sdn < batman < olsr");
  v.require(!intervals_overlap(sdn, olsr), "sdn and olsr intervals disjoint");
  v.require(sdn.mean < 3.0, "sdn mean < 3%");
  v.note("loss % olsr " + fmt(olsr) + ", batman " + fmt(bat) + ", sdn " + fmt(sdn));
  return v;
}

Verdict
insensitivity(Runs& runs, const char* a_file, const char* b_file, const char* what)
{
  Verdict v;
  const auto& a = runs.get(a_file);
  const auto& b = runs.get(b_file);
  v.require(unconverged(a) + unconverged(b) == 0, "all runs converged");
  for (auto p : kAll)
    {
      const auto ma = confidence_interval(values(a, p, loss)).mean;
      const auto mb = confidence_interval(values(b, p, loss)).mean;
      v.require(std::abs(ma - mb) <= 3.0, name(p) + " difference <= 3 points");
      v.note(name(p) + " " + fmt(ma, 2) + " vs " + fmt(mb, 2) + " " + what);
    }
  return v;
}

// 5
Verdict
rtt_ordering(Runs& runs)
{
  Verdict v;
  const auto& r = runs.get("t2_rwp_cbr.ini");
  std::map<ProtocolKind, CiResult> slow, fast;
  for (auto p : kAll)
    {
      slow[p] = confidence_interval(values(r, p, slowpath));
      fast[p] = confidence_interval(values(r, p, fastpath));
    }
  const auto& so = slow[ProtocolKind::Olsr];
  const auto& ss = slow[ProtocolKind::Sdn];
  const auto& sb = slow[ProtocolKind::Batman];
  v.require(so.mean < ss.mean && ss.mean < sb.mean, "slowpath olsr < sdn < batman");
  v.require(so.mean < 5.0, "olsr slowpath < 5 ms");
  v.require(sb.mean / ss.mean >= 2.0, "batman/sdn slowpath ratio >= 2");
  for (auto a : kAll)
    for (auto b : kAll)
      if (a < b)
        v.require(intervals_overlap(fast[a], fast[b]), "fastpath intervals of " + name(a) + " and " + name(b) +
                                                           " overlap");
  v.note("slowpath ms olsr " + fmt(so) + ", sdn " + fmt(ss) + ", batman " + fmt(sb) + ", ratio " +
         fmt(sb.mean / ss.mean, 2));
  v.note("fastpath ms olsr " + fmt(fast[ProtocolKind::Olsr], 4) + ", batman " + fmt(fast[ProtocolKind::Batman], 4) +
         ", sdn " + fmt(fast[ProtocolKind::Sdn], 4));
  return v;
}

// 6
Verdict
overhead_ordering(Runs& runs)
{
  Verdict v;
  const auto& r = runs.get("t2_rwp_cbr.ini");
  const auto olsr = confidence_interval(values(r, ProtocolKind::Olsr, control));
  const auto bat = confidence_interval(values(r, ProtocolKind::Batman, control));
  const auto sdn = confidence_interval(values(r, ProtocolKind::Sdn, control));
  v.require(olsr.mean < sdn.mean, "olsr < sdn");
  v.require(sdn.mean < bat.mean, "sdn < batman");
  v.require(!intervals_overlap(olsr, bat), "olsr and batman intervals disjoint");
  v.note("kb/s olsr " + fmt(olsr, 1) + ", sdn " + fmt(sdn, 1) + ", batman " + fmt(bat, 1));
  return v;
}

// 7
Verdict
arp_containment(Runs& runs)
{
  Verdict v;
  std::size_t sdn_runs = 0, bat_runs = 0;
  std::uint64_t bat_min = ~0ull;
  for (const char* file : {"t2_rwp_cbr.ini", "t2_rpgm_cbr.ini", "t2_rwp_vbr.ini", "t3_rwp_cbr.ini"})
    for (const auto& r : runs.get(file))
      {
        if (!r.converged)
          continue;
        if (r.protocol == ProtocolKind::Sdn)
          {
            ++sdn_runs;
            v.require(r.arp_broadcasts == 0, std::string(file) + " sdn seed " + std::to_string(r.seed) + " broadcast ARP");
          }
        if (r.protocol == ProtocolKind::Batman)
          {
            ++bat_runs;
            bat_min = std::min(bat_min, r.arp_broadcasts);
            v.require(r.arp_broadcasts > 0, std::string(file) + " batman seed " + std::to_string(r.seed) + " no ARP");
          }
      }
  v.note(std::to_string(sdn_runs) + " sdn runs with 0 broadcast ARP, " + std::to_string(bat_runs) +
         " batman runs with >= " + std::to_string(bat_min));
  return v;
}

// 8
Verdict
handoff()
{
  Verdict v;
  const auto cfg = load_scenario(kScenarios / "handoff.ini");
  const auto sdn = run_single(cfg, ProtocolKind::Sdn, cfg.base_seed);
  const auto off = run_single(cfg, ProtocolKind::SdnNoMobility, cfg.base_seed);
  v.require(sdn.converged && off.converged, "both runs converged");
  if (!sdn.converged || !off.converged)
    return v;

  auto lost = [](const RunResult& r) {
    std::size_t n = 0;
    double first = 1e18, last = -1;
    for (const auto& p : r.log.packets)
      if (p.flow_id == 1 && p.outcome == Outcome::Dropped)
        {
          ++n;
          first = std::min(first, p.sent_at);
          last = std::max(last, p.sent_at);
        }
    return std::tuple{n, n ? last - first : 0.0};
  };
  double install = 0.0;
  if (!sdn.reroutes.empty() && sdn.reroutes.front().installed_at)
    install = sdn.reroutes.front().installed_at->seconds() - sdn.reroutes.front().detected_at.seconds();
  else
    v.require(false, "sdn repaired the flow");
  const auto [sdn_lost, sdn_span] = lost(sdn);
  const auto [off_lost, off_span] = lost(off);
  const double bound = cfg.traffic.rate * (cfg.sdn.staleness_intervals * cfg.sdn.report_interval + install);
  v.require(static_cast<double>(sdn_lost) <= bound, "sdn loss within bound");
  v.require(off_span >= 30.0, "ablation outage >= 30 s");
  v.note("sdn lost " + std::to_string(sdn_lost) + " (bound " + fmt(bound, 1) + ", install " + fmt(install * 1000, 1) +
         " ms); ablation lost " + std::to_string(off_lost) + " over " + fmt(off_span, 2) + " s");
  return v;
}

// 9
Verdict
oracles()
{
  Verdict v;
  RngStream rng(2024, "acceptance.oracles");

  std::size_t mpr_ok = 0, instances = 0;
  while (instances < 200)
    {
      const auto pos = oracle::random_connected(20, 500, 150, rng);
      const auto m = oracle::unit_disk(pos, 150);
      for (NodeId self = 0; self < 20 && instances < 200; ++self)
        {
          std::set<NodeId> one;
          for (NodeId u = 0; u < 20; ++u)
            if (m[self][u])
              one.insert(u);
          if (one.empty() || one.size() > 8)
            continue;
          std::map<NodeId, std::set<NodeId>> two;
          std::set<std::uint32_t> strict;
          for (NodeId nb : one)
            for (NodeId w = 0; w < 20; ++w)
              if (m[nb][w])
                {
                  two[nb].insert(w);
                  if (w != self && !one.contains(w))
                    strict.insert(w);
                }
          if (strict.empty())
            continue;
          ++instances;
          const auto mprs = select_mprs(self, one, two);
          bool ok = true;
          for (NodeId w : strict)
            {
              bool covered = false;
              for (NodeId x : mprs)
                covered = covered || (one.contains(x) && m[x][w]);
              ok = ok && covered;
            }
          std::vector<std::set<std::uint32_t>> cand;
          for (NodeId nb : one)
            cand.emplace_back(two[nb].begin(), two[nb].end());
          ok = ok && mprs.size() <= oracle::min_cover(cand, strict) + 1;
          mpr_ok += ok;
        }
    }
  v.require(mpr_ok == 200, "mpr cover " + std::to_string(mpr_ok) + "/200");

  std::size_t olsr_ok = 0, sdn_ok = 0;
  for (int g = 0; g < 200; ++g)
    {
      const auto n = static_cast<std::size_t>(rng.uniform_int(2, 12));
      const auto m = oracle::random_graph(n, 0.3, rng);
      Adjacency adj;
      std::vector<NodeRole> roles(n, NodeRole::Backbone);
      NetworkGraph graph(roles);
      for (NodeId a = 0; a < n; ++a)
        for (NodeId b = 0; b < n; ++b)
          if (m[a][b])
            {
              adj[a].insert(b);
              if (a < b)
                graph.add_edge(a, b);
            }
      bool o = true, s = true;
      for (NodeId a = 0; a < n; ++a)
        {
          const auto dist = oracle::bfs(m, a);
          const auto table = compute_routes(a, adj);
          for (NodeId b = 0; b < n; ++b)
            {
              if (a == b)
                continue;
              auto it = table.find(b);
              o = o && it != table.end() && static_cast<int>(it->second.hops) == dist[b];
              auto p = compute_path_hc(graph, a, b);
              s = s && p && static_cast<int>(p->size()) == dist[b] + 1;
            }
        }
      olsr_ok += o;
      sdn_ok += s;
    }
  v.require(olsr_ok == 200, "olsr bfs " + std::to_string(olsr_ok) + "/200");
  v.require(sdn_ok == 200, "sdn bfs " + std::to_string(sdn_ok) + "/200");

  std::size_t walks_ok = 0;
  for (int trial = 0; trial < 50; ++trial)
    {
      const auto n = static_cast<std::size_t>(rng.uniform_int(4, 12));
      const auto pos = oracle::random_connected(n, 350, 150, rng);
      const auto m = oracle::unit_disk(pos, 150);
      testnet::StaticNet net(pos, std::vector<NodeRole>(n, NodeRole::Backbone), 0, 150, 900 + trial);
      BatmanConfig bc;
      bc.forward_jitter = 0.0;
      BatmanProtocol p(net.ctx, bc);
      net.attach(p);
      p.start();
      net.sched.run_until(SimTime{10.0});
      bool ok = true;
      for (NodeId origin = 0; origin < n; ++origin)
        {
          const auto dist = oracle::bfs(m, origin);
          for (NodeId node = 0; node < n; ++node)
            {
              if (node == origin)
                continue;
              NodeId at = node;
              int steps = 0;
              while (at != origin && steps <= static_cast<int>(n))
                {
                  auto next = p.lookup_next_hop(at, origin);
                  if (!next || !m[at][*next])
                    break;
                  at = *next;
                  ++steps;
                }
              ok = ok && at == origin && steps == dist[node];
            }
        }
      walks_ok += ok;
    }
  v.require(walks_ok == 50, "batman walks " + std::to_string(walks_ok) + "/50");
  v.note("mpr " + std::to_string(mpr_ok) + "/200, olsr routes " + std::to_string(olsr_ok) + "/200, sdn paths " +
         std::to_string(sdn_ok) + "/200, batman walks " + std::to_string(walks_ok) + "/50");
  return v;
}

// 10
Verdict
statistics()
{
  Verdict v;
  const auto ci = confidence_interval({1, 2, 3});
  // t(0.975, 2) = 4.302653 from tables.
  const double want = 4.302653 * 1.0 / std::sqrt(3.0);
  v.require(ci.mean == 2.0, "mean 2");
  v.require(std::round(ci.half_width * 1e4) == std::round(want * 1e4), "half width to 4 decimals");
  RngStream rng(77, "acceptance.coverage");
  int covered = 0;
  for (int t = 0; t < 10000; ++t)
    {
      std::vector<double> s(30);
      for (auto& x : s)
        x = rng.normal(5.0, 2.0);
      const auto c = confidence_interval(s);
      covered += c.lower() <= 5.0 && 5.0 <= c.upper();
    }
  const double rate = covered / 10000.0;
  v.require(std::abs(rate - 0.95) <= 0.01, "coverage within 95 +- 1%");
  v.note("{1,2,3}: mean " + fmt(ci.mean, 4) + ", half width " + fmt(ci.half_width, 4) + "; coverage " +
         fmt(rate * 100, 2) + "%");
  return v;
}

std::string
slurp(const std::filesystem::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 11
Verdict
determinism()
{
  Verdict v;
  const auto base = std::filesystem::temp_directory_path() / "meshsim_acceptance_det";
  std::filesystem::remove_all(base);
  for (const char* proto : {"olsr", "batman", "sdn"})
    {
      std::string csv[2];
      for (int i = 0; i < 2; ++i)
        {
          const auto dir = base / (std::string(proto) + std::to_string(i));
          const std::string cmd = std::string("\"") + MESHSIM_CLI + "\" run \"" + (kScenarios / "t2_rwp_cbr.ini").string() +
                                  "\" --seed 11 --replications 2 --protocol " + proto + " --out-dir \"" + dir.string() +
                                  "\" 2>/dev/null";
          v.require(std::system(cmd.c_str()) == 0, std::string(proto) + " run " + std::to_string(i) + " exit status");
          csv[i] = slurp(dir / "results.csv");
        }
      v.require(!csv[0].empty() && csv[0] == csv[1], std::string(proto) + " results identical");
    }
  std::filesystem::remove_all(base);
  v.note("t2_rwp_cbr seeds 11-12, byte-identical results.csv per protocol over two executions");
  return v;
}

} // namespace

int
main()
{
  Runs runs;
  int failed = 0;
  auto report = [&](int n, const char* title, const Verdict& v) {
    std::cout << "criterion " << n << " " << (v.pass ? "PASS" : "FAIL") << " " << title << ": " << v.detail << "\n"
              << std::flush;
    failed += !v.pass;
  };
  auto guarded = [&](int n, const char* title, auto&& fn) {
    try
      {
        report(n, title, fn());
      }
    catch (const std::exception& e)
      {
        Verdict v;
        v.require(false, std::string("exception ") + e.what());
        report(n, title, v);
      }
  };
  guarded(1, "static zero loss", [&] { return static_baseline(runs); });
  guarded(2, "loss ordering T3", [&] { return loss_ordering(runs); });
  guarded(3, "mobility model insensitivity T2", [&] {
    return insensitivity(runs, "t2_rwp_cbr.ini", "t2_rpgm_cbr.ini", "(rwp vs rpgm)");
  });
  guarded(4, "traffic model insensitivity T2", [&] {
    return insensitivity(runs, "t2_rwp_cbr.ini", "t2_rwp_vbr.ini", "(cbr vs vbr)");
  });
  guarded(5, "slowpath and fastpath T2", [&] { return rtt_ordering(runs); });
  guarded(6, "control overhead ordering T2", [&] { return overhead_ordering(runs); });
  guarded(7, "ARP containment", [&] { return arp_containment(runs); });
  guarded(8, "handoff repair", [&] { return handoff(); });
  guarded(9, "oracle equivalence", [&] { return oracles(); });
  guarded(10, "confidence intervals", [&] { return statistics(); });
  guarded(11, "determinism", [&] { return determinism(); });
  std::cout << (11 - failed) << "/11 criteria passed\n";
  return failed == 0 ? 0 : 1;
}
