#include "meshsim/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace meshsim {

std::string_view
to_string(ProtocolKind kind)
{
  switch (kind)
    {
    case ProtocolKind::Olsr: return "olsr";
    case ProtocolKind::Batman: return "batman";
    case ProtocolKind::Sdn: return "sdn";
    case ProtocolKind::SdnNoMobility: return "sdn-no-mobility";
    }
  return "unknown";
}

ProtocolKind
parse_protocol(const std::string& text)
{
  for (auto k : {ProtocolKind::Olsr, ProtocolKind::Batman, ProtocolKind::Sdn, ProtocolKind::SdnNoMobility})
    if (text == to_string(k))
      return k;
  throw ConfigError("scenario.protocols: unknown protocol '" + text + "'");
}

std::string_view
to_string(MobilityMode mode)
{
  switch (mode)
    {
    case MobilityMode::Static: return "static";
    case MobilityMode::Rwp: return "rwp";
    case MobilityMode::Rpgm: return "rpgm";
    case MobilityMode::Trace: return "trace";
    }
  return "unknown";
}

void
TimingConfig::validate() const
{
  if (!(monotone > 0))
    throw ConfigError("timing.monotone: must be > 0");
  if (!(mobility > 0))
    throw ConfigError("timing.mobility: must be > 0");
  if (!(convergence_check > 0))
    throw ConfigError("timing.convergence_check: must be > 0");
  if (!(convergence_cap >= convergence_check))
    throw ConfigError("timing.convergence_cap: must be >= timing.convergence_check");
}

void
ScenarioConfig::validate() const
{
  if (protocols.empty())
    throw ConfigError("scenario.protocols: empty");
  if (replications == 0)
    throw ConfigError("scenario.replications: must be >= 1");
  // component validators throw invalid_argument with the field name already in the message
  try
    {
      radio.validate();
      mobility.validate();
      traffic.validate();
      probe.validate();
      olsr.validate();
      batman.validate();
      sdn.validate();
    }
  catch (const std::invalid_argument& e)
    {
      throw ConfigError(e.what());
    }
  timing.validate();
  if (topology.nodes < 2)
    throw ConfigError("topology.nodes: need at least 2");
  if (mobility_mode == MobilityMode::Trace)
    {
      if (!trace)
        throw ConfigError("mobility.trace_file: required when mobility.model = trace");
      const auto clients = topology.nodes - backbone_count(topology.nodes);
      if (trace->node_count() != clients)
        throw ConfigError("mobility.trace_file: has " + std::to_string(trace->node_count()) + " tracks, expected " +
                          std::to_string(clients));
    }
}

std::string
ScenarioConfig::mobility_label() const
{
  return std::string(to_string(mobility_mode));
}

std::string
ScenarioConfig::traffic_label() const
{
  return traffic.model == TrafficModel::Cbr ? "cbr" : "vbr";
}

double
ScenarioConfig::radio_range() const
{
  return radio.range_override_m ? *radio.range_override_m : fspl_max_range(radio);
}

namespace {

namespace pt = boost::property_tree;

class Reader
{
public:
  explicit Reader(const pt::ptree& tree) : m_tree(tree) {}

  std::optional<std::string> raw(const std::string& key)
  {
    m_used.insert(key);
    auto v = m_tree.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!v)
      return std::nullopt;
    auto s = *v;
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    return s;
  }

  void number(const std::string& key, double& out)
  {
    if (auto s = raw(key))
      out = parse_double(key, *s);
  }

  template <typename T>
  void integer(const std::string& key, T& out)
  {
    if (auto s = raw(key))
      {
        long long v = 0;
        auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
        if (ec != std::errc{} || ptr != s->data() + s->size() || v < 0)
          throw ConfigError(key + ": expected a non-negative integer, got '" + *s + "'");
        if (static_cast<unsigned long long>(v) > static_cast<unsigned long long>(std::numeric_limits<T>::max()))
          throw ConfigError(key + ": value " + *s + " out of range");
        out = static_cast<T>(v);
      }
  }

  void boolean(const std::string& key, bool& out)
  {
    if (auto s = raw(key))
      {
        if (*s == "true" || *s == "1" || *s == "yes")
          out = true;
        else if (*s == "false" || *s == "0" || *s == "no")
          out = false;
        else
          throw ConfigError(key + ": expected true or false, got '" + *s + "'");
      }
  }

  static double parse_double(const std::string& key, const std::string& s)
  {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw ConfigError(key + ": expected a number, got '" + s + "'");
    return v;
  }

  void reject_unknown() const
  {
    for (const auto& [section, body] : m_tree)
      {
        if (body.empty())
          throw ConfigError(section + ": key outside any section");
        for (const auto& [key, value] : body)
          {
            const auto full = section + "." + key;
            if (!m_used.contains(full))
              throw ConfigError(full + ": unknown key");
          }
      }
  }

private:
  const pt::ptree& m_tree;
  std::set<std::string> m_used;
};

std::vector<std::string>
split(const std::string& text, char sep)
{
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, sep);)
    {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if (!item.empty())
        out.push_back(item);
    }
  return out;
}

} // namespace

ScenarioConfig
parse_scenario(std::istream& in, const std::filesystem::path& base_dir)
{
  pt::ptree tree;
  try
    {
      pt::read_ini(in, tree);
    }
  catch (const pt::ini_parser_error& e)
    {
      throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
    }
  // scenario.base names a file whose keys this one overrides
  for (int depth = 0; auto base = tree.get_optional<std::string>("scenario.base"); ++depth)
    {
      if (depth == 8)
        throw ConfigError("scenario.base: nesting too deep");
      auto path = std::filesystem::path(*base);
      if (path.is_relative())
        path = base_dir / path;
      std::ifstream f(path);
      if (!f)
        throw ConfigError("scenario.base: cannot open " + path.string());
      pt::ptree parent;
      try
        {
          pt::read_ini(f, parent);
        }
      catch (const pt::ini_parser_error& e)
        {
          throw ConfigError("scenario.base: " + path.string() + " line " + std::to_string(e.line()) + ": " +
                            e.message());
        }
      tree.get_child("scenario").erase("base");
      for (const auto& [section, body] : tree)
        for (const auto& [key, value] : body)
          parent.put(pt::ptree::path_type(section + "." + key, '.'), value.data());
      tree = std::move(parent);
    }
  Reader r(tree);
  ScenarioConfig c;

  if (auto s = r.raw("scenario.name"))
    c.name = *s;
  if (auto s = r.raw("scenario.protocols"))
    {
      c.protocols.clear();
      for (const auto& p : split(*s, ','))
        c.protocols.push_back(parse_protocol(p));
    }
  r.integer("scenario.replications", c.replications);
  r.integer("scenario.base_seed", c.base_seed);

  // topology: a preset name, optionally overridden field by field
  std::string preset = r.raw("topology.preset").value_or("T2");
  if (preset != "custom")
    {
      try
        {
          c.topology = preset_topology(preset);
        }
      catch (const std::invalid_argument&)
        {
          throw ConfigError("topology.preset: unknown preset '" + preset + "'");
        }
    }
  else
    c.topology.name = "custom";
  if (auto s = r.raw("topology.name"))
    c.topology.name = *s;
  r.integer("topology.nodes", c.topology.nodes);
  r.number("topology.width", c.topology.area.width);
  r.number("topology.height", c.topology.area.height);
  r.integer("topology.diameter", c.topology.diameter);
  if (auto s = r.raw("topology.backbone"))
    {
      for (const auto& pair : split(*s, ';'))
        {
          auto xy = split(pair, ' ');
          if (xy.size() != 2)
            throw ConfigError("topology.backbone: expected 'x y' pairs separated by ';', got '" + pair + "'");
          c.topology.backbone.push_back(
            Position{Reader::parse_double("topology.backbone", xy[0]), Reader::parse_double("topology.backbone", xy[1])});
        }
    }
  if (auto s = r.raw("topology.controller"))
    {
      std::size_t id = 0;
      r.integer("topology.controller", id);
      c.topology.controller = static_cast<NodeId>(id);
    }

  if (auto s = r.raw("mobility.model"))
    {
      if (*s == "static")
        c.mobility_mode = MobilityMode::Static;
      else if (*s == "rwp")
        c.mobility_mode = MobilityMode::Rwp;
      else if (*s == "rpgm")
        c.mobility_mode = MobilityMode::Rpgm;
      else if (*s == "trace")
        c.mobility_mode = MobilityMode::Trace;
      else
        throw ConfigError("mobility.model: expected static, rwp, rpgm or trace, got '" + *s + "'");
    }
  c.mobility.model =
    c.mobility_mode == MobilityMode::Rpgm ? MobilityModel::ReferencePointGroup : MobilityModel::RandomWaypoint;
  r.number("mobility.min_speed", c.mobility.min_speed);
  r.number("mobility.max_speed", c.mobility.max_speed);
  r.number("mobility.pause", c.mobility.pause);
  r.number("mobility.warmup_discard", c.mobility.warmup_discard);
  r.number("mobility.group_size_mean", c.mobility.group_size_mean);
  r.number("mobility.group_deviation_radius", c.mobility.group_deviation_radius);
  c.mobility.area = c.topology.area;
  if (auto s = r.raw("mobility.trace_file"))
    {
      auto path = std::filesystem::path(*s);
      if (path.is_relative())
        path = base_dir / path;
      std::ifstream f(path);
      if (!f)
        throw ConfigError("mobility.trace_file: cannot open " + path.string());
      std::stringstream text;
      text << f.rdbuf();
      try
        {
          c.trace = import_trace(text.str());
        }
      catch (const TraceParseError& e)
        {
          throw ConfigError("mobility.trace_file: " + path.string() + ": " + e.what());
        }
    }

  if (auto s = r.raw("traffic.model"))
    {
      if (*s == "cbr")
        c.traffic.model = TrafficModel::Cbr;
      else if (*s == "vbr")
        c.traffic.model = TrafficModel::Vbr;
      else
        throw ConfigError("traffic.model: expected cbr or vbr, got '" + *s + "'");
    }
  r.number("traffic.rate", c.traffic.rate);
  r.integer("traffic.packet_size", c.traffic.packet_size);
  r.integer("traffic.min_size", c.traffic.min_size);
  r.integer("traffic.max_size", c.traffic.max_size);

  r.boolean("probe.enabled", c.probe.enabled);
  r.integer("probe.count", c.probe.count);
  r.number("probe.interval", c.probe.interval);
  r.integer("probe.size", c.probe.size);
  r.number("probe.timeout", c.probe.timeout);

  r.number("radio.tx_power_dbm", c.radio.tx_power_dbm);
  r.number("radio.rx_sensitivity_dbm", c.radio.rx_sensitivity_dbm);
  r.number("radio.gain_tx_dbi", c.radio.gain_tx_dbi);
  r.number("radio.gain_rx_dbi", c.radio.gain_rx_dbi);
  r.number("radio.frequency_hz", c.radio.frequency_hz);
  r.number("radio.phy_rate_bps", c.radio.phy_rate_bps);
  if (auto s = r.raw("radio.range_m"))
    c.radio.range_override_m = Reader::parse_double("radio.range_m", *s);

  r.number("timing.monotone", c.timing.monotone);
  r.number("timing.mobility", c.timing.mobility);
  r.number("timing.convergence_check", c.timing.convergence_check);
  r.number("timing.convergence_cap", c.timing.convergence_cap);

  r.number("olsr.hello_interval", c.olsr.hello_interval);
  r.number("olsr.tc_interval", c.olsr.tc_interval);
  r.number("olsr.hold_time", c.olsr.hold_time);
  r.number("olsr.tc_validity", c.olsr.tc_validity);
  r.number("olsr.forward_jitter", c.olsr.forward_jitter);
  r.integer("olsr.hello_base_bytes", c.olsr.hello_base_bytes);
  r.integer("olsr.hello_link_bytes", c.olsr.hello_link_bytes);
  r.integer("olsr.tc_base_bytes", c.olsr.tc_base_bytes);
  r.integer("olsr.tc_entry_bytes", c.olsr.tc_entry_bytes);
  r.integer("olsr.ttl", c.olsr.ttl);

  r.number("batman.ogm_interval", c.batman.ogm_interval);
  r.integer("batman.ttl", c.batman.ttl);
  r.integer("batman.ogm_bytes", c.batman.ogm_bytes);
  r.number("batman.forward_jitter", c.batman.forward_jitter);
  r.number("batman.purge_timeout", c.batman.purge_timeout);
  r.integer("batman.bidirectional_window", c.batman.bidirectional_window);
  r.integer("batman.arp_bytes", c.batman.arp_bytes);
  r.number("batman.arp_relay_delay", c.batman.arp_relay_delay);
  r.number("batman.arp_forward_jitter", c.batman.arp_forward_jitter);
  r.number("batman.arp_retry", c.batman.arp_retry);
  r.integer("batman.arp_attempts", c.batman.arp_attempts);

  r.number("sdn.report_interval", c.sdn.report_interval);
  r.number("sdn.staleness_intervals", c.sdn.staleness_intervals);
  r.number("sdn.controller_processing", c.sdn.controller_processing);
  r.integer("sdn.report_base_bytes", c.sdn.report_base_bytes);
  r.integer("sdn.report_neighbor_bytes", c.sdn.report_neighbor_bytes);
  r.integer("sdn.packet_in_bytes", c.sdn.packet_in_bytes);
  r.integer("sdn.flow_mod_bytes", c.sdn.flow_mod_bytes);
  r.integer("sdn.arp_bytes", c.sdn.arp_bytes);
  r.number("sdn.buffer_timeout", c.sdn.buffer_timeout);
  r.number("sdn.arp_retry", c.sdn.arp_retry);
  r.integer("sdn.arp_attempts", c.sdn.arp_attempts);
  r.number("sdn.teardown_delay", c.sdn.teardown_delay);
  r.boolean("sdn.reoptimize", c.sdn.reoptimize);

  r.reject_unknown();
  c.validate();
  return c;
}

ScenarioConfig
load_scenario(const std::filesystem::path& path)
{
  std::ifstream f(path);
  if (!f)
    throw ConfigError("cannot open config " + path.string());
  return parse_scenario(f, path.parent_path());
}

} // namespace meshsim
