#pragma once

#include "meshsim/batman.hpp"
#include "meshsim/mobility.hpp"
#include "meshsim/olsr.hpp"
#include "meshsim/radio.hpp"
#include "meshsim/sdn.hpp"
#include "meshsim/topology.hpp"
#include "meshsim/traffic.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace meshsim {

class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class ProtocolKind : std::uint8_t
{
  Olsr,
  Batman,
  Sdn,
  SdnNoMobility,
};

std::string_view to_string(ProtocolKind kind);
ProtocolKind parse_protocol(const std::string& text);

enum class MobilityMode : std::uint8_t
{
  Static,
  Rwp,
  Rpgm,
  Trace,
};

std::string_view to_string(MobilityMode mode);

struct TimingConfig
{
  /// Quiet period between convergence and traffic start; also the overhead window.
  double monotone = 60.0;
  double mobility = 120.0;
  double convergence_check = 1.0;
  double convergence_cap = 60.0;

  void validate() const;
};

struct ScenarioConfig
{
  std::string name = "scenario";
  std::vector<ProtocolKind> protocols{ProtocolKind::Olsr, ProtocolKind::Batman, ProtocolKind::Sdn};
  TopologySpec topology;
  MobilityMode mobility_mode = MobilityMode::Rwp;
  MobilityConfig mobility;
  /// Loaded trace for MobilityMode::Trace; one track per client.
  std::optional<MobilityTrace> trace;
  TrafficConfig traffic;
  ProbeConfig probe;
  RadioParams radio;
  TimingConfig timing;
  OlsrConfig olsr;
  BatmanConfig batman;
  SdnConfig sdn;
  std::size_t replications = 30;
  std::uint64_t base_seed = 1;

  /// Throws ConfigError naming the field.
  void validate() const;
  std::string mobility_label() const;
  std::string traffic_label() const;
  /// Link range used for topology construction.
  double radio_range() const;
};

/// INI text; relative trace paths resolve against `base_dir`.
ScenarioConfig parse_scenario(std::istream& in, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

} // namespace meshsim
