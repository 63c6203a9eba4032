#pragma once

// Node configuration file (one JSON document per node) and the default
// topology: 18 crates on the serial highway plus one edge crate.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcs/camac.hpp"
#include "dcs/channel_db.hpp"
#include "dcs/highway.hpp"
#include "dcs/json_util.hpp"
#include "dcs/netproto.hpp"
#include "dcs/plant.hpp"

namespace dcs {

struct ModuleConfig {
  int station = 1;
  camac::ModuleKind kind = camac::ModuleKind::Adc;
  int channels = 16;
  bool readback = true;
};

struct CrateConfig {
  int crate = 1;
  std::vector<ModuleConfig> modules;
};

struct LocalInterfaceConfig {
  std::string id;
  int crate = 1;
  std::int64_t cost_ns = LocalInterface::kDefaultCostNs;
};

struct DatabaseConfig {
  std::string name;
  std::string home_node;
  std::vector<db::ChannelDef> channels;
};

Json to_json(const DatabaseConfig& d);
DatabaseConfig database_config_from_json(const JsonField& f);

struct NodeConfig {
  std::string name;
  std::string host = "127.0.0.1";
  int port = net::kDefaultPort;
  std::optional<int> gateway_port;
  std::string static_dir;  // operator console assets served by the gateway
  std::optional<HighwayConfig> highway;
  std::vector<LocalInterfaceConfig> local_interfaces;
  std::vector<CrateConfig> crates;
  std::vector<DatabaseConfig> databases;
  plant::PlantState plant;
  std::vector<plant::WireEntry> wiring;
  std::string directory_path;
  std::string tune_store = "tunes";
  std::uint64_t seed = 1;
  double scan_interval = 0.1;  // virtual seconds between scan passes

  // Structural checks beyond the schema: one highway at most, every crate
  // reachable, bindings pointing at configured interfaces.
  void validate() const;

  Json to_json() const;
  // Throws ConfigError naming the offending field.
  static NodeConfig from_json(const Json& j);
  static NodeConfig load(const std::string& path);
};

Json to_json(const plant::PlantState& p);
plant::PlantState plant_from_json(const JsonField& f);

namespace topology {

inline constexpr int kEdgeCrate = 19;
inline constexpr const char* kEdgeInterface = "pci0";

struct Options {
  std::uint64_t seed = 1;
  double sigma_scale = 1.0;  // 0 freezes the plant
  std::string central_host = "127.0.0.1";
  int central_port = net::kDefaultPort;
  std::string edge_host = "127.0.0.1";
  int edge_port = net::kDefaultPort + 1;
  std::string directory_path = "directory.json";
};

// The central node: highway with crates 1..18 and the cryo, linac and
// source databases all homed on it.
NodeConfig central(const Options& o = {});
// The edge PC: one local crate (19) behind its own interface, no databases.
NodeConfig edge(const Options& o = {});
net::Directory directory(const Options& o = {});

// The plan that moves cryo from the highway crates onto the edge crate.
Json cryo_migration_plan();

}  // namespace topology

}  // namespace dcs
