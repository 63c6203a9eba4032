#pragma once

// The default two-node system (central highway node plus one edge PC) in one
// process: shared virtual clock, plant and crates, loopback channel access.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dcs/client.hpp"
#include "dcs/config.hpp"
#include "dcs/node.hpp"
#include "dcs/transport.hpp"

namespace dcs {

class Deployment {
 public:
  explicit Deployment(const topology::Options& opts = {});
  // Arbitrary nodes sharing one clock, plant and rack. The first node's
  // plant roster is used.
  Deployment(std::vector<NodeConfig> nodes, net::Directory dir);

  Node& node(const std::string& name);
  Node& central() { return node("central"); }
  Node& edge() { return node("edge"); }
  std::vector<std::string> node_names() const;

  VirtualClock& clock() { return *clock_; }
  plant::Plant& plant() { return *plant_; }
  camac::CrateRack& rack() { return *rack_; }
  std::shared_ptr<net::DirectoryStore> directory() { return dir_; }
  std::shared_ptr<LoopbackTransport> transport() { return transport_; }

  // A shared client for convenience, and fresh ones for independent sessions.
  ChannelAccessClient& client();
  std::unique_ptr<ChannelAccessClient> make_client();

  // Advances virtual time in scan-interval steps; every live node scans
  // after each step.
  void advance(double virtual_seconds);

  // Simulates the node's process dying (and coming back).
  void kill(const std::string& name);
  void revive(const std::string& name);
  bool is_down(const std::string& name) const;

  // Directory plus every node's state_dump, for byte-equality checks.
  Json state_dump();

 private:
  void build(std::vector<NodeConfig> nodes, net::Directory dir);

  std::shared_ptr<VirtualClock> clock_;
  std::shared_ptr<plant::Plant> plant_;
  std::shared_ptr<camac::CrateRack> rack_;
  std::shared_ptr<net::DirectoryStore> dir_;
  std::shared_ptr<LoopbackTransport> transport_;
  std::map<std::string, std::unique_ptr<Node>> nodes_;
  std::unique_ptr<ChannelAccessClient> client_;
  double scan_interval_ = 0.1;
};

// Which channels stay readable once one node is gone.
struct FailoverReport {
  std::string killed;
  std::int64_t directory_version = 0;
  // database -> (readable, total)
  std::map<std::string, std::pair<int, int>> per_database;
  int readable = 0;
  int total = 0;

  double fraction(const std::string& db) const;
  Json to_json() const;
};

// Kills the named node, tries one read of every channel of every database
// through a fresh client, and revives the node.
FailoverReport failover_demo(Deployment& dep, const std::string& kill_node = "central");

}  // namespace dcs
