#pragma once

// Read-throughput benchmark in virtual time. Readers issue back-to-back reads
// with zero network latency; every read is one CAMAC cycle through the port
// serving its channel (the highway, or an edge node's local interface).

#include <cstdint>
#include <string>
#include <vector>

#include "dcs/highway.hpp"
#include "dcs/json_util.hpp"

namespace dcs::bench {

enum class Topology { Central, Distributed };
std::string_view to_string(Topology t);
Topology topology_from_string(std::string_view s);

struct Options {
  Topology topology = Topology::Central;
  int crates = 18;
  int nodes = 1;  // edge nodes (distributed only)
  int readers = 1;
  double duration_virtual_s = 10.0;
  std::uint64_t seed = 1;
  HighwayConfig highway;
  std::int64_t t_local_ns = 10'000;

  // Throws InvalidArgument for impossible combinations.
  void validate() const;
};

struct NodeStats {
  std::string node;
  std::uint64_t transactions = 0;
  double throughput_tx_per_s = 0.0;
  double utilization = 0.0;  // busy time of the node's port / duration
};

struct Report {
  Topology topology = Topology::Central;
  int nodes = 1;
  int readers = 1;
  int crates = 18;
  double duration_virtual_s = 0.0;
  std::uint64_t transactions_total = 0;
  double throughput_tx_per_s = 0.0;
  double highway_utilization = 0.0;
  std::uint64_t io_faults = 0;
  std::uint64_t seed = 0;
  std::vector<NodeStats> per_node;

  Json to_json() const;
};

Report run_bench(const Options& opts);

}  // namespace dcs::bench
