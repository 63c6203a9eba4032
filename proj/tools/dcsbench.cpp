// Virtual-time throughput benchmark and failover demonstration.

#include <iostream>

#include "dcs/bench.hpp"
#include "dcs/deployment.hpp"
#include "dcs/migration.hpp"
#include "tool_common.hpp"

using namespace dcs;

namespace {

Json failover_run(std::uint64_t seed) {
  topology::Options topo;
  topo.seed = seed;
  Json out = Json::object();
  {
    Deployment dep(topo);
    out["pre_migration_central_killed"] = failover_demo(dep, "central").to_json();
  }
  Deployment dep(topo);
  migration::migrate(dep.client(), migration::MigrationPlan::from_json(topology::cryo_migration_plan()));
  out["post_migration_central_killed"] = failover_demo(dep, "central").to_json();
  out["post_migration_edge_killed"] = failover_demo(dep, "edge").to_json();
  return out;
}

void print_text(const bench::Report& r) {
  std::printf("topology=%s nodes=%d readers=%d duration=%gs\n", std::string(to_string(r.topology)).c_str(),
              r.nodes, r.readers, r.duration_virtual_s);
  std::printf("transactions=%llu throughput=%.2f tx/s highway_utilization=%.4f\n",
              static_cast<unsigned long long>(r.transactions_total), r.throughput_tx_per_s,
              r.highway_utilization);
  for (const auto& n : r.per_node) {
    std::printf("  %-10s %10llu tx  %12.2f tx/s  util %.4f\n", n.node.c_str(),
                static_cast<unsigned long long>(n.transactions), n.throughput_tx_per_s,
                n.utilization);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial highway vs distributed I/O throughput in virtual time", "dcsbench"};
  std::string topology = "central";
  std::string report = "json";
  bench::Options o;
  bool failover = false;
  app.add_option("--topology", topology, "central | distributed")
      ->check(CLI::IsMember({"central", "distributed"}));
  app.add_option("--crates", o.crates, "crates holding the read channels")->capture_default_str();
  app.add_option("--nodes", o.nodes, "edge nodes (distributed)")->capture_default_str();
  app.add_option("--readers", o.readers, "back-to-back reader clients")->capture_default_str();
  app.add_option("--duration-virtual", o.duration_virtual_s, "virtual seconds")
      ->capture_default_str();
  app.add_option("--seed", o.seed, "plant noise seed")->capture_default_str();
  app.add_option("--t-local-ns", o.t_local_ns, "edge interface cost per cycle")
      ->capture_default_str();
  app.add_option("--clock-hz", o.highway.clock_hz, "highway clock")->capture_default_str();
  app.add_option("--report", report, "json | text")->check(CLI::IsMember({"json", "text"}));
  app.add_flag("--failover", failover, "run the node-loss demonstration instead");

  return tools::run_tool(app, argc, argv, [&] {
    if (failover) {
      std::cout << failover_run(o.seed).dump(2) << "\n";
      return tools::kExitOk;
    }
    o.topology = bench::topology_from_string(topology);
    const auto r = bench::run_bench(o);
    if (report == "json") {
      std::cout << r.to_json().dump(2) << "\n";
    } else {
      print_text(r);
    }
    return tools::kExitOk;
  });
}
