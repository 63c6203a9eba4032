#include "dcs/bench.hpp"

#include <cstdio>
#include <memory>
#include <queue>

#include "dcs/node.hpp"

namespace dcs::bench {

namespace {

constexpr int kAdcStation = 1;
constexpr int kChannelsPerCrate = 16;

std::string crate_db(int c) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "bench%02d", c);
  return buf;
}

std::string signal_id(int c, int a) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "B%02d_%02d", c, a);
  return buf;
}

// One ADC per crate, every subaddress wired to its own plant signal.
plant::PlantState bench_plant(int crates, std::uint64_t seed) {
  plant::PlantState st;
  st.rng_seed = seed;
  for (int c = 1; c <= crates; ++c) {
    for (int a = 0; a < kChannelsPerCrate; ++a) {
      plant::PlantSignal s;
      s.id = signal_id(c, a);
      s.units = "V";
      s.tau = 5.0;
      s.sigma = 0.01;
      s.target_fn.base = 1.0 + 0.25 * a;
      s.value = s.target = s.target_fn.base;
      st.signals.emplace(s.id, s);
    }
  }
  return st;
}

void add_crate(NodeConfig& cfg, int c, const db::IoBinding& proto) {
  cfg.crates.push_back(CrateConfig{c, {{kAdcStation, camac::ModuleKind::Adc, kChannelsPerCrate, true}}});
  DatabaseConfig d{crate_db(c), cfg.name, {}};
  for (int a = 0; a < kChannelsPerCrate; ++a) {
    const camac::Slot slot{c, kAdcStation, a};
    cfg.wiring.push_back({signal_id(c, a), plant::WireKind::Signal, slot, 1000.0});
    db::ChannelDef ch;
    char name[8];
    std::snprintf(name, sizeof name, "a%02d", a);
    ch.name = name;
    ch.io = proto;
    ch.io.slot = slot;
    ch.gain = 0.001;
    ch.units = "V";
    d.channels.push_back(std::move(ch));
  }
  cfg.databases.push_back(std::move(d));
}

std::vector<NodeConfig> build_configs(const Options& o) {
  std::vector<NodeConfig> out;
  if (o.topology == Topology::Central) {
    NodeConfig cfg;
    cfg.name = "central";
    HighwayConfig hw = o.highway;
    hw.crates.clear();
    for (int c = 1; c <= o.crates; ++c) hw.crates.push_back(c);
    cfg.highway = hw;
    for (int c = 1; c <= o.crates; ++c) add_crate(cfg, c, db::IoBinding::highway({}));
    out.push_back(std::move(cfg));
    return out;
  }
  for (int n = 0; n < o.nodes; ++n) {
    NodeConfig cfg;
    cfg.name = "edge" + std::to_string(n + 1);
    out.push_back(std::move(cfg));
  }
  // Crates, and the databases reading them, are dealt out round-robin.
  for (int c = 1; c <= o.crates; ++c) {
    NodeConfig& cfg = out[(c - 1) % o.nodes];
    const std::string iface = "pci" + std::to_string(c);
    cfg.local_interfaces.push_back({iface, c, o.t_local_ns});
    add_crate(cfg, c, db::IoBinding::local(iface, {}));
  }
  return out;
}

struct Target {
  std::shared_ptr<db::Database> db;
  std::string channel;
};

struct BenchNode {
  std::unique_ptr<Node> node;
  std::vector<Target> targets;
};

}  // namespace

std::string_view to_string(Topology t) {
  return t == Topology::Central ? "central" : "distributed";
}

Topology topology_from_string(std::string_view s) {
  if (s == "central") return Topology::Central;
  if (s == "distributed") return Topology::Distributed;
  throw Error(ErrorCode::InvalidArgument, "topology must be central or distributed");
}

void Options::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, m); };
  if (crates < 1 || crates > camac::kMaxCrate) bad("crates must be 1..62");
  if (readers < 1) bad("readers must be >= 1");
  if (!(duration_virtual_s > 0.0)) bad("duration must be > 0");
  if (t_local_ns <= 0) bad("t_local must be > 0");
  if (topology == Topology::Distributed) {
    if (nodes < 1) bad("distributed topology needs nodes >= 1");
    if (nodes > crates) bad("distributed topology needs nodes <= crates");
  }
  highway.validate();
}

Json Report::to_json() const {
  Json per = Json::array();
  for (const auto& n : per_node) {
    per.push_back(Json{{"node", n.node},
                       {"transactions", n.transactions},
                       {"throughput_tx_per_s", n.throughput_tx_per_s},
                       {"utilization", n.utilization}});
  }
  return Json{{"topology", to_string(topology)},
              {"nodes", nodes},
              {"readers", readers},
              {"crates", crates},
              {"duration_virtual_s", duration_virtual_s},
              {"transactions_total", transactions_total},
              {"throughput_tx_per_s", throughput_tx_per_s},
              {"highway_utilization", highway_utilization},
              {"io_faults", io_faults},
              {"seed", seed},
              {"per_node", std::move(per)}};
}

Report run_bench(const Options& o) {
  o.validate();
  auto plant = std::make_shared<plant::Plant>(bench_plant(o.crates, o.seed));
  auto rack = std::make_shared<camac::CrateRack>();

  std::vector<BenchNode> nodes;
  for (auto& cfg : build_configs(o)) {
    BenchNode bn;
    auto clock = std::make_shared<VirtualClock>();
    bn.node = std::make_unique<Node>(cfg, Node::Shared{clock, plant, rack});
    for (const auto& name : bn.node->database_names()) {
      auto d = bn.node->database(name);
      for (const auto& ch : d->channel_names()) bn.targets.push_back({d, ch});
    }
    nodes.push_back(std::move(bn));
  }

  const std::int64_t end = seconds_to_ns(o.duration_virtual_s);
  struct Reader {
    std::size_t node;
    std::size_t next;
  };
  std::vector<Reader> readers;
  for (int r = 0; r < o.readers; ++r) {
    const std::size_t n = static_cast<std::size_t>(r) % nodes.size();
    // Later readers on a node start further along its channel list.
    const std::size_t offset = (static_cast<std::size_t>(r) / nodes.size()) * 5;
    readers.push_back({n, offset % nodes[n].targets.size()});
  }

  // Readers ordered by the virtual time their previous read completed; ties
  // go to the lower index, so the schedule is a pure function of the options.
  using Event = std::pair<std::int64_t, int>;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> ready;
  for (int r = 0; r < o.readers; ++r) ready.push({0, r});

  Report rep;
  std::vector<std::uint64_t> per_node_tx(nodes.size(), 0);
  while (!ready.empty()) {
    const auto [t, r] = ready.top();
    ready.pop();
    Reader& rd = readers[static_cast<std::size_t>(r)];
    BenchNode& bn = nodes[rd.node];
    VirtualClock& clock = bn.node->clock();
    plant->advance_to(t);
    clock.advance_to(t);
    const std::int64_t cost = bn.node->highway()
                                  ? bn.node->highway()->cost_ns()
                                  : o.t_local_ns;
    if (clock.now() + cost > end) continue;  // no time left for another read
    const Target& tgt = bn.targets[rd.next];
    rd.next = (rd.next + 1) % bn.targets.size();
    try {
      tgt.db->process_read(tgt.channel);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::IoFault) throw;
      ++rep.io_faults;
    }
    ++per_node_tx[rd.node];
    ready.push({clock.now(), r});
  }

  rep.topology = o.topology;
  rep.nodes = o.topology == Topology::Central ? 1 : o.nodes;
  rep.readers = o.readers;
  rep.crates = o.crates;
  rep.duration_virtual_s = o.duration_virtual_s;
  rep.seed = o.seed;
  const double dur_ns = static_cast<double>(end);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Node& n = *nodes[i].node;
    NodeStats s;
    s.node = n.name();
    s.transactions = per_node_tx[i];
    s.throughput_tx_per_s = static_cast<double>(s.transactions) / o.duration_virtual_s;
    const std::int64_t cost = n.highway() ? n.highway()->cost_ns() : o.t_local_ns;
    s.utilization = static_cast<double>(s.transactions) * static_cast<double>(cost) / dur_ns;
    rep.transactions_total += s.transactions;
    if (n.highway()) {
      rep.highway_utilization = static_cast<double>(n.highway()->busy_ns()) / dur_ns;
    }
    rep.per_node.push_back(s);
  }
  rep.throughput_tx_per_s = static_cast<double>(rep.transactions_total) / o.duration_virtual_s;
  return rep;
}

}  // namespace dcs::bench
