#include "dcs/deployment.hpp"

#include <cmath>

namespace dcs {

Deployment::Deployment(const topology::Options& opts) {
  build({topology::central(opts), topology::edge(opts)}, topology::directory(opts));
}

Deployment::Deployment(std::vector<NodeConfig> nodes, net::Directory dir) {
  build(std::move(nodes), std::move(dir));
}

void Deployment::build(std::vector<NodeConfig> nodes, net::Directory dir) {
  if (nodes.empty()) throw Error(ErrorCode::ConfigError, "deployment needs a node");
  clock_ = std::make_shared<VirtualClock>();
  plant_ = std::make_shared<plant::Plant>(nodes.front().plant);
  rack_ = std::make_shared<camac::CrateRack>();
  dir_ = std::make_shared<net::MemoryDirectoryStore>(std::move(dir));
  transport_ = std::make_shared<LoopbackTransport>();
  scan_interval_ = nodes.front().scan_interval;
  for (auto& cfg : nodes) {
    auto n = std::make_unique<Node>(cfg, Node::Shared{clock_, plant_, rack_});
    n->set_directory_store(dir_);
    transport_->attach(cfg.name, n.get());
    nodes_.emplace(cfg.name, std::move(n));
  }
}

Node& Deployment::node(const std::string& name) {
  auto it = nodes_.find(name);
  if (it == nodes_.end()) throw Error(ErrorCode::InvalidArgument, "no node " + name);
  return *it->second;
}

std::vector<std::string> Deployment::node_names() const {
  std::vector<std::string> out;
  for (const auto& [n, node] : nodes_) out.push_back(n);
  return out;
}

ChannelAccessClient& Deployment::client() {
  if (!client_) client_ = make_client();
  return *client_;
}

std::unique_ptr<ChannelAccessClient> Deployment::make_client() {
  return std::make_unique<ChannelAccessClient>(dir_, transport_);
}

void Deployment::advance(double virtual_seconds) {
  const std::int64_t step = seconds_to_ns(scan_interval_);
  const std::int64_t steps = std::llround(virtual_seconds / scan_interval_);
  const std::int64_t start = clock_->now();
  for (std::int64_t k = 1; k <= steps; ++k) {
    clock_->advance_to(start + k * step);
    for (auto& [name, n] : nodes_) {
      if (!transport_->is_down(name)) n->tick();
    }
  }
  if (client_) client_->poll();
}

void Deployment::kill(const std::string& name) {
  node(name);
  transport_->set_down(name, true);
}

void Deployment::revive(const std::string& name) {
  node(name);
  transport_->set_down(name, false);
}

bool Deployment::is_down(const std::string& name) const { return transport_->is_down(name); }

Json Deployment::state_dump() {
  Json j = Json::object();
  j["directory"] = dir_->load().to_json();
  Json ns = Json::object();
  for (auto& [name, n] : nodes_) ns[name] = n->state_dump();
  j["nodes"] = std::move(ns);
  return j;
}

double FailoverReport::fraction(const std::string& db) const {
  auto it = per_database.find(db);
  if (it == per_database.end() || it->second.second == 0) return 0.0;
  return static_cast<double>(it->second.first) / it->second.second;
}

Json FailoverReport::to_json() const {
  Json dbs = Json::object();
  for (const auto& [db, rt] : per_database) {
    dbs[db] = Json{{"readable", rt.first}, {"total", rt.second}, {"fraction", fraction(db)}};
  }
  return Json{{"killed", killed},
              {"directory_version", directory_version},
              {"readable", readable},
              {"total", total},
              {"databases", std::move(dbs)}};
}

FailoverReport failover_demo(Deployment& dep, const std::string& kill_node) {
  FailoverReport rep;
  rep.killed = kill_node;
  const net::Directory dir = dep.directory()->load();
  rep.directory_version = dir.version;

  // Channel lists are taken while everything is up: the question is which
  // of the channels that exist survive the loss of one node.
  std::map<std::string, std::vector<std::string>> channels;
  {
    auto c = dep.make_client();
    for (const auto& db : c->databases()) {
      for (const auto& def : c->list(db)) {
        if (def.io.path != db::IoPath::None) channels[db].push_back(def.name);
      }
    }
  }
  const bool was_down = dep.is_down(kill_node);
  dep.kill(kill_node);
  auto c = dep.make_client();
  for (const auto& [db, names] : channels) {
    auto& [ok, total] = rep.per_database[db];
    for (const auto& ch : names) {
      ++total;
      try {
        c->read(db + ":" + ch);
        ++ok;
      } catch (const Error&) {
      }
    }
    rep.readable += ok;
    rep.total += total;
  }
  c.reset();
  if (!was_down) dep.revive(kill_node);
  return rep;
}

}  // namespace dcs
