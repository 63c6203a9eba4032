// Node daemon: channel access over TCP, optional gateway, scan engine and
// plant driven by the node's virtual clock.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <thread>

#include "dcs/gateway.hpp"
#include "dcs/node.hpp"
#include "dcs/transport.hpp"
#include "tool_common.hpp"

using namespace dcs;
namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::string relative_to(const std::string& path, const std::string& config_path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(config_path).parent_path() / path).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Control-system node daemon", "dcsnode"};
  std::string config_path;
  bool real_time = false;
  double exit_after = 0.0;
  std::optional<int> port_override;
  std::optional<int> gateway_override;
  app.add_option("--config", config_path, "node configuration (JSON)")->required();
  app.add_flag("--real-time", real_time, "pace highway transactions in wall-clock time");
  app.add_option("--port", port_override, "override the channel-access port");
  app.add_option("--gateway-port", gateway_override, "override the gateway port");
  app.add_option("--exit-after", exit_after, "stop after this many wall seconds");

  return tools::run_tool(app, argc, argv, [&] {
    NodeConfig cfg = NodeConfig::load(config_path);
    if (port_override) cfg.port = *port_override;
    if (gateway_override) cfg.gateway_port = *gateway_override;
    cfg.directory_path = relative_to(cfg.directory_path, config_path);
    cfg.tune_store = relative_to(cfg.tune_store, config_path);
    if (!cfg.static_dir.empty()) cfg.static_dir = relative_to(cfg.static_dir, config_path);

    Node node(cfg);
    if (real_time && node.highway()) node.highway()->set_real_time(true);
    std::shared_ptr<net::DirectoryStore> dir;
    if (!cfg.directory_path.empty()) {
      dir = std::make_shared<net::FileDirectoryStore>(cfg.directory_path);
      node.set_directory_store(dir);
    }

    TcpServer server(node, cfg.host, cfg.port);
    server.start();
    std::unique_ptr<Gateway> gateway;
    if (cfg.gateway_port) {
      if (!dir) throw Error(ErrorCode::ConfigError, "gateway needs directory_path");
      Gateway::Config gc;
      gc.host = cfg.host;
      gc.port = *cfg.gateway_port;
      gc.static_dir = cfg.static_dir;
      gc.tune_store = cfg.tune_store;
      gc.directory = dir;
      gc.transport = std::make_shared<TcpTransport>();
      gateway = std::make_unique<Gateway>(gc);
      gateway->start();
    }
    std::cerr << "dcsnode " << cfg.name << ": channel access on " << cfg.host << ":"
              << server.port();
    if (gateway) std::cerr << ", gateway on " << gateway->port();
    std::cerr << ", databases:";
    for (const auto& d : node.database_names()) std::cerr << " " << d;
    std::cerr << std::endl;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    const auto interval = std::chrono::duration<double>(cfg.scan_interval);
    const auto start = std::chrono::steady_clock::now();
    const std::int64_t step_ns = seconds_to_ns(cfg.scan_interval);
    std::int64_t k = 0;
    while (!g_stop) {
      ++k;
      std::this_thread::sleep_until(start + k * std::chrono::duration_cast<std::chrono::steady_clock::duration>(interval));
      // Virtual time follows the wall clock here, but never runs behind the
      // transactions already charged to it.
      node.clock().advance_to(k * step_ns);
      node.tick();
      if (exit_after > 0 && std::chrono::steady_clock::now() - start >=
                                std::chrono::duration<double>(exit_after)) {
        break;
      }
    }
    if (gateway) gateway->stop();
    server.stop();
    return tools::kExitOk;
  });
}
