// One-shot channel read or raw CAMAC cycle against a running deployment.

#include <iostream>

#include "dcs/client.hpp"
#include "dcs/transport.hpp"
#include "tool_common.hpp"

using namespace dcs;

int main(int argc, char** argv) {
  CLI::App app{"Probe channels and CAMAC slots", "dcsprobe"};
  std::string dir_path = "directory.json";
  double timeout_s = 5.0;
  app.add_option("--dir", dir_path, "directory file")->capture_default_str();
  app.add_option("--timeout", timeout_s, "reply timeout in seconds")->capture_default_str();
  app.require_subcommand(1);

  auto* read = app.add_subcommand("read", "read one channel");
  std::string ch;
  read->add_option("channel", ch, "db:channel")->required();

  auto* camac = app.add_subcommand("camac", "issue one raw dataway cycle");
  int crate = 0, station = 0, sub = 0, fn = 0;
  std::optional<std::uint32_t> data;
  std::string node = "central";
  camac->add_option("--crate", crate)->required();
  camac->add_option("--station", station)->required();
  camac->add_option("--sub", sub)->required();
  camac->add_option("--fn", fn)->required();
  camac->add_option("--data", data, "write data (F16..F23)");
  camac->add_option("--node", node, "node that reaches the crate")->capture_default_str();

  return tools::run_tool(app, argc, argv, [&] {
    auto store = std::make_shared<net::FileDirectoryStore>(dir_path);
    auto transport = std::make_shared<TcpTransport>(
        std::chrono::milliseconds(static_cast<long>(timeout_s * 1000)));
    ChannelAccessClient client(store, transport);
    if (read->parsed()) {
      const auto st = client.read(ch);
      std::printf("%s val=%.6g raw=%u ts=%lld sev=%s\n", ch.c_str(), st.value, st.raw,
                  static_cast<long long>(st.timestamp),
                  std::string(db::to_string(st.severity)).c_str());
      return tools::kExitOk;
    }
    Json req{{"t", "camac"}, {"crate", crate}, {"station", station}, {"sub", sub}, {"fn", fn}};
    if (data) req["data"] = *data;
    const Json reply = client.request_node(node, req);
    net::throw_if_err(reply);
    std::printf("C%d/N%d/A%d F%d data=%u q=%d x=%d\n", crate, station, sub, fn,
                reply.at("data").get<unsigned>(), int(reply.at("q").get<bool>()),
                int(reply.at("x").get<bool>()));
    return tools::kExitOk;
  });
}
