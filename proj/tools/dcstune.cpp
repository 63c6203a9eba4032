// Save, restore and list machine tunes.

#include <iostream>

#include "dcs/archive.hpp"
#include "dcs/transport.hpp"
#include "tool_common.hpp"

using namespace dcs;

int main(int argc, char** argv) {
  CLI::App app{"Tune archive", "dcstune"};
  std::string dir_path = "directory.json";
  std::string store_path = "tunes";
  app.add_option("--dir", dir_path, "directory file")->capture_default_str();
  app.add_option("--store", store_path, "tune store directory")->capture_default_str();
  app.require_subcommand(1);
  std::string name;
  auto* save = app.add_subcommand("save", "snapshot every setpoint");
  save->add_option("name", name)->required();
  auto* restore = app.add_subcommand("restore", "write a snapshot back");
  restore->add_option("name", name)->required();
  app.add_subcommand("list", "list saved tunes");

  return tools::run_tool(app, argc, argv, [&] {
    archive::TuneStore store(store_path);
    if (app.got_subcommand("list")) {
      for (const auto& t : store.list()) std::printf("%s\t%s\n", t.name.c_str(), t.created.c_str());
      return tools::kExitOk;
    }
    ChannelAccessClient client(std::make_shared<net::FileDirectoryStore>(dir_path),
                               std::make_shared<TcpTransport>());
    if (save->parsed()) {
      const auto snap = archive::save_tune(client, store, name);
      std::printf("saved %s: %zu setpoints\n", snap.name.c_str(), snap.entries.size());
      return tools::kExitOk;
    }
    const auto rep = archive::restore_tune(client, store, name);
    std::cout << rep.to_json().dump(2) << "\n";
    return rep.count(archive::RestoreResult::Status::Error) == 0 ? tools::kExitOk
                                                                 : tools::kExitProtocol;
  });
}
