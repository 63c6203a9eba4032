// Moves a database to an edge node and verifies the values it serves.

#include <iostream>

#include "dcs/migration.hpp"
#include "dcs/transport.hpp"
#include "tool_common.hpp"

using namespace dcs;

int main(int argc, char** argv) {
  CLI::App app{"Database migration", "dcsmigrate"};
  std::string dir_path = "directory.json";
  std::string db, to, map_path;
  std::optional<double> tolerance;
  app.add_option("--dir", dir_path, "directory file")->capture_default_str();
  app.add_option("--db", db, "database to move")->required();
  app.add_option("--to", to, "target node")->required();
  app.add_option("--map", map_path, "migration plan (JSON)")->required();
  app.add_option("--verify-tolerance", tolerance, "allowed |post - pre| per channel");

  return tools::run_tool(app, argc, argv, [&] {
    auto plan = migration::MigrationPlan::load(map_path);
    if (plan.database != db || (!plan.to_node.empty() && plan.to_node != to)) {
      throw Error(ErrorCode::ConfigError, "plan is for " + plan.database + " -> " +
                                              plan.to_node + ", not " + db + " -> " + to);
    }
    plan.to_node = to;
    ChannelAccessClient client(std::make_shared<net::FileDirectoryStore>(dir_path),
                               std::make_shared<TcpTransport>());
    migration::Options opts;
    opts.log = [](const std::string& s) { std::cerr << s << "\n"; };
    const auto rep = migration::migrate(client, plan, opts);
    Json out{{"report", rep.to_json()}};
    int rc = tools::kExitOk;
    if (tolerance) {
      const auto v = migration::verify(rep.pre, migration::read_all(client, db), *tolerance);
      out["verify"] = v.to_json();
      if (!v.all_pass()) rc = tools::kExitFailed;
    }
    std::cout << out.dump(2) << "\n";
    return rc;
  });
}
