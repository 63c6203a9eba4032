#pragma once

// A control-system node: its crates (behind the highway or local interfaces),
// the databases homed on it, and the request handler for channel access.

#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>

#include "dcs/channel_db.hpp"
#include "dcs/config.hpp"
#include "dcs/highway.hpp"
#include "dcs/netproto.hpp"
#include "dcs/plant.hpp"

namespace dcs {

// Per-connection state on the serving side.
class Session {
 public:
  explicit Session(std::size_t queue_capacity = 1024)
      : updates(std::make_shared<db::UpdateQueue>(queue_capacity)) {}

  bool greeted = false;
  std::shared_ptr<db::UpdateQueue> updates;
  std::set<std::string> subscriptions;  // "db:channel"
};

class Node final : public db::IoRouter {
 public:
  // Resources that may be shared between nodes of one in-process deployment.
  // Anything left null is created from the configuration.
  struct Shared {
    std::shared_ptr<VirtualClock> clock;
    std::shared_ptr<plant::Plant> plant;
    std::shared_ptr<camac::CrateRack> rack;
  };

  explicit Node(const NodeConfig& cfg, Shared shared = {});
  ~Node() override;

  const std::string& name() const { return cfg_.name; }
  const NodeConfig& config() const { return cfg_; }
  VirtualClock& clock() { return *clock_; }
  plant::Plant& plant() { return *plant_; }
  camac::CrateRack& rack() { return *rack_; }
  SerialHighway* highway() { return highway_.get(); }
  LocalInterface* local_interface(const std::string& id);

  // db::IoRouter
  camac::Response execute(const db::IoBinding& io, const camac::Command& cmd) override;
  // Raw cycle through whichever port reaches the crate.
  camac::Response execute_raw(const camac::Command& cmd);

  std::shared_ptr<db::Database> database(const std::string& name) const;
  std::vector<std::string> database_names() const;
  void define_database(const DatabaseConfig& d);

  // Migration steps on the receiving / releasing side.
  void stage_database(const DatabaseConfig& d);
  std::map<std::string, double> init_staged(const std::string& db,
                                            const std::map<std::string, double>& values);
  void activate_staged(const std::string& db);
  // Moves an active database back to staged (undo of activate_staged).
  void deactivate(const std::string& db);
  void unstage(const std::string& db);
  void drop_database(const std::string& db);
  bool is_staged(const std::string& db) const;

  // Steps the plant up to the clock and runs one scan pass on every database.
  void tick();
  // Moves the clock forward in scan_interval steps, ticking after each.
  void run_for(double virtual_seconds);

  // Bindings, wiring and staged/active databases, for equality checks.
  Json state_dump();

  void set_directory_store(std::shared_ptr<net::DirectoryStore> store);
  std::int64_t directory_version() const;

  // Handles one request and returns its single reply. Updates for this
  // session's subscriptions are queued on session.updates.
  Json handle(Session& session, const Json& request);
  void close_session(Session& session);

 private:
  CamacPort& port_for(const db::IoBinding& io);
  std::unique_ptr<db::Database> build_database(const DatabaseConfig& d);
  Json dispatch(Session& session, const std::string& type, const Json& req);

  NodeConfig cfg_;
  std::shared_ptr<VirtualClock> clock_;
  std::shared_ptr<plant::Plant> plant_;
  std::shared_ptr<camac::CrateRack> rack_;
  std::unique_ptr<SerialHighway> highway_;
  std::map<std::string, std::unique_ptr<LocalInterface>> interfaces_;

  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<db::Database>> databases_;
  std::map<std::string, std::shared_ptr<db::Database>> staged_;
  // DAC latches overwritten by init_staged, restored by unstage. Kept across
  // activation until the database is dropped or staged again.
  std::map<std::string, std::map<camac::Slot, std::uint32_t>> staged_latches_;

  std::shared_ptr<net::DirectoryStore> directory_;
  std::int64_t directory_version_ = 0;
};

}  // namespace dcs
