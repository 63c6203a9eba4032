#pragma once

// Moves one database from its highway-attached home to an edge node's local
// crate: copy, rebind, move the signal cables, publish, retire the original.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dcs/camac.hpp"
#include "dcs/client.hpp"
#include "dcs/json_util.hpp"

namespace dcs::migration {

struct SlotMapping {
  camac::Slot from;  // on the highway
  camac::Slot to;    // behind the target's local interface

  bool operator==(const SlotMapping&) const = default;
};

struct MigrationPlan {
  std::string database;
  std::string from_node;
  std::string to_node;
  std::string interface_id;
  std::vector<SlotMapping> crate_mapping;

  Json to_json() const;
  // Throws ConfigError.
  static MigrationPlan from_json(const Json& j);
  static MigrationPlan load(const std::string& path);
};

// Steps, in order. Failures before Publish roll back completely.
enum class Step { Snapshot = 1, Copy, Rebind, Rewire, Publish, Retire };
std::string_view to_string(Step s);

struct Options {
  // Called after each step completes. A throw from here is treated as a
  // failure of that step (fault injection).
  std::function<void(Step)> after_step;
  // Progress lines for operators.
  std::function<void(const std::string&)> log;
};

struct Report {
  std::string database;
  std::string from_node;
  std::string to_node;
  std::int64_t old_version = 0;
  std::int64_t new_version = 0;
  std::map<std::string, double> pre;  // "db:chan" -> value before migration
  std::vector<std::string> steps;     // completed steps
  std::vector<std::string> warnings;

  Json to_json() const;
};

// Rewrites a database's highway bindings through the plan. Throws
// PlanIncomplete naming every bound channel without a mapping.
std::vector<db::ChannelDef> rebind(const std::vector<db::ChannelDef>& defs,
                                   const MigrationPlan& plan);

// Throws PlanIncomplete (nothing touched), MigrateAborted (rolled back).
Report migrate(ChannelAccessClient& client, const MigrationPlan& plan,
               const Options& opts = {});

struct ChannelCheck {
  std::string channel;
  double pre = 0.0;
  double post = 0.0;
  bool pass = false;
};

struct VerifyReport {
  double tolerance = 0.0;
  std::vector<ChannelCheck> checks;

  bool all_pass() const;
  Json to_json() const;
};

// Throws VerifyMismatch when the two sets name different channels.
VerifyReport verify(const std::map<std::string, double>& pre,
                    const std::map<std::string, double>& post, double tolerance);

// Current value of every channel of db, read through the directory.
std::map<std::string, double> read_all(ChannelAccessClient& client, const std::string& db);

}  // namespace dcs::migration
