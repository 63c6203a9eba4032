#pragma once

// Tune save/restore: every setpoint channel of every database, captured by
// name through channel access and written back later.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dcs/client.hpp"
#include "dcs/error.hpp"
#include "dcs/json_util.hpp"

namespace dcs::archive {

struct TuneEntry {
  std::string channel;  // "db:chan"
  double value = 0.0;   // applied (already quantized) engineering value
  std::string units;
  double gain = 1.0;
  double offset = 0.0;

  bool operator==(const TuneEntry&) const = default;
};

struct TuneSnapshot {
  std::string name;
  std::string created;  // UTC, ISO 8601
  std::int64_t source_directory_version = 0;
  std::vector<TuneEntry> entries;  // sorted by channel

  Json to_json() const;
  static TuneSnapshot from_json(const Json& j);
};

struct TuneInfo {
  std::string name;
  std::string created;
};

class SaveIncomplete : public Error {
 public:
  explicit SaveIncomplete(std::vector<std::string> missing);
  const std::vector<std::string>& missing() const { return missing_; }

 private:
  std::vector<std::string> missing_;
};

// One JSON file per tune, "<name>.json", under a directory.
class TuneStore {
 public:
  explicit TuneStore(std::string dir);

  const std::string& dir() const { return dir_; }
  bool exists(const std::string& name) const;
  // Throws NameExists.
  void put(const TuneSnapshot& snap);
  // Throws NoSuchTune.
  TuneSnapshot get(const std::string& name) const;
  // Sorted by name.
  std::vector<TuneInfo> list() const;

 private:
  std::string path_for(const std::string& name) const;
  std::string dir_;
};

// Names are restricted to [A-Za-z0-9_.-] so they map to plain file names.
void check_tune_name(const std::string& name);

// Reads every setpoint and persists the snapshot. Any unreachable database or
// failed read aborts with SaveIncomplete and writes nothing.
TuneSnapshot save_tune(ChannelAccessClient& client, TuneStore& store,
                       const std::string& name);

struct RestoreResult {
  enum class Status { Applied, Skipped, Error };
  std::string channel;
  Status status = Status::Applied;
  std::optional<double> applied;
  std::string code;  // error code for Error, reason for Skipped
  std::string message;
};

std::string_view to_string(RestoreResult::Status s);

struct RestoreReport {
  std::string tune;
  std::vector<RestoreResult> results;

  int count(RestoreResult::Status s) const;
  Json to_json() const;
};

// Writes every entry in channel order through the current directory.
// Channels that no longer exist are Skipped. Throws NoSuchTune.
RestoreReport restore_tune(ChannelAccessClient& client, const TuneStore& store,
                           const std::string& name);

}  // namespace dcs::archive
