#pragma once

// Real-time channel database: named channels that carry everything needed to
// reach their hardware, a polled scan engine, and change notification.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dcs/camac.hpp"
#include "dcs/clock.hpp"
#include "dcs/json_util.hpp"

namespace dcs::db {

enum class Direction { Readback, Setpoint };
enum class Severity { None, Minor, Major };
enum class IoPath { None, Highway, Local };

std::string_view to_string(Direction d);
std::string_view to_string(Severity s);
std::string_view to_string(IoPath p);
Severity severity_from_string(std::string_view s);

struct IoBinding {
  IoPath path = IoPath::None;
  std::string interface_id;  // Local only
  camac::Slot slot;

  static IoBinding highway(const camac::Slot& s) { return {IoPath::Highway, {}, s}; }
  static IoBinding local(std::string iface, const camac::Slot& s) {
    return {IoPath::Local, std::move(iface), s};
  }
  bool operator==(const IoBinding&) const = default;
};

struct Limits {
  double lolo = 0, low = 0, high = 0, hihi = 0;
  bool operator==(const Limits&) const = default;
};

Severity severity_for(double value, const std::optional<Limits>& limits);

// Static part of a channel: what a configuration file declares.
struct ChannelDef {
  std::string name;
  IoBinding io;
  Direction direction = Direction::Readback;
  double gain = 1.0;  // engineering units per count
  double offset = 0.0;
  std::string units;
  std::optional<double> scan_period;  // seconds; nullopt = on demand
  std::optional<Limits> limits;

  // Throws InvalidArgument when gain is zero or the limits are unordered.
  void validate() const;
  bool operator==(const ChannelDef&) const = default;
};

Json to_json(const ChannelDef& def);
ChannelDef channel_def_from_json(const JsonField& f);

// Engineering value for a raw count: gain * raw + offset.
inline double scale(const ChannelDef& def, std::uint32_t raw) {
  return def.gain * static_cast<double>(raw) + def.offset;
}

// Raw count for an engineering value: round half away from zero, clamp to
// the 24-bit range.
std::uint32_t unscale(const ChannelDef& def, double eng_value);

struct ChannelState {
  double value = 0.0;
  std::uint32_t raw = 0;
  std::int64_t timestamp = 0;
  Severity severity = Severity::None;

  bool operator==(const ChannelState&) const = default;
};

struct ChannelUpdate {
  std::string channel;  // "<database>:<channel>"
  ChannelState state;
  bool overflow = false;  // updates were dropped before this one
};

// Bounded per-subscriber queue. A full queue drops its oldest entry and
// flags the next update pushed.
class UpdateQueue {
 public:
  explicit UpdateQueue(std::size_t capacity = 1024) : capacity_(capacity) {}

  void push(ChannelUpdate u);
  std::vector<ChannelUpdate> drain();
  // Blocks until an update is available, the queue is closed, or timeout.
  std::optional<ChannelUpdate> pop_wait(std::chrono::milliseconds timeout);
  void close();
  bool closed() const;
  std::size_t size() const;

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<ChannelUpdate> q_;
  bool dropped_ = false;
  bool closed_ = false;
};

// How a database reaches hardware; implemented by the node hosting it.
class IoRouter {
 public:
  virtual ~IoRouter() = default;
  virtual camac::Response execute(const IoBinding& io,
                                  const camac::Command& cmd) = 0;
};

struct ScanStats {
  int processed = 0;
  int faults = 0;
};

class Database {
 public:
  Database(std::string name, std::string home_node, IoRouter& io,
           VirtualClock& clock);

  const std::string& name() const { return name_; }
  const std::string& home_node() const { return home_node_; }

  void add_channel(ChannelDef def);
  void remove_channel(const std::string& name);
  bool has_channel(const std::string& name) const;
  std::vector<std::string> channel_names() const;
  std::vector<ChannelDef> definitions() const;
  ChannelDef definition(const std::string& name) const;
  ChannelState state(const std::string& name) const;

  // One CAMAC read through the channel's binding. Errors: NoSuchChannel,
  // IoFault (severity forced to MAJOR, value kept).
  ChannelState process_read(const std::string& name);
  // Quantizes, writes, and stores the applied value. Errors: NoSuchChannel,
  // ReadOnly, IoFault.
  ChannelState process_write(const std::string& name, double eng_value);

  // Processes every channel whose scan period has elapsed, in name order.
  ScanStats scan_tick();

  void subscribe(const std::string& name, std::shared_ptr<UpdateQueue> sub);
  void unsubscribe(const std::string& name, const std::shared_ptr<UpdateQueue>& sub);
  void unsubscribe_all(const std::shared_ptr<UpdateQueue>& sub);
  std::size_t subscriber_count(const std::string& name) const;

 private:
  struct Entry {
    ChannelDef def;
    ChannelState state;
    bool attempted = false;
    std::int64_t last_attempt = 0;
    std::vector<std::shared_ptr<UpdateQueue>> subscribers;
  };

  Entry& entry(const std::string& name);
  ChannelState read_locked(const std::string& name, Entry& e);
  void publish(const std::string& name, Entry& e, const ChannelState& before);

  std::string name_;
  std::string home_node_;
  IoRouter& io_;
  VirtualClock& clock_;
  mutable std::mutex mu_;
  std::map<std::string, Entry> channels_;
};

}  // namespace dcs::db
