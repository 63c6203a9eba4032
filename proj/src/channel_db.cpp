#include "dcs/channel_db.hpp"

#include <algorithm>
#include <cmath>

#include "dcs/error.hpp"

namespace dcs::db {

std::string_view to_string(Direction d) {
  return d == Direction::Setpoint ? "setpoint" : "readback";
}

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::None: return "NONE";
    case Severity::Minor: return "MINOR";
    case Severity::Major: return "MAJOR";
  }
  return "?";
}

std::string_view to_string(IoPath p) {
  switch (p) {
    case IoPath::None: return "none";
    case IoPath::Highway: return "highway";
    case IoPath::Local: return "local";
  }
  return "?";
}

Severity severity_from_string(std::string_view s) {
  if (s == "NONE") return Severity::None;
  if (s == "MINOR") return Severity::Minor;
  if (s == "MAJOR") return Severity::Major;
  throw Error(ErrorCode::BadFrame, "unknown severity " + std::string(s));
}

Severity severity_for(double value, const std::optional<Limits>& limits) {
  if (!limits) return Severity::None;
  if (value < limits->lolo || value > limits->hihi) return Severity::Major;
  if (value < limits->low || value > limits->high) return Severity::Minor;
  return Severity::None;
}

void ChannelDef::validate() const {
  if (name.empty() || name.find(':') != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument,
                "channel name '" + name + "' must be non-empty without ':'");
  }
  if (gain == 0.0 || !std::isfinite(gain) || !std::isfinite(offset)) {
    throw Error(ErrorCode::InvalidArgument,
                "channel " + name + ": gain must be finite and nonzero");
  }
  if (limits && !(limits->lolo <= limits->low && limits->low <= limits->high &&
                  limits->high <= limits->hihi)) {
    throw Error(ErrorCode::InvalidArgument,
                "channel " + name + ": limits must satisfy lolo<=low<=high<=hihi");
  }
  if (scan_period && !(*scan_period > 0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "channel " + name + ": scan_period must be > 0");
  }
  if (io.path == IoPath::Local && io.interface_id.empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "channel " + name + ": local binding needs an interface");
  }
}

Json to_json(const ChannelDef& d) {
  Json io = Json::object();
  io["path"] = to_string(d.io.path);
  if (d.io.path == IoPath::Local) io["interface"] = d.io.interface_id;
  if (d.io.path != IoPath::None) {
    io["crate"] = d.io.slot.crate;
    io["station"] = d.io.slot.station;
    io["sub"] = d.io.slot.subaddress;
  }
  Json j = Json::object();
  j["name"] = d.name;
  j["io"] = std::move(io);
  j["direction"] = to_string(d.direction);
  j["gain"] = d.gain;
  j["offset"] = d.offset;
  j["units"] = d.units;
  if (d.scan_period) {
    j["scan_period"] = *d.scan_period;
  } else {
    j["scan_period"] = nullptr;
  }
  if (d.limits) {
    j["limits"] = Json{{"lolo", d.limits->lolo},
                       {"low", d.limits->low},
                       {"high", d.limits->high},
                       {"hihi", d.limits->hihi}};
  }
  return j;
}

ChannelDef channel_def_from_json(const JsonField& f) {
  ChannelDef d;
  d.name = f.at("name").str();
  if (f.has("io")) {
    const auto io = f.at("io");
    const std::string path = io.str_or("path", "none");
    if (path == "none") {
      d.io.path = IoPath::None;
    } else if (path == "highway" || path == "local") {
      d.io.path = path == "highway" ? IoPath::Highway : IoPath::Local;
      if (d.io.path == IoPath::Local) d.io.interface_id = io.at("interface").str();
      try {
        d.io.slot = camac::Slot::make(int(io.at("crate").integer()),
                                      int(io.at("station").integer()),
                                      int(io.at("sub").integer()));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        io.fail(e.what());
      }
    } else {
      io.at("path").fail("expected none|highway|local");
    }
  }
  const std::string dir = f.str_or("direction", "readback");
  if (dir == "setpoint") {
    d.direction = Direction::Setpoint;
  } else if (dir == "readback") {
    d.direction = Direction::Readback;
  } else {
    f.at("direction").fail("expected readback|setpoint");
  }
  d.gain = f.num_or("gain", 1.0);
  d.offset = f.num_or("offset", 0.0);
  d.units = f.str_or("units", "");
  if (f.has("scan_period") && !f.json()["scan_period"].is_null()) {
    const auto sp = f.at("scan_period");
    if (sp.json().is_string() && sp.str() == "on_demand") {
      d.scan_period.reset();
    } else {
      d.scan_period = sp.num();
    }
  }
  if (f.has("limits")) {
    const auto l = f.at("limits");
    d.limits = Limits{l.at("lolo").num(), l.at("low").num(), l.at("high").num(),
                      l.at("hihi").num()};
  }
  try {
    d.validate();
  } catch (const Error& e) {
    f.fail(e.what());
  }
  return d;
}

std::uint32_t unscale(const ChannelDef& def, double eng_value) {
  const double counts = std::round((eng_value - def.offset) / def.gain);
  if (!(counts > 0.0)) return 0;
  if (counts >= static_cast<double>(camac::kMaxData)) return camac::kMaxData;
  return static_cast<std::uint32_t>(counts);
}

void UpdateQueue::push(ChannelUpdate u) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    if (q_.size() >= capacity_) {
      q_.pop_front();
      dropped_ = true;
    }
    if (dropped_) {
      u.overflow = true;
      dropped_ = false;
    }
    q_.push_back(std::move(u));
  }
  cv_.notify_one();
}

std::vector<ChannelUpdate> UpdateQueue::drain() {
  std::lock_guard lock(mu_);
  std::vector<ChannelUpdate> out(std::make_move_iterator(q_.begin()),
                                 std::make_move_iterator(q_.end()));
  q_.clear();
  return out;
}

std::optional<ChannelUpdate> UpdateQueue::pop_wait(
    std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || !q_.empty(); });
  if (q_.empty()) return std::nullopt;
  auto u = std::move(q_.front());
  q_.pop_front();
  return u;
}

void UpdateQueue::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool UpdateQueue::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::size_t UpdateQueue::size() const {
  std::lock_guard lock(mu_);
  return q_.size();
}

Database::Database(std::string name, std::string home_node, IoRouter& io,
                   VirtualClock& clock)
    : name_(std::move(name)), home_node_(std::move(home_node)), io_(io), clock_(clock) {
  if (name_.empty() || name_.find(':') != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument,
                "database name '" + name_ + "' must be non-empty without ':'");
  }
}

void Database::add_channel(ChannelDef def) {
  def.validate();
  std::lock_guard lock(mu_);
  if (channels_.contains(def.name)) {
    throw Error(ErrorCode::InvalidArgument,
                "channel " + def.name + " already defined in " + name_);
  }
  Entry e;
  e.def = std::move(def);
  e.state.value = e.def.offset;
  auto name = e.def.name;
  channels_.emplace(std::move(name), std::move(e));
}

void Database::remove_channel(const std::string& name) {
  std::lock_guard lock(mu_);
  entry(name);
  channels_.erase(name);
}

bool Database::has_channel(const std::string& name) const {
  std::lock_guard lock(mu_);
  return channels_.contains(name);
}

std::vector<std::string> Database::channel_names() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [n, e] : channels_) out.push_back(n);
  return out;
}

std::vector<ChannelDef> Database::definitions() const {
  std::lock_guard lock(mu_);
  std::vector<ChannelDef> out;
  for (const auto& [n, e] : channels_) out.push_back(e.def);
  return out;
}

ChannelDef Database::definition(const std::string& name) const {
  std::lock_guard lock(mu_);
  return const_cast<Database*>(this)->entry(name).def;
}

ChannelState Database::state(const std::string& name) const {
  std::lock_guard lock(mu_);
  return const_cast<Database*>(this)->entry(name).state;
}

Database::Entry& Database::entry(const std::string& name) {
  auto it = channels_.find(name);
  if (it == channels_.end()) {
    throw Error(ErrorCode::NoSuchChannel, name_ + ":" + name + " does not exist");
  }
  return it->second;
}

void Database::publish(const std::string& name, Entry& e,
                       const ChannelState& before) {
  if (e.state.value == before.value && e.state.severity == before.severity) return;
  for (auto& sub : e.subscribers) {
    sub->push(ChannelUpdate{name_ + ":" + name, e.state, false});
  }
}

ChannelState Database::read_locked(const std::string& name, Entry& e) {
  const ChannelState before = e.state;
  e.attempted = true;
  auto fault = [&](const std::string& why) -> ChannelState {
    e.last_attempt = clock_.now();
    e.state.severity = Severity::Major;
    publish(name, e, before);
    throw Error(ErrorCode::IoFault, name_ + ":" + name + ": " + why);
  };
  if (e.def.io.path == IoPath::None) return fault("channel has no I/O binding");

  camac::Response resp;
  try {
    resp = io_.execute(e.def.io, camac::Command::read(e.def.io.slot, 0));
  } catch (const Error& err) {
    return fault(err.what());
  }
  if (!resp.x) return fault("no X response");
  if (!resp.q) return fault("no Q response");

  e.state.raw = resp.read_data;
  e.state.value = scale(e.def, resp.read_data);
  e.state.timestamp = clock_.now();
  e.last_attempt = e.state.timestamp;
  e.state.severity = severity_for(e.state.value, e.def.limits);
  publish(name, e, before);
  return e.state;
}

ChannelState Database::process_read(const std::string& name) {
  std::lock_guard lock(mu_);
  return read_locked(name, entry(name));
}

ChannelState Database::process_write(const std::string& name, double eng_value) {
  std::lock_guard lock(mu_);
  Entry& e = entry(name);
  if (e.def.direction != Direction::Setpoint || e.def.io.path == IoPath::None) {
    throw Error(ErrorCode::ReadOnly, name_ + ":" + name + " is not writable");
  }
  const ChannelState before = e.state;
  const std::uint32_t raw = unscale(e.def, eng_value);

  camac::Response resp;
  try {
    resp = io_.execute(e.def.io, camac::Command::write(e.def.io.slot, raw, 16));
  } catch (const Error& err) {
    resp = camac::Response{};
  }
  if (!resp.x || !resp.q) {
    e.state.severity = Severity::Major;
    publish(name, e, before);
    throw Error(ErrorCode::IoFault, name_ + ":" + name + ": write not accepted");
  }
  e.state.raw = raw;
  e.state.value = scale(e.def, raw);
  e.state.timestamp = clock_.now();
  e.state.severity = severity_for(e.state.value, e.def.limits);
  publish(name, e, before);
  return e.state;
}

ScanStats Database::scan_tick() {
  std::lock_guard lock(mu_);
  ScanStats stats;
  const std::int64_t start = clock_.now();
  std::vector<std::string> due;
  for (auto& [n, e] : channels_) {
    if (!e.def.scan_period) continue;
    if (!e.attempted || start - e.last_attempt >= seconds_to_ns(*e.def.scan_period)) {
      due.push_back(n);
    }
  }
  for (const auto& n : due) {
    ++stats.processed;
    try {
      read_locked(n, channels_.at(n));
    } catch (const Error& err) {
      if (err.code() != ErrorCode::IoFault) throw;
      ++stats.faults;
    }
  }
  return stats;
}

void Database::subscribe(const std::string& name,
                         std::shared_ptr<UpdateQueue> sub) {
  std::lock_guard lock(mu_);
  Entry& e = entry(name);
  // A channel never read has no value worth reporting yet.
  if (!e.attempted && e.def.io.path != IoPath::None) {
    try {
      read_locked(name, e);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::IoFault) throw;
    }
  }
  sub->push(ChannelUpdate{name_ + ":" + name, e.state, false});
  if (std::find(e.subscribers.begin(), e.subscribers.end(), sub) ==
      e.subscribers.end()) {
    e.subscribers.push_back(std::move(sub));
  }
}

void Database::unsubscribe(const std::string& name,
                           const std::shared_ptr<UpdateQueue>& sub) {
  std::lock_guard lock(mu_);
  auto& subs = entry(name).subscribers;
  subs.erase(std::remove(subs.begin(), subs.end(), sub), subs.end());
}

void Database::unsubscribe_all(const std::shared_ptr<UpdateQueue>& sub) {
  std::lock_guard lock(mu_);
  for (auto& [n, e] : channels_) {
    e.subscribers.erase(std::remove(e.subscribers.begin(), e.subscribers.end(), sub),
                        e.subscribers.end());
  }
}

std::size_t Database::subscriber_count(const std::string& name) const {
  std::lock_guard lock(mu_);
  return const_cast<Database*>(this)->entry(name).subscribers.size();
}

}  // namespace dcs::db
