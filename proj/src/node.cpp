#include "dcs/node.hpp"

#include <cmath>

namespace dcs {

Node::Node(const NodeConfig& cfg, Shared shared)
    : cfg_(cfg),
      clock_(shared.clock ? shared.clock : std::make_shared<VirtualClock>()),
      plant_(shared.plant ? shared.plant : std::make_shared<plant::Plant>(cfg.plant)),
      rack_(shared.rack ? shared.rack : std::make_shared<camac::CrateRack>()) {
  cfg_.validate();
  for (const auto& c : cfg_.crates) {
    if (rack_->has_crate(c.crate)) continue;
    rack_->add_crate(c.crate);
    for (const auto& m : c.modules) {
      rack_->install_module(c.crate, m.station,
                            camac::SimModule(m.kind, m.channels, m.readback));
    }
  }
  if (cfg_.highway) {
    highway_ = std::make_unique<SerialHighway>(*cfg_.highway, *rack_, *clock_, plant_.get());
  }
  for (const auto& li : cfg_.local_interfaces) {
    interfaces_.emplace(li.id, std::make_unique<LocalInterface>(
                                   li.id, li.crate, li.cost_ns, *rack_, *clock_, plant_.get()));
  }
  for (const auto& w : cfg_.wiring) {
    if (plant::find_binding(*rack_, w.id) == w) continue;
    if (w.kind == plant::WireKind::Signal) {
      plant::wire_signal(*rack_, w.id, w.slot, w.gain_counts_per_unit);
    } else {
      plant::wire_actuator(*rack_, w.id, w.slot, w.gain_counts_per_unit);
    }
  }
  for (const auto& d : cfg_.databases) define_database(d);
}

Node::~Node() = default;

LocalInterface* Node::local_interface(const std::string& id) {
  auto it = interfaces_.find(id);
  return it == interfaces_.end() ? nullptr : it->second.get();
}

CamacPort& Node::port_for(const db::IoBinding& io) {
  if (io.path == db::IoPath::Highway) {
    if (!highway_) throw Error(ErrorCode::RoutingError, cfg_.name + " has no highway");
    return *highway_;
  }
  if (io.path == db::IoPath::Local) {
    auto* li = local_interface(io.interface_id);
    if (li == nullptr) {
      throw Error(ErrorCode::RoutingError,
                  cfg_.name + " has no interface " + io.interface_id);
    }
    return *li;
  }
  throw Error(ErrorCode::RoutingError, "channel has no I/O binding");
}

camac::Response Node::execute(const db::IoBinding& io, const camac::Command& cmd) {
  return port_for(io).execute(cmd);
}

camac::Response Node::execute_raw(const camac::Command& cmd) {
  const int crate = cmd.address().crate();
  if (highway_ && highway_->reaches(crate)) return highway_->transact(cmd);
  for (auto& [id, li] : interfaces_) {
    if (li->reaches(crate)) return li->execute(cmd);
  }
  throw Error(ErrorCode::NoSuchCrate,
              "crate " + std::to_string(crate) + " is not reachable from " + cfg_.name);
}

std::unique_ptr<db::Database> Node::build_database(const DatabaseConfig& d) {
  auto database = std::make_unique<db::Database>(d.name, cfg_.name, *this, *clock_);
  for (const auto& ch : d.channels) {
    if (ch.io.path != db::IoPath::None) port_for(ch.io);  // reject unroutable bindings
    database->add_channel(ch);
  }
  return database;
}

std::shared_ptr<db::Database> Node::database(const std::string& name) const {
  std::lock_guard lock(mu_);
  auto it = databases_.find(name);
  if (it == databases_.end()) {
    throw Error(ErrorCode::NoSuchDb, "database '" + name + "' is not served by " + cfg_.name);
  }
  return it->second;
}

std::vector<std::string> Node::database_names() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [n, d] : databases_) out.push_back(n);
  return out;
}

void Node::define_database(const DatabaseConfig& d) {
  std::shared_ptr<db::Database> built = build_database(d);
  std::lock_guard lock(mu_);
  if (databases_.contains(d.name) || staged_.contains(d.name)) {
    throw Error(ErrorCode::InvalidArgument, "database " + d.name + " already on " + cfg_.name);
  }
  databases_.emplace(d.name, std::move(built));
}

void Node::stage_database(const DatabaseConfig& d) {
  std::shared_ptr<db::Database> built = build_database(d);
  std::lock_guard lock(mu_);
  if (databases_.contains(d.name) || staged_.contains(d.name)) {
    throw Error(ErrorCode::InvalidArgument, "database " + d.name + " already on " + cfg_.name);
  }
  staged_.emplace(d.name, std::move(built));
  staged_latches_.erase(d.name);
}

bool Node::is_staged(const std::string& db) const {
  std::lock_guard lock(mu_);
  return staged_.contains(db);
}

std::map<std::string, double> Node::init_staged(const std::string& db,
                                                const std::map<std::string, double>& values) {
  std::shared_ptr<db::Database> d;
  {
    std::lock_guard lock(mu_);
    auto it = staged_.find(db);
    if (it == staged_.end()) {
      throw Error(ErrorCode::NoSuchDb, "database " + db + " is not staged on " + cfg_.name);
    }
    d = it->second;
  }
  std::map<std::string, double> applied;
  for (const auto& [name, value] : values) {
    const auto def = d->definition(name);
    if (def.io.path != db::IoPath::None) {
      const auto prev = rack_->with_crate(def.io.slot.crate, [&](camac::Crate& c) {
        const auto* m = c.module(def.io.slot.station);
        return m != nullptr && m->has_subaddress(def.io.slot.subaddress)
                   ? m->latched(def.io.slot.subaddress)
                   : 0u;
      });
      std::lock_guard lock(mu_);
      staged_latches_[db].emplace(def.io.slot, prev);
    }
    applied[name] = d->process_write(name, value).value;
  }
  return applied;
}

void Node::activate_staged(const std::string& db) {
  std::lock_guard lock(mu_);
  auto it = staged_.find(db);
  if (it == staged_.end()) {
    throw Error(ErrorCode::NoSuchDb, "database " + db + " is not staged on " + cfg_.name);
  }
  databases_[db] = std::move(it->second);
  staged_.erase(it);
}

void Node::deactivate(const std::string& db) {
  std::lock_guard lock(mu_);
  auto it = databases_.find(db);
  if (it == databases_.end()) {
    throw Error(ErrorCode::NoSuchDb, "database '" + db + "' is not served by " + cfg_.name);
  }
  staged_[db] = std::move(it->second);
  databases_.erase(it);
}

void Node::unstage(const std::string& db) {
  std::map<camac::Slot, std::uint32_t> latches;
  {
    std::lock_guard lock(mu_);
    staged_.erase(db);
    if (auto it = staged_latches_.find(db); it != staged_latches_.end()) {
      latches = std::move(it->second);
      staged_latches_.erase(it);
    }
  }
  for (const auto& [slot, value] : latches) {
    rack_->with_crate(slot.crate, [&](camac::Crate& c) {
      if (auto* m = c.module(slot.station)) m->latch(slot.subaddress, value);
    });
  }
}

void Node::drop_database(const std::string& db) {
  std::lock_guard lock(mu_);
  auto it = databases_.find(db);
  if (it == databases_.end()) {
    throw Error(ErrorCode::NoSuchDb, "database '" + db + "' is not served by " + cfg_.name);
  }
  databases_.erase(it);
  staged_latches_.erase(db);
}

void Node::tick() {
  plant_->advance_to(clock_->now());
  std::vector<std::shared_ptr<db::Database>> dbs;
  {
    std::lock_guard lock(mu_);
    for (auto& [n, d] : databases_) dbs.push_back(d);
  }
  for (auto& d : dbs) d->scan_tick();
}

void Node::run_for(double virtual_seconds) {
  const std::int64_t step = seconds_to_ns(cfg_.scan_interval);
  const std::int64_t steps = std::llround(virtual_seconds / cfg_.scan_interval);
  const std::int64_t start = clock_->now();
  for (std::int64_t k = 1; k <= steps; ++k) {
    clock_->advance_to(start + k * step);
    tick();
  }
}

Json Node::state_dump() {
  Json j = Json::object();
  j["node"] = cfg_.name;
  auto dump_dbs = [](const std::map<std::string, std::shared_ptr<db::Database>>& m) {
    Json out = Json::object();
    for (const auto& [n, d] : m) {
      DatabaseConfig dc{d->name(), d->home_node(), d->definitions()};
      out[n] = to_json(dc);
    }
    return out;
  };
  {
    std::lock_guard lock(mu_);
    j["databases"] = dump_dbs(databases_);
    j["staged"] = dump_dbs(staged_);
  }
  Json wires = Json::array();
  for (const auto& w : plant::list_bindings(*rack_)) {
    wires.push_back(Json{{"signal", w.id},
                         {"slot", camac::to_string(w.slot)},
                         {"gain", w.gain_counts_per_unit}});
  }
  j["wiring"] = wires;
  Json outputs = Json::object();
  for (int crate : rack_->crate_numbers()) {
    rack_->with_crate(crate, [&](const camac::Crate& c) {
      for (const auto& [station, m] : c.stations()) {
        if (m.kind() == camac::ModuleKind::Adc) continue;
        for (int a = 0; a < m.channel_count(); ++a) {
          outputs[camac::to_string({crate, station, a})] = m.latched(a);
        }
      }
    });
  }
  j["outputs"] = outputs;
  return j;
}

void Node::set_directory_store(std::shared_ptr<net::DirectoryStore> store) {
  directory_ = std::move(store);
  if (directory_) {
    std::lock_guard lock(mu_);
    directory_version_ = directory_->load().version;
  }
}

std::int64_t Node::directory_version() const {
  std::lock_guard lock(mu_);
  return directory_version_;
}

void Node::close_session(Session& session) {
  std::vector<std::shared_ptr<db::Database>> dbs;
  {
    std::lock_guard lock(mu_);
    for (auto& [n, d] : databases_) dbs.push_back(d);
  }
  for (auto& d : dbs) d->unsubscribe_all(session.updates);
  session.subscriptions.clear();
  session.updates->close();
}

namespace {

const Json& field(const Json& req, const char* key) {
  auto it = req.find(key);
  if (it == req.end()) {
    throw Error(ErrorCode::BadFrame, std::string("missing field '") + key + "'");
  }
  return *it;
}

std::string str_field(const Json& req, const char* key) {
  const Json& v = field(req, key);
  if (!v.is_string()) throw Error(ErrorCode::BadFrame, std::string(key) + " must be a string");
  return v.get<std::string>();
}

int int_field(const Json& req, const char* key) {
  const Json& v = field(req, key);
  if (!v.is_number_integer()) {
    throw Error(ErrorCode::BadFrame, std::string(key) + " must be an integer");
  }
  return v.get<int>();
}

camac::Slot slot_field(const Json& req) {
  return camac::Slot::make(int_field(req, "crate"), int_field(req, "station"),
                           int_field(req, "sub"));
}

}  // namespace

Json Node::handle(Session& session, const Json& req) {
  Json id = nullptr;
  if (req.is_object()) {
    if (auto it = req.find("id"); it != req.end()) id = *it;
  }
  try {
    if (!req.is_object()) throw Error(ErrorCode::BadFrame, "message is not an object");
    auto t = req.find("t");
    if (t == req.end() || !t->is_string()) {
      throw Error(ErrorCode::BadType, "message has no string 't'");
    }
    const std::string type = t->get<std::string>();
    if (type == "hello") {
      const Json& ver = field(req, "ver");
      if (!ver.is_number_integer() || ver.get<int>() != net::kProtocolVersion) {
        throw Error(ErrorCode::VersionMismatch,
                    "server speaks version " + std::to_string(net::kProtocolVersion));
      }
      session.greeted = true;
      Json r = net::make_reply("hello_ack", id);
      r["ver"] = net::kProtocolVersion;
      r["node"] = cfg_.name;
      return r;
    }
    if (!session.greeted && net::is_known_type(type)) {
      throw Error(ErrorCode::VersionMismatch, "hello required before " + type);
    }
    return dispatch(session, type, req);
  } catch (const Error& e) {
    return net::make_err(id, e.code(), e.what());
  } catch (const Json::exception& e) {
    return net::make_err(id, ErrorCode::BadFrame, e.what());
  }
}

Json Node::dispatch(Session& session, const std::string& type, const Json& req) {
  const Json id = req.contains("id") ? req["id"] : Json(nullptr);

  if (type == "read" || type == "write" || type == "sub" || type == "unsub") {
    const std::string ch = str_field(req, "ch");
    const auto ref = net::parse_channel_ref(ch);
    auto d = database(ref.db);
    if (type == "read") {
      Json r = net::make_reply("read_ack", id);
      r["ch"] = ch;
      net::put_state(r, d->process_read(ref.channel));
      return r;
    }
    if (type == "write") {
      const Json& v = field(req, "val");
      if (!v.is_number()) throw Error(ErrorCode::BadFrame, "val must be a number");
      Json r = net::make_reply("write_ack", id);
      r["ch"] = ch;
      net::put_state(r, d->process_write(ref.channel, v.get<double>()));
      return r;
    }
    if (type == "sub") {
      d->subscribe(ref.channel, session.updates);
      session.subscriptions.insert(ch);
      Json r = net::make_reply("sub_ack", id);
      r["ch"] = ch;
      return r;
    }
    d->unsubscribe(ref.channel, session.updates);
    session.subscriptions.erase(ch);
    Json r = net::make_reply("unsub_ack", id);
    r["ch"] = ch;
    return r;
  }
  if (type == "list") {
    Json r = net::make_reply("list_ack", id);
    if (req.contains("db")) {
      auto d = database(str_field(req, "db"));
      Json chans = Json::array();
      for (const auto& def : d->definitions()) chans.push_back(db::to_json(def));
      r["db"] = d->name();
      r["channels"] = std::move(chans);
    } else {
      r["node"] = cfg_.name;
      r["databases"] = database_names();
    }
    return r;
  }
  if (type == "camac") {
    const auto slot = slot_field(req);
    const int fn = int_field(req, "fn");
    std::optional<std::uint32_t> data;
    if (req.contains("data")) data = static_cast<std::uint32_t>(int_field(req, "data"));
    if (camac::is_write_function(fn) && !data) data = 0;
    const auto cmd = camac::Command::make(camac::Address::make(slot, fn), data);
    const auto resp = execute_raw(cmd);
    Json r = net::make_reply("camac_ack", id);
    r["data"] = resp.read_data;
    r["q"] = resp.q;
    r["x"] = resp.x;
    return r;
  }
  if (type == "reload") {
    std::int64_t version = 0;
    if (directory_) {
      version = directory_->load().version;
      std::lock_guard lock(mu_);
      directory_version_ = version;
    }
    Json r = net::make_reply("reload_ack", id);
    r["version"] = version;
    return r;
  }
  if (type == "db_get") {
    auto d = database(str_field(req, "db"));
    Json r = net::make_reply("db_get_ack", id);
    r["database"] = to_json(DatabaseConfig{d->name(), d->home_node(), d->definitions()});
    return r;
  }
  if (type == "db_stage") {
    const Json& body = field(req, "database");
    DatabaseConfig dc;
    try {
      dc = database_config_from_json(JsonField(body, "database"));
    } catch (const Error& e) {
      throw Error(ErrorCode::BadFrame, e.what());
    }
    dc.home_node = cfg_.name;
    stage_database(dc);
    return net::make_reply("db_stage_ack", id);
  }
  if (type == "db_init") {
    std::map<std::string, double> values;
    for (const auto& [k, v] : field(req, "values").items()) {
      if (!v.is_number()) throw Error(ErrorCode::BadFrame, "values must be numbers");
      values[k] = v.get<double>();
    }
    Json r = net::make_reply("db_init_ack", id);
    Json applied = Json::object();
    for (const auto& [k, v] : init_staged(str_field(req, "db"), values)) applied[k] = v;
    r["applied"] = applied;
    return r;
  }
  if (type == "db_activate") {
    activate_staged(str_field(req, "db"));
    return net::make_reply("db_activate_ack", id);
  }
  if (type == "db_deactivate") {
    deactivate(str_field(req, "db"));
    return net::make_reply("db_deactivate_ack", id);
  }
  if (type == "db_unstage") {
    unstage(str_field(req, "db"));
    return net::make_reply("db_unstage_ack", id);
  }
  if (type == "db_drop") {
    drop_database(str_field(req, "db"));
    return net::make_reply("db_drop_ack", id);
  }
  if (type == "wire") {
    const auto slot = slot_field(req);
    const std::string kind = req.value("kind", "signal");
    const double gain = field(req, "gain").get<double>();
    const std::string sig = str_field(req, "signal");
    if (kind == "signal") {
      plant::wire_signal(*rack_, sig, slot, gain);
    } else if (kind == "actuator") {
      plant::wire_actuator(*rack_, sig, slot, gain);
    } else {
      throw Error(ErrorCode::BadFrame, "kind must be signal|actuator");
    }
    return net::make_reply("wire_ack", id);
  }
  if (type == "unwire") {
    Json r = net::make_reply("unwire_ack", id);
    r["removed"] = plant::unwire(*rack_, str_field(req, "signal"), slot_field(req));
    return r;
  }
  if (type == "wiring") {
    Json list = Json::array();
    for (const auto& w : plant::list_bindings(*rack_)) {
      list.push_back(Json{{"signal", w.id},
                          {"kind", w.kind == plant::WireKind::Signal ? "signal" : "actuator"},
                          {"crate", w.slot.crate},
                          {"station", w.slot.station},
                          {"sub", w.slot.subaddress},
                          {"gain", w.gain_counts_per_unit}});
    }
    Json r = net::make_reply("wiring_ack", id);
    r["bindings"] = std::move(list);
    return r;
  }
  if (type == "state") {
    Json r = net::make_reply("state_ack", id);
    r["state"] = state_dump();
    return r;
  }
  throw Error(ErrorCode::BadType, "unsupported message type '" + type + "'");
}

}  // namespace dcs
