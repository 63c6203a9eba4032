#include "dcs/config.hpp"

#include <set>

namespace dcs {
namespace {

Json slot_json(const camac::Slot& s) {
  return Json{{"crate", s.crate}, {"station", s.station}, {"sub", s.subaddress}};
}

camac::Slot slot_from(const JsonField& f) {
  try {
    return camac::Slot::make(int(f.at("crate").integer()), int(f.at("station").integer()),
                             int(f.at("sub").integer()));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    f.fail(e.what());
  }
}

Json wire_json(const plant::WireEntry& w) {
  Json j = Json::object();
  j["id"] = w.id;
  j["kind"] = w.kind == plant::WireKind::Signal ? "signal" : "actuator";
  j.update(slot_json(w.slot));
  j["gain"] = w.gain_counts_per_unit;
  return j;
}

plant::WireEntry wire_from(const JsonField& f) {
  plant::WireEntry w;
  w.id = f.at("id").str();
  const auto kind = f.str_or("kind", "signal");
  if (kind == "signal") {
    w.kind = plant::WireKind::Signal;
  } else if (kind == "actuator") {
    w.kind = plant::WireKind::Actuator;
  } else {
    f.at("kind").fail("expected signal|actuator");
  }
  w.slot = slot_from(f);
  w.gain_counts_per_unit = f.at("gain").num();
  if (!(w.gain_counts_per_unit > 0.0)) f.at("gain").fail("must be > 0");
  return w;
}

}  // namespace

Json to_json(const DatabaseConfig& d) {
  Json chans = Json::array();
  for (const auto& c : d.channels) chans.push_back(db::to_json(c));
  return Json{{"name", d.name}, {"home_node", d.home_node}, {"channels", chans}};
}

DatabaseConfig database_config_from_json(const JsonField& f) {
  DatabaseConfig d;
  d.name = f.at("name").str();
  d.home_node = f.str_or("home_node", "");
  const auto chans = f.at("channels");
  std::set<std::string> names;
  for (std::size_t i = 0; i < chans.size(); ++i) {
    d.channels.push_back(db::channel_def_from_json(chans.at(i)));
    if (!names.insert(d.channels.back().name).second) {
      chans.at(i).fail("duplicate channel name " + d.channels.back().name);
    }
  }
  return d;
}

Json to_json(const plant::PlantState& p) {
  Json sigs = Json::array();
  for (const auto& [id, s] : p.signals) {
    Json coeffs = Json::object();
    for (const auto& [a, k] : s.target_fn.coeffs) coeffs[a] = k;
    sigs.push_back(Json{{"id", s.id},
                        {"units", s.units},
                        {"value", s.value},
                        {"tau", s.tau},
                        {"sigma", s.sigma},
                        {"target", Json{{"base", s.target_fn.base}, {"coeffs", coeffs}}}});
  }
  Json acts = Json::object();
  for (const auto& [a, v] : p.actuators) acts[a] = v;
  return Json{{"dt", p.dt}, {"signals", sigs}, {"actuators", acts}};
}

plant::PlantState plant_from_json(const JsonField& f) {
  plant::PlantState p;
  p.dt = f.num_or("dt", 0.1);
  if (!(p.dt > 0.0)) f.at("dt").fail("must be > 0");
  if (f.has("signals")) {
    const auto sigs = f.at("signals");
    for (std::size_t i = 0; i < sigs.size(); ++i) {
      const auto s = sigs.at(i);
      plant::PlantSignal sig;
      sig.id = s.at("id").str();
      sig.units = s.str_or("units", "");
      sig.tau = s.at("tau").num();
      sig.sigma = s.num_or("sigma", 0.0);
      if (!(sig.tau > 0.0)) s.at("tau").fail("must be > 0");
      if (sig.sigma < 0.0) s.at("sigma").fail("must be >= 0");
      if (s.has("target")) {
        const auto t = s.at("target");
        sig.target_fn.base = t.num_or("base", 0.0);
        if (t.has("coeffs")) {
          for (const auto& [a, k] : t.at("coeffs").object().items()) {
            sig.target_fn.coeffs[a] = JsonField(k, t.path() + ".coeffs." + a).num();
          }
        }
      }
      sig.value = s.num_or("value", sig.target_fn.base);
      sig.target = sig.target_fn.base;
      if (p.signals.contains(sig.id)) s.at("id").fail("duplicate signal");
      p.signals.emplace(sig.id, sig);
    }
  }
  if (f.has("actuators")) {
    const auto acts = f.at("actuators");
    for (const auto& [a, v] : acts.object().items()) {
      p.actuators[a] = JsonField(v, acts.path() + "." + a).num();
    }
  }
  return p;
}

void NodeConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
  if (name.empty()) bad("node: name must not be empty");
  if (port < 0 || port > 65535) bad("port: out of range");
  std::set<int> crate_numbers;
  for (const auto& c : crates) {
    if (!crate_numbers.insert(c.crate).second) {
      bad("crates: crate " + std::to_string(c.crate) + " declared twice");
    }
  }
  std::set<int> reachable;
  if (highway) {
    highway->validate();
    reachable.insert(highway->crates.begin(), highway->crates.end());
  }
  std::set<std::string> iface_ids;
  for (const auto& li : local_interfaces) {
    if (!iface_ids.insert(li.id).second) bad("local_interfaces: duplicate id " + li.id);
    if (reachable.contains(li.crate)) {
      bad("local_interfaces: crate " + std::to_string(li.crate) +
          " is already reachable another way");
    }
    reachable.insert(li.crate);
  }
  for (int c : crate_numbers) {
    if (!reachable.contains(c)) {
      bad("crates: crate " + std::to_string(c) + " has no highway or interface");
    }
  }
  for (const auto& d : databases) {
    for (const auto& ch : d.channels) {
      if (ch.io.path == db::IoPath::Local && !iface_ids.contains(ch.io.interface_id)) {
        bad("databases." + d.name + "." + ch.name + ": unknown interface " +
            ch.io.interface_id);
      }
      if (ch.io.path == db::IoPath::Highway && !highway) {
        bad("databases." + d.name + "." + ch.name + ": node has no highway");
      }
    }
  }
}

Json NodeConfig::to_json() const {
  Json j = Json::object();
  j["node"] = name;
  j["host"] = host;
  j["port"] = port;
  if (gateway_port) j["gateway_port"] = *gateway_port;
  if (!static_dir.empty()) j["static_dir"] = static_dir;
  j["directory"] = directory_path;
  j["tune_store"] = tune_store;
  j["seed"] = seed;
  j["scan_interval"] = scan_interval;
  if (highway) {
    j["highway"] = Json{{"clock_hz", highway->clock_hz},
                        {"cmd_frame_bits", highway->cmd_frame_bits},
                        {"resp_frame_bits", highway->resp_frame_bits},
                        {"gap_bits", highway->gap_bits},
                        {"crates", highway->crates}};
  }
  Json lis = Json::array();
  for (const auto& li : local_interfaces) {
    lis.push_back(Json{{"id", li.id}, {"crate", li.crate}, {"t_local_ns", li.cost_ns}});
  }
  j["local_interfaces"] = lis;
  Json cs = Json::array();
  for (const auto& c : crates) {
    Json mods = Json::array();
    for (const auto& m : c.modules) {
      Json mj = Json{{"station", m.station},
                     {"kind", camac::to_string(m.kind)},
                     {"channels", m.channels}};
      if (m.kind == camac::ModuleKind::Dac) mj["readback"] = m.readback;
      mods.push_back(mj);
    }
    cs.push_back(Json{{"crate", c.crate}, {"modules", mods}});
  }
  j["crates"] = cs;
  j["plant"] = dcs::to_json(plant);
  Json ws = Json::array();
  for (const auto& w : wiring) ws.push_back(wire_json(w));
  j["wiring"] = ws;
  Json dbs = Json::array();
  for (const auto& d : databases) dbs.push_back(dcs::to_json(d));
  j["databases"] = dbs;
  return j;
}

NodeConfig NodeConfig::from_json(const Json& j) {
  const JsonField root(j, "");
  root.object();
  NodeConfig c;
  c.name = root.at("node").str();
  c.host = root.str_or("host", "127.0.0.1");
  c.port = int(root.int_or("port", net::kDefaultPort));
  if (root.has("gateway_port") && !j["gateway_port"].is_null()) {
    c.gateway_port = int(root.at("gateway_port").integer());
  }
  c.static_dir = root.str_or("static_dir", "");
  c.directory_path = root.str_or("directory", "");
  c.tune_store = root.str_or("tune_store", "tunes");
  c.seed = static_cast<std::uint64_t>(root.int_or("seed", 1));
  c.scan_interval = root.num_or("scan_interval", 0.1);
  if (!(c.scan_interval > 0.0)) root.at("scan_interval").fail("must be > 0");

  if (root.has("highway") && !j["highway"].is_null()) {
    const auto h = root.at("highway");
    HighwayConfig hc;
    hc.clock_hz = h.num_or("clock_hz", hc.clock_hz);
    hc.cmd_frame_bits = int(h.int_or("cmd_frame_bits", hc.cmd_frame_bits));
    hc.resp_frame_bits = int(h.int_or("resp_frame_bits", hc.resp_frame_bits));
    hc.gap_bits = int(h.int_or("gap_bits", hc.gap_bits));
    if (h.has("crates")) {
      hc.crates.clear();
      const auto cr = h.at("crates");
      for (std::size_t i = 0; i < cr.size(); ++i) hc.crates.push_back(int(cr.at(i).integer()));
    }
    try {
      hc.validate();
    } catch (const Error& e) {
      h.fail(e.what());
    }
    c.highway = hc;
  }
  if (root.has("local_interfaces")) {
    const auto lis = root.at("local_interfaces");
    for (std::size_t i = 0; i < lis.size(); ++i) {
      const auto li = lis.at(i);
      LocalInterfaceConfig lc;
      lc.id = li.at("id").str();
      lc.crate = int(li.at("crate").integer());
      lc.cost_ns = li.int_or("t_local_ns", LocalInterface::kDefaultCostNs);
      if (lc.cost_ns <= 0) li.at("t_local_ns").fail("must be > 0");
      c.local_interfaces.push_back(lc);
    }
  }
  if (root.has("crates")) {
    const auto cs = root.at("crates");
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const auto cf = cs.at(i);
      CrateConfig cc;
      cc.crate = int(cf.at("crate").integer());
      if (cc.crate < 1 || cc.crate > camac::kMaxCrate) cf.at("crate").fail("outside 1..62");
      if (cf.has("modules")) {
        const auto ms = cf.at("modules");
        std::set<int> stations;
        for (std::size_t k = 0; k < ms.size(); ++k) {
          const auto mf = ms.at(k);
          ModuleConfig mc;
          mc.station = int(mf.at("station").integer());
          if (mc.station < 1 || mc.station > camac::kMaxStation) {
            mf.at("station").fail("outside 1..23");
          }
          if (!stations.insert(mc.station).second) mf.at("station").fail("occupied twice");
          try {
            mc.kind = camac::module_kind_from_string(mf.at("kind").str());
          } catch (const Error& e) {
            if (e.code() == ErrorCode::ConfigError) throw;
            mf.at("kind").fail("expected ADC|DAC|DIO");
          }
          mc.channels = int(mf.int_or("channels", 16));
          if (mc.channels < 1 || mc.channels > camac::kMaxModuleChannels) {
            mf.at("channels").fail("outside 1..16");
          }
          mc.readback = mf.bool_or("readback", true);
          cc.modules.push_back(mc);
        }
      }
      c.crates.push_back(cc);
    }
  }
  if (root.has("plant")) c.plant = plant_from_json(root.at("plant"));
  c.plant.rng_seed = c.seed;
  if (root.has("wiring")) {
    const auto ws = root.at("wiring");
    for (std::size_t i = 0; i < ws.size(); ++i) c.wiring.push_back(wire_from(ws.at(i)));
  }
  if (root.has("databases")) {
    const auto ds = root.at("databases");
    std::set<std::string> names;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      auto d = database_config_from_json(ds.at(i));
      if (d.home_node.empty()) d.home_node = c.name;
      if (!names.insert(d.name).second) ds.at(i).fail("duplicate database " + d.name);
      c.databases.push_back(std::move(d));
    }
  }
  c.validate();
  return c;
}

NodeConfig NodeConfig::load(const std::string& path) {
  return from_json(read_json_file(path));
}

namespace topology {
namespace {

db::ChannelDef readback(const std::string& name, const camac::Slot& slot, double gain,
                        const std::string& units, std::optional<db::Limits> limits) {
  db::ChannelDef d;
  d.name = name;
  d.io = db::IoBinding::highway(slot);
  d.direction = db::Direction::Readback;
  d.gain = gain;
  d.units = units;
  d.scan_period = 1.0;
  d.limits = limits;
  return d;
}

db::ChannelDef setpoint(const std::string& name, const camac::Slot& slot, double gain,
                        const std::string& units) {
  db::ChannelDef d;
  d.name = name;
  d.io = db::IoBinding::highway(slot);
  d.direction = db::Direction::Setpoint;
  d.gain = gain;
  d.units = units;
  return d;
}

std::string two_digit(int i) { return (i < 10 ? "0" : "") + std::to_string(i); }

}  // namespace

NodeConfig central(const Options& o) {
  NodeConfig c;
  c.name = "central";
  c.host = o.central_host;
  c.port = o.central_port;
  c.gateway_port = net::kDefaultGatewayPort;
  c.directory_path = o.directory_path;
  c.seed = o.seed;
  c.highway = HighwayConfig{};

  for (int n = 1; n <= 18; ++n) c.crates.push_back(CrateConfig{n, {}});
  // Cryogenics: inputs on crate 1, heater outputs on crate 2.
  c.crates[0].modules.push_back({3, camac::ModuleKind::Adc, 16, true});
  c.crates[1].modules.push_back({5, camac::ModuleKind::Dac, 4, true});
  // LINAC: sixty resonator amplitude setpoints, eight per crate on 3..10.
  for (int n = 3; n <= 10; ++n) {
    c.crates[n - 1].modules.push_back({1, camac::ModuleKind::Dac, 8, true});
  }
  // Three ion sources and two injectors.
  c.crates[10].modules.push_back({1, camac::ModuleKind::Dac, 3, true});
  c.crates[11].modules.push_back({1, camac::ModuleKind::Dac, 2, true});
  for (int n = 13; n <= 18; ++n) {
    c.crates[n - 1].modules.push_back({1, camac::ModuleKind::DigitalIo, 16, true});
  }

  c.plant = plant::default_cryo_plant(o.seed, o.sigma_scale);

  DatabaseConfig cryo{"cryo", "central", {}};
  const db::Limits temp_limits{2.0, 3.0, 6.0, 8.0};
  const db::Limits level_limits{20.0, 40.0, 95.0, 100.0};
  const db::Limits pressure_limits{50.0, 80.0, 160.0, 200.0};
  cryo.channels.push_back(readback("LHe_level", {1, 3, 0}, 0.001, "%", level_limits));
  c.wiring.push_back({"LHe_level", plant::WireKind::Signal, {1, 3, 0}, 1000.0});
  cryo.channels.push_back(readback("He_pressure", {1, 3, 1}, 0.01, "kPa", pressure_limits));
  c.wiring.push_back({"He_pressure", plant::WireKind::Signal, {1, 3, 1}, 100.0});
  for (int i = 1; i <= 8; ++i) {
    const std::string id = "T" + two_digit(i);
    cryo.channels.push_back(readback(id, {1, 3, 1 + i}, 0.001, "K", temp_limits));
    c.wiring.push_back({id, plant::WireKind::Signal, {1, 3, 1 + i}, 1000.0});
  }
  for (int h = 1; h <= 4; ++h) {
    const std::string id = "H" + std::to_string(h);
    cryo.channels.push_back(setpoint(id, {2, 5, h - 1}, 0.01, "W"));
    c.wiring.push_back({id, plant::WireKind::Actuator, {2, 5, h - 1}, 100.0});
  }
  c.databases.push_back(std::move(cryo));

  DatabaseConfig linac{"linac", "central", {}};
  for (int i = 1; i <= 60; ++i) {
    linac.channels.push_back(setpoint("R" + two_digit(i),
                                      {3 + (i - 1) / 8, 1, (i - 1) % 8}, 0.001, "MV/m"));
  }
  c.databases.push_back(std::move(linac));

  DatabaseConfig sources{"sources", "central", {}};
  for (int i = 1; i <= 3; ++i) {
    sources.channels.push_back(setpoint("src" + std::to_string(i) + "_hv",
                                        {11, 1, i - 1}, 0.001, "kV"));
  }
  c.databases.push_back(std::move(sources));

  DatabaseConfig injectors{"injectors", "central", {}};
  injectors.channels.push_back(setpoint("tandem_terminal", {12, 1, 0}, 0.0001, "MV"));
  injectors.channels.push_back(setpoint("pii_phase", {12, 1, 1}, 0.01, "deg"));
  c.databases.push_back(std::move(injectors));
  return c;
}

NodeConfig edge(const Options& o) {
  NodeConfig c;
  c.name = "edge";
  c.host = o.edge_host;
  c.port = o.edge_port;
  c.directory_path = o.directory_path;
  c.seed = o.seed;
  c.local_interfaces.push_back({kEdgeInterface, kEdgeCrate, LocalInterface::kDefaultCostNs});
  c.crates.push_back(CrateConfig{kEdgeCrate,
                                 {{2, camac::ModuleKind::Adc, 16, true},
                                  {4, camac::ModuleKind::Dac, 4, true}}});
  // Same plant roster as the central node: after the cable move the edge
  // crate sees the same cryostat.
  c.plant = plant::default_cryo_plant(o.seed, o.sigma_scale);
  return c;
}

net::Directory directory(const Options& o) {
  net::Directory d;
  d.version = 1;
  const net::Endpoint central_ep{"central", o.central_host, o.central_port};
  for (const char* db : {"cryo", "injectors", "linac", "sources"}) d.databases[db] = central_ep;
  d.nodes["central"] = central_ep;
  d.nodes["edge"] = net::Endpoint{"edge", o.edge_host, o.edge_port};
  return d;
}

Json cryo_migration_plan() {
  Json mapping = Json::array();
  for (int a = 0; a < 10; ++a) {
    mapping.push_back(Json{{"from", slot_json({1, 3, a})},
                           {"to", slot_json({kEdgeCrate, 2, a})}});
  }
  for (int a = 0; a < 4; ++a) {
    mapping.push_back(Json{{"from", slot_json({2, 5, a})},
                           {"to", slot_json({kEdgeCrate, 4, a})}});
  }
  return Json{{"database", "cryo"},
              {"from_node", "central"},
              {"to_node", "edge"},
              {"interface", kEdgeInterface},
              {"crate_mapping", mapping}};
}

}  // namespace topology

}  // namespace dcs
