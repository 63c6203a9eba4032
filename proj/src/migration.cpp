#include "dcs/migration.hpp"

#include <cmath>
#include <set>

#include "dcs/config.hpp"

namespace dcs::migration {

namespace {

camac::Slot slot_from(const JsonField& f) {
  try {
    return camac::Slot::make(static_cast<int>(f.at("crate").integer()),
                             static_cast<int>(f.at("station").integer()),
                             static_cast<int>(f.at("sub").integer()));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    f.fail(e.what());
  }
}

Json slot_json(const camac::Slot& s) {
  return Json{{"crate", s.crate}, {"station", s.station}, {"sub", s.subaddress}};
}

Json admin(ChannelAccessClient& client, const std::string& node, Json req) {
  Json reply = client.request_node(node, std::move(req));
  net::throw_if_err(reply);
  return reply;
}

struct Rewired {
  std::string id;
  std::string kind;
  double gain;
  camac::Slot from;
  camac::Slot to;
};

}  // namespace

Json MigrationPlan::to_json() const {
  Json mapping = Json::array();
  for (const auto& m : crate_mapping) {
    mapping.push_back(Json{{"from", slot_json(m.from)}, {"to", slot_json(m.to)}});
  }
  return Json{{"database", database},
              {"from_node", from_node},
              {"to_node", to_node},
              {"interface", interface_id},
              {"crate_mapping", std::move(mapping)}};
}

MigrationPlan MigrationPlan::from_json(const Json& j) {
  JsonField f(j, "plan");
  f.object();
  MigrationPlan p;
  p.database = f.at("database").str();
  p.from_node = f.str_or("from_node", "");
  p.to_node = f.str_or("to_node", "");
  p.interface_id = f.at("interface").str();
  const auto mapping = f.at("crate_mapping");
  std::set<camac::Slot> seen_from, seen_to;
  for (std::size_t i = 0; i < mapping.size(); ++i) {
    const auto m = mapping.at(i);
    SlotMapping sm{slot_from(m.at("from")), slot_from(m.at("to"))};
    if (!seen_from.insert(sm.from).second) m.at("from").fail("slot mapped twice");
    if (!seen_to.insert(sm.to).second) m.at("to").fail("slot is the target of two mappings");
    p.crate_mapping.push_back(sm);
  }
  return p;
}

MigrationPlan MigrationPlan::load(const std::string& path) {
  return from_json(read_json_file(path));
}

std::string_view to_string(Step s) {
  switch (s) {
    case Step::Snapshot: return "snapshot";
    case Step::Copy: return "copy";
    case Step::Rebind: return "rebind";
    case Step::Rewire: return "rewire";
    case Step::Publish: return "publish";
    case Step::Retire: return "retire";
  }
  return "?";
}

Json Report::to_json() const {
  Json pre_j = Json::object();
  for (const auto& [k, v] : pre) pre_j[k] = v;
  return Json{{"database", database},
              {"from_node", from_node},
              {"to_node", to_node},
              {"old_version", old_version},
              {"new_version", new_version},
              {"steps", steps},
              {"warnings", warnings},
              {"pre", std::move(pre_j)}};
}

std::vector<db::ChannelDef> rebind(const std::vector<db::ChannelDef>& defs,
                                   const MigrationPlan& plan) {
  std::vector<db::ChannelDef> out;
  std::vector<std::string> unmapped;
  for (auto def : defs) {
    if (def.io.path == db::IoPath::Highway) {
      auto it = std::find_if(plan.crate_mapping.begin(), plan.crate_mapping.end(),
                             [&](const SlotMapping& m) { return m.from == def.io.slot; });
      if (it == plan.crate_mapping.end()) {
        unmapped.push_back(def.name + " (" + camac::to_string(def.io.slot) + ")");
      } else {
        def.io = db::IoBinding::local(plan.interface_id, it->to);
      }
    }
    out.push_back(std::move(def));
  }
  if (!unmapped.empty()) {
    std::string msg = "no mapping for";
    for (const auto& u : unmapped) msg += " " + u;
    throw Error(ErrorCode::PlanIncomplete, msg);
  }
  return out;
}

std::map<std::string, double> read_all(ChannelAccessClient& client, const std::string& db) {
  std::map<std::string, double> out;
  for (const auto& def : client.list(db)) {
    if (def.io.path == db::IoPath::None) continue;
    const std::string ch = db + ":" + def.name;
    out[ch] = client.read(ch).value;
  }
  return out;
}

Report migrate(ChannelAccessClient& client, const MigrationPlan& plan, const Options& opts) {
  auto log = [&](const std::string& s) {
    if (opts.log) opts.log(s);
  };
  client.refresh();
  const net::Directory dir = client.directory_store()->load();

  Report rep;
  rep.database = plan.database;
  rep.from_node = plan.from_node.empty() ? dir.resolve(plan.database).node : plan.from_node;
  rep.to_node = plan.to_node;
  rep.old_version = dir.version;
  if (rep.to_node.empty()) throw Error(ErrorCode::ConfigError, "plan names no target node");
  if (dir.resolve(plan.database).node != rep.from_node) {
    throw Error(ErrorCode::MigrateAborted,
                plan.database + " is not homed on " + rep.from_node);
  }
  const auto to_ep = dir.node(rep.to_node);
  if (!to_ep) {
    throw Error(ErrorCode::MigrateAborted, "node " + rep.to_node + " is not in the directory");
  }
  if (rep.to_node == rep.from_node) {
    throw Error(ErrorCode::MigrateAborted, "source and target are the same node");
  }

  // Preconditions: nothing is touched until these pass.
  const Json got = admin(client, rep.from_node, Json{{"t", "db_get"}, {"db", plan.database}});
  DatabaseConfig original = database_config_from_json(JsonField(got.at("database"), "database"));
  DatabaseConfig moved = original;
  moved.channels = rebind(original.channels, plan);
  moved.home_node = rep.to_node;
  try {
    admin(client, rep.to_node, Json{{"t", "list"}});
  } catch (const Error& e) {
    throw Error(ErrorCode::MigrateAborted,
                "target " + rep.to_node + " unreachable: " + std::string(e.what()));
  }

  bool staged = false;
  bool activated = false;
  std::vector<Rewired> rewired;
  auto done = [&](Step s) {
    rep.steps.emplace_back(to_string(s));
    log("step " + std::to_string(static_cast<int>(s)) + " " + std::string(to_string(s)) + " ok");
    if (opts.after_step) opts.after_step(s);
  };

  try {
    rep.pre = read_all(client, plan.database);
    done(Step::Snapshot);

    admin(client, rep.to_node, Json{{"t", "db_stage"}, {"database", to_json(moved)}});
    staged = true;
    done(Step::Copy);

    Json values = Json::object();
    for (const auto& def : moved.channels) {
      if (def.direction != db::Direction::Setpoint || def.io.path == db::IoPath::None) continue;
      values[def.name] = rep.pre.at(plan.database + ":" + def.name);
    }
    admin(client, rep.to_node,
          Json{{"t", "db_init"}, {"db", plan.database}, {"values", std::move(values)}});
    done(Step::Rebind);

    const Json wiring = admin(client, rep.from_node, Json{{"t", "wiring"}});
    for (const auto& m : plan.crate_mapping) {
      for (const auto& b : wiring.at("bindings")) {
        const camac::Slot at{b.at("crate").get<int>(), b.at("station").get<int>(),
                             b.at("sub").get<int>()};
        if (at != m.from) continue;
        Rewired rw{b.at("signal").get<std::string>(), b.at("kind").get<std::string>(),
                   b.at("gain").get<double>(), m.from, m.to};
        Json w{{"t", "wire"}, {"signal", rw.id}, {"kind", rw.kind}, {"gain", rw.gain}};
        w.update(slot_json(m.to));
        admin(client, rep.to_node, std::move(w));
        rewired.push_back(rw);
        Json u{{"t", "unwire"}, {"signal", rw.id}};
        u.update(slot_json(m.from));
        admin(client, rep.from_node, std::move(u));
      }
    }
    done(Step::Rewire);

    admin(client, rep.to_node, Json{{"t", "db_activate"}, {"db", plan.database}});
    activated = true;
    net::Directory next = dir;
    next.version = dir.version + 1;
    next.databases[plan.database] = *to_ep;
    client.directory_store()->commit(next);
    rep.new_version = next.version;
  } catch (const Error& e) {
    log(std::string("failed: ") + e.what() + "; rolling back");
    std::vector<std::string> problems;
    auto undo = [&](const std::string& node, Json req) {
      try {
        admin(client, node, std::move(req));
      } catch (const Error& ue) {
        problems.push_back(ue.what());
      }
    };
    if (activated) undo(rep.to_node, Json{{"t", "db_deactivate"}, {"db", plan.database}});
    for (auto it = rewired.rbegin(); it != rewired.rend(); ++it) {
      Json u{{"t", "unwire"}, {"signal", it->id}};
      u.update(slot_json(it->to));
      undo(rep.to_node, std::move(u));
      Json w{{"t", "wire"}, {"signal", it->id}, {"kind", it->kind}, {"gain", it->gain}};
      w.update(slot_json(it->from));
      undo(rep.from_node, std::move(w));
    }
    if (staged) undo(rep.to_node, Json{{"t", "db_unstage"}, {"db", plan.database}});
    std::string msg = std::string("migration of ") + plan.database + " aborted: " + e.what();
    if (!problems.empty()) {
      msg += "; rollback problems:";
      for (const auto& p : problems) msg += " " + p;
    }
    throw Error(ErrorCode::MigrateAborted, msg);
  }

  // Committed: from here on problems are reported, not rolled back.
  rep.steps.emplace_back(to_string(Step::Publish));
  log("step 5 publish ok (directory version " + std::to_string(rep.new_version) + ")");
  for (const auto& ep : client.directory_store()->load().all_nodes()) {
    try {
      admin(client, ep.node, Json{{"t", "reload"}});
    } catch (const Error& e) {
      rep.warnings.push_back("reload on " + ep.node + ": " + e.what());
    }
  }
  client.refresh();
  try {
    if (opts.after_step) opts.after_step(Step::Publish);
  } catch (const Error& e) {
    rep.warnings.push_back(e.what());
  }

  try {
    admin(client, rep.from_node, Json{{"t", "db_drop"}, {"db", plan.database}});
    rep.steps.emplace_back(to_string(Step::Retire));
    log("step 6 retire ok");
  } catch (const Error& e) {
    rep.warnings.push_back("retire on " + rep.from_node + ": " + e.what());
  }
  return rep;
}

bool VerifyReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const ChannelCheck& c) { return c.pass; });
}

Json VerifyReport::to_json() const {
  Json cs = Json::array();
  for (const auto& c : checks) {
    cs.push_back(Json{{"channel", c.channel}, {"pre", c.pre}, {"post", c.post}, {"pass", c.pass}});
  }
  return Json{{"tolerance", tolerance}, {"pass", all_pass()}, {"channels", std::move(cs)}};
}

VerifyReport verify(const std::map<std::string, double>& pre,
                    const std::map<std::string, double>& post, double tolerance) {
  std::vector<std::string> diff;
  for (const auto& [k, v] : pre) {
    if (!post.contains(k)) diff.push_back("-" + k);
  }
  for (const auto& [k, v] : post) {
    if (!pre.contains(k)) diff.push_back("+" + k);
  }
  if (!diff.empty()) {
    std::string msg = "channel sets differ:";
    for (const auto& d : diff) msg += " " + d;
    throw Error(ErrorCode::VerifyMismatch, msg);
  }
  VerifyReport r;
  r.tolerance = tolerance;
  for (const auto& [k, v] : pre) {
    const double p = post.at(k);
    r.checks.push_back(ChannelCheck{k, v, p, std::fabs(p - v) <= tolerance});
  }
  return r;
}

}  // namespace dcs::migration
