#include "doctest.h"
#include "dcs/deployment.hpp"
#include "dcs/migration.hpp"

using namespace dcs;
using namespace dcs::migration;

namespace {

topology::Options frozen() {
  topology::Options o;
  o.sigma_scale = 0.0;
  return o;
}

MigrationPlan cryo_plan() { return MigrationPlan::from_json(topology::cryo_migration_plan()); }

struct Injected : Error {
  Injected() : Error(ErrorCode::IoFault, "injected") {}
};

}  // namespace

TEST_CASE("plan parsing") {
  const auto p = cryo_plan();
  CHECK(p.database == "cryo");
  CHECK(p.crate_mapping.size() == 14);
  CHECK(MigrationPlan::from_json(p.to_json()).to_json() == p.to_json());

  Json dup = p.to_json();
  dup["crate_mapping"].push_back(dup["crate_mapping"][0]);
  CHECK_THROWS_AS(MigrationPlan::from_json(dup), Error);
  Json missing = p.to_json();
  missing.erase("interface");
  CHECK_THROWS_AS(MigrationPlan::from_json(missing), Error);
}

TEST_CASE("rebind moves highway channels onto the interface") {
  Deployment dep(frozen());
  const auto defs = dep.central().database("cryo")->definitions();
  const auto out = rebind(defs, cryo_plan());
  REQUIRE(out.size() == defs.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].io.path == db::IoPath::Local);
    CHECK(out[i].io.interface_id == topology::kEdgeInterface);
    CHECK(out[i].io.slot.crate == topology::kEdgeCrate);
    CHECK(out[i].gain == defs[i].gain);
  }
}

TEST_CASE("default cryo migration") {
  Deployment dep(frozen());
  auto& c = dep.client();
  const auto central_ep = c.directory().resolve("cryo:LHe_level");
  CHECK(central_ep.node == "central");
  const auto pre = read_all(c, "cryo");
  std::vector<std::string> log;
  const auto rep = migrate(c, cryo_plan(), Options{{}, [&](const std::string& s) { log.push_back(s); }});

  CHECK(rep.new_version == rep.old_version + 1);
  CHECK(dep.directory()->load().version == rep.new_version);
  CHECK(dep.directory()->load().resolve("cryo:LHe_level").node == "edge");
  CHECK(rep.steps == std::vector<std::string>{"snapshot", "copy", "rebind", "rewire", "publish", "retire"});
  CHECK(rep.warnings.empty());
  CHECK(log.size() == 6);
  CHECK_THROWS_AS(dep.central().database("cryo"), Error);
  CHECK(dep.edge().database("cryo")->channel_names().size() == 14);
  CHECK(dep.central().directory_version() == rep.new_version);

  const auto post = read_all(c, "cryo");
  const auto v = verify(pre, post, 0.0);
  CHECK(v.all_pass());
  CHECK(v.checks.size() == 14);
}

TEST_CASE("setpoints carry over") {
  Deployment dep(frozen());
  dep.client().write("cryo:H2", 7.5);
  dep.advance(2.0);
  migrate(dep.client(), cryo_plan());
  CHECK(dep.client().read("cryo:H2").value == doctest::Approx(7.5));
  CHECK(dep.plant().snapshot().actuators.at("H2") == doctest::Approx(7.5));
}

TEST_CASE("incomplete plan changes nothing") {
  Deployment dep(frozen());
  const std::string before = dep.state_dump().dump();
  auto plan = cryo_plan();
  plan.crate_mapping.pop_back();
  try {
    migrate(dep.client(), plan);
    FAIL("migrated");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PlanIncomplete);
  }
  CHECK(dep.state_dump().dump() == before);
}

TEST_CASE("unreachable target aborts cleanly") {
  Deployment dep(frozen());
  const std::string before = dep.state_dump().dump();
  dep.kill("edge");
  try {
    migrate(dep.client(), cryo_plan());
    FAIL("migrated");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MigrateAborted);
  }
  dep.revive("edge");
  CHECK(dep.state_dump().dump() == before);
}

TEST_CASE("a fault after any pre-commit step rolls back byte for byte") {
  for (Step at : {Step::Snapshot, Step::Copy, Step::Rebind, Step::Rewire}) {
    CAPTURE(to_string(at));
    Deployment dep(frozen());
    dep.client().write("cryo:H4", 3.0);
    const std::string before = dep.state_dump().dump();
    Options opts;
    opts.after_step = [at](Step s) {
      if (s == at) throw Injected();
    };
    try {
      migrate(dep.client(), cryo_plan(), opts);
      FAIL("migrated");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MigrateAborted);
    }
    CHECK(dep.state_dump().dump() == before);
    CHECK(dep.client().read("cryo:LHe_level").value == doctest::Approx(80.0));
    // and the system can still migrate afterwards
    CHECK(migrate(dep.client(), cryo_plan()).steps.size() == 6);
  }
}

TEST_CASE("a fault after publish is only a warning") {
  Deployment dep(frozen());
  Options opts;
  opts.after_step = [](Step s) {
    if (s == Step::Publish) throw Injected();
  };
  const auto rep = migrate(dep.client(), cryo_plan(), opts);
  CHECK(rep.warnings.size() == 1);
  CHECK(dep.directory()->load().resolve("cryo").node == "edge");
}

TEST_CASE("migrated reads stay off the highway and survive the central node") {
  Deployment dep(frozen());
  migrate(dep.client(), cryo_plan());
  CHECK(dep.central().database_names().size() == 3);

  const auto hw2 = dep.central().highway()->transactions();
  for (int i = 0; i < 50; ++i) read_all(dep.client(), "cryo");
  CHECK(dep.central().highway()->transactions() == hw2);

  dep.kill("central");
  auto fresh = dep.make_client();
  CHECK(fresh->read("cryo:T05").value == doctest::Approx(4.5));
  CHECK_THROWS_AS(fresh->read("linac:R01"), Error);
}

TEST_CASE("subscriptions follow the database") {
  Deployment dep(frozen());
  auto& c = dep.client();
  dep.advance(1.0);
  std::vector<double> seen;
  c.subscribe("cryo:T07", [&](const std::string&, const db::ChannelState& s) { seen.push_back(s.value); });
  c.poll();
  CHECK(seen.size() == 1);
  migrate(c, cryo_plan());
  c.poll();
  const auto n_after_migrate = seen.size();
  CHECK(n_after_migrate <= 2);
  for (double v : seen) CHECK(v == doctest::Approx(4.5));
  c.write("cryo:H4", 30.0);
  dep.advance(5.0);
  c.poll();
  REQUIRE(seen.size() > n_after_migrate);
  CHECK(seen.back() > 4.5);
}

TEST_CASE("verify") {
  const std::map<std::string, double> pre{{"d:a", 1.0}, {"d:b", 2.0}};
  auto post = pre;
  post["d:b"] = 2.001;
  CHECK_FALSE(verify(pre, post, 0.0).all_pass());
  CHECK(verify(pre, post, 0.0011).all_pass());
  post.erase("d:a");
  try {
    verify(pre, post, 1.0);
    FAIL("verified");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::VerifyMismatch);
  }
}
