#include <random>

#include "doctest.h"
#include "dcs/camac.hpp"
#include "dcs/error.hpp"

using namespace dcs;
using namespace dcs::camac;

namespace {

struct ConstPlant : PlantIo {
  std::map<std::string, double, std::less<>> signals;
  std::map<std::string, double, std::less<>> actuators;
  std::optional<double> signal_value(std::string_view id) const override {
    auto it = signals.find(id);
    if (it == signals.end()) return std::nullopt;
    return it->second;
  }
  void set_actuator(std::string_view id, double v) override { actuators[std::string(id)] = v; }
};

}  // namespace

TEST_CASE("empty station gives no X and no Q") {
  Crate c(1);
  const auto r = execute_cycle(c, Command::read(Slot{1, 5, 0}, 0), nullptr);
  CHECK(r == Response{0, false, false});
}

TEST_CASE("DAC write then readback") {
  Crate c(1);
  c.install_module(4, SimModule(ModuleKind::Dac, 4, true));
  const auto w = execute_cycle(c, Command::write(Slot{1, 4, 0}, 4096), nullptr);
  CHECK(w.x);
  CHECK(w.q);
  const auto r = execute_cycle(c, Command::read(Slot{1, 4, 0}), nullptr);
  CHECK(r == Response{4096, true, true});
}

TEST_CASE("DAC without readback refuses reads with Q=0") {
  Crate c(1);
  c.install_module(4, SimModule(ModuleKind::Dac, 4, false));
  const auto r = execute_cycle(c, Command::read(Slot{1, 4, 0}), nullptr);
  CHECK(r == Response{0, false, true});
}

TEST_CASE("ADC quantizes the bound signal") {
  Crate c(1);
  SimModule adc(ModuleKind::Adc, 16);
  adc.bind(0, SignalBinding{"s", 1000.0});
  c.install_module(3, std::move(adc));
  ConstPlant p;
  p.signals["s"] = 2.5;
  const auto r = execute_cycle(c, Command::read(Slot{1, 3, 0}), &p);
  CHECK(r.read_data == static_cast<std::uint32_t>(std::llround(2.5 * 1000.0)));
  CHECK(r.q);
  CHECK(r.x);

  SUBCASE("unbound subaddress") {
    const auto u = execute_cycle(c, Command::read(Slot{1, 3, 1}), &p);
    CHECK(u == Response{0, false, true});
  }
  SUBCASE("writes are refused") {
    const auto u = execute_cycle(c, Command::write(Slot{1, 3, 0}, 7), &p);
    CHECK(u == Response{0, false, true});
  }
}

TEST_CASE("function groups on an occupied station") {
  Crate c(2);
  c.install_module(1, SimModule(ModuleKind::DigitalIo, 8));
  CHECK(execute_cycle(c, Command::make(Address::make(2, 1, 0, 8)), nullptr) == Response{0, false, true});
  for (int f = 24; f <= 31; ++f) {
    CHECK(execute_cycle(c, Command::make(Address::make(2, 1, 0, f)), nullptr) == Response{0, true, true});
  }
}

TEST_CASE("actuator follows DAC writes") {
  Crate c(1);
  SimModule dac(ModuleKind::Dac, 4);
  dac.bind(2, SignalBinding{"H1", 100.0});
  c.install_module(5, std::move(dac));
  ConstPlant p;
  execute_cycle(c, Command::write(Slot{1, 5, 2}, 1234), &p);
  CHECK(p.actuators.at("H1") == doctest::Approx(12.34));
}

TEST_CASE("crate mismatch is a routing error") {
  Crate c(1);
  try {
    execute_cycle(c, Command::read(Slot{2, 1, 0}), nullptr);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RoutingError);
  }
}

TEST_CASE("installation conflicts and capacity") {
  Crate c(1);
  c.install_module(3, SimModule(ModuleKind::Adc, 16));
  CHECK(c.stations().size() == 1);
  CHECK_THROWS_AS(c.install_module(3, SimModule(ModuleKind::Adc, 16)), Error);

  Crate full(2);
  for (int n = 1; n <= kMaxStation; ++n) full.install_module(n, SimModule(ModuleKind::Dac, 1));
  CHECK(full.stations().size() == 23);
  for (int n = 0; n <= 24; ++n) {
    try {
      full.install_module(n, SimModule(ModuleKind::Dac, 1));
      FAIL("installed at " << n);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InstallConflict);
    }
  }
}

TEST_CASE("quantize rounds half away from zero and clamps") {
  CHECK(quantize(2.5, 1000.0) == 2500);
  CHECK(quantize(0.0025, 1000.0) == 3);
  CHECK(quantize(0.0024999, 1000.0) == 2);
  CHECK(quantize(-1.0, 1000.0) == 0);
  CHECK(quantize(1e9, 1000.0) == kMaxData);
  CHECK(quantize(std::nan(""), 1.0) == 0);
}

TEST_CASE("latched values survive write/read round trip") {
  Crate c(1);
  c.install_module(1, SimModule(ModuleKind::Dac, 1));
  std::mt19937_64 rng(7);
  std::vector<std::uint32_t> values{0, kMaxData};
  for (int i = 0; i < 100; ++i) values.push_back(static_cast<std::uint32_t>(rng() & kMaxData));
  for (auto v : values) {
    execute_cycle(c, Command::write(Slot{1, 1, 0}, v), nullptr);
    CHECK(execute_cycle(c, Command::read(Slot{1, 1, 0}), nullptr).read_data == v);
  }
}

TEST_CASE("address validation") {
  CHECK_THROWS_AS(Address::make(0, 1, 0, 0), Error);
  CHECK_THROWS_AS(Address::make(63, 1, 0, 0), Error);
  CHECK_THROWS_AS(Address::make(1, 24, 0, 0), Error);
  CHECK_THROWS_AS(Address::make(1, 1, 16, 0), Error);
  CHECK_THROWS_AS(Address::make(1, 1, 0, 32), Error);
  CHECK_THROWS_AS(Command::make(Address::make(1, 1, 0, 0), 5u), Error);
  CHECK_THROWS_AS(Command::make(Address::make(1, 1, 0, 16)), Error);
}

TEST_CASE("rack serializes per crate and reports unknown crates") {
  CrateRack rack;
  rack.add_crate(1);
  rack.install_module(Slot{1, 2, 0}, SimModule(ModuleKind::Dac, 2));
  CHECK(rack.execute(Command::write(Slot{1, 2, 1}, 9), nullptr).q);
  CHECK(rack.execute(Command::read(Slot{1, 2, 1}), nullptr).read_data == 9);
  try {
    rack.execute(Command::read(Slot{5, 2, 1}), nullptr);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoSuchCrate);
  }
}
