#include <cmath>

#include "doctest.h"
#include "dcs/error.hpp"
#include "dcs/plant.hpp"

using namespace dcs;
using namespace dcs::plant;

namespace {

PlantState single(double value, double target, double tau, double sigma) {
  PlantState st;
  PlantSignal s;
  s.id = "x";
  s.value = value;
  s.tau = tau;
  s.sigma = sigma;
  s.target_fn.base = target;
  st.signals.emplace("x", s);
  return st;
}

camac::CrateRack& rack_with_adcs(camac::CrateRack& rack) {
  rack.add_crate(1);
  rack.add_crate(19);
  rack.install_module(camac::Slot{1, 3, 0}, camac::SimModule(camac::ModuleKind::Adc, 16));
  rack.install_module(camac::Slot{19, 2, 0}, camac::SimModule(camac::ModuleKind::Adc, 16));
  rack.install_module(camac::Slot{1, 5, 0}, camac::SimModule(camac::ModuleKind::Dac, 4));
  return rack;
}

}  // namespace

TEST_CASE("noise-free signal at its target stays put") {
  const auto s = step(single(3.25, 3.25, 7.0, 0.0));
  CHECK(s.signals.at("x").value == 3.25);
  CHECK(s.step_index == 1);
}

TEST_CASE("one Euler step toward the target") {
  const auto s = step(single(0.0, 4.5, 10.0, 0.0));
  const double expect = 0.0 + 0.1 * (4.5 - 0.0) / 10.0;
  CHECK(s.signals.at("x").value == doctest::Approx(expect));
  CHECK(s.signals.at("x").value == doctest::Approx(0.045));
}

TEST_CASE("noise-free convergence is monotone") {
  auto s = single(0.0, 4.5, 2.0, 0.0);
  double prev = 0.0;
  for (int i = 0; i < 500; ++i) {
    s = step(s);
    const double v = s.signals.at("x").value;
    CHECK(v >= prev);
    CHECK(v <= 4.5);
    prev = v;
  }
  CHECK(prev == doctest::Approx(4.5).epsilon(1e-6));
}

TEST_CASE("same seed gives the same history") {
  auto a = default_cryo_plant(42);
  auto b = default_cryo_plant(42);
  for (int i = 0; i < 1000; ++i) {
    a = step(a);
    b = step(b);
  }
  CHECK(a == b);
  auto c = default_cryo_plant(43);
  for (int i = 0; i < 1000; ++i) c = step(c);
  CHECK_FALSE(a == c);
}

TEST_CASE("noise is a pure function of its inputs and roughly standard") {
  CHECK(noise(1, "T01", 5) == noise(1, "T01", 5));
  CHECK(noise(1, "T01", 5) != noise(1, "T02", 5));
  double sum = 0, sq = 0;
  constexpr int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = noise(9, "x", static_cast<std::uint64_t>(i));
    sum += z;
    sq += z * z;
  }
  CHECK(std::fabs(sum / n) < 0.05);
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("frozen default plant never moves") {
  auto s = default_cryo_plant(1, 0.0);
  const auto start = s;
  for (int i = 0; i < 100; ++i) s = step(s);
  for (const auto& [id, sig] : s.signals) CHECK(sig.value == start.signals.at(id).value);
}

TEST_CASE("heater raises the targets of its pair") {
  auto s = default_cryo_plant(1, 0.0);
  s.actuators["H2"] = 10.0;
  s = step(s);
  CHECK(s.signals.at("T03").target == doctest::Approx(4.5 + 0.05 * 10.0));
  CHECK(s.signals.at("T04").target == doctest::Approx(5.0));
  CHECK(s.signals.at("T01").target == doctest::Approx(4.5));
}

TEST_CASE("Plant advances in whole steps") {
  Plant p(single(0.0, 1.0, 1.0, 0.0));
  p.advance_to(250'000'000);
  CHECK(p.snapshot().step_index == 2);
  CHECK(p.time_ns() == 200'000'000);
  p.advance_to(100'000'000);
  CHECK(p.snapshot().step_index == 2);
}

TEST_CASE("rewiring moves the signal between crates") {
  camac::CrateRack rack;
  rack_with_adcs(rack);
  Plant p(default_cryo_plant(1, 0.0));
  wire_signal(rack, "LHe_level", camac::Slot{1, 3, 0}, 1000.0);
  auto r = rack.execute(camac::Command::read(camac::Slot{1, 3, 0}), &p);
  CHECK(r.q);
  CHECK(r.read_data == 80'000);

  wire_signal(rack, "LHe_level", camac::Slot{19, 2, 0}, 1000.0);
  CHECK(rack.execute(camac::Command::read(camac::Slot{1, 3, 0}), &p) == camac::Response{0, false, true});
  r = rack.execute(camac::Command::read(camac::Slot{19, 2, 0}), &p);
  CHECK(r.q);
  CHECK(r.read_data == 80'000);

  const auto all = list_bindings(rack);
  CHECK(all.size() == 1);
  CHECK(find_binding(rack, "LHe_level")->slot == camac::Slot{19, 2, 0});
}

TEST_CASE("wiring conflicts") {
  camac::CrateRack rack;
  rack_with_adcs(rack);
  auto expect_conflict = [](auto&& fn) {
    try {
      fn();
      FAIL("no conflict");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::WiringConflict);
    }
  };
  expect_conflict([&] { wire_signal(rack, "T01", camac::Slot{1, 9, 0}, 1.0); });
  expect_conflict([&] { wire_signal(rack, "T01", camac::Slot{1, 5, 0}, 1.0); });
  wire_signal(rack, "T01", camac::Slot{1, 3, 1}, 1.0);
  expect_conflict([&] { wire_signal(rack, "T02", camac::Slot{1, 3, 1}, 1.0); });
  expect_conflict([&] { wire_actuator(rack, "H1", camac::Slot{1, 3, 2}, 1.0); });
  wire_actuator(rack, "H1", camac::Slot{1, 5, 0}, 100.0);
  CHECK(list_bindings(rack).size() == 2);
}

TEST_CASE("unwire only at the named slot") {
  camac::CrateRack rack;
  rack_with_adcs(rack);
  wire_signal(rack, "T01", camac::Slot{1, 3, 1}, 1.0);
  CHECK_FALSE(unwire(rack, "T01", camac::Slot{1, 3, 2}));
  CHECK(unwire(rack, "T01", camac::Slot{1, 3, 1}));
  CHECK_FALSE(find_binding(rack, "T01"));
}
