#include "dcs/plant.hpp"

#include <cmath>
#include <numbers>

#include "dcs/clock.hpp"
#include "dcs/error.hpp"

namespace dcs::plant {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Uniform in (0, 1], never 0 so the log below is finite.
double unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

}  // namespace

double TargetFn::evaluate(const std::map<std::string, double>& actuators) const {
  double t = base;
  for (const auto& [id, k] : coeffs) {
    auto it = actuators.find(id);
    if (it != actuators.end()) t += k * it->second;
  }
  return t;
}

double noise(std::uint64_t seed, std::string_view signal_id,
             std::uint64_t step_index) {
  const std::uint64_t key =
      splitmix64(splitmix64(seed) ^ fnv1a(signal_id)) ^ (step_index * 2);
  const double u1 = unit_open(splitmix64(key));
  const double u2 = unit_open(splitmix64(key + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

PlantState step(PlantState s) {
  const double sqrt_dt = std::sqrt(s.dt);
  for (auto& [id, sig] : s.signals) {
    sig.target = sig.target_fn.evaluate(s.actuators);
    double next = sig.value + s.dt * (sig.target - sig.value) / sig.tau;
    if (sig.sigma > 0.0) {
      next += sig.sigma * sqrt_dt * noise(s.rng_seed, id, s.step_index);
    }
    sig.value = next;
  }
  ++s.step_index;
  return s;
}

PlantState default_cryo_plant(std::uint64_t seed, double sigma_scale) {
  PlantState st;
  st.rng_seed = seed;
  st.dt = 0.1;
  for (int h = 1; h <= 4; ++h) st.actuators["H" + std::to_string(h)] = 0.0;

  for (int i = 1; i <= 8; ++i) {
    PlantSignal s;
    s.id = (i < 10 ? "T0" : "T") + std::to_string(i);
    s.units = "K";
    s.tau = 60.0;
    s.sigma = 0.002 * sigma_scale;
    s.target_fn.base = 4.5;
    // Heater k warms resonators 2k-1 and 2k: 0.05 K per watt.
    s.target_fn.coeffs["H" + std::to_string((i + 1) / 2)] = 0.05;
    s.value = s.target = 4.5;
    st.signals.emplace(s.id, s);
  }
  PlantSignal level;
  level.id = "LHe_level";
  level.units = "%";
  level.tau = 600.0;
  level.sigma = 0.01 * sigma_scale;
  level.target_fn.base = 80.0;
  level.value = level.target = 80.0;
  st.signals.emplace(level.id, level);

  PlantSignal pressure;
  pressure.id = "He_pressure";
  pressure.units = "kPa";
  pressure.tau = 30.0;
  pressure.sigma = 0.05 * sigma_scale;
  pressure.target_fn.base = 120.0;
  pressure.value = pressure.target = 120.0;
  st.signals.emplace(pressure.id, pressure);
  return st;
}

Plant::Plant(PlantState state) : state_(std::move(state)) {
  if (!(state_.dt > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "plant dt must be > 0");
  }
  for (const auto& [id, s] : state_.signals) {
    if (!(s.tau > 0.0) || s.sigma < 0.0) {
      throw Error(ErrorCode::InvalidArgument,
                  "signal " + id + " needs tau > 0 and sigma >= 0");
    }
  }
}

std::optional<double> Plant::signal_value(std::string_view id) const {
  std::lock_guard lock(mu_);
  auto it = state_.signals.find(std::string(id));
  if (it == state_.signals.end()) return std::nullopt;
  return it->second.value;
}

void Plant::set_actuator(std::string_view id, double value) {
  std::lock_guard lock(mu_);
  state_.actuators[std::string(id)] = value;
}

void Plant::add_signal(PlantSignal s) {
  std::lock_guard lock(mu_);
  state_.signals[s.id] = std::move(s);
}

bool Plant::has_signal(std::string_view id) const {
  std::lock_guard lock(mu_);
  return state_.signals.contains(std::string(id));
}

bool Plant::has_actuator(std::string_view id) const {
  std::lock_guard lock(mu_);
  return state_.actuators.contains(std::string(id));
}

void Plant::step() {
  std::lock_guard lock(mu_);
  state_ = plant::step(std::move(state_));
}

void Plant::advance_to(std::int64_t t_ns) {
  std::lock_guard lock(mu_);
  const std::int64_t dt_ns = seconds_to_ns(state_.dt);
  while (static_cast<std::int64_t>(state_.step_index + 1) * dt_ns <= t_ns) {
    state_ = plant::step(std::move(state_));
  }
}

std::int64_t Plant::time_ns() const {
  std::lock_guard lock(mu_);
  return static_cast<std::int64_t>(state_.step_index) * seconds_to_ns(state_.dt);
}

PlantState Plant::snapshot() const {
  std::lock_guard lock(mu_);
  return state_;
}

namespace {

WireEntry wire(camac::CrateRack& rack, const std::string& id,
               const camac::Slot& slot, double gain, WireKind kind) {
  if (!(gain > 0.0) || !std::isfinite(gain)) {
    throw Error(ErrorCode::WiringConflict, "wiring gain must be positive");
  }
  if (!rack.has_crate(slot.crate)) {
    throw Error(ErrorCode::WiringConflict,
                "no crate " + std::to_string(slot.crate) + " for " + id);
  }
  return rack.with_all_crates([&](std::map<int, camac::Crate*>& crates) {
    camac::SimModule* target = crates.at(slot.crate)->module(slot.station);
    if (target == nullptr || !target->has_subaddress(slot.subaddress)) {
      throw Error(ErrorCode::WiringConflict,
                  "no module subaddress at " + camac::to_string(slot));
    }
    const bool is_input = target->kind() == camac::ModuleKind::Adc;
    if ((kind == WireKind::Signal) != is_input) {
      throw Error(ErrorCode::WiringConflict,
                  camac::to_string(slot) + " is a " +
                      std::string(camac::to_string(target->kind())) +
                      ", cannot carry " + id);
    }
    if (target->binding(slot.subaddress)) {
      throw Error(ErrorCode::WiringConflict,
                  camac::to_string(slot) + " already carries " +
                      target->binding(slot.subaddress)->signal_id);
    }
    // Drop any existing binding of this id, then attach the new one. Both
    // happen under every crate lock, so no cycle sees the intermediate state.
    for (auto& [n, crate] : crates) {
      for (const auto& [station, m] : crate->stations()) {
        auto* mod = crate->module(station);
        for (int a = 0; a < mod->channel_count(); ++a) {
          if (mod->binding(a) && mod->binding(a)->signal_id == id) mod->unbind(a);
        }
      }
    }
    target->bind(slot.subaddress, camac::SignalBinding{id, gain});
    return WireEntry{id, kind, slot, gain};
  });
}

}  // namespace

WireEntry wire_signal(camac::CrateRack& rack, const std::string& signal_id,
                      const camac::Slot& slot, double gain_counts_per_unit) {
  return wire(rack, signal_id, slot, gain_counts_per_unit, WireKind::Signal);
}

WireEntry wire_actuator(camac::CrateRack& rack, const std::string& actuator_id,
                        const camac::Slot& slot, double gain_counts_per_unit) {
  return wire(rack, actuator_id, slot, gain_counts_per_unit, WireKind::Actuator);
}

bool unwire(camac::CrateRack& rack, const std::string& id,
            const camac::Slot& slot) {
  if (!rack.has_crate(slot.crate)) return false;
  return rack.with_crate(slot.crate, [&](camac::Crate& c) {
    auto* m = c.module(slot.station);
    if (m == nullptr || !m->has_subaddress(slot.subaddress)) return false;
    const auto& b = m->binding(slot.subaddress);
    if (!b || b->signal_id != id) return false;
    m->unbind(slot.subaddress);
    return true;
  });
}

std::vector<WireEntry> list_bindings(camac::CrateRack& rack) {
  return rack.with_all_crates([](std::map<int, camac::Crate*>& crates) {
    std::vector<WireEntry> out;
    for (auto& [n, crate] : crates) {
      for (const auto& [station, m] : crate->stations()) {
        for (int a = 0; a < m.channel_count(); ++a) {
          if (const auto& b = m.binding(a)) {
            out.push_back(WireEntry{
                b->signal_id,
                m.kind() == camac::ModuleKind::Adc ? WireKind::Signal
                                                   : WireKind::Actuator,
                camac::Slot{n, station, a}, b->gain_counts_per_unit});
          }
        }
      }
    }
    return out;
  });
}

std::optional<WireEntry> find_binding(camac::CrateRack& rack,
                                      const std::string& id) {
  for (auto& e : list_bindings(rack)) {
    if (e.id == id) return e;
  }
  return std::nullopt;
}

}  // namespace dcs::plant
