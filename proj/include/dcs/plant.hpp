#pragma once

// Seeded first-order model of the cryogenic plant, plus the wiring that
// connects plant signals and actuators to crate module subaddresses.

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dcs/camac.hpp"

namespace dcs::plant {

// Steady-state target = base + sum(coeff[a] * actuator[a]).
struct TargetFn {
  double base = 0.0;
  std::map<std::string, double> coeffs;

  double evaluate(const std::map<std::string, double>& actuators) const;
  bool operator==(const TargetFn&) const = default;
};

struct PlantSignal {
  std::string id;
  std::string units;
  double value = 0.0;
  double tau = 1.0;    // seconds
  double sigma = 0.0;  // per sqrt(second)
  TargetFn target_fn;
  double target = 0.0;  // last evaluated target

  bool operator==(const PlantSignal&) const = default;
};

struct PlantState {
  std::map<std::string, PlantSignal> signals;
  std::map<std::string, double> actuators;
  std::uint64_t rng_seed = 1;
  double dt = 0.1;
  std::uint64_t step_index = 0;

  bool operator==(const PlantState&) const = default;
};

// Standard normal sample determined only by (seed, signal id, step index).
double noise(std::uint64_t seed, std::string_view signal_id,
             std::uint64_t step_index);

// Advances every signal one Euler step of dt; targets are refreshed from the
// current actuator values first.
PlantState step(PlantState state);

// The default cryogenics roster: 8 resonator temperatures, a helium dewar
// level, a pressure, and 4 heaters that raise pairs of temperature targets.
PlantState default_cryo_plant(std::uint64_t seed = 1, double sigma_scale = 1.0);

// Thread-safe owner of a PlantState that modules read through PlantIo.
class Plant final : public camac::PlantIo {
 public:
  explicit Plant(PlantState state);

  std::optional<double> signal_value(std::string_view id) const override;
  void set_actuator(std::string_view id, double value) override;

  void add_signal(PlantSignal s);
  bool has_signal(std::string_view id) const;
  bool has_actuator(std::string_view id) const;

  void step();
  // Steps until the plant's own time reaches t_ns (whole dt steps only).
  void advance_to(std::int64_t t_ns);
  std::int64_t time_ns() const;

  PlantState snapshot() const;

 private:
  mutable std::mutex mu_;
  PlantState state_;
};

enum class WireKind { Signal, Actuator };

struct WireEntry {
  std::string id;
  WireKind kind = WireKind::Signal;
  camac::Slot slot;
  double gain_counts_per_unit = 1.0;

  bool operator==(const WireEntry&) const = default;
};

// Binds a plant signal to an ADC subaddress. A signal already bound elsewhere
// in the rack is moved atomically (the cable move). Throws WiringConflict if
// the target is missing, not an ADC, or already bound.
WireEntry wire_signal(camac::CrateRack& rack, const std::string& signal_id,
                      const camac::Slot& slot, double gain_counts_per_unit);

// Same for actuators, which land on DAC or DIO outputs.
WireEntry wire_actuator(camac::CrateRack& rack, const std::string& actuator_id,
                        const camac::Slot& slot, double gain_counts_per_unit);

// Removes the binding of id, but only if it sits at slot. Returns whether
// anything was removed.
bool unwire(camac::CrateRack& rack, const std::string& id,
            const camac::Slot& slot);

std::optional<WireEntry> find_binding(camac::CrateRack& rack,
                                      const std::string& id);
std::vector<WireEntry> list_bindings(camac::CrateRack& rack);

}  // namespace dcs::plant
