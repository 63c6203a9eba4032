#include "dcs/camac.hpp"

#include <cmath>

#include "dcs/error.hpp"

namespace dcs::camac {
namespace {

void check_range(const char* what, int v, int lo, int hi) {
  if (v < lo || v > hi) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(what) + " " + std::to_string(v) + " outside " +
                    std::to_string(lo) + ".." + std::to_string(hi));
  }
}

}  // namespace

Slot Slot::make(int crate, int station, int subaddress) {
  check_range("crate", crate, 1, kMaxCrate);
  check_range("station", station, 1, kMaxStation);
  check_range("subaddress", subaddress, 0, kMaxSubaddress);
  return Slot{crate, station, subaddress};
}

std::string to_string(const Slot& slot) {
  return "C" + std::to_string(slot.crate) + "/N" +
         std::to_string(slot.station) + "/A" +
         std::to_string(slot.subaddress);
}

Address Address::make(int crate, int station, int subaddress, int function) {
  Slot::make(crate, station, subaddress);
  check_range("function", function, 0, kMaxFunction);
  return Address(crate, station, subaddress, function);
}

Command Command::read(const Slot& slot, int function) {
  return make(Address::make(slot, function));
}

Command Command::write(const Slot& slot, std::uint32_t data, int function) {
  return make(Address::make(slot, function), data);
}

Command Command::make(const Address& address,
                      std::optional<std::uint32_t> write_data) {
  const bool is_write = is_write_function(address.function());
  if (is_write != write_data.has_value()) {
    throw Error(ErrorCode::InvalidArgument,
                is_write ? "write function requires write_data"
                         : "write_data only allowed for F16..F23");
  }
  if (write_data && *write_data > kMaxData) {
    throw Error(ErrorCode::InvalidArgument, "write_data exceeds 24 bits");
  }
  return Command(address, write_data);
}

std::string_view to_string(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::Adc: return "ADC";
    case ModuleKind::Dac: return "DAC";
    case ModuleKind::DigitalIo: return "DIO";
  }
  return "?";
}

ModuleKind module_kind_from_string(std::string_view s) {
  if (s == "ADC") return ModuleKind::Adc;
  if (s == "DAC") return ModuleKind::Dac;
  if (s == "DIO") return ModuleKind::DigitalIo;
  throw Error(ErrorCode::InvalidArgument,
              "unknown module kind " + std::string(s));
}

SimModule::SimModule(ModuleKind kind, int channel_count, bool dac_readback)
    : kind_(kind), channel_count_(channel_count), dac_readback_(dac_readback) {
  check_range("channel_count", channel_count, 1, kMaxModuleChannels);
}

bool SimModule::can_read(int a) const {
  if (!has_subaddress(a)) return false;
  switch (kind_) {
    case ModuleKind::Adc: return true;
    case ModuleKind::Dac: return dac_readback_;
    case ModuleKind::DigitalIo: return true;
  }
  return false;
}

bool SimModule::can_write(int a) const {
  return has_subaddress(a) && kind_ != ModuleKind::Adc;
}

void SimModule::latch(int a, std::uint32_t value) {
  latched_.at(a) = value & kMaxData;
}

void SimModule::bind(int a, SignalBinding b) {
  if (!has_subaddress(a)) {
    throw Error(ErrorCode::WiringConflict,
                "subaddress " + std::to_string(a) + " not present on module");
  }
  if (bindings_.at(a)) {
    throw Error(ErrorCode::WiringConflict,
                "subaddress " + std::to_string(a) + " already bound to " +
                    bindings_.at(a)->signal_id);
  }
  bindings_.at(a) = std::move(b);
}

Crate::Crate(int crate_number) : crate_number_(crate_number) {
  check_range("crate", crate_number, 1, kMaxCrate);
}

SimModule* Crate::module(int station) {
  auto it = stations_.find(station);
  return it == stations_.end() ? nullptr : &it->second;
}

const SimModule* Crate::module(int station) const {
  auto it = stations_.find(station);
  return it == stations_.end() ? nullptr : &it->second;
}

void Crate::install_module(int station, SimModule module) {
  if (station < 1 || station > kMaxStation) {
    throw Error(ErrorCode::InstallConflict,
                "station " + std::to_string(station) + " outside 1..23");
  }
  if (stations_.contains(station)) {
    throw Error(ErrorCode::InstallConflict,
                "station " + std::to_string(station) + " of crate " +
                    std::to_string(crate_number_) + " is occupied");
  }
  stations_.emplace(station, std::move(module));
}

void Crate::remove_module(int station) { stations_.erase(station); }

std::uint32_t quantize(double value, double gain_counts_per_unit) {
  const double counts = std::round(value * gain_counts_per_unit);
  if (!(counts > 0.0)) return 0;  // also catches NaN
  if (counts >= static_cast<double>(kMaxData)) return kMaxData;
  return static_cast<std::uint32_t>(counts);
}

Response execute_cycle(Crate& crate, const Command& cmd, PlantIo* plant) {
  const Address& addr = cmd.address();
  if (addr.crate() != crate.crate_number()) {
    throw Error(ErrorCode::RoutingError,
                "command for crate " + std::to_string(addr.crate()) +
                    " delivered to crate " +
                    std::to_string(crate.crate_number()));
  }
  SimModule* m = crate.module(addr.station());
  if (m == nullptr) return Response{0, false, false};

  const int a = addr.subaddress();
  const int f = addr.function();

  if (is_read_function(f)) {
    if (!m->can_read(a)) return Response{0, false, true};
    if (m->kind() == ModuleKind::Adc) {
      const auto& b = m->binding(a);
      if (!b || plant == nullptr) return Response{0, false, true};
      auto v = plant->signal_value(b->signal_id);
      if (!v) return Response{0, false, true};
      m->latch(a, quantize(*v, b->gain_counts_per_unit));
    }
    return Response{m->latched(a), true, true};
  }
  if (is_write_function(f)) {
    if (!m->can_write(a)) return Response{0, false, true};
    m->latch(a, *cmd.write_data());
    const auto& b = m->binding(a);
    if (b && plant != nullptr) {
      plant->set_actuator(b->signal_id,
                          static_cast<double>(*cmd.write_data()) /
                              b->gain_counts_per_unit);
    }
    return Response{0, true, true};
  }
  if (is_test_function(f)) return Response{0, false, true};
  if (is_control_function(f)) return Response{0, true, true};
  // F9..F15 are unassigned in this model.
  return Response{0, false, true};
}

void CrateRack::add_crate(int crate_number) {
  std::lock_guard lock(map_mu_);
  if (crates_.contains(crate_number)) {
    throw Error(ErrorCode::InvalidArgument,
                "crate " + std::to_string(crate_number) + " already present");
  }
  crates_.emplace(std::piecewise_construct, std::forward_as_tuple(crate_number),
                  std::forward_as_tuple(crate_number));
}

bool CrateRack::has_crate(int crate_number) const {
  std::lock_guard lock(map_mu_);
  return crates_.contains(crate_number);
}

std::vector<int> CrateRack::crate_numbers() const {
  std::lock_guard lock(map_mu_);
  std::vector<int> out;
  for (const auto& [n, e] : crates_) out.push_back(n);
  return out;
}

void CrateRack::install_module(int crate, int station, SimModule module) {
  with_crate(crate, [&](Crate& c) { c.install_module(station, std::move(module)); });
}

Response CrateRack::execute(const Command& cmd, PlantIo* plant) {
  return with_crate(cmd.address().crate(),
                    [&](Crate& c) { return execute_cycle(c, cmd, plant); });
}

CrateRack::Entry& CrateRack::entry(int crate_number) {
  std::lock_guard lock(map_mu_);
  auto it = crates_.find(crate_number);
  if (it == crates_.end()) {
    throw Error(ErrorCode::NoSuchCrate,
                "crate " + std::to_string(crate_number) + " not in rack");
  }
  return it->second;
}

const CrateRack::Entry& CrateRack::entry(int crate_number) const {
  return const_cast<CrateRack*>(this)->entry(crate_number);
}

}  // namespace dcs::camac
