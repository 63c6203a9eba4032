#pragma once

// CAMAC dataway model: crates of stations holding simulated plug-in modules,
// executed one dataway cycle at a time with N/A/F addressing and Q/X status.

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dcs::camac {

inline constexpr std::uint32_t kMaxData = (1u << 24) - 1;
inline constexpr int kMaxCrate = 62;
inline constexpr int kMaxStation = 23;
inline constexpr int kMaxSubaddress = 15;
inline constexpr int kMaxFunction = 31;
inline constexpr int kMaxModuleChannels = 16;

inline bool is_read_function(int f) { return f >= 0 && f <= 7; }
inline bool is_test_function(int f) { return f == 8; }
inline bool is_write_function(int f) { return f >= 16 && f <= 23; }
inline bool is_control_function(int f) { return f >= 24 && f <= 31; }

// Crate/station/subaddress triple: where a channel or a plant signal lives.
struct Slot {
  int crate = 1;
  int station = 1;
  int subaddress = 0;

  static Slot make(int crate, int station, int subaddress);
  auto operator<=>(const Slot&) const = default;
};

std::string to_string(const Slot& slot);

// Full dataway address C/N/A/F. Only constructible with in-range fields.
class Address {
 public:
  static Address make(int crate, int station, int subaddress, int function);
  static Address make(const Slot& slot, int function) {
    return make(slot.crate, slot.station, slot.subaddress, function);
  }

  int crate() const { return crate_; }
  int station() const { return station_; }
  int subaddress() const { return subaddress_; }
  int function() const { return function_; }
  Slot slot() const { return Slot{crate_, station_, subaddress_}; }

  bool operator==(const Address&) const = default;

 private:
  Address(int c, int n, int a, int f)
      : crate_(c), station_(n), subaddress_(a), function_(f) {}

  int crate_;
  int station_;
  int subaddress_;
  int function_;
};

// write_data is present if and only if the function is a write (F16..F23).
class Command {
 public:
  static Command read(const Slot& slot, int function = 0);
  static Command write(const Slot& slot, std::uint32_t data, int function = 16);
  static Command make(const Address& address,
                      std::optional<std::uint32_t> write_data = std::nullopt);

  const Address& address() const { return address_; }
  const std::optional<std::uint32_t>& write_data() const { return write_data_; }

  bool operator==(const Command&) const = default;

 private:
  Command(Address a, std::optional<std::uint32_t> d)
      : address_(a), write_data_(d) {}

  Address address_;
  std::optional<std::uint32_t> write_data_;
};

struct Response {
  std::uint32_t read_data = 0;
  bool q = false;
  bool x = false;

  bool operator==(const Response&) const = default;
};

enum class ModuleKind { Adc, Dac, DigitalIo };

std::string_view to_string(ModuleKind kind);
ModuleKind module_kind_from_string(std::string_view s);

// One wired plant signal (ADC input) or actuator (DAC/DIO output).
struct SignalBinding {
  std::string signal_id;
  double gain_counts_per_unit = 1.0;

  bool operator==(const SignalBinding&) const = default;
};

class SimModule {
 public:
  SimModule(ModuleKind kind, int channel_count, bool dac_readback = true);

  ModuleKind kind() const { return kind_; }
  int channel_count() const { return channel_count_; }
  bool dac_readback() const { return dac_readback_; }

  bool has_subaddress(int a) const { return a >= 0 && a < channel_count_; }
  bool can_read(int a) const;
  bool can_write(int a) const;

  std::uint32_t latched(int a) const { return latched_.at(a); }
  void latch(int a, std::uint32_t value);

  const std::optional<SignalBinding>& binding(int a) const {
    return bindings_.at(a);
  }
  void bind(int a, SignalBinding b);
  void unbind(int a) { bindings_.at(a).reset(); }

 private:
  ModuleKind kind_;
  int channel_count_;
  bool dac_readback_;
  std::array<std::uint32_t, kMaxModuleChannels> latched_{};
  std::array<std::optional<SignalBinding>, kMaxModuleChannels> bindings_{};
};

// What a module sees of the plant during a cycle.
class PlantIo {
 public:
  virtual ~PlantIo() = default;
  virtual std::optional<double> signal_value(std::string_view id) const = 0;
  virtual void set_actuator(std::string_view id, double value) = 0;
};

class Crate {
 public:
  explicit Crate(int crate_number);

  int crate_number() const { return crate_number_; }
  const std::map<int, SimModule>& stations() const { return stations_; }

  SimModule* module(int station);
  const SimModule* module(int station) const;

  // Fails with InstallConflict if the station is occupied or out of range.
  void install_module(int station, SimModule module);
  void remove_module(int station);

 private:
  int crate_number_;
  std::map<int, SimModule> stations_;
};

// engineering value x gain, rounded half away from zero, clamped to 24 bits.
std::uint32_t quantize(double value, double gain_counts_per_unit);

// One dataway cycle. plant may be null, in which case bound ADC inputs read
// as unavailable (q=false). Throws RoutingError on a crate-number mismatch.
Response execute_cycle(Crate& crate, const Command& cmd, PlantIo* plant);

// The crates a node (or an in-process deployment) can reach, each guarded by
// its own lock so cycles on one crate are serialized.
class CrateRack {
 public:
  CrateRack() = default;
  CrateRack(const CrateRack&) = delete;
  CrateRack& operator=(const CrateRack&) = delete;

  void add_crate(int crate_number);
  bool has_crate(int crate_number) const;
  std::vector<int> crate_numbers() const;

  void install_module(const Slot& where, SimModule module) {
    install_module(where.crate, where.station, std::move(module));
  }
  void install_module(int crate, int station, SimModule module);

  Response execute(const Command& cmd, PlantIo* plant);

  template <typename F>
  auto with_crate(int crate_number, F&& f) {
    Entry& e = entry(crate_number);
    std::lock_guard lock(e.mu);
    return f(e.crate);
  }

  // Locks every crate (in crate-number order) for multi-crate edits such as
  // an atomic rewire. f receives a map crate number -> Crate&.
  template <typename F>
  auto with_all_crates(F&& f) {
    std::lock_guard map_lock(map_mu_);
    std::vector<std::unique_lock<std::mutex>> locks;
    std::map<int, Crate*> view;
    for (auto& [n, e] : crates_) {
      locks.emplace_back(e.mu);
      view.emplace(n, &e.crate);
    }
    return f(view);
  }

  template <typename F>
  auto with_crate(int crate_number, F&& f) const {
    const Entry& e = entry(crate_number);
    std::lock_guard lock(e.mu);
    return f(static_cast<const Crate&>(e.crate));
  }

 private:
  struct Entry {
    explicit Entry(int n) : crate(n) {}
    Crate crate;
    mutable std::mutex mu;
  };

  Entry& entry(int crate_number);
  const Entry& entry(int crate_number) const;

  mutable std::mutex map_mu_;
  std::map<int, Entry> crates_;
};

}  // namespace dcs::camac
