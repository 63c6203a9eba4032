#pragma once

// The single CAMAC serial highway: 64-bit command/response frames, strictly
// one transaction at a time, each costing a fixed number of bit times of
// virtual time at the highway clock.

#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <span>
#include <vector>

#include "dcs/camac.hpp"
#include "dcs/clock.hpp"

namespace dcs {

struct HighwayConfig {
  double clock_hz = 2'500'000.0;
  int cmd_frame_bits = 64;
  int resp_frame_bits = 64;
  int gap_bits = 8;
  std::vector<int> crates = default_crates();

  static std::vector<int> default_crates();

  // Throws InvalidArgument when the invariants do not hold.
  void validate() const;

  int bits_per_transaction() const {
    return cmd_frame_bits + resp_frame_bits + gap_bits;
  }
  // Per-transaction virtual-time cost, rounded to the nearest nanosecond.
  std::int64_t transaction_cost_ns() const;

  bool operator==(const HighwayConfig&) const = default;
};

// Transactions per second the highway can carry, whatever the demand.
double max_throughput(const HighwayConfig& cfg);

namespace frame {

// Flag nibble of a command frame / flag pair of a response frame; the most
// significant flag bit is the frame-format version and must be set.
inline constexpr std::uint8_t kCommandVersionFlag = 0x8;
inline constexpr std::uint8_t kResponseVersionFlag = 0x2;

std::uint64_t encode_command(const camac::Command& cmd);
camac::Command decode_command(std::uint64_t frame);

struct ResponseFrame {
  camac::Response response;
  int echo_crate = 0;

  bool operator==(const ResponseFrame&) const = default;
};

std::uint64_t encode_response(const camac::Response& resp, int echo_crate);
ResponseFrame decode_response(std::uint64_t frame);
// As above, and rejects an echo crate not in known_crates with RoutingError.
camac::Response decode_response(std::uint64_t frame,
                                std::span<const int> known_crates);

}  // namespace frame

// Anything that can run a dataway cycle on behalf of a channel: the highway
// driver or an edge node's local PCI-style interface.
class CamacPort {
 public:
  virtual ~CamacPort() = default;
  virtual camac::Response execute(const camac::Command& cmd) = 0;
  virtual std::int64_t cost_ns() const = 0;
  virtual std::uint64_t transactions() const = 0;
  virtual bool reaches(int crate_number) const = 0;
};

class SerialHighway final : public CamacPort {
 public:
  SerialHighway(HighwayConfig cfg, camac::CrateRack& rack, VirtualClock& clock,
                camac::PlantIo* plant);

  // Runs one full frame exchange. Callers are admitted in arrival order and
  // never overlap in virtual time. Throws NoSuchCrate for crates not linked.
  camac::Response transact(const camac::Command& cmd);

  camac::Response execute(const camac::Command& cmd) override {
    return transact(cmd);
  }
  std::int64_t cost_ns() const override { return cost_ns_; }
  std::uint64_t transactions() const override;
  bool reaches(int crate_number) const override;

  const HighwayConfig& config() const { return cfg_; }
  std::int64_t busy_ns() const;

  // Sleep the wall-clock equivalent of each transaction (demo mode).
  void set_real_time(bool on) { real_time_ = on; }

 private:
  HighwayConfig cfg_;
  camac::CrateRack& rack_;
  VirtualClock& clock_;
  camac::PlantIo* plant_;
  std::int64_t cost_ns_;
  bool real_time_ = false;

  mutable std::mutex mu_;
  std::condition_variable turn_cv_;
  std::uint64_t next_ticket_ = 0;
  std::uint64_t serving_ = 0;
  std::uint64_t transactions_ = 0;
  std::int64_t busy_ns_ = 0;
};

// Direct crate access from an edge node: no framing, fixed cost per cycle.
class LocalInterface final : public CamacPort {
 public:
  static constexpr std::int64_t kDefaultCostNs = 10'000;

  LocalInterface(std::string id, int crate_number, std::int64_t cost_ns,
                 camac::CrateRack& rack, VirtualClock& clock,
                 camac::PlantIo* plant);

  camac::Response execute(const camac::Command& cmd) override;
  std::int64_t cost_ns() const override { return cost_ns_; }
  std::uint64_t transactions() const override;
  bool reaches(int crate_number) const override {
    return crate_number == crate_number_;
  }

  const std::string& id() const { return id_; }
  int crate_number() const { return crate_number_; }

 private:
  std::string id_;
  int crate_number_;
  std::int64_t cost_ns_;
  camac::CrateRack& rack_;
  VirtualClock& clock_;
  camac::PlantIo* plant_;
  mutable std::mutex mu_;
  std::uint64_t transactions_ = 0;
};

}  // namespace dcs
