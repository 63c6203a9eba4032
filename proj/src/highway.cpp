#include "dcs/highway.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <thread>

#include "dcs/error.hpp"

namespace dcs {

std::vector<int> HighwayConfig::default_crates() {
  std::vector<int> v(18);
  for (int i = 0; i < 18; ++i) v[i] = i + 1;
  return v;
}

void HighwayConfig::validate() const {
  if (!(clock_hz > 0.0) || !std::isfinite(clock_hz)) {
    throw Error(ErrorCode::InvalidArgument, "highway clock_hz must be > 0");
  }
  if (cmd_frame_bits <= 0 || resp_frame_bits <= 0) {
    throw Error(ErrorCode::InvalidArgument, "highway frame bit counts must be > 0");
  }
  if (gap_bits < 0) throw Error(ErrorCode::InvalidArgument, "highway gap_bits must be >= 0");
  std::set<int> seen;
  for (int c : crates) {
    if (c < 1 || c > camac::kMaxCrate) {
      throw Error(ErrorCode::InvalidArgument,
                  "highway crate " + std::to_string(c) + " outside 1..62");
    }
    if (!seen.insert(c).second) {
      throw Error(ErrorCode::InvalidArgument,
                  "highway crate " + std::to_string(c) + " listed twice");
    }
  }
}

std::int64_t HighwayConfig::transaction_cost_ns() const {
  return std::llround(static_cast<double>(bits_per_transaction()) * 1e9 /
                      clock_hz);
}

double max_throughput(const HighwayConfig& cfg) {
  return cfg.clock_hz / static_cast<double>(cfg.bits_per_transaction());
}

namespace frame {
namespace {

std::uint8_t byte_at(std::uint64_t frame, int index) {
  return static_cast<std::uint8_t>(frame >> (56 - 8 * index));
}

std::uint8_t checksum_of(std::uint64_t frame, int nbytes) {
  unsigned sum = 0;
  for (int i = 0; i < nbytes; ++i) sum += byte_at(frame, i);
  return static_cast<std::uint8_t>(sum & 0xff);
}

std::uint64_t field(std::uint64_t frame, int lsb, int width) {
  return (frame >> lsb) & ((std::uint64_t{1} << width) - 1);
}

[[noreturn]] void corrupt(const std::string& why) {
  throw Error(ErrorCode::FrameCorruption, "corrupt highway frame: " + why);
}

}  // namespace

// Command frame, MSB first:
//   63..58 crate | 57..53 station | 52..49 sub | 48..44 function
//   43..20 write_data | 19..16 flags | 15..8 checksum | 7..0 pad
std::uint64_t encode_command(const camac::Command& cmd) {
  const auto& a = cmd.address();
  std::uint64_t f = 0;
  f |= std::uint64_t(a.crate()) << 58;
  f |= std::uint64_t(a.station()) << 53;
  f |= std::uint64_t(a.subaddress()) << 49;
  f |= std::uint64_t(a.function()) << 44;
  f |= std::uint64_t(cmd.write_data().value_or(0)) << 20;
  f |= std::uint64_t(kCommandVersionFlag) << 16;
  f |= std::uint64_t(checksum_of(f, 6)) << 8;
  return f;
}

camac::Command decode_command(std::uint64_t f) {
  if (byte_at(f, 6) != checksum_of(f, 6)) corrupt("checksum mismatch");
  if (field(f, 16, 4) != kCommandVersionFlag) corrupt("bad flags/version");
  if (field(f, 0, 8) != 0) corrupt("nonzero pad");
  const int crate = int(field(f, 58, 6));
  const int station = int(field(f, 53, 5));
  const int sub = int(field(f, 49, 4));
  const int fn = int(field(f, 44, 5));
  const auto data = static_cast<std::uint32_t>(field(f, 20, 24));
  if (crate < 1 || crate > camac::kMaxCrate || station < 1 ||
      station > camac::kMaxStation) {
    corrupt("address out of range");
  }
  const auto addr = camac::Address::make(crate, station, sub, fn);
  if (camac::is_write_function(fn)) return camac::Command::make(addr, data);
  if (data != 0) corrupt("write_data on non-write function");
  return camac::Command::make(addr);
}

// Response frame, MSB first:
//   63..40 read_data | 39 q | 38 x | 37..32 status | 31..26 echo_crate
//   25..24 flags | 23..16 checksum | 15..0 pad
std::uint64_t encode_response(const camac::Response& r, int echo_crate) {
  if (echo_crate < 1 || echo_crate > camac::kMaxCrate) {
    throw Error(ErrorCode::InvalidArgument, "echo crate out of range");
  }
  std::uint64_t f = 0;
  f |= std::uint64_t(r.read_data & camac::kMaxData) << 40;
  f |= std::uint64_t(r.q) << 39;
  f |= std::uint64_t(r.x) << 38;
  f |= std::uint64_t(echo_crate) << 26;
  f |= std::uint64_t(kResponseVersionFlag) << 24;
  f |= std::uint64_t(checksum_of(f, 5)) << 16;
  return f;
}

ResponseFrame decode_response(std::uint64_t f) {
  if (byte_at(f, 5) != checksum_of(f, 5)) corrupt("checksum mismatch");
  if (field(f, 24, 2) != kResponseVersionFlag) corrupt("bad flags/version");
  if (field(f, 0, 16) != 0) corrupt("nonzero pad");
  if (field(f, 32, 6) != 0) corrupt("nonzero status");
  ResponseFrame out;
  out.response.read_data = static_cast<std::uint32_t>(field(f, 40, 24));
  out.response.q = field(f, 39, 1) != 0;
  out.response.x = field(f, 38, 1) != 0;
  out.echo_crate = int(field(f, 26, 6));
  if (!out.response.x && (out.response.q || out.response.read_data != 0)) {
    corrupt("data or Q without X");
  }
  if (out.echo_crate < 1 || out.echo_crate > camac::kMaxCrate) {
    corrupt("echo crate out of range");
  }
  return out;
}

camac::Response decode_response(std::uint64_t f,
                                std::span<const int> known_crates) {
  auto rf = decode_response(f);
  if (std::find(known_crates.begin(), known_crates.end(), rf.echo_crate) ==
      known_crates.end()) {
    throw Error(ErrorCode::RoutingError,
                "response echoes unknown crate " +
                    std::to_string(rf.echo_crate));
  }
  return rf.response;
}

}  // namespace frame

SerialHighway::SerialHighway(HighwayConfig cfg, camac::CrateRack& rack,
                             VirtualClock& clock, camac::PlantIo* plant)
    : cfg_(std::move(cfg)), rack_(rack), clock_(clock), plant_(plant) {
  cfg_.validate();
  cost_ns_ = cfg_.transaction_cost_ns();
}

bool SerialHighway::reaches(int crate_number) const {
  return std::find(cfg_.crates.begin(), cfg_.crates.end(), crate_number) !=
         cfg_.crates.end();
}

camac::Response SerialHighway::transact(const camac::Command& cmd) {
  const int crate = cmd.address().crate();
  if (!reaches(crate)) {
    throw Error(ErrorCode::NoSuchCrate,
                "crate " + std::to_string(crate) + " is not on the highway");
  }

  std::unique_lock lock(mu_);
  const std::uint64_t ticket = next_ticket_++;
  turn_cv_.wait(lock, [&] { return serving_ == ticket; });

  struct Release {
    SerialHighway* hw;
    std::unique_lock<std::mutex>& lock;
    ~Release() {
      if (!lock.owns_lock()) lock.lock();
      ++hw->serving_;
      lock.unlock();
      hw->turn_cv_.notify_all();
    }
  } release{this, lock};
  lock.unlock();

  // Crate side decodes what the driver put on the wire.
  const auto wire_cmd = frame::encode_command(cmd);
  const auto received = frame::decode_command(wire_cmd);
  const auto resp = rack_.execute(received, plant_);
  const auto wire_resp = frame::encode_response(resp, crate);
  auto decoded = frame::decode_response(wire_resp, cfg_.crates);

  if (real_time_) std::this_thread::sleep_for(std::chrono::nanoseconds(cost_ns_));
  clock_.advance(cost_ns_);

  lock.lock();
  ++transactions_;
  busy_ns_ += cost_ns_;
  return decoded;
}

std::uint64_t SerialHighway::transactions() const {
  std::lock_guard lock(mu_);
  return transactions_;
}

std::int64_t SerialHighway::busy_ns() const {
  std::lock_guard lock(mu_);
  return busy_ns_;
}

LocalInterface::LocalInterface(std::string id, int crate_number,
                               std::int64_t cost_ns, camac::CrateRack& rack,
                               VirtualClock& clock, camac::PlantIo* plant)
    : id_(std::move(id)),
      crate_number_(crate_number),
      cost_ns_(cost_ns),
      rack_(rack),
      clock_(clock),
      plant_(plant) {
  if (cost_ns_ <= 0) {
    throw Error(ErrorCode::InvalidArgument, "local interface cost must be > 0");
  }
}

camac::Response LocalInterface::execute(const camac::Command& cmd) {
  if (cmd.address().crate() != crate_number_) {
    throw Error(ErrorCode::RoutingError,
                "interface " + id_ + " serves crate " +
                    std::to_string(crate_number_) + ", not " +
                    std::to_string(cmd.address().crate()));
  }
  std::lock_guard lock(mu_);
  auto resp = rack_.execute(cmd, plant_);
  clock_.advance(cost_ns_);
  ++transactions_;
  return resp;
}

std::uint64_t LocalInterface::transactions() const {
  std::lock_guard lock(mu_);
  return transactions_;
}

}  // namespace dcs
