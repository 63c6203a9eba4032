#include <random>
#include <thread>

#include "doctest.h"
#include "dcs/error.hpp"
#include "dcs/highway.hpp"
#include "support.hpp"

using namespace dcs;
using namespace dcs::camac;

namespace {

// Reference packer written from the field table, independent of the codec.
std::uint64_t pack(std::initializer_list<std::pair<int, std::uint64_t>> fields_msb_first) {
  std::uint64_t f = 0;
  int pos = 64;
  for (auto [width, v] : fields_msb_first) {
    pos -= width;
    f |= (v & ((std::uint64_t{1} << width) - 1)) << pos;
  }
  return f;
}

std::uint8_t byte_sum(std::uint64_t f, int n) {
  unsigned s = 0;
  for (int i = 0; i < n; ++i) s += (f >> (56 - 8 * i)) & 0xff;
  return static_cast<std::uint8_t>(s);
}

std::uint64_t oracle_command(int c, int n, int a, int fn, std::uint32_t data) {
  std::uint64_t f = pack({{6, c}, {5, n}, {4, a}, {5, fn}, {24, data}, {4, 0x8}});
  return f | (std::uint64_t(byte_sum(f, 6)) << 8);
}

std::uint64_t oracle_response(std::uint32_t data, bool q, bool x, int crate) {
  std::uint64_t f = pack({{24, data}, {1, q}, {1, x}, {6, 0}, {6, crate}, {2, 0x2}});
  return f | (std::uint64_t(byte_sum(f, 5)) << 16);
}

struct Rig {
  CrateRack rack;
  VirtualClock clock;
  std::unique_ptr<SerialHighway> hw;
  explicit Rig(HighwayConfig cfg = {}) {
    for (int c : cfg.crates) rack.add_crate(c);
    rack.install_module(Slot{1, 2, 0}, SimModule(ModuleKind::Dac, 4));
    hw = std::make_unique<SerialHighway>(cfg, rack, clock, nullptr);
  }
};

}  // namespace

TEST_CASE("transaction cost and max throughput from the bit budget") {
  HighwayConfig cfg;
  const double bits = 64 + 64 + 8;
  CHECK(cfg.transaction_cost_ns() == std::llround(bits / 2.5e6 * 1e9));
  CHECK(cfg.transaction_cost_ns() == 54'400);
  CHECK(max_throughput(cfg) == doctest::Approx(2.5e6 / bits));
  CHECK(max_throughput(cfg) == doctest::Approx(18382.35).epsilon(1e-6));

  HighwayConfig fast = cfg;
  fast.clock_hz *= 2;
  CHECK(max_throughput(fast) == 2 * max_throughput(cfg));

  HighwayConfig lean;
  lean.gap_bits = 0;
  lean.cmd_frame_bits = lean.resp_frame_bits = 50;
  lean.validate();
  CHECK(max_throughput(lean) == doctest::Approx(25'000.0));
}

TEST_CASE("config validation") {
  HighwayConfig c;
  c.clock_hz = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.cmd_frame_bits = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.crates = {1, 1};
  CHECK_THROWS_AS(c.validate(), Error);
  c.crates = {63};
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("command frame matches the field layout") {
  const auto cmd = Command::write(Slot{17, 9, 3}, 0xABCDEF, 17);
  CHECK(frame::encode_command(cmd) == oracle_command(17, 9, 3, 17, 0xABCDEF));
  const auto rd = Command::read(Slot{1, 1, 0});
  CHECK(frame::encode_command(rd) == oracle_command(1, 1, 0, 0, 0));
  CHECK(frame::decode_command(frame::encode_command(rd)) == rd);
}

TEST_CASE("response frame matches the field layout") {
  const Response r{0x123456, true, true};
  CHECK(frame::encode_response(r, 18) == oracle_response(0x123456, true, true, 18));
  const auto back = frame::decode_response(frame::encode_response(r, 18));
  CHECK(back.response == r);
  CHECK(back.echo_crate == 18);
}

TEST_CASE("all-zero frames are rejected") {
  for (auto decode : {+[](std::uint64_t f) { frame::decode_command(f); },
                      +[](std::uint64_t f) { frame::decode_response(f); }}) {
    try {
      decode(0);
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::FrameCorruption);
    }
  }
}

TEST_CASE("random commands round-trip and single-bit flips are caught") {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 1000; ++i) {
    const auto cmd = testing::random_command(rng);
    const auto f = frame::encode_command(cmd);
    REQUIRE(frame::decode_command(f) == cmd);
    const int bit = static_cast<int>(rng() % 64);
    CHECK_THROWS_AS(frame::decode_command(f ^ (std::uint64_t{1} << bit)), Error);
  }
}

TEST_CASE("unknown echo crate is a routing error") {
  const auto f = frame::encode_response(Response{1, true, true}, 40);
  const std::vector<int> known{1, 2, 3};
  try {
    frame::decode_response(f, known);
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RoutingError);
  }
}

TEST_CASE("one transaction costs one bit budget of virtual time") {
  Rig rig;
  rig.hw->transact(Command::read(Slot{1, 2, 0}));
  CHECK(rig.clock.now() == 54'400);
  CHECK(rig.hw->transactions() == 1);
  CHECK(rig.hw->busy_ns() == 54'400);
}

TEST_CASE("concurrent callers are serialized") {
  Rig rig;
  std::vector<Response> out(2);
  std::thread a([&] { out[0] = rig.hw->transact(Command::write(Slot{1, 2, 0}, 11)); });
  std::thread b([&] { out[1] = rig.hw->transact(Command::write(Slot{1, 2, 1}, 22)); });
  a.join();
  b.join();
  CHECK(rig.clock.now() == 2 * 54'400);
  CHECK(rig.hw->transactions() == 2);
  CHECK(out[0].q);
  CHECK(out[1].q);
}

TEST_CASE("K callers advance the clock by exactly K transactions") {
  Rig rig;
  constexpr int kThreads = 4, kEach = 250;
  std::vector<std::thread> ts;
  for (int t = 0; t < kThreads; ++t) {
    ts.emplace_back([&, t] {
      for (int i = 0; i < kEach; ++i) rig.hw->transact(Command::read(Slot{1, 2, t % 4}));
    });
  }
  for (auto& t : ts) t.join();
  CHECK(rig.clock.now() == std::int64_t{kThreads} * kEach * 54'400);
}

TEST_CASE("crate off the highway") {
  Rig rig;
  try {
    rig.hw->transact(Command::read(Slot{40, 1, 0}));
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoSuchCrate);
  }
  CHECK(rig.clock.now() == 0);
}

TEST_CASE("transact agrees with a direct dataway cycle") {
  Rig rig;
  Crate mirror(1);
  mirror.install_module(2, SimModule(ModuleKind::Dac, 4));
  std::mt19937_64 rng(99);
  for (int i = 0; i < 200; ++i) {
    const int f = static_cast<int>(rng() % 32);
    const auto addr = Address::make(1, static_cast<int>(rng() % 3) + 1, static_cast<int>(rng() % 6), f);
    const auto cmd = is_write_function(f) ? Command::make(addr, static_cast<std::uint32_t>(rng() & kMaxData))
                                          : Command::make(addr);
    CHECK(rig.hw->transact(cmd) == execute_cycle(mirror, cmd, nullptr));
  }
}

TEST_CASE("local interface cost and reach") {
  CrateRack rack;
  rack.add_crate(19);
  rack.install_module(Slot{19, 1, 0}, SimModule(ModuleKind::Dac, 1));
  VirtualClock clock;
  LocalInterface li("pci0", 19, 10'000, rack, clock, nullptr);
  li.execute(Command::write(Slot{19, 1, 0}, 5));
  CHECK(li.execute(Command::read(Slot{19, 1, 0})).read_data == 5);
  CHECK(clock.now() == 20'000);
  CHECK(li.transactions() == 2);
  CHECK_FALSE(li.reaches(1));
  CHECK_THROWS_AS(li.execute(Command::read(Slot{1, 1, 0})), Error);
}
