#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "dcs/netproto.hpp"
#include "support.hpp"

using namespace dcs;
using namespace dcs::net;

namespace {

std::vector<std::uint8_t> raw_frame(const std::string& body) {
  const auto n = static_cast<std::uint32_t>(body.size());
  std::vector<std::uint8_t> v{std::uint8_t(n >> 24), std::uint8_t(n >> 16), std::uint8_t(n >> 8),
                              std::uint8_t(n)};
  v.insert(v.end(), body.begin(), body.end());
  return v;
}

}  // namespace

TEST_CASE("hello frame bytes") {
  Json m = Json::object();
  m["t"] = "hello";
  m["id"] = 1;
  m["ver"] = 1;
  const std::string text = R"({"t":"hello","id":1,"ver":1})";
  const auto f = frame_encode(m);
  REQUIRE(f.size() == 4 + text.size());
  CHECK(f[0] == 0);
  CHECK(f[1] == 0);
  CHECK(f[2] == 0);
  CHECK(f[3] == text.size());
  CHECK(text.size() == 28);
  CHECK(std::string(f.begin() + 4, f.end()) == text);
}

TEST_CASE("random messages survive framing") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 500; ++i) {
    const Json m = testing::random_message(rng);
    const auto f = frame_encode(m);
    const auto r = frame_decode(f);
    REQUIRE(r.status == DecodeResult::Status::Ok);
    CHECK(r.consumed == f.size());
    CHECK(r.message == m);
  }
}

TEST_CASE("back-to-back frames decode in order") {
  std::vector<std::uint8_t> stream;
  for (int i = 0; i < 3; ++i) {
    auto f = frame_encode(Json{{"t", "read"}, {"id", i}, {"ch", "a:b"}});
    stream.insert(stream.end(), f.begin(), f.end());
  }
  std::span<const std::uint8_t> rest(stream);
  for (int i = 0; i < 3; ++i) {
    const auto r = frame_decode(rest);
    REQUIRE(r.status == DecodeResult::Status::Ok);
    CHECK(r.message.at("id") == i);
    rest = rest.subspan(r.consumed);
  }
  CHECK(rest.empty());
}

TEST_CASE("incomplete frames consume nothing") {
  const std::vector<std::uint8_t> partial{0, 0, 0, 5, '{', '}', ' '};
  const auto r = frame_decode(partial);
  CHECK(r.status == DecodeResult::Status::Incomplete);
  CHECK(r.consumed == 0);
  CHECK(frame_decode(std::vector<std::uint8_t>{0, 0}).status == DecodeResult::Status::Incomplete);

  const auto f = frame_encode(Json{{"t", "list"}});
  for (std::size_t cut = 0; cut < f.size(); ++cut) {
    CHECK(frame_decode(std::span(f.data(), cut)).status == DecodeResult::Status::Incomplete);
  }
}

TEST_CASE("oversize length is rejected without consuming") {
  const std::uint32_t n = kMaxFrameBytes + 1;
  const std::vector<std::uint8_t> hdr{std::uint8_t(n >> 24), std::uint8_t(n >> 16),
                                      std::uint8_t(n >> 8), std::uint8_t(n)};
  const auto r = frame_decode(hdr);
  CHECK(r.status == DecodeResult::Status::Bad);
  CHECK(r.error == ErrorCode::FrameTooLarge);
  CHECK(r.consumed == 0);

  Json big = Json::object();
  big["t"] = "write";
  big["pad"] = std::string(kMaxFrameBytes, 'x');
  CHECK_THROWS_AS(frame_encode(big), Error);
}

TEST_CASE("malformed bodies are BAD_FRAME and skippable") {
  for (const std::string body : {"{", "[1,2]", "nul", "\"str\"", "{\"t\":\"a\"\xff}", ""}) {
    const auto f = raw_frame(body);
    const auto r = frame_decode(f);
    CHECK(r.status == DecodeResult::Status::Bad);
    CHECK(r.error == ErrorCode::BadFrame);
    CHECK(r.consumed == f.size());
  }
  CHECK_THROWS_AS(parse_message("not json"), Error);
}

TEST_CASE("channel references") {
  const auto r = parse_channel_ref("cryo:LHe_level");
  CHECK(r.db == "cryo");
  CHECK(r.channel == "LHe_level");
  CHECK(r.str() == "cryo:LHe_level");
  for (const char* bad : {"cryo", ":x", "x:", ""}) CHECK_THROWS_AS(parse_channel_ref(bad), Error);
}

TEST_CASE("state and error helpers") {
  db::ChannelState s{2.5, 2500, 54'400, db::Severity::Minor};
  Json m = make_reply("read_ack", 7);
  put_state(m, s);
  CHECK(get_state(m) == s);
  CHECK(m.at("sev") == "MINOR");

  const Json e = make_err(3, ErrorCode::NoSuchChannel, "nope");
  CHECK(e.at("code") == "NO_SUCH_CHANNEL");
  CHECK(e.at("id") == 3);
  try {
    throw_if_err(e);
    FAIL("no throw");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::NoSuchChannel);
  }
  throw_if_err(m);
}

TEST_CASE("directory resolution") {
  Directory d;
  d.version = 4;
  d.databases["cryo"] = Endpoint{"central", "127.0.0.1", 5730};
  d.nodes["central"] = d.databases["cryo"];
  d.nodes["edge"] = Endpoint{"edge", "127.0.0.1", 5731};
  CHECK(d.resolve("cryo:LHe_level") == d.databases["cryo"]);
  CHECK(d.resolve("cryo") == d.resolve("cryo:T01"));
  try {
    d.resolve("xyz:a");
    FAIL("resolved");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoSuchDb);
  }
  CHECK(d.node("edge")->port == 5731);
  CHECK_FALSE(d.node("ghost"));
  CHECK(Directory::from_json(d.to_json()) == d);
}

TEST_CASE("directory stores only move forward") {
  Directory d;
  d.databases["cryo"] = Endpoint{"central"};
  MemoryDirectoryStore mem(d);
  Directory next = d;
  CHECK_THROWS_AS(mem.commit(next), Error);
  next.version = 2;
  mem.commit(next);
  CHECK(mem.load().version == 2);

  const auto path = std::filesystem::temp_directory_path() / "dcs_test_directory.json";
  std::filesystem::remove(path);
  {
    std::ofstream(path) << d.to_json().dump();
  }
  FileDirectoryStore file(path.string());
  CHECK(file.load() == d);
  file.commit(next);
  CHECK(FileDirectoryStore(path.string()).load().version == 2);
  std::filesystem::remove(path);
}
