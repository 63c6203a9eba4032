#include <boost/asio/connect.hpp>
#include <boost/asio/read.hpp>
#include <boost/asio/write.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <fstream>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "dcs/archive.hpp"
#include "dcs/deployment.hpp"
#include "dcs/gateway.hpp"
#include "dcs/migration.hpp"
#include "support.hpp"

using namespace dcs;
namespace asio = boost::asio;
namespace beast = boost::beast;
using tcp = asio::ip::tcp;

namespace {

// The two default nodes, each behind a real TCP port.
struct Cluster {
  Deployment dep;
  std::vector<std::unique_ptr<TcpServer>> servers;
  std::shared_ptr<net::MemoryDirectoryStore> dir;
  std::shared_ptr<TcpTransport> transport = std::make_shared<TcpTransport>(std::chrono::seconds(5));

  Cluster() : dep(frozen()) {
    net::Directory d = dep.directory()->load();
    for (const auto& name : dep.node_names()) {
      auto s = std::make_unique<TcpServer>(dep.node(name), "127.0.0.1", 0);
      s->start();
      d.nodes[name].port = s->port();
      servers.push_back(std::move(s));
    }
    for (auto& [db, ep] : d.databases) ep = d.nodes.at(ep.node);
    dir = std::make_shared<net::MemoryDirectoryStore>(d);
    for (const auto& name : dep.node_names()) dep.node(name).set_directory_store(dir);
  }
  static topology::Options frozen() {
    topology::Options o;
    o.sigma_scale = 0.0;
    return o;
  }
  ChannelAccessClient client() { return ChannelAccessClient(dir, transport); }
};

template <typename Pred>
bool wait_for(Pred p, std::chrono::milliseconds limit = std::chrono::seconds(5)) {
  const auto end = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < end) {
    if (p()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return p();
}

class WsClient {
 public:
  explicit WsClient(int port) : ws_(io_) {
    tcp::resolver r(io_);
    asio::connect(ws_.next_layer(), r.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/api/v1/ws");
  }
  void send(const std::string& text) { ws_.write(asio::buffer(text)); }
  Json recv() {
    beast::flat_buffer buf;
    ws_.read(buf);
    return Json::parse(beast::buffers_to_string(buf.data()));
  }
  // Reads until a message satisfying pred arrives; others are kept.
  template <typename Pred>
  Json recv_until(Pred pred) {
    for (;;) {
      Json m = recv();
      if (pred(m)) return m;
      seen.push_back(std::move(m));
    }
  }
  Json ask(Json req) {
    req["id"] = ++id_;
    send(req.dump());
    const int want = id_;
    return recv_until([want](const Json& m) { return m.value("id", -1) == want; });
  }
  std::vector<Json> seen;

 private:
  asio::io_context io_;
  beast::websocket::stream<tcp::socket> ws_;
  int id_ = 0;
};

}  // namespace

TEST_CASE("channel access over TCP") {
  Cluster c;
  auto client = c.client();
  CHECK(client.read("cryo:LHe_level").value == doctest::Approx(80.0));
  CHECK(client.write("linac:R10", 0.5).raw > 0);
  CHECK(client.databases().size() == 4);
  try {
    client.read("cryo:nope");
    FAIL("read");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoSuchChannel);
  }

  std::mutex mu;
  std::vector<double> seen;
  client.subscribe("cryo:T02", [&](const std::string&, const db::ChannelState& s) {
    std::lock_guard lock(mu);
    seen.push_back(s.value);
  });
  client.write("cryo:H1", 40.0);
  c.dep.advance(5.0);
  CHECK(wait_for([&] {
    std::lock_guard lock(mu);
    return !seen.empty() && seen.back() > 4.5;
  }));
}

TEST_CASE("raw protocol over a socket: ordering, bad frames, hello gate") {
  Cluster c;
  asio::io_context io;
  tcp::socket sock(io);
  sock.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"),
                             static_cast<unsigned short>(c.servers[0]->port())));
  auto send = [&](const std::vector<std::uint8_t>& bytes) { asio::write(sock, asio::buffer(bytes)); };
  auto recv = [&] {
    std::uint8_t hdr[4];
    asio::read(sock, asio::buffer(hdr));
    const std::uint32_t n = (hdr[0] << 24) | (hdr[1] << 16) | (hdr[2] << 8) | hdr[3];
    std::string body(n, '\0');
    asio::read(sock, asio::buffer(body));
    return Json::parse(body);
  };
  send(net::frame_encode(Json{{"t", "read"}, {"id", 1}, {"ch", "cryo:T01"}}));
  CHECK(recv().at("code") == "VERSION_MISMATCH");
  send(net::frame_encode(Json{{"t", "hello"}, {"id", 2}, {"ver", 1}}));
  CHECK(recv().at("t") == "hello_ack");
  const std::string junk = "{nope";
  std::vector<std::uint8_t> bad{0, 0, 0, static_cast<std::uint8_t>(junk.size())};
  bad.insert(bad.end(), junk.begin(), junk.end());
  send(bad);
  CHECK(recv().at("code") == "BAD_FRAME");
  for (int i = 10; i < 20; ++i) send(net::frame_encode(Json{{"t", "read"}, {"id", i}, {"ch", "cryo:T01"}}));
  for (int i = 10; i < 20; ++i) CHECK(recv().at("id") == i);
}

TEST_CASE("every request gets exactly one reply") {
  Cluster c;
  asio::io_context io;
  tcp::socket sock(io);
  sock.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"),
                             static_cast<unsigned short>(c.servers[0]->port())));
  std::mt19937_64 rng(11);
  std::vector<std::uint8_t> stream;
  auto add = [&](const std::vector<std::uint8_t>& f) { stream.insert(stream.end(), f.begin(), f.end()); };
  add(net::frame_encode(Json{{"t", "hello"}, {"ver", 1}}));
  int requests = 1;
  for (int i = 0; i < 300; ++i, ++requests) {
    switch (rng() % 4) {
      case 0: add(net::frame_encode(testing::random_message(rng))); break;
      case 1: add(net::frame_encode(Json{{"t", "read"}, {"ch", "linac:R0" + std::to_string(rng() % 9 + 1)}})); break;
      case 2: add(net::frame_encode(Json{{"t", "list"}})); break;
      default: {
        const std::string body = testing::random_text(rng, 30);
        std::vector<std::uint8_t> f{0, 0, 0, static_cast<std::uint8_t>(body.size())};
        f.insert(f.end(), body.begin(), body.end());
        add(f);
      }
    }
  }
  asio::write(sock, asio::buffer(stream));
  int replies = 0, updates = 0;
  while (replies < requests) {
    std::uint8_t hdr[4];
    asio::read(sock, asio::buffer(hdr));
    const std::uint32_t n = (hdr[0] << 24) | (hdr[1] << 16) | (hdr[2] << 8) | hdr[3];
    std::string body(n, '\0');
    asio::read(sock, asio::buffer(body));
    const Json m = Json::parse(body);
    if (m.at("t") == "update") {
      ++updates;
    } else {
      ++replies;
    }
  }
  CHECK(replies == requests);
  sock.non_blocking(true);
  std::uint8_t extra;
  boost::system::error_code ec;
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  asio::read(sock, asio::buffer(&extra, 1), ec);
  CHECK(ec == asio::error::would_block);
}

TEST_CASE("migration over TCP and failover of the central process") {
  Cluster c;
  auto client = c.client();
  const auto pre = migration::read_all(client, "cryo");
  const auto rep = migration::migrate(client, migration::MigrationPlan::from_json(topology::cryo_migration_plan()));
  CHECK(rep.new_version == 2);
  CHECK(client.directory().resolve("cryo").port == c.servers[1]->port());
  CHECK(migration::verify(pre, migration::read_all(client, "cryo"), 0.0).all_pass());

  c.servers[0]->stop();
  auto fresh = c.client();
  CHECK(fresh.read("cryo:He_pressure").value == doctest::Approx(120.0));
  try {
    fresh.read("linac:R01");
    FAIL("read from a stopped node");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConnectionRefused);
  }
}

TEST_CASE("port already taken") {
  Cluster c;
  TcpServer clash(c.dep.central(), "127.0.0.1", c.servers[0]->port());
  try {
    clash.start();
    FAIL("bound twice");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::PortConflict);
  }
}

TEST_CASE("gateway websocket multiplexes channels from two nodes") {
  Cluster c;
  {
    auto admin = c.client();
    migration::migrate(admin, migration::MigrationPlan::from_json(topology::cryo_migration_plan()));
  }
  testing::TempDir assets("assets");
  std::ofstream(assets.path() / "index.html") << "<html>console</html>";
  testing::TempDir tunes("tunes");
  Gateway gw(Gateway::Config{"127.0.0.1", 0, assets.str(), tunes.str(), c.dir, c.transport, 50});
  gw.start();

  WsClient ws(gw.port());
  CHECK(ws.ask(Json{{"t", "read"}, {"ch", "cryo:T01"}}).at("code") == "VERSION_MISMATCH");
  CHECK(ws.ask(Json{{"t", "hello"}, {"ver", 1}}).at("t") == "hello_ack");

  ws.send("this is not json");
  CHECK(ws.recv_until([](const Json& m) { return m.value("t", "") == "err"; }).at("code") == "BAD_FRAME");
  CHECK(ws.ask(Json{{"t", "read"}, {"ch", "cryo:LHe_level"}}).at("val").get<double>() ==
        doctest::Approx(80.0));
  CHECK(ws.ask(Json{{"t", "camac"}, {"crate", 1}, {"station", 1}, {"sub", 0}, {"fn", 0}}).at("code") ==
        "BAD_TYPE");

  CHECK(ws.ask(Json{{"t", "sub"}, {"ch", "cryo:T03"}}).at("t") == "sub_ack");
  CHECK(ws.ask(Json{{"t", "sub"}, {"ch", "linac:R05"}}).at("t") == "sub_ack");
  ws.ask(Json{{"t", "write"}, {"ch", "linac:R05"}, {"val", 0.75}});
  ws.ask(Json{{"t", "write"}, {"ch", "cryo:H2"}, {"val", 30.0}});
  c.dep.advance(5.0);

  std::set<std::string> updated;
  auto note = [&](const Json& m) {
    if (m.value("t", "") != "update") return;
    if (m.at("ch") == "cryo:T03" && m.at("val").get<double>() > 4.5) updated.insert("cryo");
    if (m.at("ch") == "linac:R05" && m.at("val").get<double>() != 0.0) updated.insert("linac");
  };
  for (const auto& m : ws.seen) note(m);
  while (updated.size() < 2) note(ws.recv());
  CHECK(updated.size() == 2);

  httplib::Client http("127.0.0.1", gw.port());
  auto dir = http.Get("/api/v1/directory");
  REQUIRE(dir);
  CHECK(dir->status == 200);
  const Json dj = Json::parse(dir->body);
  CHECK(dj.at("version") == 2);
  CHECK(dj.at("databases").at("cryo").at("node") == "edge");

  auto index = http.Get("/index.html");
  REQUIRE(index);
  CHECK(index->body == "<html>console</html>");
  CHECK(http.Get("/../../etc/passwd")->status >= 400);

  auto saved = http.Post("/api/v1/tunes", R"({"name":"gw1"})", "application/json");
  REQUIRE(saved);
  CHECK(saved->status == 201);
  CHECK(http.Post("/api/v1/tunes", R"({"name":"gw1"})", "application/json")->status == 409);
  auto restored = http.Post("/api/v1/tunes/gw1/restore", "", "application/json");
  REQUIRE(restored);
  CHECK(restored->status == 200);
  CHECK(http.Post("/api/v1/tunes/none/restore", "", "application/json")->status == 404);
  const Json listed = Json::parse(http.Get("/api/v1/tunes")->body);
  CHECK(listed.at("tunes").size() == 1);

  Json back = Json::parse(topology::cryo_migration_plan().dump());
  back["from_node"] = "edge";
  back["to_node"] = "central";
  auto bad_plan = http.Post("/api/v1/migrations", back.dump(), "application/json");
  REQUIRE(bad_plan);
  CHECK(bad_plan->status >= 400);
  gw.stop();
}

TEST_CASE("gateway migration endpoint") {
  Cluster c;
  testing::TempDir tunes("tunes");
  Gateway gw(Gateway::Config{"127.0.0.1", 0, "", tunes.str(), c.dir, c.transport, 50});
  const Json body{{"plan", topology::cryo_migration_plan()}, {"verify_tolerance", 0.0}};
  const auto [status, out] = gw.handle_api("POST", "/api/v1/migrations", body.dump());
  CHECK(status == 200);
  CHECK(out.at("report").at("new_version") == 2);
  CHECK(out.at("verify").at("pass") == true);
  CHECK(out.at("log").size() == 6);
  CHECK(gw.handle_api("GET", "/api/v1/nowhere", "").first == 404);
}
