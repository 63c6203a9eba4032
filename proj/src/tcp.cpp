#include <boost/asio.hpp>
#include <condition_variable>
#include <future>
#include <list>

#include "dcs/node.hpp"
#include "dcs/transport.hpp"

namespace dcs {

namespace asio = boost::asio;
using asio::ip::tcp;

namespace {

void write_frame(tcp::socket& sock, std::mutex& mu, const Json& msg) {
  const auto bytes = net::frame_encode(msg);
  std::lock_guard lock(mu);
  asio::write(sock, asio::buffer(bytes));
}

// Reads one length-prefixed frame. Returns false on a clean close.
bool read_frame(tcp::socket& sock, std::vector<std::uint8_t>& buf, net::DecodeResult& out) {
  std::array<std::uint8_t, 4> hdr{};
  boost::system::error_code ec;
  asio::read(sock, asio::buffer(hdr), ec);
  if (ec) return false;
  const std::uint32_t n = (std::uint32_t(hdr[0]) << 24) | (std::uint32_t(hdr[1]) << 16) |
                          (std::uint32_t(hdr[2]) << 8) | std::uint32_t(hdr[3]);
  buf.assign(hdr.begin(), hdr.end());
  if (n > net::kMaxFrameBytes) {
    out = net::frame_decode(buf);
    return true;
  }
  buf.resize(4 + std::size_t(n));
  asio::read(sock, asio::buffer(buf.data() + 4, n), ec);
  if (ec) return false;
  out = net::frame_decode(buf);
  return true;
}

class TcpConnection final : public Connection {
 public:
  TcpConnection(const net::Endpoint& ep, std::chrono::milliseconds timeout)
      : socket_(io_), timeout_(timeout) {
    try {
      tcp::resolver resolver(io_);
      asio::connect(socket_, resolver.resolve(ep.host, std::to_string(ep.port)));
      socket_.set_option(tcp::no_delay(true));
    } catch (const boost::system::system_error& e) {
      throw Error(ErrorCode::ConnectionRefused, "cannot reach " + ep.str() + ": " + e.what());
    }
    reader_ = std::thread([this] { read_loop(); });
  }

  ~TcpConnection() override {
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
    if (reader_.joinable()) reader_.join();
  }

  Json request(Json req) override {
    Json caller_id = nullptr;
    if (auto it = req.find("id"); it != req.end()) caller_id = *it;
    std::future<Json> fut;
    std::uint64_t wire_id;
    {
      std::lock_guard lock(mu_);
      if (closed_) throw Error(ErrorCode::ConnectionRefused, "connection closed");
      wire_id = ++next_id_;
      fut = pending_[wire_id].get_future();
    }
    req["id"] = wire_id;
    try {
      write_frame(socket_, write_mu_, req);
    } catch (const boost::system::system_error& e) {
      fail_pending();
      throw Error(ErrorCode::ConnectionRefused, std::string("send failed: ") + e.what());
    }
    if (fut.wait_for(timeout_) != std::future_status::ready) {
      std::lock_guard lock(mu_);
      pending_.erase(wire_id);
      throw Error(ErrorCode::ConnectionRefused, "request timed out");
    }
    Json reply = fut.get();
    if (caller_id.is_null()) {
      reply.erase("id");
    } else {
      reply["id"] = caller_id;
    }
    return reply;
  }

  void set_update_handler(UpdateHandler handler) override {
    std::lock_guard lock(mu_);
    handler_ = std::move(handler);
  }

  bool alive() const override {
    std::lock_guard lock(mu_);
    return !closed_;
  }

 private:
  void read_loop() {
    std::vector<std::uint8_t> buf;
    for (;;) {
      net::DecodeResult r;
      if (!read_frame(socket_, buf, r)) break;
      if (r.status != net::DecodeResult::Status::Ok) continue;
      const Json& m = r.message;
      if (m.value("t", "") == "update") {
        UpdateHandler h;
        {
          std::lock_guard lock(mu_);
          h = handler_;
        }
        if (h) h(m);
        continue;
      }
      if (!m.contains("id") || !m["id"].is_number_unsigned()) continue;
      std::lock_guard lock(mu_);
      auto it = pending_.find(m["id"].get<std::uint64_t>());
      if (it != pending_.end()) {
        it->second.set_value(m);
        pending_.erase(it);
      }
    }
    fail_pending();
  }

  void fail_pending() {
    std::lock_guard lock(mu_);
    closed_ = true;
    for (auto& [id, p] : pending_) {
      p.set_exception(std::make_exception_ptr(
          Error(ErrorCode::ConnectionRefused, "connection lost")));
    }
    pending_.clear();
  }

  asio::io_context io_;
  tcp::socket socket_;
  std::chrono::milliseconds timeout_;
  std::mutex write_mu_;
  mutable std::mutex mu_;
  bool closed_ = false;
  std::uint64_t next_id_ = 0;
  std::map<std::uint64_t, std::promise<Json>> pending_;
  UpdateHandler handler_;
  std::thread reader_;
};

}  // namespace

std::unique_ptr<Connection> TcpTransport::connect(const net::Endpoint& ep) {
  auto conn = std::make_unique<TcpConnection>(ep, timeout_);
  net::throw_if_err(conn->request(Json{{"t", "hello"}, {"ver", net::kProtocolVersion}}));
  return conn;
}

struct TcpServer::Impl {
  Impl(Node& n, std::string h) : node(n), host(std::move(h)), acceptor(io) {}

  struct Peer {
    explicit Peer(tcp::socket s) : socket(std::move(s)) {}
    tcp::socket socket;
    std::mutex write_mu;
    Session session;
    std::thread reader;
    std::thread writer;
    std::atomic<bool> done{false};
  };

  void accept_loop() {
    for (;;) {
      boost::system::error_code ec;
      tcp::socket s(io);
      acceptor.accept(s, ec);
      if (ec) break;
      s.set_option(tcp::no_delay(true), ec);
      std::lock_guard lock(mu);
      if (stopping) break;
      reap();
      auto& peer = peers.emplace_back(std::make_unique<Peer>(std::move(s)));
      Peer* p = peer.get();
      p->writer = std::thread([this, p] { write_loop(*p); });
      p->reader = std::thread([this, p] { read_loop(*p); });
    }
  }

  void read_loop(Peer& p) {
    std::vector<std::uint8_t> buf;
    try {
      for (;;) {
        net::DecodeResult r;
        if (!read_frame(p.socket, buf, r)) break;
        if (r.status == net::DecodeResult::Status::Ok) {
          write_frame(p.socket, p.write_mu, node.handle(p.session, r.message));
        } else {
          write_frame(p.socket, p.write_mu, net::make_err(nullptr, r.error, r.error_msg));
          if (r.error == ErrorCode::FrameTooLarge) break;  // cannot resync
        }
      }
    } catch (const std::exception&) {
    }
    node.close_session(p.session);
    boost::system::error_code ec;
    p.socket.shutdown(tcp::socket::shutdown_both, ec);
    p.done = true;
  }

  void write_loop(Peer& p) {
    try {
      while (!p.session.updates->closed()) {
        auto u = p.session.updates->pop_wait(std::chrono::milliseconds(200));
        if (u) write_frame(p.socket, p.write_mu, net::make_update(*u));
      }
    } catch (const std::exception&) {
    }
  }

  // Joins finished sessions; mu must be held.
  void reap() {
    for (auto it = peers.begin(); it != peers.end();) {
      if ((*it)->done) {
        (*it)->reader.join();
        (*it)->writer.join();
        it = peers.erase(it);
      } else {
        ++it;
      }
    }
  }

  Node& node;
  std::string host;
  asio::io_context io;
  tcp::acceptor acceptor;
  std::thread acceptor_thread;
  std::mutex mu;
  bool stopping = false;
  std::list<std::unique_ptr<Peer>> peers;
};

TcpServer::TcpServer(Node& node, std::string host, int port)
    : impl_(std::make_unique<Impl>(node, std::move(host))), port_(port) {}

TcpServer::~TcpServer() { stop(); }

void TcpServer::start() {
  try {
    tcp::endpoint ep(asio::ip::make_address(impl_->host), static_cast<unsigned short>(port_));
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen();
    port_ = impl_->acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw Error(ErrorCode::PortConflict, "cannot listen on " + impl_->host + ":" +
                                             std::to_string(port_) + ": " + e.what());
  }
  impl_->acceptor_thread = std::thread([this] { impl_->accept_loop(); });
}

void TcpServer::stop() {
  if (!impl_) return;
  {
    std::lock_guard lock(impl_->mu);
    if (impl_->stopping) return;
    impl_->stopping = true;
  }
  boost::system::error_code ec;
  // Wake the blocking accept.
  ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
  impl_->acceptor.close(ec);
  if (impl_->acceptor_thread.joinable()) impl_->acceptor_thread.join();
  std::lock_guard lock(impl_->mu);
  for (auto& p : impl_->peers) {
    p->socket.shutdown(tcp::socket::shutdown_both, ec);
    p->session.updates->close();
  }
  for (auto& p : impl_->peers) {
    if (p->reader.joinable()) p->reader.join();
    if (p->writer.joinable()) p->writer.join();
  }
  impl_->peers.clear();
}

}  // namespace dcs
