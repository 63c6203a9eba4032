#include "dcs/gateway.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <deque>
#include <filesystem>
#include <fstream>
#include <list>
#include <sstream>

#include "dcs/archive.hpp"
#include "dcs/migration.hpp"

namespace dcs {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
namespace fs = std::filesystem;

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoSuchTune:
    case ErrorCode::NoSuchDb:
    case ErrorCode::NoSuchChannel:
      return 404;
    case ErrorCode::NameExists:
    case ErrorCode::MigrateAborted:
      return 409;
    case ErrorCode::SaveIncomplete:
    case ErrorCode::ConnectionRefused:
      return 503;
    case ErrorCode::VerifyMismatch:
    case ErrorCode::IoFault:
      return 500;
    default:
      return 400;
  }
}

namespace {

std::string_view mime_type(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  if (ext == ".map") return "application/json";
  return "application/octet-stream";
}

Json err_body(const Error& e) {
  Json j{{"t", "err"}, {"code", to_string(e.code())}, {"msg", e.what()}};
  if (const auto* si = dynamic_cast<const archive::SaveIncomplete*>(&e)) {
    j["missing"] = si->missing();
  }
  return j;
}

}  // namespace

class WsSession;

struct Gateway::Impl {
  explicit Impl(Config c)
      : cfg(std::move(c)), acceptor(io), timer(io), work(asio::make_work_guard(io)) {}

  void accept();
  void on_timer();
  http::response<http::string_body> handle_http(const http::request<http::string_body>& req);
  Json handle_ws(WsSession& s, const std::string& text);
  std::unique_ptr<ChannelAccessClient> make_client() {
    return std::make_unique<ChannelAccessClient>(cfg.directory, cfg.transport);
  }
  ChannelAccessClient& admin() {
    if (!admin_client) admin_client = make_client();
    return *admin_client;
  }

  Config cfg;
  asio::io_context io;
  tcp::acceptor acceptor;
  asio::steady_timer timer;
  asio::executor_work_guard<asio::io_context::executor_type> work;
  std::thread thread;
  std::list<std::weak_ptr<WsSession>> sessions;  // io thread only
  std::unique_ptr<ChannelAccessClient> admin_client;
  bool started = false;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket sock, Gateway::Impl& gw) : ws_(std::move(sock)), gw_(gw) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->read();
    });
  }

  // io thread only.
  void send(std::string text) {
    if (closed_) return;
    out_.push_back(std::move(text));
    if (out_.size() == 1) write();
  }

  // Any thread: hop onto the io thread holding only a weak reference, so the
  // session is never destroyed on a connection's reader thread.
  static void post(asio::io_context& io, std::weak_ptr<WsSession> weak, std::string text) {
    asio::post(io, [weak = std::move(weak), t = std::move(text)]() mutable {
      if (auto s = weak.lock()) s->send(std::move(t));
    });
  }

  ChannelAccessClient& client() {
    if (!client_) client_ = gw_.make_client();
    return *client_;
  }
  bool has_client() const { return client_ != nullptr; }
  bool greeted = false;

 private:
  void read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        return;
      }
      const std::string text = beast::buffers_to_string(self->in_.data());
      self->in_.consume(self->in_.size());
      Json reply;
      if (!self->ws_.got_text()) {
        reply = net::make_err(nullptr, ErrorCode::BadFrame, "binary frames are not accepted");
      } else {
        reply = self->gw_.handle_ws(*self, text);
      }
      self->send(wire_text(reply));
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(asio::buffer(out_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) {
                        self->closed_ = true;
                        self->out_.clear();
                        return;
                      }
                      self->out_.pop_front();
                      if (!self->out_.empty()) self->write();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  Gateway::Impl& gw_;
  beast::flat_buffer in_;
  std::deque<std::string> out_;
  bool closed_ = false;
  std::unique_ptr<ChannelAccessClient> client_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket sock, Gateway::Impl& gw) : stream_(std::move(sock)), gw_(gw) {}

  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buf_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (ec) return self->close();
                       self->on_request();
                     });
  }

 private:
  void on_request() {
    if (websocket::is_upgrade(req_)) {
      if (req_.target() == "/api/v1/ws") {
        stream_.expires_never();
        auto ws = std::make_shared<WsSession>(stream_.release_socket(), gw_);
        gw_.sessions.push_back(ws);
        ws->run(std::move(req_));
        return;
      }
    }
    res_ = std::make_shared<http::response<http::string_body>>(gw_.handle_http(req_));
    res_->keep_alive(req_.keep_alive());
    res_->prepare_payload();
    http::async_write(stream_, *res_,
                      [self = shared_from_this()](beast::error_code ec, std::size_t) {
                        if (ec || !self->res_->keep_alive()) return self->close();
                        self->read();
                      });
  }

  void close() {
    beast::error_code ec;
    stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
  }

  beast::tcp_stream stream_;
  Gateway::Impl& gw_;
  beast::flat_buffer buf_;
  http::request<http::string_body> req_;
  std::shared_ptr<http::response<http::string_body>> res_;
};

void Gateway::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket sock) {
    if (ec) return;  // closed
    std::make_shared<HttpSession>(std::move(sock), *this)->read();
    accept();
  });
}

void Gateway::Impl::on_timer() {
  timer.expires_after(std::chrono::milliseconds(cfg.refresh_ms));
  timer.async_wait([this](beast::error_code ec) {
    if (ec) return;
    for (auto it = sessions.begin(); it != sessions.end();) {
      auto s = it->lock();
      if (!s) {
        it = sessions.erase(it);
        continue;
      }
      if (s->has_client()) {
        try {
          s->client().refresh();
          s->client().poll();
        } catch (const Error&) {
          // the home may be briefly unreachable; retried next period
        }
      }
      ++it;
    }
    on_timer();
  });
}

Json Gateway::Impl::handle_ws(WsSession& s, const std::string& text) {
  Json msg;
  try {
    msg = net::parse_message(text);
  } catch (const Error& e) {
    return net::make_err(nullptr, e.code(), e.what());
  }
  const Json id = msg.is_object() && msg.contains("id") ? msg["id"] : Json(nullptr);
  try {
    if (!msg.is_object()) throw Error(ErrorCode::BadFrame, "message is not an object");
    if (!msg.contains("t") || !msg["t"].is_string()) {
      throw Error(ErrorCode::BadType, "message has no string 't'");
    }
    const std::string t = msg["t"].get<std::string>();
    if (t == "hello") {
      if (!msg.contains("ver") || msg["ver"] != net::kProtocolVersion) {
        throw Error(ErrorCode::VersionMismatch,
                    "gateway speaks version " + std::to_string(net::kProtocolVersion));
      }
      s.greeted = true;
      Json r = net::make_reply("hello_ack", id);
      r["ver"] = net::kProtocolVersion;
      r["node"] = "gateway";
      return r;
    }
    if (t != "read" && t != "write" && t != "sub" && t != "unsub" && t != "list") {
      throw Error(ErrorCode::BadType, "type '" + t + "' is not served by the gateway");
    }
    if (!s.greeted) throw Error(ErrorCode::VersionMismatch, "hello required before " + t);
    auto& client = s.client();
    if (t == "list" && !msg.contains("db")) {
      Json r = net::make_reply("list_ack", id);
      r["databases"] = client.databases();
      return r;
    }
    if (t == "list") {
      if (!msg["db"].is_string()) throw Error(ErrorCode::BadFrame, "db must be a string");
      return client.request_db(msg["db"].get<std::string>(), msg);
    }
    if (!msg.contains("ch") || !msg["ch"].is_string()) {
      throw Error(ErrorCode::BadFrame, "'" + t + "' needs a string 'ch'");
    }
    const std::string ch = msg["ch"].get<std::string>();
    const auto ref = net::parse_channel_ref(ch);
    if (t == "sub") {
      std::weak_ptr<WsSession> weak = s.weak_from_this();
      client.subscribe(ch, [weak, io = &io](const std::string& c, const db::ChannelState& st) {
        WsSession::post(*io, weak, wire_text(net::make_update(db::ChannelUpdate{c, st, false})));
      });
      Json r = net::make_reply("sub_ack", id);
      r["ch"] = ch;
      return r;
    }
    if (t == "unsub") {
      client.unsubscribe(ch);
      Json r = net::make_reply("unsub_ack", id);
      r["ch"] = ch;
      return r;
    }
    return client.request_db(ref.db, msg);
  } catch (const Error& e) {
    return net::make_err(id, e.code(), e.what());
  } catch (const Json::exception& e) {
    return net::make_err(id, ErrorCode::BadFrame, e.what());
  }
}

http::response<http::string_body> Gateway::Impl::handle_http(
    const http::request<http::string_body>& req) {
  http::response<http::string_body> res{http::status::ok, req.version()};
  res.set(http::field::server, "dcs-gateway");
  const std::string target(req.target());
  const std::string method(req.method_string());
  if (target.rfind("/api/", 0) == 0) {
    auto [status, body] = Gateway::handle_api_impl(*this, method, target, req.body());
    res.result(static_cast<http::status>(status));
    res.set(http::field::content_type, "application/json");
    res.body() = wire_text(body);
    return res;
  }
  if (req.method() != http::verb::get && req.method() != http::verb::head) {
    res.result(http::status::method_not_allowed);
    return res;
  }
  std::string rel = target.substr(0, target.find('?'));
  if (rel.empty() || rel.back() == '/') rel += "index.html";
  const fs::path root = cfg.static_dir.empty() ? fs::path() : fs::weakly_canonical(cfg.static_dir);
  const fs::path file = fs::weakly_canonical(root / fs::path(rel).relative_path());
  const auto [end, _] = std::mismatch(root.begin(), root.end(), file.begin(), file.end());
  if (cfg.static_dir.empty() || end != root.end() || !fs::is_regular_file(file)) {
    res.result(http::status::not_found);
    res.set(http::field::content_type, "text/plain");
    res.body() = "not found\n";
    return res;
  }
  std::ifstream in(file, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  res.set(http::field::content_type, std::string(mime_type(file)));
  if (req.method() != http::verb::head) res.body() = ss.str();
  return res;
}

std::pair<int, Json> Gateway::handle_api_impl(Impl& gw, const std::string& method,
                                              const std::string& target,
                                              const std::string& body) {
  const std::string path = target.substr(0, target.find('?'));
  try {
    auto parse_body = [&]() {
      if (body.empty()) return Json::object();
      return parse_json_text(body, "request body");
    };
    if (path == "/api/v1/directory" && method == "GET") {
      return {200, gw.cfg.directory->load().to_json()};
    }
    if (path == "/api/v1/tunes" && method == "GET") {
      Json list = Json::array();
      for (const auto& t : archive::TuneStore(gw.cfg.tune_store).list()) {
        list.push_back(Json{{"name", t.name}, {"created", t.created}});
      }
      return {200, Json{{"tunes", std::move(list)}}};
    }
    if (path == "/api/v1/tunes" && method == "POST") {
      const Json j = parse_body();
      if (!j.contains("name") || !j["name"].is_string()) {
        throw Error(ErrorCode::InvalidArgument, "body needs a string 'name'");
      }
      archive::TuneStore store(gw.cfg.tune_store);
      return {201, archive::save_tune(gw.admin(), store, j["name"].get<std::string>()).to_json()};
    }
    const std::string tunes_prefix = "/api/v1/tunes/";
    const std::string restore_suffix = "/restore";
    if (method == "POST" && path.rfind(tunes_prefix, 0) == 0 && path.size() > tunes_prefix.size() + restore_suffix.size() &&
        path.compare(path.size() - restore_suffix.size(), restore_suffix.size(), restore_suffix) == 0) {
      const std::string name = path.substr(
          tunes_prefix.size(), path.size() - tunes_prefix.size() - restore_suffix.size());
      archive::TuneStore store(gw.cfg.tune_store);
      return {200, archive::restore_tune(gw.admin(), store, name).to_json()};
    }
    if (path == "/api/v1/migrations" && method == "POST") {
      const Json j = parse_body();
      const auto plan = migration::MigrationPlan::from_json(j.contains("plan") ? j["plan"] : j);
      std::vector<std::string> log;
      migration::Options opts;
      opts.log = [&](const std::string& s) { log.push_back(s); };
      auto& client = gw.admin();
      const auto rep = migration::migrate(client, plan, opts);
      Json out{{"report", rep.to_json()}, {"log", log}};
      if (j.contains("verify_tolerance")) {
        const double tol = j["verify_tolerance"].get<double>();
        const auto v = migration::verify(rep.pre, migration::read_all(client, plan.database), tol);
        out["verify"] = v.to_json();
      }
      return {200, out};
    }
    return {404, Json{{"t", "err"}, {"code", "NOT_FOUND"}, {"msg", method + " " + path}}};
  } catch (const Error& e) {
    return {http_status_for(e.code()), err_body(e)};
  } catch (const Json::exception& e) {
    return {400, Json{{"t", "err"}, {"code", "BAD_FRAME"}, {"msg", e.what()}}};
  }
}

Gateway::Gateway(Config cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
  auto& gw = *impl_;
  try {
    tcp::endpoint ep(asio::ip::make_address(gw.cfg.host),
                     static_cast<unsigned short>(gw.cfg.port));
    gw.acceptor.open(ep.protocol());
    gw.acceptor.set_option(tcp::acceptor::reuse_address(true));
    gw.acceptor.bind(ep);
    gw.acceptor.listen();
  } catch (const boost::system::system_error& e) {
    throw Error(ErrorCode::PortConflict, "gateway cannot listen on " + gw.cfg.host + ":" +
                                             std::to_string(gw.cfg.port) + ": " + e.what());
  }
  gw.accept();
  gw.on_timer();
  gw.started = true;
  gw.thread = std::thread([&gw] { gw.io.run(); });
}

void Gateway::stop() {
  if (!impl_ || !impl_->started) return;
  auto& gw = *impl_;
  gw.started = false;
  asio::post(gw.io, [&gw] {
    beast::error_code ec;
    gw.acceptor.close(ec);
    gw.timer.cancel();
  });
  gw.work.reset();
  gw.io.stop();
  if (gw.thread.joinable()) gw.thread.join();
  gw.sessions.clear();
  gw.admin_client.reset();
}

int Gateway::port() const {
  beast::error_code ec;
  const auto ep = impl_->acceptor.local_endpoint(ec);
  return ec ? impl_->cfg.port : ep.port();
}

std::pair<int, Json> Gateway::handle_api(const std::string& method, const std::string& target,
                                         const std::string& body) {
  return handle_api_impl(*impl_, method, target, body);
}

}  // namespace dcs
