#include "dcs/node.hpp"
#include "dcs/transport.hpp"

namespace dcs {
namespace {

class LoopbackConnection final : public Connection {
 public:
  LoopbackConnection(LoopbackTransport& transport, std::string node_name, Node* node)
      : transport_(transport), node_name_(std::move(node_name)), node_(node) {}

  ~LoopbackConnection() override {
    if (!transport_.is_down(node_name_)) node_->close_session(session_);
  }

  Json request(Json req) override {
    check_alive();
    Json caller_id = nullptr;
    if (auto it = req.find("id"); it != req.end()) caller_id = *it;
    std::uint64_t wire_id;
    Json reply;
    {
      std::lock_guard lock(mu_);
      wire_id = ++next_id_;
      req["id"] = wire_id;
      reply = node_->handle(session_, req);
    }
    if (caller_id.is_null()) {
      reply.erase("id");
    } else {
      reply["id"] = caller_id;
    }
    poll();
    return reply;
  }

  void set_update_handler(UpdateHandler handler) override {
    std::lock_guard lock(mu_);
    handler_ = std::move(handler);
  }

  void poll() override {
    if (transport_.is_down(node_name_)) return;
    UpdateHandler h;
    {
      std::lock_guard lock(mu_);
      h = handler_;
    }
    for (const auto& u : session_.updates->drain()) {
      if (h) h(net::make_update(u));
    }
  }

  bool alive() const override { return !transport_.is_down(node_name_); }

 private:
  void check_alive() const {
    if (transport_.is_down(node_name_)) {
      throw Error(ErrorCode::ConnectionRefused, node_name_ + " is down");
    }
  }

  LoopbackTransport& transport_;
  std::string node_name_;
  Node* node_;
  Session session_;
  std::mutex mu_;
  std::uint64_t next_id_ = 0;
  UpdateHandler handler_;
};

}  // namespace

void LoopbackTransport::attach(const std::string& node_name, Node* node) {
  std::lock_guard lock(mu_);
  nodes_[node_name] = node;
  down_[node_name] = false;
}

void LoopbackTransport::set_down(const std::string& node_name, bool down) {
  std::lock_guard lock(mu_);
  down_[node_name] = down;
}

bool LoopbackTransport::is_down(const std::string& node_name) const {
  std::lock_guard lock(mu_);
  auto it = down_.find(node_name);
  return it == down_.end() || it->second;
}

Node* LoopbackTransport::find(const std::string& node_name) const {
  std::lock_guard lock(mu_);
  auto it = nodes_.find(node_name);
  return it == nodes_.end() ? nullptr : it->second;
}

std::unique_ptr<Connection> LoopbackTransport::connect(const net::Endpoint& ep) {
  Node* node = find(ep.node);
  if (node == nullptr || is_down(ep.node)) {
    throw Error(ErrorCode::ConnectionRefused, "cannot reach " + ep.str());
  }
  auto conn = std::make_unique<LoopbackConnection>(*this, ep.node, node);
  Json hello = Json{{"t", "hello"}, {"ver", net::kProtocolVersion}};
  net::throw_if_err(conn->request(std::move(hello)));
  return conn;
}

}  // namespace dcs
