#include "dcs/client.hpp"

namespace dcs {

ChannelAccessClient::ChannelAccessClient(std::shared_ptr<net::DirectoryStore> directory,
                                         std::shared_ptr<Transport> transport)
    : store_(std::move(directory)), transport_(std::move(transport)), dir_(store_->load()) {}

std::int64_t ChannelAccessClient::directory_version() const {
  std::lock_guard lock(mu_);
  return dir_.version;
}

Connection& ChannelAccessClient::connection(const net::Endpoint& ep) {
  std::lock_guard lock(mu_);
  auto it = conns_.find(ep.node);
  if (it != conns_.end() && conn_endpoints_[ep.node] == ep && it->second->alive()) {
    return *it->second;
  }
  conns_.erase(ep.node);
  auto conn = transport_->connect(ep);
  conn->set_update_handler([this](const Json& m) { on_update(m); });
  conn_endpoints_[ep.node] = ep;
  return *(conns_[ep.node] = std::move(conn));
}

void ChannelAccessClient::drop_connection(const std::string& node) {
  std::lock_guard lock(mu_);
  conns_.erase(node);
  conn_endpoints_.erase(node);
}

Json ChannelAccessClient::call(const std::string& db, Json req) {
  std::lock_guard lock(mu_);
  for (int attempt = 0;; ++attempt) {
    const net::Endpoint ep = dir_.resolve(db);
    try {
      Json reply = connection(ep).request(req);
      const bool moved =
          reply.value("t", "") == "err" && reply.value("code", "") == "NO_SUCH_DB";
      if (!moved || attempt > 0) return reply;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ConnectionRefused) throw;
      drop_connection(ep.node);
      if (attempt > 0) throw;
    }
    dir_ = store_->load();
  }
}

Json ChannelAccessClient::request_db(const std::string& db, Json req) {
  return call(db, std::move(req));
}

Json ChannelAccessClient::request_node(const std::string& node, Json req) {
  std::lock_guard lock(mu_);
  auto ep = dir_.node(node);
  if (!ep) {
    dir_ = store_->load();
    ep = dir_.node(node);
  }
  if (!ep) throw Error(ErrorCode::ConnectionRefused, "node " + node + " is not in the directory");
  try {
    return connection(*ep).request(std::move(req));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConnectionRefused) drop_connection(node);
    throw;
  }
}

db::ChannelState ChannelAccessClient::read(const std::string& ch) {
  const auto ref = net::parse_channel_ref(ch);
  Json reply = call(ref.db, Json{{"t", "read"}, {"ch", ch}});
  net::throw_if_err(reply);
  return net::get_state(reply);
}

db::ChannelState ChannelAccessClient::write(const std::string& ch, double value) {
  const auto ref = net::parse_channel_ref(ch);
  Json reply = call(ref.db, Json{{"t", "write"}, {"ch", ch}, {"val", value}});
  net::throw_if_err(reply);
  return net::get_state(reply);
}

void ChannelAccessClient::subscribe(const std::string& ch, Handler handler) {
  const auto ref = net::parse_channel_ref(ch);
  std::lock_guard lock(mu_);
  {
    std::lock_guard sl(subs_mu_);
    subs_[ch] = Sub{std::move(handler), {}};
  }
  try {
    Json reply = call(ref.db, Json{{"t", "sub"}, {"ch", ch}});
    net::throw_if_err(reply);
    std::lock_guard sl(subs_mu_);
    subs_[ch].node = dir_.resolve(ref.db).node;
  } catch (...) {
    std::lock_guard sl(subs_mu_);
    subs_.erase(ch);
    throw;
  }
  poll();
}

void ChannelAccessClient::unsubscribe(const std::string& ch) {
  const auto ref = net::parse_channel_ref(ch);
  std::lock_guard lock(mu_);
  {
    std::lock_guard sl(subs_mu_);
    if (subs_.erase(ch) == 0) return;
  }
  try {
    call(ref.db, Json{{"t", "unsub"}, {"ch", ch}});
  } catch (const Error&) {
  }
}

void ChannelAccessClient::resubscribe(const std::string& ch) {
  const auto ref = net::parse_channel_ref(ch);
  std::string old_node;
  {
    std::lock_guard sl(subs_mu_);
    old_node = subs_.at(ch).node;
  }
  const auto ep = dir_.resolve(ref.db);
  if (ep.node == old_node) return;
  // The old home may already have dropped the database; ignore its answer.
  if (!old_node.empty()) {
    try {
      auto it = conns_.find(old_node);
      if (it != conns_.end()) it->second->request(Json{{"t", "unsub"}, {"ch", ch}});
    } catch (const Error&) {
    }
  }
  Json reply = connection(ep).request(Json{{"t", "sub"}, {"ch", ch}});
  net::throw_if_err(reply);
  std::lock_guard sl(subs_mu_);
  subs_.at(ch).node = ep.node;
}

bool ChannelAccessClient::refresh() {
  std::lock_guard lock(mu_);
  auto next = store_->load();
  if (next.version == dir_.version) return false;
  dir_ = std::move(next);
  std::vector<std::string> chans;
  {
    std::lock_guard sl(subs_mu_);
    for (const auto& [ch, sub] : subs_) chans.push_back(ch);
  }
  for (const auto& ch : chans) resubscribe(ch);
  poll();
  return true;
}

void ChannelAccessClient::poll() {
  std::vector<Connection*> conns;
  {
    std::lock_guard lock(mu_);
    for (auto& [n, c] : conns_) conns.push_back(c.get());
  }
  for (auto* c : conns) c->poll();
}

void ChannelAccessClient::on_update(const Json& msg) {
  const std::string ch = msg.value("ch", "");
  Handler h;
  {
    std::lock_guard sl(subs_mu_);
    auto it = subs_.find(ch);
    if (it == subs_.end()) return;
    h = it->second.handler;
  }
  if (h) h(ch, net::get_state(msg));
}

std::vector<db::ChannelDef> ChannelAccessClient::list(const std::string& db) {
  Json reply = call(db, Json{{"t", "list"}, {"db", db}});
  net::throw_if_err(reply);
  std::vector<db::ChannelDef> out;
  const auto& chans = reply.at("channels");
  for (std::size_t i = 0; i < chans.size(); ++i) {
    out.push_back(db::channel_def_from_json(JsonField(chans[i], "channels")));
  }
  return out;
}

std::vector<std::string> ChannelAccessClient::databases() {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [name, ep] : dir_.databases) out.push_back(name);
  return out;
}

}  // namespace dcs
