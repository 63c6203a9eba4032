#pragma once

// Directory-aware channel access: resolves "db:channel" to its home node,
// caches connections, and re-resolves when the directory changes or a node
// stops answering.

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "dcs/channel_db.hpp"
#include "dcs/netproto.hpp"
#include "dcs/transport.hpp"

namespace dcs {

class ChannelAccessClient {
 public:
  ChannelAccessClient(std::shared_ptr<net::DirectoryStore> directory,
                      std::shared_ptr<Transport> transport);

  db::ChannelState read(const std::string& ch);
  // Returns the applied (quantized) state.
  db::ChannelState write(const std::string& ch, double value);

  using Handler = std::function<void(const std::string& ch, const db::ChannelState&)>;
  void subscribe(const std::string& ch, Handler handler);
  void unsubscribe(const std::string& ch);

  std::vector<db::ChannelDef> list(const std::string& db);
  std::vector<std::string> databases();

  // Sends a raw request to the home of db (or to a named node when db is
  // empty and node is set). Err replies are returned, not thrown.
  Json request_db(const std::string& db, Json req);
  Json request_node(const std::string& node, Json req);

  // Re-reads the directory; if its version moved, re-subscribes every
  // subscription whose home changed. Returns true if the version moved.
  bool refresh();
  // Delivers pending updates (loopback connections).
  void poll();

  std::int64_t directory_version() const;
  const net::Directory& directory() const { return dir_; }
  std::shared_ptr<net::DirectoryStore> directory_store() const { return store_; }
  std::shared_ptr<Transport> transport() const { return transport_; }

 private:
  Connection& connection(const net::Endpoint& ep);
  void drop_connection(const std::string& node);
  // Runs req against the home of db, retrying once after re-resolution on
  // CONNECTION_REFUSED or NO_SUCH_DB.
  Json call(const std::string& db, Json req);
  void on_update(const Json& msg);
  void resubscribe(const std::string& ch);

  std::shared_ptr<net::DirectoryStore> store_;
  std::shared_ptr<Transport> transport_;
  net::Directory dir_;

  mutable std::recursive_mutex mu_;
  std::map<std::string, std::unique_ptr<Connection>> conns_;  // by node name
  std::map<std::string, net::Endpoint> conn_endpoints_;
  struct Sub {
    Handler handler;
    std::string node;
  };
  // Separate from mu_: TCP reader threads look up handlers while a request
  // holding mu_ waits for them to deliver its reply.
  mutable std::mutex subs_mu_;
  std::map<std::string, Sub> subs_;
};

}  // namespace dcs
