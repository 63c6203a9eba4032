#pragma once

// HTTP/WebSocket front door for the operator console. /api/v1/ws carries the
// channel-access messages as WebSocket text frames (no length prefix) and
// proxies them to each database's home node; a few JSON endpoints wrap the
// directory, tune archive and migration operations; anything else is served
// from the static asset directory.

#include <memory>
#include <string>
#include <utility>

#include "dcs/client.hpp"
#include "dcs/netproto.hpp"
#include "dcs/transport.hpp"

namespace dcs {

class Gateway {
 public:
  struct Config {
    std::string host = "127.0.0.1";
    int port = net::kDefaultGatewayPort;  // 0 picks a free port
    std::string static_dir;
    std::string tune_store = "tunes";
    std::shared_ptr<net::DirectoryStore> directory;
    std::shared_ptr<Transport> transport;
    int refresh_ms = 200;  // directory re-check and loopback polling period
  };

  explicit Gateway(Config cfg);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Throws PortConflict.
  void start();
  void stop();
  int port() const;

  // The JSON endpoints without the HTTP layer: returns (status, body).
  std::pair<int, Json> handle_api(const std::string& method, const std::string& target,
                                  const std::string& body);

  struct Impl;

 private:
  static std::pair<int, Json> handle_api_impl(Impl& gw, const std::string& method,
                                              const std::string& target,
                                              const std::string& body);
  std::unique_ptr<Impl> impl_;
};

// HTTP status used for an error code on the admin endpoints.
int http_status_for(ErrorCode code);

}  // namespace dcs
