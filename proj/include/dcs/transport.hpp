#pragma once

// Client connections to nodes. The loopback transport calls a node's handler
// in-process (zero-latency network); the TCP transport speaks the framed
// protocol over a socket.

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "dcs/netproto.hpp"

namespace dcs {

class Node;
class Session;

using UpdateHandler = std::function<void(const Json&)>;

class Connection {
 public:
  virtual ~Connection() = default;

  // Sends one request and returns its reply (an ack or an err message). The
  // caller's "id", if any, is echoed back; the wire id is the connection's.
  // Throws ConnectionRefused when the peer is gone.
  virtual Json request(Json req) = 0;
  virtual void set_update_handler(UpdateHandler handler) = 0;
  // Delivers updates that are waiting (loopback only; TCP delivers as they
  // arrive on its reader thread).
  virtual void poll() {}
  virtual bool alive() const = 0;
};

class Transport {
 public:
  virtual ~Transport() = default;
  // Connects and completes the hello exchange. Throws ConnectionRefused.
  virtual std::unique_ptr<Connection> connect(const net::Endpoint& ep) = 0;
};

class LoopbackTransport final : public Transport {
 public:
  void attach(const std::string& node_name, Node* node);
  // A node marked down refuses new connections and fails open ones, as if
  // its process had been killed.
  void set_down(const std::string& node_name, bool down);
  bool is_down(const std::string& node_name) const;
  Node* find(const std::string& node_name) const;

  std::unique_ptr<Connection> connect(const net::Endpoint& ep) override;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Node*> nodes_;
  std::map<std::string, bool> down_;
};

class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(std::chrono::milliseconds timeout = std::chrono::seconds(10))
      : timeout_(timeout) {}
  std::unique_ptr<Connection> connect(const net::Endpoint& ep) override;

 private:
  std::chrono::milliseconds timeout_;
};

// Serves one node's channel access on a TCP port. Port 0 picks a free port.
class TcpServer {
 public:
  TcpServer(Node& node, std::string host, int port);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  // Throws PortConflict if the port cannot be bound.
  void start();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_;
};

}  // namespace dcs
