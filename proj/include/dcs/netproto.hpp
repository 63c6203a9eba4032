#pragma once

// Remote channel access wire format. Every message is one JSON object; on a
// byte stream each is preceded by a 4-byte big-endian length.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcs/channel_db.hpp"
#include "dcs/error.hpp"
#include "dcs/json_util.hpp"

namespace dcs::net {

inline constexpr std::size_t kMaxFrameBytes = 16u * 1024u * 1024u;
inline constexpr int kProtocolVersion = 1;
inline constexpr int kDefaultPort = 5730;
inline constexpr int kDefaultGatewayPort = 8080;

std::vector<std::uint8_t> frame_encode(const Json& msg);

struct DecodeResult {
  enum class Status { Ok, Incomplete, Bad };
  Status status = Status::Incomplete;
  Json message;
  std::size_t consumed = 0;  // bytes to drop from the front of the buffer
  ErrorCode error = ErrorCode::BadFrame;
  std::string error_msg;
};

// Incomplete frames consume nothing. A malformed body is reported as Bad with
// consumed covering the whole frame so the stream can continue; an oversize
// length is Bad with FrameTooLarge and consumes nothing (the stream is lost).
DecodeResult frame_decode(std::span<const std::uint8_t> bytes);

// Parses a JSON text body (WebSocket text frame, or the payload of a length
// prefixed frame). Throws BadFrame.
Json parse_message(std::string_view text);

// The channel-access message types plus the administrative ones used by the
// migration tool and probe.
bool is_known_type(std::string_view t);

struct ChannelRef {
  std::string db;
  std::string channel;
  std::string str() const { return db + ":" + channel; }
};
// "<database>:<channel>"; a missing separator is NoSuchChannel.
ChannelRef parse_channel_ref(std::string_view s);

Json make_err(const Json& request_id, ErrorCode code, const std::string& msg);
Json make_reply(std::string_view type, const Json& request_id);
// Adds val/raw/ts/sev to msg.
void put_state(Json& msg, const db::ChannelState& s);
db::ChannelState get_state(const Json& msg);
Json make_update(const db::ChannelUpdate& u);

// Raises the Error carried by an err message; no-op for anything else.
void throw_if_err(const Json& reply);

struct Endpoint {
  std::string node;
  std::string host = "127.0.0.1";
  int port = kDefaultPort;

  bool operator==(const Endpoint&) const = default;
  std::string str() const { return node + "@" + host + ":" + std::to_string(port); }
};

// Which node serves which database. "nodes" lists every known node even if
// it homes nothing yet (the target of a migration).
struct Directory {
  std::int64_t version = 1;
  std::map<std::string, Endpoint> databases;
  std::map<std::string, Endpoint> nodes;

  // Home of the database part of "db:channel" (or a bare database name).
  // Throws NoSuchDb.
  Endpoint resolve(std::string_view ch) const;
  std::optional<Endpoint> node(const std::string& name) const;
  std::vector<Endpoint> all_nodes() const;

  Json to_json() const;
  static Directory from_json(const Json& j);
  bool operator==(const Directory&) const = default;
};

class DirectoryStore {
 public:
  virtual ~DirectoryStore() = default;
  virtual Directory load() const = 0;
  // Rejects a directory whose version does not exceed the stored one.
  virtual void commit(const Directory& next) = 0;
};

class FileDirectoryStore final : public DirectoryStore {
 public:
  explicit FileDirectoryStore(std::string path) : path_(std::move(path)) {}
  Directory load() const override;
  void commit(const Directory& next) override;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class MemoryDirectoryStore final : public DirectoryStore {
 public:
  explicit MemoryDirectoryStore(Directory d) : dir_(std::move(d)) {}
  Directory load() const override;
  void commit(const Directory& next) override;

 private:
  mutable std::mutex mu_;
  Directory dir_;
};

}  // namespace dcs::net
