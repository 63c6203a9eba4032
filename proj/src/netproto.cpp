#include "dcs/netproto.hpp"

#include <array>
#include <filesystem>

namespace dcs::net {

std::vector<std::uint8_t> frame_encode(const Json& msg) {
  const std::string body = wire_text(msg);
  if (body.size() > kMaxFrameBytes) {
    throw Error(ErrorCode::FrameTooLarge,
                "message of " + std::to_string(body.size()) + " bytes exceeds 16 MiB");
  }
  const auto n = static_cast<std::uint32_t>(body.size());
  std::vector<std::uint8_t> out;
  out.reserve(4 + body.size());
  out.push_back(static_cast<std::uint8_t>(n >> 24));
  out.push_back(static_cast<std::uint8_t>(n >> 16));
  out.push_back(static_cast<std::uint8_t>(n >> 8));
  out.push_back(static_cast<std::uint8_t>(n));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Json parse_message(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::BadFrame, std::string("malformed message: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::BadFrame, "message is not a JSON object");
  return j;
}

DecodeResult frame_decode(std::span<const std::uint8_t> bytes) {
  DecodeResult r;
  if (bytes.size() < 4) return r;
  const std::uint32_t n = (std::uint32_t(bytes[0]) << 24) |
                          (std::uint32_t(bytes[1]) << 16) |
                          (std::uint32_t(bytes[2]) << 8) | std::uint32_t(bytes[3]);
  if (n > kMaxFrameBytes) {
    r.status = DecodeResult::Status::Bad;
    r.error = ErrorCode::FrameTooLarge;
    r.error_msg = "declared length " + std::to_string(n) + " exceeds 16 MiB";
    return r;
  }
  if (bytes.size() - 4 < n) return r;
  r.consumed = 4 + std::size_t(n);
  const auto* p = reinterpret_cast<const char*>(bytes.data() + 4);
  try {
    r.message = parse_message(std::string_view(p, n));
    r.status = DecodeResult::Status::Ok;
  } catch (const Error& e) {
    r.status = DecodeResult::Status::Bad;
    r.error = e.code();
    r.error_msg = e.what();
  }
  return r;
}

bool is_known_type(std::string_view t) {
  static constexpr std::array<std::string_view, 40> kTypes{
      "hello", "hello_ack", "list", "list_ack", "read", "read_ack", "write",
      "write_ack", "sub", "sub_ack", "unsub", "unsub_ack", "update", "err",
      // administrative
      "camac", "camac_ack", "reload", "reload_ack", "db_get", "db_get_ack",
      "db_stage", "db_stage_ack", "db_init", "db_init_ack", "db_activate",
      "db_activate_ack", "db_deactivate", "db_deactivate_ack", "db_unstage", "db_unstage_ack", "db_drop",
      "db_drop_ack", "wire", "wire_ack", "unwire", "unwire_ack", "wiring",
      "wiring_ack", "state", "state_ack"};
  for (auto k : kTypes) {
    if (k == t) return true;
  }
  return false;
}

ChannelRef parse_channel_ref(std::string_view s) {
  const auto colon = s.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == s.size()) {
    throw Error(ErrorCode::NoSuchChannel,
                "channel reference '" + std::string(s) + "' is not db:channel");
  }
  return ChannelRef{std::string(s.substr(0, colon)), std::string(s.substr(colon + 1))};
}

Json make_err(const Json& request_id, ErrorCode code, const std::string& msg) {
  Json j = Json::object();
  j["t"] = "err";
  if (!request_id.is_null()) j["id"] = request_id;
  j["code"] = to_string(code);
  j["msg"] = msg;
  return j;
}

Json make_reply(std::string_view type, const Json& request_id) {
  Json j = Json::object();
  j["t"] = type;
  if (!request_id.is_null()) j["id"] = request_id;
  return j;
}

void put_state(Json& msg, const db::ChannelState& s) {
  msg["val"] = s.value;
  msg["raw"] = s.raw;
  msg["ts"] = s.timestamp;
  msg["sev"] = db::to_string(s.severity);
}

db::ChannelState get_state(const Json& msg) {
  db::ChannelState s;
  try {
    s.value = msg.at("val").get<double>();
    s.raw = msg.at("raw").get<std::uint32_t>();
    s.timestamp = msg.at("ts").get<std::int64_t>();
    s.severity = db::severity_from_string(msg.at("sev").get<std::string>());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::BadFrame, std::string("bad channel state: ") + e.what());
  }
  return s;
}

Json make_update(const db::ChannelUpdate& u) {
  Json j = Json::object();
  j["t"] = "update";
  j["ch"] = u.channel;
  put_state(j, u.state);
  if (u.overflow) j["overflow"] = true;
  return j;
}

void throw_if_err(const Json& reply) {
  if (!reply.is_object() || reply.value("t", "") != "err") return;
  ErrorCode code = ErrorCode::BadFrame;
  try {
    code = error_code_from_string(reply.value("code", ""));
  } catch (const Error&) {
  }
  throw Error(code, reply.value("msg", std::string(to_string(code))));
}

Endpoint Directory::resolve(std::string_view ch) const {
  const auto colon = ch.find(':');
  const std::string db(ch.substr(0, colon));
  auto it = databases.find(db);
  if (it == databases.end()) {
    throw Error(ErrorCode::NoSuchDb, "database '" + db + "' is not in the directory");
  }
  return it->second;
}

std::optional<Endpoint> Directory::node(const std::string& name) const {
  if (auto it = nodes.find(name); it != nodes.end()) return it->second;
  for (const auto& [db, ep] : databases) {
    if (ep.node == name) return ep;
  }
  return std::nullopt;
}

std::vector<Endpoint> Directory::all_nodes() const {
  std::map<std::string, Endpoint> m = nodes;
  for (const auto& [db, ep] : databases) m.emplace(ep.node, ep);
  std::vector<Endpoint> out;
  for (auto& [n, ep] : m) out.push_back(ep);
  return out;
}

namespace {

Json endpoint_json(const Endpoint& ep) {
  return Json{{"node", ep.node}, {"host", ep.host}, {"port", ep.port}};
}

Endpoint endpoint_from(const JsonField& f, const std::string& default_node) {
  Endpoint ep;
  ep.node = f.str_or("node", default_node);
  ep.host = f.str_or("host", "127.0.0.1");
  ep.port = int(f.int_or("port", kDefaultPort));
  return ep;
}

}  // namespace

Json Directory::to_json() const {
  Json j = Json::object();
  j["version"] = version;
  Json dbs = Json::object();
  for (const auto& [name, ep] : databases) dbs[name] = endpoint_json(ep);
  j["databases"] = std::move(dbs);
  if (!nodes.empty()) {
    Json ns = Json::object();
    for (const auto& [name, ep] : nodes) {
      ns[name] = Json{{"host", ep.host}, {"port", ep.port}};
    }
    j["nodes"] = std::move(ns);
  }
  return j;
}

Directory Directory::from_json(const Json& j) {
  JsonField root(j, "");
  Directory d;
  d.version = root.at("version").integer();
  const auto dbs = root.at("databases");
  for (const auto& [name, v] : dbs.object().items()) {
    d.databases[name] = endpoint_from(JsonField(v, "databases." + name), "");
    if (d.databases[name].node.empty()) dbs.at(name.c_str()).fail("missing node");
  }
  if (root.has("nodes")) {
    for (const auto& [name, v] : root.at("nodes").object().items()) {
      d.nodes[name] = endpoint_from(JsonField(v, "nodes." + name), name);
    }
  }
  return d;
}

Directory FileDirectoryStore::load() const {
  return Directory::from_json(read_json_file(path_));
}

void FileDirectoryStore::commit(const Directory& next) {
  if (std::filesystem::exists(path_)) {
    const auto cur = load();
    if (next.version <= cur.version) {
      throw Error(ErrorCode::InvalidArgument, "directory version must increase");
    }
  }
  write_json_file(path_, next.to_json());
}

Directory MemoryDirectoryStore::load() const {
  std::lock_guard lock(mu_);
  return dir_;
}

void MemoryDirectoryStore::commit(const Directory& next) {
  std::lock_guard lock(mu_);
  if (next.version <= dir_.version) {
    throw Error(ErrorCode::InvalidArgument, "directory version must increase");
  }
  dir_ = next;
}

}  // namespace dcs::net
