#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "dcs/error.hpp"

namespace dcs {

using Json = nlohmann::ordered_json;

// Walks a JSON document while remembering where it is, so that schema errors
// name the offending field ("databases[0].channels[2].gain: ...").
class JsonField {
 public:
  JsonField(const Json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const Json& json() const { return j_; }
  const std::string& path() const { return path_; }

  bool has(const char* key) const { return j_.is_object() && j_.contains(key); }

  JsonField at(const char* key) const;
  JsonField at(std::size_t index) const;
  std::size_t size() const;

  const Json& object() const;
  const Json& array() const;
  std::string str() const;
  double num() const;
  std::int64_t integer() const;
  bool boolean() const;

  std::string str_or(const char* key, std::string dflt) const;
  double num_or(const char* key, double dflt) const;
  std::int64_t int_or(const char* key, std::int64_t dflt) const;
  bool bool_or(const char* key, bool dflt) const;

  [[noreturn]] void fail(const std::string& what) const;

 private:
  const Json& j_;
  std::string path_;
};

// Parses text, turning syntax errors into ConfigError with a line number.
Json parse_json_text(const std::string& text, const std::string& origin);
// Compact text for the wire. Invalid UTF-8 (say, echoed from a bad request)
// is replaced rather than thrown.
inline std::string wire_text(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}
Json read_json_file(const std::string& path);
// Writes via a temporary file and rename so readers never see a partial file.
void write_json_file(const std::string& path, const Json& j, int indent = 2);

}  // namespace dcs
