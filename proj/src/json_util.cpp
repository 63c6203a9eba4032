#include "dcs/json_util.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace dcs {

JsonField JsonField::at(const char* key) const {
  const Json& o = object();
  auto it = o.find(key);
  if (it == o.end()) fail(std::string("missing field '") + key + "'");
  return JsonField(*it, path_.empty() ? key : path_ + "." + key);
}

JsonField JsonField::at(std::size_t index) const {
  const Json& a = array();
  if (index >= a.size()) fail("index out of range");
  return JsonField(a[index], path_ + "[" + std::to_string(index) + "]");
}

std::size_t JsonField::size() const { return array().size(); }

const Json& JsonField::object() const {
  if (!j_.is_object()) fail("expected an object");
  return j_;
}

const Json& JsonField::array() const {
  if (!j_.is_array()) fail("expected an array");
  return j_;
}

std::string JsonField::str() const {
  if (!j_.is_string()) fail("expected a string");
  return j_.get<std::string>();
}

double JsonField::num() const {
  if (!j_.is_number()) fail("expected a number");
  return j_.get<double>();
}

std::int64_t JsonField::integer() const {
  if (!j_.is_number_integer()) fail("expected an integer");
  return j_.get<std::int64_t>();
}

bool JsonField::boolean() const {
  if (!j_.is_boolean()) fail("expected true/false");
  return j_.get<bool>();
}

std::string JsonField::str_or(const char* key, std::string dflt) const {
  return has(key) ? at(key).str() : std::move(dflt);
}

double JsonField::num_or(const char* key, double dflt) const {
  return has(key) ? at(key).num() : dflt;
}

std::int64_t JsonField::int_or(const char* key, std::int64_t dflt) const {
  return has(key) ? at(key).integer() : dflt;
}

bool JsonField::bool_or(const char* key, bool dflt) const {
  return has(key) ? at(key).boolean() : dflt;
}

void JsonField::fail(const std::string& what) const {
  throw Error(ErrorCode::ConfigError,
              (path_.empty() ? std::string("<root>") : path_) + ": " + what);
}

Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // e.byte is 1-based; count newlines before it for a line number.
    std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    std::size_t line = 1;
    for (std::size_t i = 0; i + 1 < upto; ++i) line += text[i] == '\n';
    throw Error(ErrorCode::ConfigError,
                origin + ":" + std::to_string(line) + ": " + e.what());
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

void write_json_file(const std::string& path, const Json& j, int indent) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::ConfigError, path + ": cannot write");
    out << j.dump(indent) << '\n';
  }
  fs::rename(tmp, target);
}

}  // namespace dcs
