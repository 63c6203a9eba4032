#pragma once

// Generators shared by the unit suites and the acceptance run.

#include <random>
#include <string>

#include "dcs/camac.hpp"
#include "dcs/json_util.hpp"

namespace dcs::testing {

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len = 24) {
  static const std::string kPieces[] = {"a", "Z", "0", "_", ":", " ", "\"", "\\", "\n",
                                        "\t", "/", "\xc3\xa9", "\xe2\x82\xac", "{", "]"};
  std::string s;
  const std::size_t n = rng() % (max_len + 1);
  for (std::size_t i = 0; i < n; ++i) s += kPieces[rng() % std::size(kPieces)];
  return s;
}

inline double random_double(std::mt19937_64& rng) {
  switch (rng() % 4) {
    case 0: return std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
    case 1: return static_cast<double>(rng() % 100000);
    case 2: return std::ldexp(std::uniform_real_distribution<double>(-1, 1)(rng),
                              static_cast<int>(rng() % 200) - 100);
    default: return 0.0;
  }
}

// A well-formed channel-access message of a random known type.
inline Json random_message(std::mt19937_64& rng) {
  static const char* kTypes[] = {"hello", "read", "write", "sub", "unsub", "list",
                                 "read_ack", "write_ack", "update", "err", "list_ack"};
  Json m = Json::object();
  const std::string t = kTypes[rng() % std::size(kTypes)];
  m["t"] = t;
  m["id"] = static_cast<std::int64_t>(rng() % 1'000'000'000);
  const std::string ch = random_text(rng, 8) + ":" + random_text(rng, 8);
  if (t == "hello") {
    m["ver"] = 1;
  } else if (t == "list") {
    if (rng() % 2) m["db"] = random_text(rng);
  } else if (t == "err") {
    m["code"] = "NO_SUCH_CHANNEL";
    m["msg"] = random_text(rng, 60);
  } else if (t == "list_ack") {
    Json chans = Json::array();
    for (int i = 0, n = int(rng() % 4); i < n; ++i) {
      chans.push_back(Json{{"name", random_text(rng)}, {"gain", random_double(rng)},
                           {"units", random_text(rng, 3)}});
    }
    m["channels"] = chans;
  } else {
    m["ch"] = ch;
  }
  if (t == "write") m["val"] = random_double(rng);
  if (t == "read_ack" || t == "write_ack" || t == "update") {
    m["val"] = random_double(rng);
    m["raw"] = static_cast<std::uint32_t>(rng() & camac::kMaxData);
    m["ts"] = static_cast<std::int64_t>(rng() >> 2);
    static const char* kSev[] = {"NONE", "MINOR", "MAJOR"};
    m["sev"] = kSev[rng() % 3];
  }
  return m;
}

inline camac::Command random_command(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int f = pick(0, camac::kMaxFunction);
  const auto addr = camac::Address::make(pick(1, camac::kMaxCrate), pick(1, camac::kMaxStation),
                                         pick(0, camac::kMaxSubaddress), f);
  if (camac::is_write_function(f)) {
    return camac::Command::make(addr, static_cast<std::uint32_t>(rng() & camac::kMaxData));
  }
  return camac::Command::make(addr);
}

inline camac::Response random_response(std::mt19937_64& rng) {
  camac::Response r;
  r.x = rng() % 4 != 0;
  if (r.x) {
    r.q = rng() % 2;
    r.read_data = static_cast<std::uint32_t>(rng() & camac::kMaxData);
  }
  return r;
}

}  // namespace dcs::testing

#include <unistd.h>

#include <atomic>
#include <filesystem>

namespace dcs::testing {

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("dcs_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace dcs::testing
