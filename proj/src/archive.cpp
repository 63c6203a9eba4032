#include "dcs/archive.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <set>

namespace dcs::archive {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

}  // namespace

Json TuneSnapshot::to_json() const {
  Json entries_j = Json::array();
  for (const auto& e : entries) {
    entries_j.push_back(Json{{"channel", e.channel},
                             {"value", e.value},
                             {"units", e.units},
                             {"gain", e.gain},
                             {"offset", e.offset}});
  }
  return Json{{"tune_name", name},
              {"created", created},
              {"source_directory_version", source_directory_version},
              {"entries", std::move(entries_j)}};
}

TuneSnapshot TuneSnapshot::from_json(const Json& j) {
  JsonField f(j, "tune");
  TuneSnapshot s;
  s.name = f.at("tune_name").str();
  s.created = f.str_or("created", "");
  s.source_directory_version = f.int_or("source_directory_version", 0);
  const auto entries = f.at("entries");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto e = entries.at(i);
    s.entries.push_back(TuneEntry{e.at("channel").str(), e.at("value").num(),
                                  e.str_or("units", ""), e.num_or("gain", 1.0),
                                  e.num_or("offset", 0.0)});
  }
  return s;
}

SaveIncomplete::SaveIncomplete(std::vector<std::string> missing)
    : Error(ErrorCode::SaveIncomplete, "unreachable: " + join(missing)),
      missing_(std::move(missing)) {}

void check_tune_name(const std::string& name) {
  const bool ok = !name.empty() && name.size() <= 128 && name[0] != '.' &&
                  std::all_of(name.begin(), name.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
                           c == '-' || c == '.';
                  });
  if (!ok) throw Error(ErrorCode::InvalidArgument, "bad tune name '" + name + "'");
}

TuneStore::TuneStore(std::string dir) : dir_(std::move(dir)) {}

std::string TuneStore::path_for(const std::string& name) const {
  check_tune_name(name);
  return (fs::path(dir_) / (name + ".json")).string();
}

bool TuneStore::exists(const std::string& name) const {
  return fs::exists(path_for(name));
}

void TuneStore::put(const TuneSnapshot& snap) {
  const auto path = path_for(snap.name);
  fs::create_directories(dir_);
  if (fs::exists(path)) {
    throw Error(ErrorCode::NameExists, "tune '" + snap.name + "' already exists");
  }
  write_json_file(path, snap.to_json());
}

TuneSnapshot TuneStore::get(const std::string& name) const {
  const auto path = path_for(name);
  if (!fs::exists(path)) throw Error(ErrorCode::NoSuchTune, "no tune '" + name + "'");
  return TuneSnapshot::from_json(read_json_file(path));
}

std::vector<TuneInfo> TuneStore::list() const {
  std::vector<TuneInfo> out;
  if (!fs::is_directory(dir_)) return out;
  for (const auto& de : fs::directory_iterator(dir_)) {
    if (!de.is_regular_file() || de.path().extension() != ".json") continue;
    const std::string name = de.path().stem().string();
    try {
      check_tune_name(name);
      const Json j = read_json_file(de.path().string());
      out.push_back(TuneInfo{name, j.value("created", "")});
    } catch (const Error&) {
      // not a tune file
    }
  }
  std::sort(out.begin(), out.end(),
            [](const TuneInfo& a, const TuneInfo& b) { return a.name < b.name; });
  return out;
}

TuneSnapshot save_tune(ChannelAccessClient& client, TuneStore& store,
                       const std::string& name) {
  check_tune_name(name);
  if (store.exists(name)) {
    throw Error(ErrorCode::NameExists, "tune '" + name + "' already exists");
  }
  client.refresh();
  TuneSnapshot snap;
  snap.name = name;
  snap.source_directory_version = client.directory_version();
  std::vector<std::string> missing;
  for (const auto& db : client.databases()) {
    std::vector<db::ChannelDef> defs;
    try {
      defs = client.list(db);
    } catch (const Error&) {
      missing.push_back(db + ":*");
      continue;
    }
    for (const auto& def : defs) {
      if (def.direction != db::Direction::Setpoint) continue;
      const std::string ch = db + ":" + def.name;
      try {
        const auto st = client.read(ch);
        snap.entries.push_back(TuneEntry{ch, st.value, def.units, def.gain, def.offset});
      } catch (const Error&) {
        missing.push_back(ch);
      }
    }
  }
  if (!missing.empty()) throw SaveIncomplete(std::move(missing));
  if (snap.entries.empty()) {
    throw Error(ErrorCode::SaveIncomplete, "no setpoint channels to save");
  }
  std::sort(snap.entries.begin(), snap.entries.end(),
            [](const TuneEntry& a, const TuneEntry& b) { return a.channel < b.channel; });
  snap.created = utc_now();
  store.put(snap);
  return snap;
}

std::string_view to_string(RestoreResult::Status s) {
  switch (s) {
    case RestoreResult::Status::Applied: return "APPLIED";
    case RestoreResult::Status::Skipped: return "SKIPPED";
    case RestoreResult::Status::Error: return "ERROR";
  }
  return "ERROR";
}

int RestoreReport::count(RestoreResult::Status s) const {
  return static_cast<int>(std::count_if(results.begin(), results.end(),
                                        [s](const RestoreResult& r) { return r.status == s; }));
}

Json RestoreReport::to_json() const {
  Json rs = Json::array();
  for (const auto& r : results) {
    Json j{{"channel", r.channel}, {"status", to_string(r.status)}};
    if (r.applied) j["applied"] = *r.applied;
    if (!r.code.empty()) j["code"] = r.code;
    if (!r.message.empty()) j["msg"] = r.message;
    rs.push_back(std::move(j));
  }
  return Json{{"tune", tune},
              {"applied", count(RestoreResult::Status::Applied)},
              {"skipped", count(RestoreResult::Status::Skipped)},
              {"errors", count(RestoreResult::Status::Error)},
              {"results", std::move(rs)}};
}

RestoreReport restore_tune(ChannelAccessClient& client, const TuneStore& store,
                           const std::string& name) {
  auto snap = store.get(name);
  std::sort(snap.entries.begin(), snap.entries.end(),
            [](const TuneEntry& a, const TuneEntry& b) { return a.channel < b.channel; });
  client.refresh();
  RestoreReport report;
  report.tune = name;

  // Channel listing per database, fetched once; nullopt when unreachable.
  std::map<std::string, std::optional<std::set<std::string>>> known;
  const auto dbs = client.databases();
  auto channels_of = [&](const std::string& db) -> const std::optional<std::set<std::string>>& {
    auto it = known.find(db);
    if (it != known.end()) return it->second;
    std::optional<std::set<std::string>> names;
    try {
      names.emplace();
      for (const auto& d : client.list(db)) names->insert(d.name);
    } catch (const Error&) {
      names.reset();
    }
    return known.emplace(db, std::move(names)).first->second;
  };

  for (const auto& e : snap.entries) {
    RestoreResult r;
    r.channel = e.channel;
    try {
      const auto ref = net::parse_channel_ref(e.channel);
      if (std::find(dbs.begin(), dbs.end(), ref.db) == dbs.end()) {
        r.status = RestoreResult::Status::Skipped;
        r.code = "NO_SUCH_DB";
      } else if (const auto& names = channels_of(ref.db); !names) {
        r.status = RestoreResult::Status::Error;
        r.code = "CONNECTION_REFUSED";
        r.message = "database " + ref.db + " unreachable";
      } else if (!names->contains(ref.channel)) {
        r.status = RestoreResult::Status::Skipped;
        r.code = "NO_SUCH_CHANNEL";
      } else {
        r.applied = client.write(e.channel, e.value).value;
      }
    } catch (const Error& err) {
      r.status = err.code() == ErrorCode::NoSuchChannel ? RestoreResult::Status::Skipped
                                                        : RestoreResult::Status::Error;
      r.code = std::string(dcs::to_string(err.code()));
      r.message = err.what();
    }
    report.results.push_back(std::move(r));
  }
  return report;
}

}  // namespace dcs::archive
