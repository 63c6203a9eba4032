// Python bindings: codecs, the benchmark, and an in-process deployment with
// channel access, tunes and migration. JSON values cross as Python objects.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dcs/archive.hpp"
#include "dcs/bench.hpp"
#include "dcs/deployment.hpp"
#include "dcs/highway.hpp"
#include "dcs/migration.hpp"
#include "dcs/netproto.hpp"

namespace py = pybind11;
using namespace dcs;

namespace {

py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json from_py(const py::handle& o) {
  return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict state_dict(const std::string& ch, const db::ChannelState& s) {
  py::dict d;
  d["ch"] = ch;
  d["val"] = s.value;
  d["raw"] = s.raw;
  d["ts"] = s.timestamp;
  d["sev"] = std::string(db::to_string(s.severity));
  return d;
}

py::dict command_dict(const camac::Command& c) {
  py::dict d;
  d["crate"] = c.address().crate();
  d["station"] = c.address().station();
  d["sub"] = c.address().subaddress();
  d["fn"] = c.address().function();
  d["data"] = c.write_data() ? py::cast(*c.write_data()) : py::none();
  return d;
}

class PyDeployment {
 public:
  PyDeployment(std::uint64_t seed, double sigma_scale) {
    topology::Options o;
    o.seed = seed;
    o.sigma_scale = sigma_scale;
    dep_ = std::make_unique<Deployment>(o);
  }

  py::dict read(const std::string& ch) { return state_dict(ch, dep_->client().read(ch)); }
  py::dict write(const std::string& ch, double v) { return state_dict(ch, dep_->client().write(ch, v)); }
  std::vector<std::string> databases() { return dep_->client().databases(); }
  std::vector<std::string> channels(const std::string& db) {
    std::vector<std::string> out;
    for (const auto& d : dep_->client().list(db)) out.push_back(d.name);
    return out;
  }
  void advance(double s) { dep_->advance(s); }
  void kill(const std::string& n) { dep_->kill(n); }
  void revive(const std::string& n) { dep_->revive(n); }
  py::object state_dump() { return to_py(dep_->state_dump()); }
  py::object directory() { return to_py(dep_->directory()->load().to_json()); }
  std::uint64_t highway_transactions() { return dep_->central().highway()->transactions(); }

  py::object migrate(py::object plan, std::optional<double> tolerance) {
    const auto p = migration::MigrationPlan::from_json(plan.is_none() ? topology::cryo_migration_plan()
                                                                      : from_py(plan));
    auto& c = dep_->client();
    const auto rep = migration::migrate(c, p);
    Json out{{"report", rep.to_json()}};
    if (tolerance) {
      out["verify"] = migration::verify(rep.pre, migration::read_all(c, p.database), *tolerance).to_json();
    }
    return to_py(out);
  }

  py::object failover(const std::string& node) { return to_py(failover_demo(*dep_, node).to_json()); }

  py::object save_tune(const std::string& store, const std::string& name) {
    archive::TuneStore s(store);
    return to_py(archive::save_tune(dep_->client(), s, name).to_json());
  }
  py::object restore_tune(const std::string& store, const std::string& name) {
    archive::TuneStore s(store);
    return to_py(archive::restore_tune(dep_->client(), s, name).to_json());
  }

 private:
  std::unique_ptr<Deployment> dep_;
};

}  // namespace

PYBIND11_MODULE(_dcs, m) {
  m.doc() = "Distributed CAMAC control system core";

  static py::exception<Error> exc(m, "DcsError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object args = py::make_tuple(std::string(to_string(e.code())), std::string(e.what()));
      PyErr_SetObject(exc.ptr(), args.ptr());
    }
  });

  m.def("quantize", &camac::quantize, py::arg("value"), py::arg("gain"));
  m.def(
      "max_throughput",
      [](double clock_hz, int cmd_bits, int resp_bits, int gap_bits) {
        HighwayConfig c;
        c.clock_hz = clock_hz;
        c.cmd_frame_bits = cmd_bits;
        c.resp_frame_bits = resp_bits;
        c.gap_bits = gap_bits;
        c.validate();
        return max_throughput(c);
      },
      py::arg("clock_hz") = 2.5e6, py::arg("cmd_bits") = 64, py::arg("resp_bits") = 64,
      py::arg("gap_bits") = 8);

  m.def(
      "encode_command",
      [](int crate, int station, int sub, int fn, std::optional<std::uint32_t> data) {
        return frame::encode_command(camac::Command::make(camac::Address::make(crate, station, sub, fn), data));
      },
      py::arg("crate"), py::arg("station"), py::arg("sub"), py::arg("fn"), py::arg("data") = py::none());
  m.def("decode_command", [](std::uint64_t f) { return command_dict(frame::decode_command(f)); });

  m.def("frame_encode", [](py::object msg) {
    const auto v = net::frame_encode(from_py(msg));
    return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
  });
  m.def("frame_decode", [](py::bytes b) {
    const std::string s = b;
    const auto r = net::frame_decode(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    static const char* kStatus[] = {"ok", "incomplete", "bad"};
    py::dict d;
    d["status"] = kStatus[static_cast<int>(r.status)];
    d["message"] = r.status == net::DecodeResult::Status::Ok ? to_py(r.message) : py::none();
    d["consumed"] = r.consumed;
    if (r.status == net::DecodeResult::Status::Bad) d["error"] = std::string(to_string(r.error));
    return d;
  });

  m.def(
      "run_bench",
      [](const std::string& topology, int crates, int nodes, int readers, double duration, std::uint64_t seed) {
        bench::Options o;
        o.topology = bench::topology_from_string(topology);
        o.crates = crates;
        o.nodes = nodes;
        o.readers = readers;
        o.duration_virtual_s = duration;
        o.seed = seed;
        Json j;
        {
          py::gil_scoped_release release;
          j = bench::run_bench(o).to_json();
        }
        return to_py(j);
      },
      py::arg("topology") = "central", py::arg("crates") = 18, py::arg("nodes") = 1, py::arg("readers") = 1,
      py::arg("duration_virtual") = 10.0, py::arg("seed") = 1);

  m.def("cryo_migration_plan", [] { return to_py(topology::cryo_migration_plan()); });

  py::class_<PyDeployment>(m, "Deployment")
      .def(py::init<std::uint64_t, double>(), py::arg("seed") = 1, py::arg("sigma_scale") = 1.0)
      .def("read", &PyDeployment::read)
      .def("write", &PyDeployment::write)
      .def("databases", &PyDeployment::databases)
      .def("channels", &PyDeployment::channels)
      .def("advance", &PyDeployment::advance, py::arg("seconds"))
      .def("kill", &PyDeployment::kill)
      .def("revive", &PyDeployment::revive)
      .def("state_dump", &PyDeployment::state_dump)
      .def("directory", &PyDeployment::directory)
      .def("highway_transactions", &PyDeployment::highway_transactions)
      .def("migrate", &PyDeployment::migrate, py::arg("plan") = py::none(),
           py::arg("verify_tolerance") = py::none())
      .def("failover", &PyDeployment::failover, py::arg("kill") = "central")
      .def("save_tune", &PyDeployment::save_tune, py::arg("store"), py::arg("name"))
      .def("restore_tune", &PyDeployment::restore_tune, py::arg("store"), py::arg("name"));
}
