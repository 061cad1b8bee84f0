#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "qkdrelay/audit.hpp"
#include "qkdrelay/error.hpp"
#include "qkdrelay/netharness.hpp"

namespace py = pybind11;
using namespace qkdrelay;

namespace {

netharness::Topology topology_of(const std::optional<std::string>& yaml) {
  return yaml ? netharness::load_topology(*yaml) : netharness::paris_topology();
}

netharness::RunPlan make_plan(const std::string& variant, const std::string& kem, std::uint64_t seed,
                              const std::string& suite) {
  netharness::RunPlan plan;
  plan.variant = parse_variant(variant);
  plan.kem = cryptoseal::param_set_by_name(kem);
  plan.seed = seed;
  plan.crypto_suite = suite;
  return plan;
}

py::bytes to_bytes(const keycore::KeyRegister& k) {
  const auto b = k.bytes();
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  static py::exception<Error> error_type(m, "QkdRelayError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error_type, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  py::class_<keycore::KeyRegister>(m, "KeyRegister")
      .def(py::init<std::size_t>(), py::arg("n_bits") = 0)
      .def_static("from_bits", &keycore::KeyRegister::from_bit_string)
      .def_static("from_bytes",
                  [](const py::bytes& b, std::optional<std::size_t> n) {
                    const std::string s = b;
                    std::span<const std::uint8_t> view(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
                    return n ? keycore::KeyRegister::from_bytes(view, *n) : keycore::KeyRegister::from_bytes(view);
                  },
                  py::arg("data"), py::arg("n_bits") = py::none())
      .def("bits", &keycore::KeyRegister::to_bit_string)
      .def("to_bytes", &to_bytes)
      .def("__len__", &keycore::KeyRegister::size)
      .def("__xor__", &keycore::xor_registers)
      .def("__eq__", [](const keycore::KeyRegister& a, const keycore::KeyRegister& b) { return a == b; })
      .def("__repr__", [](const keycore::KeyRegister& k) { return "KeyRegister(" + std::to_string(k.size()) + ")"; })
      .def("truncate", &keycore::truncate)
      .def("pad", &keycore::pad)
      .def("unpad", &keycore::unpad);

  m.def("eta_direct_kem", [](const std::string& kem) { return audit::eta_direct_kem(cryptoseal::param_set_by_name(kem)); },
        py::arg("kem") = "KEM-512");
  m.def("eta_kem_then_aes", &audit::eta_kem_then_aes, py::arg("l") = 0);
  m.def("final_rate", py::overload_cast<double, double, double>(&audit::final_rate));
  m.def("format_percent", &audit::format_percent);
  m.def("eta_table", [] {
    std::vector<std::tuple<std::string, std::string, std::size_t, double>> rows;
    for (const auto& r : audit::eta_table(cryptoseal::builtin_param_sets())) {
      rows.emplace_back(r.protocol, r.params.name, r.params.ciphertext_bits, r.eta);
    }
    return rows;
  });

  m.def("paris_topology", [] { return std::string(netharness::kParisTopology); });
  m.def("topology_nodes", [](const std::string& yaml) {
    std::vector<std::string> ids;
    for (const auto& n : netharness::load_topology(yaml).nodes) ids.push_back(n.id);
    return ids;
  });

  m.def(
      "_run_session",
      [](const std::string& variant, std::size_t l, std::uint64_t seed, const std::string& kem,
         const std::string& suite, double max_wait_s, std::optional<std::string> topology) {
        auto plan = make_plan(variant, kem, seed, suite);
        plan.trigger = netharness::OnKeyAvailable{l};
        plan.duration_s = max_wait_s;
        const auto shot = netharness::run_session(topology_of(topology), plan);
        auto j = audit::session_json(shot.result.session);
        j["ticks_waited"] = shot.ticks_waited;
        j["keys_match"] = shot.result.session.keys_match();
        std::ostringstream transcript;
        audit::write_transcript(transcript, shot.result.transcript);
        return std::make_tuple(j.dump(), transcript.str(), to_bytes(shot.result.session.alice_key),
                               to_bytes(shot.result.session.bob_key));
      },
      py::call_guard<py::gil_scoped_release>());

  m.def(
      "_run_continuous",
      [](const std::string& variant, double duration_s, std::uint64_t seed, const std::string& kem,
         const std::string& suite, std::size_t l_target, std::optional<std::size_t> periodic,
         std::optional<std::string> topology) {
        auto plan = make_plan(variant, kem, seed, suite);
        plan.duration_s = duration_s;
        if (periodic) {
          plan.trigger = netharness::Periodic{static_cast<decltype(netharness::Periodic::interval_ticks)>(*periodic)};
          plan.l_request = l_target;
        } else {
          plan.trigger = netharness::OnKeyAvailable{l_target};
        }
        const auto r = netharness::run_continuous(topology_of(topology), plan);
        return std::make_pair(netharness::to_json(r).dump(), netharness::telemetry_csv(r.telemetry));
      },
      py::call_guard<py::gil_scoped_release>());

  m.def("_audit", [](const std::string& jsonl, const std::string& as, std::optional<std::string> node) {
    std::istringstream in(jsonl);
    std::vector<std::string> out;
    for (const auto& t : audit::read_transcripts(in)) {
      const auto view = as == "eve" ? audit::eve_view(t, node) : audit::charlie_view(t, node);
      nlohmann::json j{{"session_id", t.session_id}, {"view", audit::to_json(view)}};
      try {
        j["reconstruction"] = audit::to_json(audit::reconstruct_as_charlie(view));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::IncompleteView) throw;
        j["reconstruction"] = nullptr;
      }
      out.push_back(j.dump());
    }
    return out;
  });
}
