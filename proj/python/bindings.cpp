#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mmab/harness.hpp"
#include "mmab/sic_mmab.hpp"

namespace py = pybind11;
using namespace mmab;

namespace {

ExperimentConfig parse(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j);
}

std::string run_batch_json(const std::string& config, const std::string& out_dir) {
  const auto c = parse(config);
  BatchResult b;
  {
    py::gil_scoped_release release;
    b = run_batch(c);
  }
  if (!out_dir.empty()) write_batch_outputs(out_dir, c, b);
  return to_json(b.report).dump();
}

py::dict run_episode_py(const std::string& config, int run) {
  const auto c = parse(config);
  const auto inst = build_instance(c);
  const auto seed = run_seed(c.seed, run);
  auto policies = make_policies(c, inst, seed);
  EpisodeResult ep;
  {
    py::gil_scoped_release release;
    ep = run_episode(inst, policies, seed);
  }
  py::dict d;
  d["cum_regret"] = ep.ledger.cum_regret;
  d["cum_realized_regret"] = ep.ledger.cum_realized_regret;
  d["collisions"] = ep.ledger.collisions;
  d["exploit"] = ep.ledger.exploit_arm;
  d["selected"] = selects_top_arms(inst, ep.ledger.exploit_arm);
  return d;
}

}  // namespace

PYBIND11_MODULE(_mmab, m) {
  m.doc() = "Decentralized multiplayer bandit simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);

  m.def("run_batch_json", &run_batch_json, py::arg("config"), py::arg("out_dir") = "");
  m.def("run_episode_json", &run_episode_py, py::arg("config"), py::arg("run") = 0);
  m.def("normalize_config_json",
        [](const std::string& config) { return to_json(parse(config)).dump(); });
  m.def("resolve_means_json",
        [](const std::string& config) { return resolve_means(parse(config).instance); });

  m.def("checkpoint_grid", &checkpoint_grid, py::arg("horizon"));
  m.def("run_seed", &run_seed, py::arg("master"), py::arg("run"));

  m.def(
      "quantize",
      [](double s, int phase, std::uint64_t seed) {
        Rng rng = make_stream(seed, "quantizer", 0);
        return quantize(s, phase, rng);
      },
      py::arg("s"), py::arg("phase"), py::arg("seed") = 0);
  m.def(
      "quantize_many",
      [](double s, int phase, std::size_t n, std::uint64_t seed) {
        Rng rng = make_stream(seed, "quantizer", 0);
        std::vector<std::uint64_t> out(n);
        for (auto& v : out) v = quantize(s, phase, rng);
        return out;
      },
      py::arg("s"), py::arg("phase"), py::arg("n"), py::arg("seed") = 0);
  m.def("encode_bits", &encode_bits, py::arg("s"), py::arg("phase"));
  m.def("decode_bits", &decode_bits, py::arg("bits"));
  m.def(
      "sic_radius",
      [](const std::string& variant, double horizon, double pulls) {
        return sic_radius(variant == "general" ? SicVariant::General : SicVariant::Bernoulli,
                          horizon, pulls);
      },
      py::arg("variant"), py::arg("horizon"), py::arg("pulls"));
  m.def(
      "accept_reject",
      [](const std::vector<ArmId>& active, const std::vector<double>& estimate,
         const std::vector<double>& radius, int players) {
        const auto d = accept_reject(active, estimate, radius, players);
        return py::make_tuple(d.accepted, d.rejected);
      },
      py::arg("active_arms"), py::arg("estimate"), py::arg("radius"), py::arg("active_players"));
}
