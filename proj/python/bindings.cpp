#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <optional>
#include <string>

#include "edpflow/coarsegrain.hpp"
#include "edpflow/dissipation.hpp"
#include "edpflow/errors.hpp"
#include "edpflow/experiments.hpp"
#include "edpflow/functionals.hpp"
#include "edpflow/multispecies.hpp"
#include "edpflow/solver.hpp"

namespace py = pybind11;
using namespace edpflow;
using nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// JSON crosses the boundary as text; the Python side sees plain dicts and lists.
json to_json(const py::object& obj) {
  const py::module_ pyjson = py::module_::import("json");
  return json::parse(pyjson.attr("dumps")(obj).cast<std::string>());
}

py::object from_json(const json& doc) {
  const py::module_ pyjson = py::module_::import("json");
  return pyjson.attr("loads")(doc.dump());
}

Array field_to_array(const SpeciesField& f) {
  Array out({f.n_species(), f.n_points()});
  std::copy(f.flat().begin(), f.flat().end(), out.mutable_data());
  return out;
}

// Accepts shape (n,) for one species or (species, n).
State array_to_state(const Array& a) {
  if (a.ndim() == 1) {
    State s(Grid(static_cast<std::size_t>(a.shape(0))), 1);
    std::copy(a.data(), a.data() + a.size(), s.density().flat().begin());
    return s;
  }
  if (a.ndim() != 2) throw ShapeError("density must be a 1-D or 2-D array");
  SpeciesField f(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), f.flat().begin());
  return State(Grid(f.n_points()), std::move(f));
}

Tilt make_tilt(const py::object& obj) {
  if (obj.is_none()) return Tilt::zero();
  if (py::isinstance<Tilt>(obj)) return obj.cast<Tilt>();
  return Tilt(obj.cast<std::vector<Tilt::Profile>>());
}

SolverConfig make_config(double dt, double T, const std::string& scheme) {
  SolverConfig c{dt, T, parse_scheme(scheme)};
  c.validate();
  return c;
}

py::dict breakdown_dict(const DissipationBreakdown& d) {
  py::dict out;
  out["vel_diff"] = d.vel_diff;
  out["vel_react"] = d.vel_react;
  out["slope_diff"] = d.slope_diff;
  out["slope_react"] = d.slope_react;
  out["total"] = d.total();
  return out;
}

}  // namespace

PYBIND11_MODULE(_edpflow, m) {
  m.doc() = "Fast-reaction drift-diffusion systems and their energy-dissipation functionals";

  static py::exception<ConfigError> config_error(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<IntegrationError>(m, "IntegrationError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      std::string msg = e.what();
      for (const auto& k : e.keys()) msg += "\n  " + k;
      py::set_error(config_error, msg.c_str());
    }
  });

  py::class_<SystemParams>(m, "Params")
      .def(py::init([](std::array<double, 2> delta, double alpha, double beta, double epsilon) {
             return SystemParams(delta, alpha, beta, epsilon);
           }),
           py::arg("delta"), py::arg("alpha"), py::arg("beta"), py::arg("epsilon") = 1.0)
      .def_property_readonly("delta", &SystemParams::delta)
      .def_property_readonly("alpha", &SystemParams::alpha)
      .def_property_readonly("beta", &SystemParams::beta)
      .def_property_readonly("epsilon", &SystemParams::epsilon)
      .def_property_readonly("w", &SystemParams::w)
      .def("with_epsilon", &SystemParams::with_epsilon)
      .def("mixed_delta", &SystemParams::mixed_delta);

  py::class_<Tilt>(m, "Tilt")
      .def(py::init<std::vector<Tilt::Profile>>(), py::arg("profiles"))
      .def_static("zero", &Tilt::zero)
      .def_static("constant", &Tilt::constant)
      .def("value", &Tilt::value);

  py::class_<Trajectory>(m, "Trajectory")
      .def_property_readonly("times", [](const Trajectory& t) { return Array(py::cast(t.times())); })
      .def_property_readonly("n_species", &Trajectory::n_species)
      .def_property_readonly("n_cells", [](const Trajectory& t) { return t.grid().n_cells(); })
      .def("__len__", &Trajectory::size)
      .def("state", [](const Trajectory& t, std::size_t i) { return field_to_array(t.state(i).density()); })
      .def("flux_J", [](const Trajectory& t, std::size_t i) { return field_to_array(t.flux(i).J); })
      .def("flux_b", [](const Trajectory& t, std::size_t i) { return field_to_array(t.flux(i).b); })
      .def("densities",
           [](const Trajectory& t) {
             const std::size_t ns = t.n_species(), n = t.grid().n_cells();
             Array out({t.size(), ns, n});
             double* dst = out.mutable_data();
             for (const State& s : t.states()) dst = std::copy(s.density().flat().begin(), s.density().flat().end(), dst);
             return out;
           })
      .def("has_fluxes", &Trajectory::has_fluxes)
      .def("max_gce_residual", [](const Trajectory& t) { return max_gce_residual(t); })
      .def("coarse_grain", [](const Trajectory& t) { return coarse_grain(t); });

  m.def("cosh_dual", &cosh_pair::dual, py::arg("x"));
  m.def("cosh_primal", &cosh_pair::primal, py::arg("s"));
  m.def("boltzmann", &boltzmann, py::arg("r"));

  m.def(
      "stationary_measure",
      [](std::size_t n_cells, const SystemParams& p, const py::object& tilt) {
        return field_to_array(stationary_measure(Grid(n_cells), p, make_tilt(tilt)).cells);
      },
      py::arg("n_cells"), py::arg("params"), py::arg("tilt") = py::none());

  m.def(
      "energy",
      [](const Array& c, const SystemParams& p, const py::object& tilt) {
        return energy(array_to_state(c), p, make_tilt(tilt));
      },
      py::arg("density"), py::arg("params"), py::arg("tilt") = py::none());

  m.def(
      "coarse_params",
      [](std::size_t n_cells, const SystemParams& p, const py::object& tilt) {
        const CoarseParams cp = coarse_params(Grid(n_cells), p, make_tilt(tilt));
        py::dict out;
        out["delta_hat"] = cp.delta_hat;
        out["V_hat"] = cp.V_hat;
        out["w_hat"] = cp.w_hat;
        return out;
      },
      py::arg("n_cells"), py::arg("params"), py::arg("tilt") = py::none());

  m.def(
      "solve",
      [](const Array& c0, const SystemParams& p, double dt, double T, const py::object& tilt,
         const std::string& scheme) { return solve_eps_system(array_to_state(c0), p, make_tilt(tilt), make_config(dt, T, scheme)); },
      py::arg("initial"), py::arg("params"), py::arg("dt"), py::arg("T"), py::arg("tilt") = py::none(),
      py::arg("scheme") = "strang_exact_reaction");

  m.def(
      "solve_effective",
      [](const Array& c0, const SystemParams& p, double dt, double T, const py::object& tilt,
         const std::string& scheme) { return solve_effective(array_to_state(c0), p, make_tilt(tilt), make_config(dt, T, scheme)); },
      py::arg("initial"), py::arg("params"), py::arg("dt"), py::arg("T"), py::arg("tilt") = py::none(),
      py::arg("scheme") = "strang_exact_reaction");

  m.def(
      "dissipation",
      [](const Trajectory& t, const SystemParams& p, const py::object& tilt, bool use_fluxes) {
        const Tilt tl = make_tilt(tilt);
        return breakdown_dict(use_fluxes ? flux_dissipation(t, p, tl) : dissipation_functional(t, p, tl));
      },
      py::arg("trajectory"), py::arg("params"), py::arg("tilt") = py::none(), py::arg("use_fluxes") = false);

  m.def(
      "edb_residual",
      [](const Trajectory& t, const SystemParams& p, const py::object& tilt) {
        return edb_residual(t, p, make_tilt(tilt));
      },
      py::arg("trajectory"), py::arg("params"), py::arg("tilt") = py::none());

  m.def(
      "effective_dissipation",
      [](const Trajectory& t, const SystemParams& p, const py::object& tilt) {
        return effective_dissipation(t, p, make_tilt(tilt));
      },
      py::arg("trajectory"), py::arg("params"), py::arg("tilt") = py::none());

  m.def(
      "reconstruct",
      [](const Trajectory& hat, const SystemParams& p, const py::object& tilt) {
        const Trajectory with_flux = hat.has_fluxes() ? hat : with_continuity_flux(hat);
        return reconstruct_from_coarse(with_flux, p, make_tilt(tilt)).traj;
      },
      py::arg("coarse"), py::arg("params"), py::arg("tilt") = py::none());

  m.def(
      "validate_generator",
      [](const py::object& doc) {
        const GeneratorReport r = validate_generator(MarkovGenerator::from_json(to_json(doc)));
        py::dict out;
        out["valid"] = r.valid;
        out["failures"] = r.failures;
        out["max_detailed_balance_error"] = r.max_detailed_balance_error;
        return out;
      },
      py::arg("generator"));

  m.def("default_config", [] { return from_json(default_config()); });

  m.def(
      "run_experiment",
      [](const py::object& config, std::optional<std::filesystem::path> output_dir) {
        ExperimentConfig cfg = py::isinstance<py::dict>(config)
                                   ? ExperimentConfig::from_json(to_json(config))
                                   : load_config(config.cast<std::filesystem::path>());
        if (output_dir) cfg.output_dir = std::filesystem::absolute(*output_dir);
        {
          py::gil_scoped_release release;
          run_experiment(cfg);
        }
        std::ifstream in(cfg.output_dir / "summary.json");
        return from_json(json::parse(in));
      },
      py::arg("config"), py::arg("output_dir") = py::none());
}
