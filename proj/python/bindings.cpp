#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sdsm/dual.hpp"
#include "sdsm/errors.hpp"
#include "sdsm/green.hpp"
#include "sdsm/io.hpp"
#include "sdsm/localtime.hpp"
#include "sdsm/particles.hpp"
#include "sdsm/validate.hpp"

namespace py = pybind11;
using namespace sdsm;
using io::Json;

namespace {

// JSON crosses the boundary as text; the Python side wraps it with json.
Json parse(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

py::dict record_dict(const PathRecord& rec) {
  py::dict series;
  for (const auto& s : rec.series) {
    py::dict d;
    d["value"] = s.value;
    d["generator"] = s.generator;
    d["X"] = s.X;
    d["U"] = s.U;
    d["M"] = s.M;
    d["Qd"] = s.Qd;
    d["occupation"] = s.occupation;
    d["spde_residual"] = s.spde_residual();
    series[py::str(s.name)] = d;
  }
  py::dict out;
  out["times"] = rec.times;
  out["alive"] = rec.alive;
  out["mass"] = rec.mass;
  out["series"] = series;
  out["final_positions"] = rec.final_cloud.positions;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Superprocesses with dependent spatial motion: simulation and checks";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  m.def("build_id", [] { return std::string(io::build_id()); });

  m.def(
      "simulate",
      [](const std::string& config, std::uint64_t seed, std::uint64_t replicate) {
        Json j = parse(config);
        auto model = io::model_from_json(j.contains("model") ? j["model"] : Json{{"preset", "reference"}});
        auto mu0 = io::initial_from_json(j.at("initial"));
        auto c = io::simulation_from_json(j.at("simulation"));
        c.seed = seed;
        c.replicate = replicate;
        auto obs = io::observables_from_json(j.contains("observables") ? j["observables"] : Json(), model);
        PathRecord rec;
        {
          py::gil_scoped_release release;
          rec = simulate(c, model, mu0, obs);
        }
        return record_dict(rec);
      },
      py::arg("config"), py::arg("seed"), py::arg("replicate") = 0,
      "One replicate from a JSON config with model, initial, simulation, observables.");

  m.def(
      "dual_moment",
      [](const std::string& observable, int order, double t, double dt, std::size_t reps,
         std::uint64_t seed, const std::string& model_json) {
        auto model = io::model_from_json(parse(model_json));
        auto phi = io::observable_from_json(parse(observable), model);
        DualMomentConfig c;
        c.m = order;
        c.t = t;
        c.dt = dt;
        c.reps = reps;
        c.seed = seed;
        c.workers = 1;
        auto mu0 = InitialMeasure::point_mass(std::vector<double>(model.dim(), 0.0));
        DualMomentResult r;
        {
          py::gil_scoped_release release;
          r = dual_moment(tensor_power(phi, order), mu0, model, c);
        }
        return py::make_tuple(r.estimate, r.se);
      },
      py::arg("observable"), py::arg("m"), py::arg("t"), py::arg("dt") = 0.01,
      py::arg("reps") = 10000, py::arg("seed") = 0,
      py::arg("model") = R"({"preset": "reference"})",
      "E <phi^m, mu_t^m> for a unit point mass at the origin; returns (estimate, se).");

  py::class_<KernelSpec>(m, "KernelSpec")
      .def(py::init([](double lambda, double eps, double sigma0_sq, int dim) {
             KernelSpec s{lambda, eps, sigma0_sq, dim};
             s.validate();
             return s;
           }),
           py::arg("lambda_") = 1.0, py::arg("eps") = 0.0, py::arg("sigma0_sq") = 2.0,
           py::arg("dim") = 1)
      .def_readonly("lambda_", &KernelSpec::lambda)
      .def_readonly("eps", &KernelSpec::eps)
      .def_readonly("sigma0_sq", &KernelSpec::sigma0_sq)
      .def_readonly("dim", &KernelSpec::dim);

  m.def("heat_kernel", [](const KernelSpec& s, double t, std::vector<double> x) {
    return heat_kernel(s, t, x);
  });
  m.def("q_lambda", [](const KernelSpec& s, std::vector<double> x) { return q_lambda(s, x); });
  m.def("q_lambda_eps", [](const KernelSpec& s, std::vector<double> x) { return q_lambda_eps(s, x); });
  m.def("chi_bound", [](int dim, double t, double lambda) {
    auto r = chi_bound_check(dim, t, lambda);
    py::dict d;
    d["chi"] = r.chi;
    d["bound"] = r.bound;
    d["pass"] = r.pass;
    d["divergent"] = r.divergent;
    return d;
  });
  m.def("norm_report", [](const KernelSpec& s) {
    py::list out;
    for (const auto& e : norm_report(s)) {
      py::dict d;
      d["name"] = e.name;
      d["value"] = e.value;
      d["claimed_finite"] = e.claimed_finite;
      d["stable"] = e.stable;
      d["divergent"] = e.divergent;
      d["pass"] = e.pass;
      out.append(d);
    }
    return out;
  });

  m.def(
      "run_suite",
      [](const std::string& manifest, int workers) {
        auto j = parse(manifest);
        std::vector<CheckReport> reps;
        {
          py::gil_scoped_release release;
          reps = run_suite(j, workers);
        }
        std::vector<std::string> out;
        for (const auto& r : reps) out.push_back(to_json(r, true).dump());
        return out;
      },
      py::arg("manifest"), py::arg("workers") = 1, "Check reports as JSON strings.");
}
