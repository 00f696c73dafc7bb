#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "outpost/error.hpp"
#include "outpost/experiment.hpp"
#include "outpost/finite_n.hpp"
#include "outpost/heine.hpp"
#include "outpost/limit.hpp"
#include "outpost/radial_potential.hpp"

namespace py = pybind11;
using namespace outpost;

namespace {

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

ExperimentConfig config_from(const py::object& o) {
  const ExperimentConfig c = config_from_json(from_py(o));
  c.validate();
  return c;
}

const DropletData& declared(const RadialPotential& pot) {
  if (!pot.declared()) throw InvalidArgument("potential has no declared droplet data");
  return *pot.declared();
}

py::list law_entries(const CountLaw& law) {
  py::list out;
  for (const auto& e : law.entries()) out.append(py::make_tuple(py::tuple(py::cast(e.alpha)), e.p));
  return out;
}

}  // namespace

PYBIND11_MODULE(_outpost, m) {
  m.doc() = "Outpost occupation counts of rotation-invariant Coulomb gases";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<HeineParams>(m, "HeineParams")
      .def(py::init([](const std::vector<double>& thetas, const std::vector<double>& qs) {
             return HeineParams::validate(thetas, qs);
           }),
           py::arg("thetas"), py::arg("qs"))
      .def_property_readonly("m", &HeineParams::m)
      .def_property_readonly("thetas", &HeineParams::thetas)
      .def_property_readonly("qs", &HeineParams::qs);

  py::class_<CountLaw>(m, "CountLaw")
      .def_property_readonly("arity", &CountLaw::arity)
      .def_property_readonly("mass_deficit", &CountLaw::mass_deficit)
      .def("entries", &law_entries)
      .def("probability", [](const CountLaw& l, const std::vector<int>& a) { return l.probability(a); })
      .def("total_mass", &CountLaw::total_mass)
      .def("mean", &CountLaw::mean)
      .def("covariance", &CountLaw::covariance_matrix)
      .def("mgf", [](const CountLaw& l, const std::vector<double>& s) { return l.mgf(s); })
      .def("marginal", &CountLaw::marginal)
      .def("__len__", [](const CountLaw& l) { return l.entries().size(); });

  m.def("tv_distance", [](const CountLaw& a, const CountLaw& b) {
    const TvInterval tv = tv_distance(a, b);
    return py::make_tuple(tv.lower, tv.upper);
  });

  m.def("pmf_table", [](const HeineParams& p, double tail_tol) { return pmf_table(p, tail_tol); },
        py::arg("params"), py::arg("tail_tol") = 1e-12);
  m.def("pmf_point", [](const HeineParams& p, const std::vector<int>& alpha, double tail_tol) {
    const PointProbability r = pmf_point(p, alpha, tail_tol);
    return py::make_tuple(r.p, r.error_bound);
  }, py::arg("params"), py::arg("alpha"), py::arg("tail_tol") = 1e-12);
  m.def("mgf", [](const HeineParams& p, const std::vector<double>& s) { return mgf(p, s); });
  m.def("log_mgf", [](const HeineParams& p, const std::vector<double>& s) { return log_mgf(p, s); });
  m.def("mean_vector", &mean_vector);
  m.def("variance_vector", &variance_vector);
  m.def("covariance", &covariance);
  m.def("heine_1d_pmf", &heine_1d_pmf, py::arg("theta"), py::arg("q"), py::arg("k"));
  m.def("sample", [](const HeineParams& p, int count, std::uint64_t seed, double tail_tol, int threads) {
    return sample(p, count, seed, tail_tol, threads).counts;
  }, py::arg("params"), py::arg("count"), py::arg("seed"), py::arg("tail_tol") = 1e-12,
        py::arg("threads") = 1);

  py::class_<RadialPotential>(m, "RadialPotential")
      .def("q", &RadialPotential::q)
      .def("dq", &RadialPotential::dq)
      .def("ddq", &RadialPotential::ddq)
      .def_property_readonly("label", &RadialPotential::label)
      .def_property_readonly("r_max", &RadialPotential::r_max)
      .def_property_readonly("declared", [](const RadialPotential& p) -> py::object {
        if (!p.declared()) return py::none();
        return to_py(*p.declared());
      });

  m.def("ginibre", &ginibre);
  m.def("build_case1", [](const std::vector<double>& t, const std::vector<double>& w, double margin) {
    return build_case1(t, w, margin);
  }, py::arg("t"), py::arg("w"), py::arg("margin") = 0.05);
  m.def("build_case2", [](std::pair<double, double> inner, std::pair<double, double> outer, double M0,
                          const std::vector<double>& t, const std::vector<double>& w, double margin) {
    return build_case2({inner.first, inner.second}, {outer.first, outer.second}, M0, t, w, margin);
  }, py::arg("inner"), py::arg("outer"), py::arg("M0"), py::arg("t"), py::arg("w"),
        py::arg("margin") = 0.05);
  m.def("laplacian", &laplacian);
  m.def("classify", [](const RadialPotential& p) { return to_py(classify(p)); });
  m.def("validate_potential", [](const RadialPotential& p) {
    py::list out;
    for (const auto& c : validate_potential(p)) out.append(py::make_tuple(c.name, c.passed, c.detail));
    return out;
  });

  py::class_<QuadratureConfig>(m, "QuadratureConfig")
      .def(py::init([](double rel_tol, double C, const std::string& mode, int threads) {
             QuadratureConfig c;
             c.rel_tol = rel_tol;
             c.C = C;
             c.mode = parse_quad_mode(mode);
             c.threads = threads;
             c.validate();
             return c;
           }),
           py::arg("rel_tol") = 1e-13, py::arg("C") = 10.0, py::arg("mode") = "windowed",
           py::arg("threads") = 1)
      .def_readonly("rel_tol", &QuadratureConfig::rel_tol)
      .def_readonly("C", &QuadratureConfig::C)
      .def_readonly("threads", &QuadratureConfig::threads)
      .def_property_readonly("mode", [](const QuadratureConfig& c) { return to_string(c.mode); });

  py::class_<RegionSet>(m, "RegionSet")
      .def_property_readonly("size", &RegionSet::size)
      .def_property_readonly("is_hard", &RegionSet::is_hard);

  m.def("outpost_regions", [](const RadialPotential& pot, int n, bool smooth, std::optional<double> eps) {
    const DropletData& d = declared(pot);
    return outpost_regions(d, eps.value_or(default_eps(d)), n, smooth);
  }, py::arg("pot"), py::arg("n"), py::arg("smooth") = false, py::arg("eps") = py::none());

  py::class_<FiniteNEngine>(m, "FiniteNEngine")
      .def(py::init<const RadialPotential&, int, QuadratureConfig>(), py::arg("pot"), py::arg("n"),
           py::arg("cfg") = QuadratureConfig{})
      .def_property_readonly("n", &FiniteNEngine::n)
      .def("log_norm", [](const FiniteNEngine& e, int j) { return e.log_norm(j); })
      .def("log_norm", [](const FiniteNEngine& e, int j, const std::vector<double>& s, const RegionSet& st) {
        return e.log_norm(j, s, st);
      })
      .def("windows", [](const FiniteNEngine& e, int j) {
        std::vector<std::pair<double, double>> out;
        for (const auto& iv : e.windows(j)) out.emplace_back(iv.lo, iv.hi);
        return out;
      })
      .def("joint_mgf", [](const FiniteNEngine& e, const std::vector<double>& s, const RegionSet& st) {
        return e.joint_mgf(s, st).value;
      })
      .def("region_probabilities", &FiniteNEngine::region_probabilities)
      .def("exact_count_law", [](const FiniteNEngine& e, const RegionSet& r, int cap) {
        return e.exact_count_law(r, cap);
      }, py::arg("regions"), py::arg("cap") = 60);

  m.def("sample_moduli", [](const RadialPotential& pot, int n, std::uint64_t seed, const QuadratureConfig& cfg) {
    return sample_moduli(pot, n, seed, cfg).radii;
  }, py::arg("pot"), py::arg("n"), py::arg("seed"), py::arg("cfg") = QuadratureConfig{});
  m.def("count_regions", [](const RegionSet& r, const std::vector<double>& radii) {
    return count_regions(r, radii);
  });

  m.def("case1_limit", [](const RadialPotential& pot) {
    const Case1Limit lim = case1(declared(pot), pot);
    return py::make_tuple(to_py(lim), lim.params);
  });
  m.def("case1_predicted_mgf", [](const RadialPotential& pot, const std::vector<double>& s) {
    return case1_predicted_mgf(case1(declared(pot), pot), s);
  });
  m.def("case2_limit", [](const RadialPotential& pot, int n) {
    const Case2Limit lim = case2(declared(pot), pot, n);
    return py::make_tuple(to_py(lim), lim.tilde, lim.hat);
  });
  m.def("case2_predicted_law", [](const RadialPotential& pot, int n, double tail_tol) {
    return case2_predicted_law(case2(declared(pot), pot, n), tail_tol);
  }, py::arg("pot"), py::arg("n"), py::arg("tail_tol") = 1e-12);
  m.def("case2_predicted_mgf", [](const RadialPotential& pot, int n, const std::vector<double>& s) {
    return case2_predicted_mgf(case2(declared(pot), pot, n), s);
  });

  m.def("converge", [](const py::object& config) {
    const ConvergenceReport report = converge(config_from(config));
    std::ostringstream csv;
    write_converge_csv(csv, report);
    py::dict out = to_py(report);
    out["csv"] = csv.str();
    return out;
  }, py::arg("config"));
}
