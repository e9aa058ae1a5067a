#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "breakwater/assistant.hpp"
#include "breakwater/domain.hpp"
#include "breakwater/evolution.hpp"
#include "breakwater/geometry.hpp"
#include "breakwater/metrics.hpp"
#include "breakwater/surrogate.hpp"
#include "breakwater/wavesim.hpp"

namespace py = pybind11;
using namespace breakwater;

namespace {

BreakwaterSystem system_from_lists(
    const std::vector<std::vector<std::pair<double, double>>>& lines) {
  BreakwaterSystem sys;
  for (const auto& line : lines) {
    Polyline poly;
    for (const auto& [x, y] : line) poly.push_back({x, y});
    sys.breakwaters.push_back(std::move(poly));
  }
  return sys;
}

std::vector<std::vector<std::pair<double, double>>> system_to_lists(
    const BreakwaterSystem& sys) {
  std::vector<std::vector<std::pair<double, double>>> out;
  for (const auto& line : sys.breakwaters) {
    std::vector<std::pair<double, double>> poly;
    for (const auto& p : line) poly.emplace_back(p.x, p.y);
    out.push_back(std::move(poly));
  }
  return out;
}

py::array_t<float> grid_to_array(const Grid<float>& g) {
  py::array_t<float> arr({g.height, g.width});
  std::copy(g.cells.begin(), g.cells.end(), arr.mutable_data());
  return arr;
}

py::array_t<double> grid_to_array(const Grid<double>& g) {
  py::array_t<double> arr({g.height, g.width});
  std::copy(g.cells.begin(), g.cells.end(), arr.mutable_data());
  return arr;
}

py::array_t<bool> mask_to_array(const Mask& m) {
  py::array_t<bool> arr({m.height, m.width});
  auto* out = arr.mutable_data();
  for (size_t i = 0; i < m.cells.size(); ++i) out[i] = m.cells[i] != 0;
  return arr;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "surrogate-assisted evolutionary breakwater design core";

  py::class_<DomainConfig>(m, "Domain")
      .def_readonly("width", &DomainConfig::width)
      .def_readonly("height", &DomainConfig::height)
      .def_readonly("cell_size", &DomainConfig::cell_size)
      .def_readonly("wind_direction", &DomainConfig::wind_direction)
      .def_readonly("wind_speed", &DomainConfig::wind_speed)
      .def_readonly("epsilon", &DomainConfig::epsilon)
      .def_readonly("protection_radius", &DomainConfig::protection_radius)
      .def_property_readonly("targets",
                             [](const DomainConfig& d) {
                               std::vector<std::pair<int, int>> out;
                               for (const auto& t : d.targets)
                                 out.emplace_back(t.x, t.y);
                               return out;
                             })
      .def_property_readonly("bathymetry",
                             [](const DomainConfig& d) {
                               return grid_to_array(d.bathymetry);
                             })
      .def_property_readonly(
          "land_mask",
          [](const DomainConfig& d) { return mask_to_array(d.land_mask); })
      .def_property_readonly("prohibited_mask",
                             [](const DomainConfig& d) {
                               return mask_to_array(d.prohibited_mask);
                             })
      .def("save", [](const DomainConfig& d, const std::string& path) {
        save_domain(d, path);
      });

  m.def("synthetic_case", &synthetic_case, py::arg("size") = 64);
  m.def("load_domain", &load_domain, py::arg("path"));

  m.def(
      "cost",
      [](const std::vector<std::vector<std::pair<double, double>>>& sys) {
        return cost(system_from_lists(sys));
      },
      "Total construction cost (summed segment lengths, grid units)");

  m.def(
      "check_constraints",
      [](const std::vector<std::vector<std::pair<double, double>>>& sys,
         const DomainConfig& dom) {
        const auto verdict = check_constraints(system_from_lists(sys), dom);
        std::vector<std::pair<std::string, std::string>> violations;
        for (const auto& v : verdict.violations)
          violations.emplace_back(violation_kind_name(v.kind), v.detail);
        return py::make_tuple(verdict.feasible, violations);
      },
      py::arg("system"), py::arg("domain"),
      "Returns (feasible, [(kind, detail), ...])");

  m.def(
      "rasterize",
      [](const std::vector<std::vector<std::pair<double, double>>>& sys,
         const DomainConfig& dom) {
        return mask_to_array(rasterize(system_from_lists(sys), dom.width,
                                       dom.height));
      },
      py::arg("system"), py::arg("domain"));

  m.def(
      "simulate",
      [](const std::vector<std::vector<std::pair<double, double>>>& sys,
         const DomainConfig& dom) {
        const WaveField field = simulate(system_from_lists(sys), dom);
        return grid_to_array(field.heights);
      },
      py::arg("system"), py::arg("domain"),
      "Significant wave height field from the built-in oracle");

  m.def(
      "wave_height_at_targets",
      [](const std::vector<std::vector<std::pair<double, double>>>& sys,
         const DomainConfig& dom) {
        const WaveField field = simulate(system_from_lists(sys), dom);
        return wave_height_at_targets(field, dom);
      },
      py::arg("system"), py::arg("domain"));

  m.def(
      "encode",
      [](const std::vector<std::vector<std::pair<double, double>>>& sys,
         const DomainConfig& dom, uint64_t seed) {
        const InputMask mask = encode(system_from_lists(sys), dom, seed);
        py::array_t<float> arr({3, dom.height, dom.width});
        std::copy(mask.data.v.begin(), mask.data.v.end(), arr.mutable_data());
        return arr;
      },
      py::arg("system"), py::arg("domain"), py::arg("seed") = 0);

  m.def("dominates", [](std::pair<double, double> a,
                        std::pair<double, double> b) {
    return dominates({a.first, a.second}, {b.first, b.second});
  });

  m.def(
      "hypervolume",
      [](const std::vector<std::pair<double, double>>& pts,
         std::pair<double, double> ref) {
        std::vector<ObjectivePoint> points;
        for (const auto& [c, w] : pts) points.push_back({c, w});
        return hypervolume(points, {ref.first, ref.second});
      },
      py::arg("points"), py::arg("reference"));

  m.def(
      "optimize",
      [](const DomainConfig& dom, const std::string& approach, uint64_t seed,
         int budget, int init_size, int pop_size, int arch_size,
         double mutation_rate, int prep_equiv, int surrogate_epochs,
         int assistant_epochs) {
        EAConfig cfg;
        const auto a = approach_from_name(approach);
        if (!a) throw std::runtime_error("unknown approach: " + approach);
        cfg.approach = *a;
        cfg.seed = seed;
        cfg.real_eval_budget = budget;
        cfg.init_size = init_size;
        cfg.pop_size = pop_size;
        cfg.arch_size = arch_size;
        cfg.mutation_rate = mutation_rate;
        cfg.prep_equiv = prep_equiv;
        cfg.surrogate_train.epochs = surrogate_epochs;
        cfg.assistant_train.epochs = assistant_epochs;
        RunResult result;
        {
          py::gil_scoped_release release;
          result = optimize(dom, cfg);
        }
        py::dict out;
        py::list archive;
        for (const auto& ind : result.archive) {
          py::dict row;
          row["cost"] = ind.objectives.cost;
          row["wh"] = ind.objectives.wh;
          row["breakwaters"] = system_to_lists(ind.genotype);
          archive.append(row);
        }
        out["archive"] = archive;
        py::list trace;
        const ObjectivePoint ref{result.nadir.cost * 1.05,
                                 result.nadir.wh * 1.05};
        RunTrace filled = result.trace;
        fill_trace_hypervolume(filled, ref);
        for (const auto& g : filled.gens) {
          py::dict row;
          row["gen"] = g.gen;
          row["real_evals"] = g.real_evals;
          row["surrogate_evals"] = g.surrogate_evals;
          row["hv"] = g.hv;
          trace.append(row);
        }
        out["trace"] = trace;
        out["real_evals"] = result.real_evals;
        out["surrogate_evals"] = result.surrogate_evals;
        out["surrogate_ready"] = result.surrogate_ready;
        out["surrogate_test_mape"] = result.surrogate_test_mape;
        out["assistant_auc"] = result.assistant_auc;
        return out;
      },
      py::arg("domain"), py::arg("approach") = "proposed", py::arg("seed") = 1,
      py::arg("budget") = 400, py::arg("init_size") = 200,
      py::arg("pop_size") = 40, py::arg("arch_size") = 20,
      py::arg("mutation_rate") = 0.35, py::arg("prep_equiv") = 26,
      py::arg("surrogate_epochs") = 60, py::arg("assistant_epochs") = 30,
      "Run one optimization; returns archive, trace, and diagnostics");
}
