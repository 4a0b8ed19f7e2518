// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ugc/bench.hpp"
#include "ugc/checkpoint.hpp"
#include "ugc/config.hpp"
#include "ugc/error.hpp"
#include "ugc/gcnext.hpp"
#include "ugc/graph_conv.hpp"
#include "ugc/motion.hpp"
#include "ugc/verify.hpp"

namespace py = pybind11;
using namespace ugc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Kind parse_kind(const std::string& name) {
  const auto k = kind_from_name(name);
  if (!k) throw ConfigError("unknown graph convolution kind '" + name + "'");
  return *k;
}

GraphConvSpec spec_for(const std::string& kind, bool tied, const Shape& x) {
  if (x.size() != 3) throw ShapeError("expected a (T, J, C) array");
  return GraphConvSpec::make(parse_kind(kind), tied, Dims{x[0], x[1], x[2]});
}

struct PyModel {
  RunConfig config;
  gcnext::Model model;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "UniGC operators and the GCNext dynamic network";

  py::register_exception<Error>(m, "Error");
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.attr("KINDS") = py::make_tuple("g", "st", "sc", "tc", "s", "t", "c");

  m.def(
      "unigc_general", [](const Array& x, const Array& a) { return to_array(unigc_general(to_tensor(x), to_tensor(a))); },
      py::arg("x"), py::arg("a"), "Y[t,j,c] = sum A[t,j,c,t2,j2,c2] X[t2,j2,c2].");
  m.def(
      "build_mask",
      [](const std::string& kind, std::size_t T, std::size_t J, std::size_t C) {
        return to_array(*build_mask(GraphConvSpec::make(parse_kind(kind), false, Dims{T, J, C})).materialized);
      },
      py::arg("kind"), py::arg("T"), py::arg("J"), py::arg("C"));
  m.def(
      "unigc_masked",
      [](const Array& x, const Array& a, const std::string& kind) {
        const Tensor xt = to_tensor(x);
        return to_array(unigc_masked(xt, to_tensor(a), build_mask(spec_for(kind, false, xt.shape()))));
      },
      py::arg("x"), py::arg("a"), py::arg("kind"));
  m.def(
      "conv_factored",
      [](const Array& x, const Array& blocks, const std::string& kind, bool tied) {
        const Tensor xt = to_tensor(x);
        return to_array(conv_factored(xt, AdjacencyStore{spec_for(kind, tied, xt.shape()), to_tensor(blocks)}));
      },
      py::arg("x"), py::arg("blocks"), py::arg("kind"), py::arg("tied") = false);
  m.def(
      "expand_to_global",
      [](const Array& blocks, const std::string& kind, bool tied, std::size_t T, std::size_t J, std::size_t C) {
        const auto spec = GraphConvSpec::make(parse_kind(kind), tied, Dims{T, J, C});
        return to_array(expand_to_global(AdjacencyStore{spec, to_tensor(blocks)}));
      },
      py::arg("blocks"), py::arg("kind"), py::arg("tied"), py::arg("T"), py::arg("J"), py::arg("C"));
  m.def(
      "block_shape",
      [](const std::string& kind, bool tied, std::size_t T, std::size_t J, std::size_t C) {
        const Shape s = AdjacencyStore::block_shape(GraphConvSpec::make(parse_kind(kind), tied, Dims{T, J, C}));
        return py::make_tuple(s[0], s[1], s[2]);
      },
      py::arg("kind"), py::arg("tied"), py::arg("T"), py::arg("J"), py::arg("C"));
  m.def(
      "param_count",
      [](const std::string& kind, bool tied, std::size_t T, std::size_t J, std::size_t C) {
        return param_count(GraphConvSpec::make(parse_kind(kind), tied, Dims{T, J, C}));
      },
      py::arg("kind"), py::arg("tied"), py::arg("T"), py::arg("J"), py::arg("C"));
  m.def(
      "flops_conv",
      [](const std::string& kind, bool tied, std::size_t T, std::size_t J, std::size_t C) {
        return bench::flops_conv(GraphConvSpec::make(parse_kind(kind), tied, Dims{T, J, C}));
      },
      py::arg("kind"), py::arg("tied"), py::arg("T"), py::arg("J"), py::arg("C"));

  m.def(
      "mpjpe_per_frame",
      [](const Array& pred, const Array& gt) { return motion::mpjpe_per_frame(to_tensor(pred), to_tensor(gt)); },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "mpjpe", [](const Array& pred, const Array& gt) { return motion::mpjpe(to_tensor(pred), to_tensor(gt)); },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "zero_velocity",
      [](const Array& history, std::size_t horizon) {
        return to_array(motion::zero_velocity(to_tensor(history), horizon));
      },
      py::arg("history"), py::arg("horizon"));
  m.def(
      "gen_synthetic",
      [](const std::string& config_text, std::size_t n, std::uint64_t first) {
        const auto ds = motion::gen_synthetic(parse_config_text(config_text).data, n, first);
        py::list out;
        for (const auto& s : ds.samples) out.append(py::make_tuple(to_array(s.history), to_array(s.future)));
        return out;
      },
      py::arg("config") = "", py::arg("n") = 1, py::arg("first") = 0,
      "List of (history, future) arrays in millimeters.");

  m.def(
      "verify",
      [] {
        std::ostringstream os;
        const bool ok = verify::print_results(verify::run_all(), os, false);
        return py::make_tuple(ok, os.str());
      },
      "Run the oracle suites; returns (all_passed, report).");

  py::class_<PyModel>(m, "Model")
      .def_static(
          "from_config",
          [](const std::string& text, std::uint64_t seed) {
            PyModel p;
            p.config = parse_config_text(text);
            p.model = gcnext::build_model(p.config.model, seed);
            return p;
          },
          py::arg("config") = "", py::arg("seed") = 1)
      .def_static(
          "load",
          [](const std::string& path) {
            Restored r = restore(load_checkpoint(path));
            return PyModel{std::move(r.config), std::move(r.model)};
          },
          py::arg("path"))
      .def("save", [](const PyModel& p, const std::string& path) { save_checkpoint(snapshot(p.model, p.config), path); })
      .def(
          "predict",
          [](PyModel& p, const Array& history) {
            std::vector<std::size_t> chosen;
            const Tensor out = gcnext::predict(p.model, to_tensor(history), nullptr, &chosen);
            return py::make_tuple(to_array(out), chosen);
          },
          py::arg("history"), "Returns (prediction, selected branch index per selector layer).")
      .def(
          "train",
          [](PyModel& p, std::size_t iterations) {
            auto cfg = p.config;
            if (iterations > 0) cfg.train.iterations = iterations;
            const auto train = motion::gen_synthetic(cfg.data, cfg.train_samples, 0);
            const auto val = motion::gen_synthetic(cfg.data, cfg.val_samples, cfg.val_first);
            py::list rows;
            for (const auto& r : gcnext::train_loop(p.model, train, val, cfg.train).rows)
              rows.append(py::make_tuple(r.iteration, r.train_loss, r.val_average));
            return rows;
          },
          py::arg("iterations") = 0, "Train on the configured synthetic data; returns (iteration, loss, val) rows.")
      .def_property_readonly("parameter_count", [](const PyModel& p) { return p.model.parameter_count(); })
      .def_property_readonly("layers", [](const PyModel& p) { return p.model.layers.size(); })
      .def("parameter", [](PyModel& p, const std::string& name) {
        auto* prm = p.model.find(name);
        if (prm == nullptr) throw py::key_error(name);
        return to_array(prm->value);
      })
      .def("parameter_names", [](PyModel& p) {
        std::vector<std::string> out;
        for (const auto* prm : p.model.parameters()) out.push_back(prm->name);
        return out;
      })
      .def("cost_csv", [](const PyModel& p) { return bench::format_csv(bench::cost_model(p.model)); });
}
