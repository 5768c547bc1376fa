// Python bindings over the core library. Datasets cross the boundary as
// dicts of NumPy arrays: x (N, L, v) float32, y (N,) int32 and optional
// mask (N, L) uint8.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "timesliver/attribution.hpp"
#include "timesliver/datasets.hpp"
#include "timesliver/error.hpp"
#include "timesliver/eval.hpp"
#include "timesliver/io.hpp"
#include "timesliver/model.hpp"
#include "timesliver/symbolic.hpp"

namespace py = pybind11;
using namespace timesliver;
using json = nlohmann::json;

namespace {

// JSON round trip through Python's own json module keeps nesting intact.
json to_json(const py::object& obj) {
  if (obj.is_none()) return json::object();
  const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return json::parse(text);
}

py::object from_json(const json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

template <typename T>
using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

py::dict dataset_to_dict(const datasets::TimeSeriesDataset& d) {
  Array<float> x({d.count, d.length, d.variates});
  std::memcpy(x.mutable_data(), d.x.data(), d.x.size() * sizeof(float));
  Array<std::int32_t> y(static_cast<py::ssize_t>(d.count));
  std::memcpy(y.mutable_data(), d.y.data(), d.y.size() * sizeof(std::int32_t));
  py::dict out;
  out["x"] = x;
  out["y"] = y;
  out["classes"] = d.classes;
  out["provenance"] = from_json(d.provenance);
  if (d.has_mask()) {
    Array<std::uint8_t> g({d.count, d.length});
    std::memcpy(g.mutable_data(), d.mask->data(), d.mask->size());
    out["mask"] = g;
  } else {
    out["mask"] = py::none();
  }
  return out;
}

datasets::TimeSeriesDataset dataset_from(const Array<float>& x, const Array<std::int32_t>& y,
                                         std::optional<std::size_t> classes,
                                         const std::optional<Array<std::uint8_t>>& mask) {
  if (x.ndim() != 3) throw Error(ErrorKind::ShapeMismatch, "x must have shape (N, L, v)");
  if (y.ndim() != 1 || y.shape(0) != x.shape(0))
    throw Error(ErrorKind::ShapeMismatch, "y must have shape (N,)");
  datasets::TimeSeriesDataset d;
  d.count = static_cast<std::size_t>(x.shape(0));
  d.length = static_cast<std::size_t>(x.shape(1));
  d.variates = static_cast<std::size_t>(x.shape(2));
  d.x.assign(x.data(), x.data() + x.size());
  d.y.assign(y.data(), y.data() + y.size());
  std::int32_t top = 0;
  for (auto label : d.y) top = std::max(top, label);
  d.classes = classes.value_or(static_cast<std::size_t>(std::max(top + 1, 2)));
  if (mask) {
    if (mask->ndim() != 2 || mask->shape(0) != x.shape(0) || mask->shape(1) != x.shape(1))
      throw Error(ErrorKind::ShapeMismatch, "mask must have shape (N, L)");
    d.mask = std::vector<std::uint8_t>(mask->data(), mask->data() + mask->size());
  }
  d.validate();
  return d;
}

datasets::TimeSeriesDataset dataset_from_dict(const py::dict& d) {
  std::optional<Array<std::uint8_t>> mask;
  if (d.contains("mask") && !d["mask"].is_none()) mask = d["mask"].cast<Array<std::uint8_t>>();
  std::optional<std::size_t> classes;
  if (d.contains("classes") && !d["classes"].is_none()) classes = d["classes"].cast<std::size_t>();
  return dataset_from(d["x"].cast<Array<float>>(), d["y"].cast<Array<std::int32_t>>(), classes, mask);
}

Matrix matrix_from(const Array<double>& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::ShapeMismatch, "expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::memcpy(m.data.data(), a.data(), m.size() * sizeof(double));
  return m;
}

Array<double> to_array(const Matrix& m) {
  Array<double> out({m.rows, m.cols});
  std::memcpy(out.mutable_data(), m.data.data(), m.size() * sizeof(double));
  return out;
}

Array<double> to_array(const std::vector<std::vector<double>>& rows, std::size_t width) {
  Array<double> out({rows.size(), width});
  auto* dst = out.mutable_data();
  for (const auto& r : rows) dst = std::copy(r.begin(), r.end(), dst);
  return out;
}

model::TimeSliverConfig config_from(const py::object& config) {
  if (py::isinstance<py::str>(config)) return model::preset(config.cast<std::string>());
  return model::TimeSliverConfig::from_json(to_json(config));
}

attribution::AttributionConfig attr_config(const std::string& gate, bool max_scaling, double epsilon,
                                           const std::string& reduction,
                                           std::optional<std::size_t> target) {
  attribution::AttributionConfig c;
  c.gate = attribution::parse_gate(gate);
  c.max_scaling = max_scaling;
  c.epsilon = epsilon;
  c.reduction = attribution::parse_reduction(reduction);
  c.target = target;
  c.validate();
  return c;
}

// Wraps trained parameters for Python.
struct PyModel {
  model::ModelParams params;

  Array<double> logits(const Array<float>& x) const {
    const auto d = batch(x);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < d.count; ++i) rows.push_back(model::predict(d.sample(i), params).logits);
    return to_array(rows, params.classes);
  }

  Array<std::int64_t> predict(const Array<float>& x) const {
    const auto d = batch(x);
    Array<std::int64_t> out(static_cast<py::ssize_t>(d.count));
    for (std::size_t i = 0; i < d.count; ++i)
      out.mutable_data()[i] = static_cast<std::int64_t>(model::predict(d.sample(i), params).label);
    return out;
  }

  py::tuple attribute(const Array<float>& x, const attribution::AttributionConfig& cfg,
                      std::size_t jobs) const {
    const auto d = batch(x);
    const auto results = attribution::attribute_all(d, params, cfg, jobs);
    std::vector<std::vector<double>> plus, minus;
    Array<std::int64_t> predicted(static_cast<py::ssize_t>(d.count));
    for (std::size_t i = 0; i < results.size(); ++i) {
      plus.push_back(results[i].phi_plus);
      minus.push_back(results[i].phi_minus);
      predicted.mutable_data()[i] = static_cast<std::int64_t>(results[i].predicted);
    }
    return py::make_tuple(to_array(plus, d.length), to_array(minus, d.length), predicted);
  }

  double accuracy(const py::dict& data, std::size_t jobs) const {
    return model::evaluate(params, dataset_from_dict(data), jobs).accuracy;
  }

 private:
  datasets::TimeSeriesDataset batch(const Array<float>& x) const {
    Array<float> xx = x;
    if (x.ndim() == 2) {
      xx = Array<float>({py::ssize_t{1}, x.shape(0), x.shape(1)});
      std::copy_n(x.data(), x.size(), xx.mutable_data());
    }
    Array<std::int32_t> y(xx.shape(0));
    std::fill(y.mutable_data(), y.mutable_data() + y.size(), 0);
    auto d = dataset_from(xx, y, params.classes, std::nullopt);
    if (d.length != params.length || d.variates != params.variates)
      throw Error(ErrorKind::ShapeMismatch, "input shape does not match the model");
    return d;
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Symbolic-segment time-series classifier with temporal attribution";

  py::register_exception<Error>(m, "TimeSliverError", PyExc_RuntimeError);

  m.def("generator_names", &datasets::generator_names);
  m.def("preset_names", &model::preset_names);
  m.def("preset", [](const std::string& name) { return from_json(model::preset(name).to_json()); },
        py::arg("name"));

  m.def(
      "generate",
      [](const std::string& name, std::size_t n, std::uint64_t seed, const py::object& params,
         std::size_t jobs) { return dataset_to_dict(datasets::generate({name, n, seed, to_json(params), jobs})); },
      py::arg("name"), py::arg("n"), py::arg("seed") = 0, py::arg("params") = py::none(),
      py::arg("jobs") = 1, "Synthetic dataset as a dict with x, y, mask, classes and provenance.");

  m.def("load_dataset", [](const std::string& path) { return dataset_to_dict(datasets::load(path)); },
        py::arg("path"));
  m.def("save_dataset", [](const py::dict& d, const std::string& path) { datasets::save(dataset_from_dict(d), path); },
        py::arg("data"), py::arg("path"));

  m.def(
      "compose",
      [](const Array<double>& x, const Array<double>& train_values, std::size_t bins, std::size_t segment) {
        const Matrix xm = matrix_from(x);
        const Matrix tm = matrix_from(train_values);
        const auto edges = symbolic::fit_bins(tm.data, tm.cols, {bins, 1, symbolic::BinStrategy::Quantile});
        return to_array(symbolic::compose_symbols(symbolic::discretize(xm, edges), bins, segment).values);
      },
      py::arg("x"), py::arg("train_values"), py::arg("bins"), py::arg("segment"),
      "Composition matrix Z of an (L, v) series with quantile bins fit on (T, v) training values.");

  m.def(
      "conv1d",
      [](const Array<double>& x, const Array<double>& kernels, const Array<double>& bias) {
        if (kernels.ndim() != 3) throw Error(ErrorKind::ShapeMismatch, "kernels must be (q, m, v)");
        kernels::Conv1dParams p{Tensor3(static_cast<std::size_t>(kernels.shape(0)),
                                        static_cast<std::size_t>(kernels.shape(1)),
                                        static_cast<std::size_t>(kernels.shape(2))),
                                std::vector<double>(bias.data(), bias.data() + bias.size())};
        std::memcpy(p.kernels.data.data(), kernels.data(), p.kernels.data.size() * sizeof(double));
        return to_array(kernels::conv1d_forward(matrix_from(x), p));
      },
      py::arg("x"), py::arg("kernels"), py::arg("bias"));

  m.def(
      "auprc",
      [](const Array<double>& scores, const Array<std::uint8_t>& mask) -> std::optional<double> {
        return eval::auprc(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                           std::span<const std::uint8_t>(mask.data(), static_cast<std::size_t>(mask.size())));
      },
      py::arg("scores"), py::arg("mask"), "Per-sample AUPRC; None when the mask has no positives.");

  m.def("random_scores",
        [](std::uint64_t seed, const py::dict& data) {
          const auto d = dataset_from_dict(data);
          return to_array(eval::random_scores(seed, d), d.length);
        },
        py::arg("seed"), py::arg("data"));

  py::class_<PyModel>(m, "Model")
      .def_static(
          "train",
          [](const py::dict& train, const py::dict& valid, const py::object& config, const py::object& overrides,
             std::size_t jobs) {
            auto cfg = config_from(config);
            if (!overrides.is_none()) cfg = model::TimeSliverConfig::from_json(to_json(overrides), cfg);
            model::TrainOptions opt;
            opt.jobs = jobs;
            const auto tr = dataset_from_dict(train), va = dataset_from_dict(valid);
            py::gil_scoped_release release;
            return PyModel{model::train(tr, va, cfg, opt).params};
          },
          py::arg("train"), py::arg("valid"), py::arg("config") = "freqsum", py::arg("overrides") = py::none(),
          py::arg("jobs") = 1, "Train from a preset name or a config dict.")
      .def_static("load", [](const std::string& path) { return PyModel{io::load_model(path).params}; },
                  py::arg("path"))
      .def("save", [](const PyModel& self, const std::string& path) { io::save_model(self.params, path); },
           py::arg("path"))
      .def_property_readonly("config", [](const PyModel& self) { return from_json(self.params.config.to_json()); })
      .def_property_readonly("parameter_count", [](const PyModel& self) { return self.params.parameter_count(); })
      .def_property_readonly("length", [](const PyModel& self) { return self.params.length; })
      .def_property_readonly("variates", [](const PyModel& self) { return self.params.variates; })
      .def_property_readonly("classes", [](const PyModel& self) { return self.params.classes; })
      .def("logits", &PyModel::logits, py::arg("x"))
      .def("predict", &PyModel::predict, py::arg("x"))
      .def("accuracy", &PyModel::accuracy, py::arg("data"), py::arg("jobs") = 1)
      .def(
          "attribute",
          [](const PyModel& self, const Array<float>& x, const std::string& gate, bool max_scaling, double epsilon,
             const std::string& reduction, std::optional<std::size_t> target, std::size_t jobs) {
            return self.attribute(x, attr_config(gate, max_scaling, epsilon, reduction, target), jobs);
          },
          py::arg("x"), py::arg("gate") = "relu", py::arg("max_scaling") = true, py::arg("epsilon") = 1e-18,
          py::arg("reduction") = "mean", py::arg("target") = py::none(), py::arg("jobs") = 1,
          "Returns (phi_plus, phi_minus, predicted) with phi arrays of shape (N, L).");
}
