// Python module samif._core: datasets, SAM training and influence estimates.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "samif/errors.hpp"
#include "samif/influence.hpp"
#include "samif/ingest.hpp"
#include "samif/oracle.hpp"
#include "samif/samtrain.hpp"

namespace py = pybind11;
using namespace samif;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_numpy(const ParamVector& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

ParamVector from_numpy(const Array& a) {
  if (a.ndim() != 1) throw InvalidInput("expected a one-dimensional array");
  return ParamVector(std::vector<double>(a.data(), a.data() + a.size()));
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw InvalidInput("unknown split '" + s + "'");
}

Dataset dataset_from_numpy(const Array& x, const py::array_t<int>& y, const std::vector<std::string>& split) {
  if (x.ndim() != 2) throw InvalidInput("features must be a two-dimensional array");
  const auto rows = static_cast<std::size_t>(x.shape(0));
  const auto dim = static_cast<std::size_t>(x.shape(1));
  std::vector<Split> tags(rows, Split::train);
  if (!split.empty()) {
    if (split.size() != rows) throw InvalidInput("split list length does not match the row count");
    for (std::size_t i = 0; i < rows; ++i) tags[i] = parse_split(split[i]);
  }
  auto labels = y.unchecked<1>();
  if (static_cast<std::size_t>(labels.shape(0)) != rows) throw InvalidInput("label count does not match the row count");
  std::vector<int> ys(rows);
  for (std::size_t i = 0; i < rows; ++i) ys[i] = labels(static_cast<py::ssize_t>(i));
  return Dataset(rows, dim, std::vector<double>(x.data(), x.data() + x.size()), std::move(ys), std::move(tags));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sharpness-aware training with influence attribution";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<InvalidConfig>(m, "InvalidConfig", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

  py::enum_<Estimator>(m, "Estimator")
      .value("if_fast", Estimator::if_fast)
      .value("hif", Estimator::hif)
      .value("gif", Estimator::gif);
  py::enum_<GifMode>(m, "GifMode").value("gd", GifMode::gd).value("sgd", GifMode::sgd);
  py::enum_<RemovalMode>(m, "RemovalMode").value("drop", RemovalMode::drop).value("resample", RemovalMode::resample);
  py::enum_<Activation>(m, "Activation").value("tanh", Activation::tanh).value("relu", Activation::relu);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&dataset_from_numpy), py::arg("features"), py::arg("labels"),
           py::arg("split") = std::vector<std::string>{})
      .def("__len__", &Dataset::size)
      .def_property_readonly("dim", &Dataset::dim)
      .def_property_readonly("features", [](const Dataset& d) {
        py::array_t<double> out({static_cast<py::ssize_t>(d.size()), static_cast<py::ssize_t>(d.dim())});
        std::copy(d.features().begin(), d.features().end(), out.mutable_data());
        return out;
      })
      .def_property_readonly("labels", [](const Dataset& d) { return py::array_t<int>(d.labels().size(), d.labels().data()); })
      .def("indices", [](const Dataset& d, const std::string& s) { return d.indices(parse_split(s)); }, py::arg("split"));

  m.def("make_blobs",
        [](std::size_t n, std::size_t d, std::size_t classes, double sep, std::uint64_t seed, double stddev,
           std::size_t val, std::size_t test) { return make_blobs({n, d, classes, sep, seed, stddev}, val, test); },
        py::arg("n"), py::arg("d"), py::arg("classes"), py::arg("sep"), py::arg("seed"), py::arg("stddev") = 0.5,
        py::arg("val") = 0, py::arg("test") = 0);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def_static("logistic", &ModelSpec::logistic, py::arg("d"), py::arg("classes"))
      .def_static("least_squares", &ModelSpec::least_squares, py::arg("d"), py::arg("classes"))
      .def_static("mlp", &ModelSpec::mlp, py::arg("sizes"), py::arg("activation") = Activation::tanh)
      .def_property_readonly("param_count", &ModelSpec::param_count)
      .def_readonly("layer_sizes", &ModelSpec::layer_sizes);

  py::class_<SAMConfig>(m, "SAMConfig")
      .def(py::init<>())
      .def_readwrite("rho", &SAMConfig::rho)
      .def_readwrite("p", &SAMConfig::p)
      .def_readwrite("lambda_", &SAMConfig::lambda)
      .def_readwrite("eta", &SAMConfig::eta)
      .def_readwrite("lr_milestones", &SAMConfig::lr_milestones)
      .def_readwrite("lr_gamma", &SAMConfig::lr_gamma)
      .def_readwrite("batch_size", &SAMConfig::batch_size)
      .def_readwrite("steps", &SAMConfig::steps)
      .def_readwrite("seed", &SAMConfig::seed)
      .def_readwrite("record_stride", &SAMConfig::record_stride);

  py::class_<NeumannConfig>(m, "NeumannConfig")
      .def(py::init<>())
      .def_readwrite("order", &NeumannConfig::order)
      .def_readwrite("alpha", &NeumannConfig::alpha)
      .def_readwrite("damp", &NeumannConfig::damp)
      .def_readwrite("zeta", &NeumannConfig::zeta);

  py::class_<Trajectory>(m, "Trajectory")
      .def_property_readonly("steps", [](const Trajectory& t) { return t.header.steps; })
      .def("__len__", [](const Trajectory& t) { return t.checkpoints.size(); })
      .def("save", [](const Trajectory& t, const std::string& path) { write_trajectory(t, path); })
      .def_static("load", [](const std::string& path) { return read_trajectory(path); });

  py::class_<TrainResult>(m, "TrainResult")
      .def_property_readonly("params", [](const TrainResult& r) { return to_numpy(r.params); })
      .def_readonly("trajectory", &TrainResult::trajectory);

  m.def("p_norm", [](const Array& v, double p) { return p_norm(from_numpy(v), p); }, py::arg("v"), py::arg("p"));
  m.def("worst_perturbation",
        [](const Array& g, double rho, double p) { return to_numpy(worst_perturbation(from_numpy(g), rho, p)); },
        py::arg("grad"), py::arg("rho"), py::arg("p") = 2.0);
  m.def("init_params", [](const ModelSpec& s, std::uint64_t seed) { return to_numpy(init_params(s, seed)); },
        py::arg("spec"), py::arg("seed"));
  m.def("loss_grad",
        [](const ModelSpec& s, const Array& w, const Dataset& d, std::vector<std::uint32_t> rows, double scale) {
          LossGrad lg = subset_loss_grad(s, from_numpy(w), d, rows, scale);
          return py::make_tuple(lg.loss, to_numpy(lg.grad));
        },
        py::arg("spec"), py::arg("params"), py::arg("data"), py::arg("rows"), py::arg("scale") = 1.0);
  m.def("hvp",
        [](const ModelSpec& s, const Array& w, const Dataset& d, std::vector<std::uint32_t> rows, const Array& v,
           double scale) { return to_numpy(hvp(s, from_numpy(w), d, rows, from_numpy(v), scale)); },
        py::arg("spec"), py::arg("params"), py::arg("data"), py::arg("rows"), py::arg("v"), py::arg("scale") = 1.0);
  m.def("accuracy",
        [](const ModelSpec& s, const Array& w, const Dataset& d, std::vector<std::uint32_t> rows) {
          return accuracy(s, from_numpy(w), d, rows);
        },
        py::arg("spec"), py::arg("params"), py::arg("data"), py::arg("rows"));

  m.def("train_sam", &train_sam, py::arg("spec"), py::arg("data"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("loo_retrain",
        [](const ModelSpec& s, const Dataset& d, std::uint32_t k, const SAMConfig& c, RemovalMode mode) {
          return to_numpy(loo_retrain(s, d, k, c, mode));
        },
        py::arg("spec"), py::arg("data"), py::arg("k"), py::arg("config"), py::arg("mode") = RemovalMode::drop);

  m.def("sam_if_fast",
        [](const ModelSpec& s, const Dataset& d, const Array& w, double rho, double p, double lambda, std::uint32_t k,
           const NeumannConfig& n) { return to_numpy(sam_if_fast(s, d, from_numpy(w), rho, p, lambda, k, n)); },
        py::arg("spec"), py::arg("data"), py::arg("params"), py::arg("rho"), py::arg("p"), py::arg("lambda_"),
        py::arg("k"), py::arg("neumann") = NeumannConfig{});
  m.def("sam_hif",
        [](const ModelSpec& s, const Dataset& d, const Array& w, double rho, double p, double lambda, std::uint32_t k,
           const NeumannConfig& n) { return to_numpy(sam_hif(s, d, from_numpy(w), rho, p, lambda, k, n)); },
        py::arg("spec"), py::arg("data"), py::arg("params"), py::arg("rho"), py::arg("p"), py::arg("lambda_"),
        py::arg("k"), py::arg("neumann") = NeumannConfig{});
  m.def("sam_gif",
        [](const Trajectory& t, const ModelSpec& s, const Dataset& d, const SAMConfig& c, std::uint32_t k,
           GifMode mode) { return to_numpy(sam_gif(t, s, d, c, k, mode)); },
        py::arg("trajectory"), py::arg("spec"), py::arg("data"), py::arg("config"), py::arg("k"),
        py::arg("mode") = GifMode::sgd);
  m.def("influence_scores",
        [](const ModelSpec& s, const Dataset& d, const SAMConfig& c, const TrainResult& r, Estimator e,
           std::vector<std::uint32_t> ks, std::vector<std::uint32_t> val, const NeumannConfig& n, GifMode mode) {
          auto records = attribute(s, d, c, r.params, &r.trajectory, e, ks, val, {n, mode});
          std::vector<double> out;
          for (const auto& rec : records) out.push_back(rec.score);
          return out;
        },
        py::arg("spec"), py::arg("data"), py::arg("config"), py::arg("trained"), py::arg("estimator"), py::arg("rows"),
        py::arg("val"), py::arg("neumann") = NeumannConfig{}, py::arg("gif_mode") = GifMode::sgd,
        py::call_guard<py::gil_scoped_release>());
  m.def("edit_model", [](const Array& w, const Array& f) { return to_numpy(edit_model(from_numpy(w), from_numpy(f))); },
        py::arg("params"), py::arg("influence"));
  m.def("spearman", [](std::vector<double> a, std::vector<double> b) { return spearman_correlation(a, b); });
}
