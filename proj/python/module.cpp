#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "symnet/assignment.hpp"
#include "symnet/datasets.hpp"
#include "symnet/errors.hpp"
#include "symnet/experiment.hpp"
#include "symnet/geometry.hpp"
#include "symnet/io.hpp"
#include "symnet/probes.hpp"
#include "symnet/symmetry.hpp"
#include "symnet/training.hpp"

namespace py = pybind11;
using namespace symnet;

namespace {

Dataset make_dataset(const Matrix& inputs, std::vector<int> labels, bool signed_labels, int num_classes) {
  Dataset d;
  d.inputs = inputs;
  d.labels = std::move(labels);
  d.signed_labels = signed_labels;
  d.num_classes = signed_labels ? 2 : num_classes;
  d.validate();
  return d;
}

TrainConfig train_config(int epochs, int batch_size, double lr, double momentum, bool nesterov,
                         const std::string& schedule, const std::string& loss, std::uint64_t seed) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.lr0 = lr;
  t.momentum = momentum;
  t.nesterov = nesterov;
  t.schedule = schedule_from_string(schedule);
  t.loss = loss_from_string(loss);
  t.seed = seed;
  t.validate();
  return t;
}

py::dict plane_dict(const PlaneGrid& g) {
  py::dict d;
  d["u"] = g.us;
  d["v"] = g.vs;
  d["errors"] = g.errors;
  d["anchors"] = g.anchors;
  d["normalized"] = g.normalized;
  d["reprojected"] = g.reprojected;
  d["binarized"] = g.binarized;
  return d;
}

}  // namespace

PYBIND11_MODULE(_symnet, m) {
  m.doc() = "Symmetry-aware loss-landscape probes for small fully-connected networks";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<Layer>(m, "Layer")
      .def_readonly("weights", &Layer::weights)
      .def_readonly("bias", &Layer::bias)
      .def_readonly("latent", &Layer::latent)
      .def_property_readonly("fan_in", [](const Layer& l) { return l.spec.fan_in; })
      .def_property_readonly("fan_out", [](const Layer& l) { return l.spec.fan_out; })
      .def_property_readonly("activation", [](const Layer& l) { return std::string(to_string(l.spec.activation)); })
      .def_property_readonly("binary", [](const Layer& l) { return l.spec.weights_binary; })
      .def_property_readonly("trainable", [](const Layer& l) { return l.spec.trainable; });

  py::class_<Network>(m, "Network")
      .def_property_readonly("layers", &Network::layers)
      .def_property_readonly("num_layers", &Network::num_layers)
      .def_property_readonly("input_dim", &Network::input_dim)
      .def_property_readonly("output_dim", &Network::output_dim)
      .def_property_readonly("is_binary", &Network::is_binary)
      .def("set_weights",
           [](Network& n, std::size_t l, const Matrix& w) {
             Layer& layer = n.mutable_layer(l);
             if (w.rows() != layer.weights.rows() || w.cols() != layer.weights.cols())
               throw ShapeError("weight matrix has the wrong shape");
             if (layer.spec.weights_binary) {
               layer.latent = w;
               binarize_in_place(n);
             } else {
               layer.weights = w;
             }
           },
           py::arg("layer"), py::arg("weights"))
      .def("__eq__", [](const Network& a, const Network& b) { return a == b; });

  py::class_<Dataset>(m, "Dataset")
      .def(py::init(&make_dataset), py::arg("inputs"), py::arg("labels"), py::arg("signed_labels") = false,
           py::arg("num_classes") = 2)
      .def_readonly("inputs", &Dataset::inputs)
      .def_readonly("labels", &Dataset::labels)
      .def_readonly("signed_labels", &Dataset::signed_labels)
      .def_readonly("num_classes", &Dataset::num_classes)
      .def("__len__", &Dataset::size);

  m.def("make_mlp",
        [](std::vector<int> widths, bool binary, bool bias, std::uint64_t seed) {
          Network n = make_mlp(widths, binary, bias);
          Rng rng(seed);
          initialize(n, rng);
          return n;
        },
        py::arg("widths"), py::arg("binary") = false, py::arg("bias") = false, py::arg("seed") = 0);
  m.def("make_committee",
        [](int inputs, int hidden, std::uint64_t seed) {
          Network n = make_committee(inputs, hidden);
          Rng rng(seed);
          initialize(n, rng);
          return n;
        },
        py::arg("inputs"), py::arg("hidden"), py::arg("seed") = 0);
  m.def("forward", &forward, py::arg("net"), py::arg("inputs"));
  m.def("classify", &classify, py::arg("logits"));
  m.def("train_error", &train_error, py::arg("net"), py::arg("data"));

  m.def("hmm_generate",
        [](int D, int N, int P, int P_test, std::uint64_t seed) {
          HmmData h = hmm_generate(HmmConfig{D, N, P, P_test, seed});
          return py::make_tuple(h.train, h.test);
        },
        py::arg("D"), py::arg("N"), py::arg("P"), py::arg("P_test"), py::arg("seed"));

  m.def("solve_assignment", &solve_assignment, py::arg("cost"));
  m.def("normalize", &normalize, py::arg("net"));
  m.def("is_normalized", &is_normalized, py::arg("net"), py::arg("tol") = 1e-4);
  m.def("align",
        [](const Network& ref, const Network& other, bool require_normalized) {
          AlignResult r = align(ref, other, require_normalized);
          return py::make_tuple(r.net, r.plan.perm, r.plan.signs);
        },
        py::arg("ref"), py::arg("other"), py::arg("require_normalized") = true);
  m.def("geodesic", &network_geodesic, py::arg("a"), py::arg("b"), py::arg("x"));
  m.def("geodesic_distance", &geodesic_distance, py::arg("a"), py::arg("b"));
  m.def("linear_interpolate", &linear_interpolate, py::arg("a"), py::arg("b"), py::arg("x"));
  m.def("hamming_distance", &hamming_distance, py::arg("a"), py::arg("b"));

  m.def("sgd_train",
        [](const Network& net, const Dataset& data, int epochs, int batch_size, double lr, double momentum,
           bool nesterov, const std::string& schedule, const std::string& loss, std::uint64_t seed) {
          TrainResult r = sgd_train(net, data, train_config(epochs, batch_size, lr, momentum, nesterov, schedule, loss, seed));
          return py::make_tuple(r.net, r.trace.train_error);
        },
        py::arg("net"), py::arg("data"), py::arg("epochs"), py::arg("batch_size") = 100, py::arg("lr") = 0.02,
        py::arg("momentum") = 0.0, py::arg("nesterov") = false, py::arg("schedule") = "cosine",
        py::arg("loss") = "cross_entropy", py::arg("seed") = 0);

  m.def("local_energy",
        [](const Network& net, const Dataset& data, std::vector<double> amplitudes, int samples, std::uint64_t seed) {
          const bool binary = net.is_binary();
          if (amplitudes.empty()) amplitudes = default_amplitudes(binary);
          LocalEnergyProfile p = local_energy(net, data, amplitudes, samples > 0 ? samples : default_energy_samples(binary), seed);
          return py::make_tuple(p.amplitudes, p.mean, p.stddev);
        },
        py::arg("net"), py::arg("data"), py::arg("amplitudes") = std::vector<double>{}, py::arg("samples") = 0,
        py::arg("seed") = 0);
  m.def("path_scan",
        [](const Network& a, const Network& b, const Dataset& data, const std::string& mode, int points,
           std::uint64_t seed, bool align_hamming) {
          PathOptions o;
          o.points = points;
          o.seed = seed;
          o.align_hamming = align_hamming;
          PathScan s = path_scan(a, b, data, path_mode_from_string(mode), o);
          return py::make_tuple(s.x, s.train_error);
        },
        py::arg("a"), py::arg("b"), py::arg("data"), py::arg("mode") = "linear", py::arg("points") = 25,
        py::arg("seed") = 0, py::arg("align_hamming") = true);
  m.def("plane_scan",
        [](const Network& a, const Network& b, const Network& c, const Dataset& data, int points, double margin,
           bool normalized, bool binarized) {
          PlaneOptions o;
          o.resolution = points;
          o.margin = margin;
          o.normalized = normalized;
          o.binarized = binarized;
          return plane_dict(plane_scan(a, b, c, data, o));
        },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("data"), py::arg("points") = 21, py::arg("margin") = 0.25,
        py::arg("normalized") = false, py::arg("binarized") = false);

  m.def("save_checkpoint", [](const Network& n, const std::filesystem::path& p) { save_checkpoint(n, p); },
        py::arg("net"), py::arg("path"));
  m.def("load_checkpoint", [](const std::filesystem::path& p) { return load_checkpoint(p).net; }, py::arg("path"));
  m.def("save_dataset", [](const Dataset& d, const std::filesystem::path& p) { save_dataset(d, p); },
        py::arg("data"), py::arg("path"));
  m.def("load_dataset", [](const std::filesystem::path& p) { return load_dataset(p); }, py::arg("path"));

  m.def("run_experiment",
        [](const std::string& config_json, const std::filesystem::path& out_dir) {
          return run_experiment(parse_experiment_config(nlohmann::json::parse(config_json)), out_dir).manifest.dump();
        },
        py::arg("config_json"), py::arg("out_dir"));
}
