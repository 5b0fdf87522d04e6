#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "c3sl/accounting.hpp"
#include "c3sl/bench.hpp"
#include "c3sl/codec.hpp"
#include "c3sl/keyfile.hpp"
#include "c3sl/pipeline.hpp"

namespace py = pybind11;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vec(const DoubleArray& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d array");
  return std::vector<double>(a.data(), a.data() + a.shape(0));
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

std::vector<std::vector<double>> to_group(const DoubleArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array (group x dim)");
  std::vector<std::vector<double>> group(a.shape(0));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    group[i].assign(a.data(i, 0), a.data(i, 0) + a.shape(1));
  }
  return group;
}

c3sl::ConvPath parse_path(const std::string& name) {
  if (name == "auto") return c3sl::ConvPath::Auto;
  if (name == "naive") return c3sl::ConvPath::Naive;
  if (name == "fft") return c3sl::ConvPath::Fft;
  throw std::invalid_argument("path must be 'auto', 'naive', or 'fft'");
}

}  // namespace

PYBIND11_MODULE(_c3sl, m) {
  m.doc() = "Batch-wise activation compression for split learning via circular "
            "convolution binding and superposition.";

  py::class_<c3sl::KeySet>(m, "KeySet")
      .def_static(
          "generate",
          [](std::size_t dim, std::size_t count, std::uint64_t seed) {
            return c3sl::KeySet::generate(dim, count, seed);
          },
          py::arg("dim"), py::arg("count"), py::arg("seed"))
      .def_static("delta", &c3sl::KeySet::delta, py::arg("dim"), py::arg("count"))
      .def_property_readonly("dim", &c3sl::KeySet::dim)
      .def_property_readonly("count", &c3sl::KeySet::count)
      .def_property_readonly("seed", &c3sl::KeySet::seed)
      .def_property_readonly("param_count", &c3sl::KeySet::param_count)
      .def("key",
           [](const c3sl::KeySet& ks, std::size_t i) {
             const auto k = ks.key(i);
             return to_array(std::vector<double>(k.begin(), k.end()));
           },
           py::arg("index"))
      .def("content_digest", &c3sl::KeySet::content_digest);

  m.def(
      "bind",
      [](const DoubleArray& key, const DoubleArray& z, const std::string& path) {
        return to_array(c3sl::bind(to_vec(key), to_vec(z), parse_path(path)));
      },
      py::arg("key"), py::arg("z"), py::arg("path") = "auto",
      "Circular convolution of a key with a feature vector.");
  m.def(
      "unbind",
      [](const DoubleArray& key, const DoubleArray& s, const std::string& path) {
        return to_array(c3sl::unbind(to_vec(key), to_vec(s), parse_path(path)));
      },
      py::arg("key"), py::arg("s"), py::arg("path") = "auto",
      "Circular correlation of a key with a compressed vector.");
  m.def(
      "bind_adjoint",
      [](const DoubleArray& key, const DoubleArray& upstream, const std::string& path) {
        return to_array(c3sl::bind_adjoint(to_vec(key), to_vec(upstream), parse_path(path)));
      },
      py::arg("key"), py::arg("upstream"), py::arg("path") = "auto");
  m.def(
      "unbind_adjoint",
      [](const DoubleArray& key, const DoubleArray& upstream, const std::string& path) {
        return to_array(
            c3sl::unbind_adjoint(to_vec(key), to_vec(upstream), parse_path(path)));
      },
      py::arg("key"), py::arg("upstream"), py::arg("path") = "auto");
  m.def(
      "superpose",
      [](const DoubleArray& bound) {
        return to_array(c3sl::superpose(to_group(bound)));
      },
      py::arg("bound"), "Elementwise sum of bound vectors (rows of a 2-d array).");
  m.def(
      "encode_group",
      [](const c3sl::KeySet& keys, const DoubleArray& group, const std::string& path) {
        return to_array(c3sl::encode_group(keys, to_group(group), parse_path(path)));
      },
      py::arg("keys"), py::arg("group"), py::arg("path") = "auto",
      "Compress a group of feature vectors (rows) into one vector.");
  m.def(
      "decode_slot",
      [](const c3sl::KeySet& keys, const DoubleArray& s, std::size_t index,
         const std::string& path) {
        return to_array(c3sl::decode_slot(keys, to_vec(s), index, parse_path(path)));
      },
      py::arg("keys"), py::arg("s"), py::arg("index"), py::arg("path") = "auto",
      "Retrieve one slot of a compressed vector.");
  m.def(
      "noise_decomposition",
      [](const c3sl::KeySet& keys, const DoubleArray& group, std::size_t index,
         const std::string& path) {
        const auto parts =
            c3sl::noise_decomposition(keys, to_group(group), index, parse_path(path));
        return py::make_tuple(to_array(parts.signal_term), to_array(parts.cross_term));
      },
      py::arg("keys"), py::arg("group"), py::arg("index"), py::arg("path") = "auto",
      "Split one retrieval into its signal and cross-talk terms.");
  m.def(
      "cosine",
      [](const DoubleArray& a, const DoubleArray& b) {
        return c3sl::cosine(to_vec(a), to_vec(b));
      },
      py::arg("a"), py::arg("b"));

  m.def("write_keyset", &c3sl::write_keyset, py::arg("path"), py::arg("keys"));
  m.def("read_keyset", &c3sl::read_keyset, py::arg("path"));

  // cost accounting
  m.def("c3sl_params", &c3sl::c3sl_params, py::arg("ratio"), py::arg("dim"));
  m.def("c3sl_flops", &c3sl::c3sl_flops, py::arg("batch"), py::arg("dim"));
  m.def("bottlenet_params", &c3sl::bottlenet_params, py::arg("channels"),
        py::arg("kernel"), py::arg("ratio"));
  m.def("bottlenet_flops", &c3sl::bottlenet_flops, py::arg("batch"), py::arg("channels"),
        py::arg("kernel"), py::arg("ratio"), py::arg("h"), py::arg("w"), py::arg("h_out"),
        py::arg("w_out"));
  m.def(
      "comm_bytes",
      [](std::uint64_t batch, std::uint64_t dim, std::uint64_t ratio,
         std::uint64_t bytes_per_scalar) {
        const auto c = c3sl::comm_bytes(batch, dim, ratio, bytes_per_scalar);
        return py::dict(py::arg("forward_feature_bytes") = c.forward_feature_bytes,
                        py::arg("forward_label_bytes") = c.forward_label_bytes,
                        py::arg("backward_feature_bytes") = c.backward_feature_bytes);
      },
      py::arg("batch"), py::arg("dim"), py::arg("ratio"), py::arg("bytes_per_scalar") = 4);

  m.def(
      "retrieval_bench",
      [](std::size_t dim, std::size_t ratio, std::size_t trials, std::uint64_t seed,
         bool delta_keys, const std::string& path) {
        const auto row =
            c3sl::run_retrieval_bench(dim, ratio, trials, seed, delta_keys, parse_path(path));
        return py::dict(py::arg("dim") = row.dim, py::arg("ratio") = row.ratio,
                        py::arg("trials") = row.trials,
                        py::arg("mean_cosine") = row.mean_cosine,
                        py::arg("std_cosine") = row.std_cosine,
                        py::arg("signal_energy") = row.signal_energy,
                        py::arg("cross_energy") = row.cross_energy);
      },
      py::arg("dim"), py::arg("ratio"), py::arg("trials") = 100, py::arg("seed") = 1,
      py::arg("delta_keys") = false, py::arg("path") = "auto",
      "Monte-Carlo retrieval quality at one compression ratio.");

  m.def(
      "train_blobs",
      [](std::size_t ratio, std::size_t batch, std::size_t cut_dim, std::size_t epochs,
         double lr, std::size_t train_samples, std::size_t test_samples,
         std::size_t input_dim, std::size_t classes, double separation,
         std::uint64_t seed, bool delta_keys) {
        c3sl::TrainConfig cfg;
        cfg.ratio = ratio;
        cfg.batch = batch;
        cfg.cut_dim = cut_dim;
        cfg.epochs = epochs;
        cfg.learning_rate = lr;
        cfg.input_dim = input_dim;
        cfg.num_classes = classes;
        cfg.key_seed = seed;
        cfg.model_seed = seed;
        cfg.shuffle_seed = seed;
        cfg.key_mode = delta_keys ? c3sl::KeySet::Mode::Delta : c3sl::KeySet::Mode::Random;
        cfg.validate();

        c3sl::BlobSpec spec;
        spec.train_samples = train_samples;
        spec.test_samples = test_samples;
        spec.input_dim = input_dim;
        spec.num_classes = classes;
        spec.separation = separation;
        spec.seed = seed;
        const c3sl::BlobData blobs = c3sl::make_blobs(spec);

        c3sl::Trainer trainer(c3sl::make_model(cfg), c3sl::make_keys(cfg), cfg);
        const c3sl::RunSummary summary =
            trainer.run(blobs.train, test_samples > 0 ? &blobs.test : nullptr, nullptr);

        py::dict out;
        out["steps"] = summary.steps;
        out["first_loss"] = summary.first_loss;
        out["final_loss"] = summary.final_loss;
        out["final_accuracy"] =
            summary.final_accuracy ? py::object(py::float_(*summary.final_accuracy))
                                   : py::object(py::none());
        out["forward_feature_bytes"] = summary.forward_feature_bytes;
        out["backward_feature_bytes"] = summary.backward_feature_bytes;
        out["achieved_ratio"] = summary.achieved_ratio;
        return out;
      },
      py::arg("ratio") = 1, py::arg("batch") = 64, py::arg("cut_dim") = 64,
      py::arg("epochs") = 5, py::arg("lr") = 1e-3, py::arg("train_samples") = 512,
      py::arg("test_samples") = 128, py::arg("input_dim") = 64, py::arg("classes") = 4,
      py::arg("separation") = 10.0, py::arg("seed") = 1, py::arg("delta_keys") = false,
      "Train the split pipeline on seeded synthetic blobs and report the summary.");
}
