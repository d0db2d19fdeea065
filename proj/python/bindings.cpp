#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "faith/cli.hpp"
#include "faith/dataset.hpp"
#include "faith/frequency.hpp"
#include "faith/metrics.hpp"
#include "faith/model.hpp"
#include "faith/robustness.hpp"
#include "faith/tensor.hpp"
#include "faith/types.hpp"

namespace py = pybind11;
using namespace faith;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const DoubleArray& arr) {
  Shape shape(static_cast<size_t>(arr.ndim()));
  for (py::ssize_t i = 0; i < arr.ndim(); ++i) shape[i] = static_cast<int>(arr.shape(i));
  std::vector<double> data(arr.data(), arr.data() + arr.size());
  return Tensor::from(std::move(shape), std::move(data));
}

py::array_t<double> to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

EditSequence to_sequence(const std::vector<std::string>& names) {
  EditSequence seq;
  for (const std::string& n : names) {
    const auto attr = attribute_from_string(n);
    if (!attr) throw std::invalid_argument("unknown attribute '" + n + "'");
    seq.push_back(*attr);
  }
  return seq;
}

std::vector<std::string> from_sequence(const EditSequence& seq) {
  std::vector<std::string> out;
  for (Attribute a : seq) out.emplace_back(to_string(a));
  return out;
}

}  // namespace

PYBIND11_MODULE(_faith, m) {
  m.doc() = "Edit-sequence detection core: transforms, metrics, model, pipeline";

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"faith"};
        for (const std::string& a : args) argv.push_back(a.c_str());
        return cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Run a pipeline subcommand; returns the exit code");

  m.def("attributes", [] {
    std::vector<std::string> names;
    for (Attribute a : all_attributes()) names.emplace_back(to_string(a));
    return names;
  });

  // metrics
  m.def(
      "fixed_acc",
      [](const std::vector<std::string>& p, const std::vector<std::string>& g) {
        return fixed_acc(to_sequence(p), to_sequence(g));
      },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "adaptive_acc",
      [](const std::vector<std::string>& p, const std::vector<std::string>& g) {
        return adaptive_acc(to_sequence(p), to_sequence(g));
      },
      py::arg("pred"), py::arg("gt"));
  m.def(
      "full_acc",
      [](const std::vector<std::string>& p, const std::vector<std::string>& g) {
        return full_acc(to_sequence(p), to_sequence(g));
      },
      py::arg("pred"), py::arg("gt"));

  // frequency transforms
  m.def(
      "dwt_haar",
      [](const DoubleArray& img) {
        const Subbands sb = dwt_haar(to_tensor(img));
        return py::make_tuple(to_array(sb.ll), to_array(sb.lh), to_array(sb.hl),
                              to_array(sb.hh));
      },
      py::arg("image"), "Single-level Haar analysis; returns (ll, lh, hl, hh)");
  m.def(
      "idwt_haar",
      [](const DoubleArray& ll, const DoubleArray& lh, const DoubleArray& hl,
         const DoubleArray& hh) {
        return to_array(idwt_haar({to_tensor(ll), to_tensor(lh), to_tensor(hl), to_tensor(hh)}));
      },
      py::arg("ll"), py::arg("lh"), py::arg("hl"), py::arg("hh"));
  m.def("dct2", [](const DoubleArray& img) { return to_array(dct2(to_tensor(img))); },
        py::arg("image"));
  m.def("idct2", [](const DoubleArray& c) { return to_array(idct2(to_tensor(c))); },
        py::arg("coeffs"));
  m.def(
      "frequency_map",
      [](const DoubleArray& img, const std::string& method) {
        return to_array(extract_frequency_map(to_tensor(img), FrequencyMethod::parse(method)));
      },
      py::arg("image"), py::arg("method"), "High-frequency evidence map: dwt, dct or fft");

  // dataset utilities
  m.def("ssim", [](const DoubleArray& a, const DoubleArray& b) {
    return ssim(to_tensor(a), to_tensor(b));
  });
  m.def(
      "validate_manifest",
      [](const std::string& path) { return load_manifest(path).size(); }, py::arg("path"),
      "Parse and validate; returns the record count or raises");
  m.def(
      "load_image",
      [](const std::string& manifest, const std::string& record_id) {
        const auto records = load_manifest(manifest);
        const ImageCache cache(
            std::filesystem::path(manifest).parent_path().string());
        for (const auto& r : records)
          if (r.id == record_id) return to_array(cache.get(r));
        throw std::invalid_argument("no record '" + record_id + "' in " + manifest);
      },
      py::arg("manifest"), py::arg("record_id"));

  // robustness
  m.def("jpeg_like_compress", [](const DoubleArray& img, double ratio) {
    return to_array(jpeg_like_compress(to_tensor(img), ratio));
  });
  m.def("gaussian_noise", [](const DoubleArray& img, double intensity, std::uint64_t seed) {
    return to_array(gaussian_noise(to_tensor(img), intensity, seed));
  });
  m.def("psnr", [](const DoubleArray& a, const DoubleArray& b) {
    return psnr(to_tensor(a), to_tensor(b));
  });

  // model
  py::class_<FaithModel>(m, "FaithModel")
      .def_static(
          "load_checkpoint",
          [](const std::string& path) { return FaithModel::load_checkpoint(path); },
          py::arg("path"))
      .def("predict_sequence",
           [](const FaithModel& self, const DoubleArray& img) {
             return from_sequence(self.predict_sequence(to_tensor(img)));
           })
      .def("training_loss",
           [](const FaithModel& self, const DoubleArray& img,
              const std::vector<std::string>& gt) {
             return self.training_loss(to_tensor(img), to_sequence(gt)).item();
           })
      .def("config_json", [](const FaithModel& self) { return self.config().to_json().dump(); });
}
