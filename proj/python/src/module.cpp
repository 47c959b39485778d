#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pyrexpose/checkpoint.hpp"
#include "pyrexpose/error.hpp"
#include "pyrexpose/image_io.hpp"
#include "pyrexpose/imaging.hpp"
#include "pyrexpose/infer.hpp"
#include "pyrexpose/metrics.hpp"
#include "pyrexpose/pyramid.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace pyrexpose {
namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

// (H, W, 3) float array to planar Image.
Image from_array(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw InvalidInput("expected an array of shape (H, W, 3)");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  Image img(h, w);
  auto v = a.unchecked<3>();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = v(y, x, c);
  return img;
}

Array to_array(const Image& img) {
  Array a({img.height(), img.width(), 3});
  auto v = a.mutable_unchecked<3>();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) v(y, x, c) = img.at(c, y, x);
  return a;
}

ScaleVector scales_or(const std::optional<std::vector<float>>& s, const ScaleVector& fallback) {
  return s ? ScaleVector{*s} : fallback;
}

ModelConfig preset(const std::string& name) {
  if (name == "full") return ModelConfig::full();
  if (name == "desk") return ModelConfig::desk();
  if (name == "tiny") return ModelConfig::tiny();
  throw ConfigError("unknown model preset '" + name + "'");
}

// A loaded generator ready for inference.
class Corrector {
 public:
  explicit Corrector(const Checkpoint& ck) : config_(ck.config), model_(model_from_checkpoint<float>(ck)) {}
  Corrector(const std::string& preset_name, std::uint64_t seed) : config_(preset(preset_name)), model_(config_) {
    model_.initialize(seed);
  }

  Array correct(const Array& img, const std::optional<std::vector<float>>& scales, int max_dim) const {
    const Image in = from_array(img);
    Image out;
    {
      py::gil_scoped_release release;
      out = pyrexpose::correct(in, model_, scales_or(scales, config_.scale_defaults), max_dim);
    }
    return to_array(out);
  }

  void save(const std::filesystem::path& path) const { save_checkpoint(to_checkpoint(model_), path); }
  int levels() const { return config_.levels; }
  std::vector<float> default_scales() const { return config_.scale_defaults.s; }
  std::string config_json() const { return config_.to_json().dump(); }

 private:
  ModelConfig config_;
  Model<float> model_;
};

}  // namespace
}  // namespace pyrexpose

PYBIND11_MODULE(_core, m) {
  using namespace pyrexpose;
  m.doc() = "Exposure correction with a Laplacian-pyramid network";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p)); }, "path"_a);
  m.def("save_image", [](const Array& img, const std::filesystem::path& p) { save_image(from_array(img), p); }, "image"_a,
        "path"_a);
  m.def("synthetic_scene", [](int h, int w, std::uint64_t seed) { return to_array(synthetic_scene(h, w, seed)); },
        "height"_a, "width"_a, "seed"_a);
  m.def("apply_relative_ev", [](const Array& img, float ev) { return to_array(apply_relative_ev(from_array(img), ev)); },
        "image"_a, "ev"_a, "Re-expose an sRGB image by `ev` stops in linear light.");

  m.def(
      "laplacian_decompose",
      [](const Array& img, int levels) {
        std::vector<Array> out;
        for (const Image& l : laplacian_decompose(from_array(img), levels).levels) out.push_back(to_array(l));
        return out;
      },
      "image"_a, "levels"_a = 4, "Finest detail level first, low-frequency residual last.");
  m.def(
      "laplacian_collapse",
      [](const std::vector<Array>& levels) {
        Pyramid p;
        for (const Array& a : levels) p.levels.push_back(from_array(a));
        return to_array(laplacian_collapse(p));
      },
      "levels"_a);

  m.def("psnr", [](const Array& a, const Array& b) { return psnr(from_array(a), from_array(b)); }, "a"_a, "b"_a);
  m.def("ssim", [](const Array& a, const Array& b) { return ssim(from_array(a), from_array(b)); }, "a"_a, "b"_a);

  py::class_<Corrector>(m, "Corrector")
      .def(py::init([](const std::filesystem::path& p) { return Corrector(load_checkpoint(p)); }), "checkpoint"_a)
      .def_static(
          "from_preset", [](const std::string& name, std::uint64_t seed) { return Corrector(name, seed); }, "preset"_a,
          "seed"_a = 0, "Freshly initialised network of a named preset: full, desk or tiny.")
      .def("correct", &Corrector::correct, "image"_a, "scales"_a = py::none(), "max_dim"_a = kDefaultMaxDim)
      .def("save", &Corrector::save, "path"_a)
      .def_property_readonly("levels", &Corrector::levels)
      .def_property_readonly("default_scales", &Corrector::default_scales)
      .def_property_readonly("config_json", &Corrector::config_json);
}
