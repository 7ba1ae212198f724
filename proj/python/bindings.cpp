#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "inout/cli.hpp"
#include "inout/errors.hpp"

namespace py = pybind11;
using namespace inout;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Image2D to_image(const Array& a) {
  if (a.ndim() != 2) throw InvalidArgument("expected a 2-D array");
  Image2D img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), img.values.begin());
  return img;
}

// RGB arrays are (H, W, 3) on the Python side and planar in C++.
RgbImage to_rgb(const Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw InvalidArgument("expected an (H, W, 3) array");
  RgbImage img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  auto v = a.unchecked<3>();
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < img.height; ++i)
      for (int j = 0; j < img.width; ++j) img.at(c, i, j) = v(i, j, c);
  return img;
}

Array from_image(const Image2D& img) {
  Array out({img.height, img.width});
  std::copy(img.values.begin(), img.values.end(), out.mutable_data());
  return out;
}

Array from_rgb(const RgbImage& img) {
  Array out({img.height, img.width, 3});
  auto v = out.mutable_unchecked<3>();
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < img.height; ++i)
      for (int j = 0; j < img.width; ++j) v(i, j, c) = img.at(c, i, j);
  return out;
}

py::dict sample_dict(const PairedSample& s) {
  py::dict d;
  d["rcm"] = from_image(s.rcm);
  d["h"] = from_image(s.h_target);
  d["e"] = from_image(s.e_target);
  d["rgb"] = from_rgb(s.rgb_target);
  if (s.artifact) {
    py::array_t<bool> mask({s.artifact->height, s.artifact->width});
    auto m = mask.mutable_unchecked<2>();
    for (int i = 0; i < s.artifact->height; ++i)
      for (int j = 0; j < s.artifact->width; ++j) m(i, j) = s.artifact->at(i, j);
    d["artifact"] = mask;
  } else {
    d["artifact"] = py::none();
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(inoutnet, m) {
  m.doc() = "Virtual H&E staining of reflectance confocal images";
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  m.def("version", &version_tag);

  m.def(
      "normalize",
      [](const Array& img, double lo, double hi) { return from_image(normalize(to_image(img), lo, hi).image); },
      py::arg("image"), py::arg("lo_pct") = 1.0, py::arg("hi_pct") = 99.0);

  m.def(
      "beer_lambert_he",
      [](const Array& h, const Array& e) { return from_rgb(beer_lambert_he(to_image(h), to_image(e))); },
      py::arg("nuclei"), py::arg("cyto"));
  m.def(
      "decompose_he",
      [](const Array& rgb) {
        const auto d = decompose_he(to_rgb(rgb));
        return py::make_tuple(from_image(d.h), from_image(d.e));
      },
      py::arg("rgb"));

  m.def(
      "generate_phantom",
      [](int size, std::uint64_t seed, double speckle, bool artifact) {
        PhantomConfig c;
        c.image_size = size;
        c.seed = RngSeed{seed};
        c.speckle_strength = speckle;
        c.artifact_enabled = artifact;
        return sample_dict(generate_phantom(c));
      },
      py::arg("image_size") = 128, py::arg("seed") = 0, py::arg("speckle_strength") = PhantomConfig{}.speckle_strength,
      py::arg("artifact") = true);

  // Metrics take (H, W, 3) arrays in [0, 1].
  m.def("mse", [](const Array& a, const Array& b) { return mse(to_rgb(a), to_rgb(b)); });
  m.def("psnr", [](const Array& a, const Array& b) { return psnr(to_rgb(a), to_rgb(b)); });
  m.def("ssim", [](const Array& a, const Array& b) { return ssim(to_rgb(a), to_rgb(b)); });
  m.def("ms_ssim", [](const Array& a, const Array& b) { return ms_ssim(to_rgb(a), to_rgb(b)); });
  m.def("fsim", [](const Array& a, const Array& b) { return fsim(to_rgb(a), to_rgb(b)); });
  m.def("vol", [](const Array& a) { return vol(to_rgb(a)); });
  m.def(
      "paired_t_test",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto r = paired_t_test(x, y);
        py::dict d;
        d["n"] = r.n;
        d["mean_difference"] = r.mean_difference;
        d["sd_difference"] = r.sd_difference;
        d["degenerate"] = r.degenerate;
        d["t"] = r.t ? py::cast(*r.t) : py::none();
        d["p"] = r.p ? py::cast(*r.p) : py::none();
        return d;
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "schedule",
      [](int n, int total) {
        std::vector<std::tuple<std::string, int, int>> out;
        for (const auto& p : make_schedule(n, total)) out.emplace_back(to_string(p.kind), p.first_epoch, p.last_epoch);
        return out;
      },
      py::arg("n_alternate"), py::arg("total_epochs"));

  m.def(
      "audit_reference",
      [](int input_size) {
        NetworkAssembly net(reference_options());
        const auto r = audit_params(net, input_size);
        return std::map<std::string, std::int64_t>{{"g_h", r.g_h},
                                                   {"g_e", r.g_e},
                                                   {"concat", r.concat},
                                                   {"d_h", r.d_h},
                                                   {"d_e", r.d_e},
                                                   {"d_out", r.d_out},
                                                   {"generator_total", r.generator_total},
                                                   {"discriminator_total", r.discriminator_total},
                                                   {"total", r.total},
                                                   {"inference_macs", r.inference_macs}};
      },
      py::arg("input_size") = 256);

  m.def(
      "infer",
      [](const std::filesystem::path& checkpoint, const std::vector<Array>& inputs) {
        std::vector<Image2D> imgs;
        for (const auto& a : inputs) imgs.push_back(to_image(a));
        std::vector<Stained> stained;
        {
          py::gil_scoped_release release;
          stained = infer(checkpoint, imgs);
        }
        std::vector<Array> out;
        for (const auto& s : stained) out.push_back(from_rgb(s.i_rgb));
        return out;
      },
      py::arg("checkpoint"), py::arg("inputs"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "inoutnet");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        return run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs one command of the command-line tool and returns its exit code.");
}
