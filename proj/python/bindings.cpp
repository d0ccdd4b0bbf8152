#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "fashion/cli.hpp"
#include "fashion/error.hpp"
#include "fashion/evaluation.hpp"
#include "fashion/image_gan.hpp"
#include "fashion/preprocess.hpp"
#include "fashion/rng.hpp"
#include "fashion/synth_data.hpp"
#include "fashion/training.hpp"

namespace py = pybind11;
using namespace fashion;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<int, py::array::c_style | py::array::forcecast>;

Grid3f to_grid(const FloatArray& a) {
  if (a.ndim() != 3) throw Error(ErrorCode::ShapeMismatch, "expected an (H, W, C) array");
  return Grid3f(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
                std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray from_grid(const Grid3f& g) {
  FloatArray out({g.height(), g.width(), g.channels()});
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

LabelGrid to_labels(const IntArray& a) {
  if (a.ndim() != 2) throw Error(ErrorCode::ShapeMismatch, "expected an (H, W) label array");
  return {static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), std::vector<int>(a.data(), a.data() + a.size())};
}

IntArray from_labels(const LabelGrid& l) {
  IntArray out({l.height, l.width});
  std::copy(l.labels.begin(), l.labels.end(), out.mutable_data());
  return out;
}

ImageRGB to_image(const ByteArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw Error(ErrorCode::ShapeMismatch, "expected an (H, W, 3) uint8 image");
  return ImageRGB::from_bytes(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                              std::span(a.data(), static_cast<std::size_t>(a.size())));
}

ByteArray from_image(const ImageRGB& image) {
  ByteArray out({image.height(), image.width(), 3});
  const auto bytes = image.to_bytes();
  std::copy(bytes.begin(), bytes.end(), out.mutable_data());
  return out;
}

py::dict record_dict(const PersonRecord& r) {
  py::dict d;
  d["id"] = r.id;
  d["image"] = from_image(r.image);
  d["labels"] = from_labels(argmax_labels(r.segmap));
  d["caption"] = r.caption;
  d["female"] = r.attributes.gender;
  if (r.structure) d["structure"] = std::vector<bool>(r.structure->begin(), r.structure->end());
  return d;
}

}  // namespace

PYBIND11_MODULE(_fashion_synth, m) {
  m.doc() = "Two-stage text-guided redressing: synthetic data, preprocessing, training and inference";

  py::register_exception<Error>(m, "FashionError");

  m.attr("NUM_LABELS") = kNumLabels;
  m.attr("LABEL_NAMES") = std::vector<std::string>(label_names().begin(), label_names().end());

  m.def("generate_records",
        [](int count, std::uint64_t seed, int resolution) {
          py::list out;
          for (const auto& r : generate_records(count, seed, resolution)) out.append(record_dict(r));
          return out;
        },
        py::arg("count"), py::arg("seed"), py::arg("resolution") = 32);
  m.def("generate_dataset",
        [](int count, std::uint64_t seed, const std::filesystem::path& dir, int resolution) {
          return generate_dataset(count, seed, dir, resolution).size();
        },
        py::arg("count"), py::arg("seed"), py::arg("out"), py::arg("resolution") = 32);
  m.def("load_dataset", [](const std::filesystem::path& dir) {
    py::list out;
    for (const auto& r : load_dataset(dir)) out.append(record_dict(r));
    return out;
  });

  m.def("merge_labels", [](const FloatArray& probs) { return from_grid(merge_labels(to_grid(probs))); },
        "(H, W, 7) -> (H, W, 4)");
  m.def("downsample_bicubic", [](const FloatArray& probs) { return from_grid(downsample_bicubic(to_grid(probs))); },
        "(H, W, C) simplex map -> (8, 8, C)");
  m.def("build_spatial_constraint",
        [](const IntArray& labels) { return from_grid(build_spatial_constraint(segmap_from_labels(to_labels(labels))).probs()); },
        "(H, W) labels -> (8, 8, 4) constraint");
  m.def("one_hot", [](const IntArray& labels) { return from_grid(one_hot(to_labels(labels))); });
  m.def("argmax_labels", [](const FloatArray& probs) { return from_labels(argmax_labels(to_grid(probs))); });

  m.def("compose",
        [](const std::vector<FloatArray>& textures, const FloatArray& masks, bool hard) {
          TextureStack<float> stack;
          for (const auto& t : textures) stack.push_back(to_grid(t));
          return from_grid(compose(stack, to_grid(masks), hard ? ComposeMode::kHard : ComposeMode::kSoft));
        },
        py::arg("textures"), py::arg("masks"), py::arg("hard") = true,
        "sum over l of masks[..., l] * textures[l]; hard mode requires one-hot masks");

  m.def("gan_losses",
        [](const std::vector<double>& real, const std::vector<double>& fake) {
          const auto v = gan_losses(real, fake);
          return py::make_tuple(v.loss_d, v.loss_g);
        },
        py::arg("d_real"), py::arg("d_fake"));
  m.def("average_precision", [](const std::vector<double>& scores, const std::vector<int>& labels) {
    return average_precision(scores, labels);
  });
  m.def("mean_average_precision", [](const std::vector<double>& aps) { return mean_average_precision(aps); });
  m.def("make_swap_pairs", [](std::size_t count, std::uint64_t seed) { return make_swap_pairs(count, seed); });
  m.def("derive_seed", &derive_seed);

  m.def("train_stage",
        [](const std::string& config_text, const std::filesystem::path& dataset) {
          TrainConfig cfg = TrainConfig::parse(config_text);
          if (!dataset.empty()) cfg.dataset = dataset;
          const auto records = load_dataset(cfg.dataset);
          py::gil_scoped_release release;
          const auto result = train_stage(cfg, records);
          std::vector<std::pair<double, double>> losses;
          for (const auto& e : result.epochs) losses.emplace_back(e.loss_d, e.loss_g);
          return losses;
        },
        py::arg("config"), py::arg("dataset") = std::filesystem::path(),
        "Trains one stage from key=value config text; returns per-epoch (loss_D, loss_G).");

  py::class_<StageModel>(m, "StageModel")
      .def_static("load", [](const std::filesystem::path& p) { return load_stage_model(p); })
      .def_property_readonly("stage", [](const StageModel& s) { return std::string(stage_name(s.kind())); })
      .def_property_readonly("resolution", [](const StageModel& s) { return s.arch().resolution; })
      .def("encode_caption", [](const StageModel& s, const std::string& c) {
        const auto v = s.encode_caption(c);
        return std::vector<float>(v.begin(), v.end());
      });

  m.def("infer_pipeline",
        [](const ByteArray& image, const IntArray& labels, const std::string& caption, std::uint64_t seed,
           const StageModel& shape, const StageModel& second) {
          const PersonRecord person = make_person(to_image(image), segmap_from_labels(to_labels(labels)), caption);
          const auto out = infer_pipeline(person, caption, {derive_seed(seed, 0), derive_seed(seed, 1)}, shape, second);
          return py::make_tuple(from_labels(argmax_labels(out.shape_map)), from_image(out.image));
        },
        py::arg("image"), py::arg("labels"), py::arg("caption"), py::arg("seed"), py::arg("shape"), py::arg("image_model"),
        "Returns (shape-map labels, uint8 image).");

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          const int code = run_cli(args, out, err);
          return py::make_tuple(code, out.str(), err.str());
        },
        "Runs the command line; returns (exit_code, stdout, stderr).");
}
