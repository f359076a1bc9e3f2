// Python bindings: the pipeline steps plus array-level access to the model
// and the three explainers. Images cross the boundary as float32 arrays of
// shape (S, S) or (1, S, S) with values in [0, 1].

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "json.hpp"
#include "tumorscope/binary_io.hpp"
#include "tumorscope/pipeline.hpp"

namespace py = pybind11;
using namespace tumorscope;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

RunConfig config_from(const std::optional<py::dict>& overrides) {
  if (!overrides) return RunConfig{};
  const py::object dumps = py::module_::import("json").attr("dumps");
  return RunConfig::from_json(dumps(*overrides).cast<std::string>());
}

py::object parse_json(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

TensorF image_from(const FloatArray& a) {
  if (a.ndim() == 2) {
    return TensorF({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))},
                   std::vector<float>(a.data(), a.data() + a.size()))
        .reshaped({1, static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))});
  }
  if (a.ndim() == 3 && a.shape(0) == 1) {
    return TensorF({1, static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(2))},
                   std::vector<float>(a.data(), a.data() + a.size()));
  }
  throw ShapeError("image must have shape (S, S) or (1, S, S)");
}

template <class T>
py::array_t<T> to_array(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<T> out(shape);
  std::copy(t.vec().begin(), t.vec().end(), out.mutable_data());
  return out;
}

const std::vector<SliceRecord>& pick(const DatasetSplit& d, const std::string& split) {
  if (split == "train") return d.train;
  if (split == "val") return d.val;
  if (split == "test") return d.test;
  throw Error("split must be train, val or test");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "tumorscope: brain-MRI slice classifier with Grad-CAM, LRP and SHAP";

  // Translators are tried newest first, so the base class goes in first.
  const auto& base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<NiftiError>(m, "NiftiError", base.ptr());

  // Pipeline steps (mirror the command-line subcommands).
  m.def(
      "synth",
      [](const std::filesystem::path& out, std::size_t subjects, double tumour_rate, std::size_t size,
         std::uint64_t seed) {
        std::vector<std::string> ids;
        for (const auto& e : synthesize_cohort(out, {subjects, tumour_rate, size, seed})) ids.push_back(e.subject_id);
        return ids;
      },
      py::arg("out"), py::arg("subjects"), py::arg("tumour_rate") = 0.5, py::arg("size") = 64,
      py::arg("seed") = 0, "Write synthetic volume/mask pairs and volumes.json; returns subject ids.");

  m.def(
      "preprocess",
      [](const std::filesystem::path& manifest, const std::filesystem::path& out,
         const std::optional<py::dict>& config) {
        const RunConfig cfg = config_from(config);
        PreprocessStats stats;
        const DatasetSplit split = preprocess(read_volume_manifest(manifest), cfg.data, &stats);
        write_dataset(out, split);
        py::dict d;
        d["extracted"] = stats.extracted;
        d["informative"] = stats.informative;
        d["train"] = split.train.size();
        d["val"] = split.val.size();
        d["test"] = split.test.size();
        return d;
      },
      py::arg("manifest"), py::arg("out"), py::arg("config") = py::none(),
      "Slice, filter, normalize, split and balance; writes the dataset directory.");

  m.def(
      "train",
      [](const std::filesystem::path& data, const std::filesystem::path& out, const std::optional<py::dict>& config) {
        const RunConfig cfg = config_from(config);
        const DatasetSplit split = read_dataset(data);
        FitResult r;
        {
          py::gil_scoped_release release;
          r = train_to_dir(split, cfg, out);
        }
        py::list rows;
        for (const auto& h : r.history.rows) {
          py::dict d;
          d["epoch"] = h.epoch;
          d["train_loss"] = h.train_loss;
          d["train_acc"] = h.train_acc;
          d["val_loss"] = h.val_loss;
          d["val_acc"] = h.val_acc;
          rows.append(d);
        }
        return rows;
      },
      py::arg("data"), py::arg("out"), py::arg("config") = py::none(),
      "Train on a dataset directory; returns the history rows.");

  m.def(
      "evaluate",
      [](const std::filesystem::path& data, const std::filesystem::path& checkpoint, const std::string& split,
         const std::optional<py::dict>& config) {
        const RunConfig cfg = config_from(config);
        const DatasetSplit d = read_dataset(data);
        return parse_json(evaluate_model(load_checkpoint(checkpoint), pick(d, split), cfg.eval).to_json());
      },
      py::arg("data"), py::arg("checkpoint"), py::arg("split") = "test", py::arg("config") = py::none(),
      "Evaluation report (confusion, metrics, ROC, AUC, misclassification bins) as a dict.");

  m.def(
      "evaluate_scores",
      [](const std::vector<int>& labels, const std::vector<double>& scores, double threshold) {
        return parse_json(evaluate_scores(labels, scores, threshold).to_json());
      },
      py::arg("labels"), py::arg("scores"), py::arg("threshold") = 0.5);

  m.def(
      "explain",
      [](const std::filesystem::path& checkpoint, const std::filesystem::path& slice,
         const std::filesystem::path& out, const std::optional<py::dict>& config) {
        const RunConfig cfg = config_from(config);
        const TensorF image = decode_slice(io::read_file(slice));
        const ExplainArtifacts a = explain_to_dir(load_checkpoint(checkpoint), image, slice.stem().string(), cfg, out);
        py::dict d;
        d["json"] = a.json_path;
        d["ppm"] = a.ppm_path;
        d["explanation"] = parse_json(a.explanation.to_json());
        return d;
      },
      py::arg("checkpoint"), py::arg("slice"), py::arg("out"), py::arg("config") = py::none(),
      "Explain one slice file; writes <id>.json and <id>_combined.ppm.");

  m.def(
      "report",
      [](const std::filesystem::path& data, const std::filesystem::path& checkpoint,
         const std::filesystem::path& out, const std::string& split, const std::optional<py::dict>& config) {
        const RunConfig cfg = config_from(config);
        const DatasetSplit d = read_dataset(data);
        const AuditSummary s = audit_to_dir(load_checkpoint(checkpoint), pick(d, split), cfg, out);
        py::dict r;
        r["report"] = parse_json(s.report.to_json());
        r["composites"] = s.composites;
        return r;
      },
      py::arg("data"), py::arg("checkpoint"), py::arg("out"), py::arg("split") = "test",
      py::arg("config") = py::none(), "Misclassification audit with a composite per FP/FN.");

  // Array-level access.
  py::class_<Model>(m, "Model")
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def_static(
          "build",
          [](const std::string& variant, std::size_t input_side, std::size_t hidden_units, std::uint64_t seed) {
            ModelConfig c;
            c.variant = parse_variant(variant);
            c.input_side = input_side;
            c.hidden_units = hidden_units;
            c.seed = seed;
            return build_model(c);
          },
          py::arg("variant") = "original", py::arg("input_side") = 240, py::arg("hidden_units") = 8192,
          py::arg("seed") = 0)
      .def("save", [](const Model& self, const std::filesystem::path& p) { save_checkpoint(self, p); })
      .def_property_readonly("input_side", [](const Model& self) { return self.config.input_side; })
      .def_property_readonly("variant", [](const Model& self) { return to_string(self.config.variant); })
      .def_property_readonly("param_count", &Model::param_count)
      .def("predict", [](const Model& self, const FloatArray& image) { return forward(self, image_from(image)).probability; },
           py::arg("image"), "Tumour probability for one image.");

  m.def(
      "shape_trace",
      [](const std::string& variant, std::size_t input_side, std::size_t hidden_units) {
        ModelConfig c;
        c.variant = parse_variant(variant);
        c.input_side = input_side;
        c.hidden_units = hidden_units;
        const ShapeTrace t = shape_trace(c);
        if (!t.ok()) throw ShapeError(*t.error);
        py::list rows;
        for (const auto& r : t.rows) rows.append(py::make_tuple(r.name, std::vector<std::size_t>(r.output), r.params));
        return rows;
      },
      py::arg("variant") = "original", py::arg("input_side") = 240, py::arg("hidden_units") = 8192,
      "Rows of (layer name, output shape, parameter count).");

  m.def(
      "grad_cam",
      [](const Model& model, const FloatArray& image, bool tumour) {
        return to_array(grad_cam(model, image_from(image), tumour ? Target::kTumour : Target::kNonTumour).heatmap);
      },
      py::arg("model"), py::arg("image"), py::arg("tumour") = true, "Upsampled heatmap in [0, 1].");

  m.def(
      "lrp",
      [](const Model& model, const FloatArray& image, bool tumour) {
        const LrpResult r = lrp(model, image_from(image), tumour ? Target::kTumour : Target::kNonTumour);
        const Shape& s = r.relevance.shape();
        return py::make_tuple(to_array(r.relevance.reshaped({s[1], s[2]})), r.conservation_drift());
      },
      py::arg("model"), py::arg("image"), py::arg("tumour") = true, "(relevance map, conservation drift).");

  m.def(
      "kernel_shap",
      [](const Model& model, const FloatArray& image, std::size_t grid, std::size_t n_samples, std::uint64_t seed) {
        const ShapResult r = kernel_shap(model, image_from(image), {grid, grid, n_samples, seed});
        py::dict d;
        d["values"] = r.values;
        d["base_value"] = r.base_value;
        d["output_value"] = r.full_value;
        d["exact"] = r.exact;
        d["pos_pct"] = r.pos_pct;
        d["neg_pct"] = r.neg_pct;
        return d;
      },
      py::arg("model"), py::arg("image"), py::arg("grid") = 8, py::arg("n_samples") = 1024, py::arg("seed") = 0);

  m.def(
      "prf1",
      [](std::uint64_t tp, std::uint64_t fp, std::uint64_t fn, std::uint64_t tn) {
        const Metrics mt = prf1({tp, fp, fn, tn});
        py::dict d;
        d["precision"] = mt.precision;
        d["recall"] = mt.recall;
        d["f1"] = mt.f1;
        d["accuracy"] = mt.accuracy;
        return d;
      },
      py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"));

  m.def(
      "roc_auc", [](const std::vector<double>& scores, const std::vector<int>& labels) { return roc_auc(scores, labels).auc; },
      py::arg("scores"), py::arg("labels"));

  m.def(
      "read_nifti", [](const std::filesystem::path& p) {
        const Volume v = read_nifti(p);
        // Stored x-fastest; exposed as a (z, y, x) C-order array.
        py::array_t<float> out({v.dims[2], v.dims[1], v.dims[0]});
        std::copy(v.voxels.begin(), v.voxels.end(), out.mutable_data());
        return out;
      },
      py::arg("path"));

  m.def(
      "read_slice", [](const std::filesystem::path& p) {
        const TensorF t = decode_slice(io::read_file(p));
        return to_array(t.reshaped({t.dim(1), t.dim(2)}));
      },
      py::arg("path"));

  m.def(
      "read_ppm", [](const std::filesystem::path& p) {
        const RgbImage img = read_ppm(p);
        py::array_t<std::uint8_t> out({img.height, img.width, std::size_t{3}});
        std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
        return out;
      },
      py::arg("path"), "(height, width, 3) uint8 array.");
}
