// Python face of the library: thin wrappers around the C++ pipeline with
// numpy arrays at the boundary.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <span>

#include "osanet/cohort.hpp"
#include "osanet/edf.hpp"
#include "osanet/metrics.hpp"
#include "osanet/model.hpp"
#include "osanet/pipeline.hpp"
#include "osanet/runconfig.hpp"
#include "osanet/synth.hpp"
#include "osanet/training.hpp"

namespace py = pybind11;
using namespace osanet;

namespace {

// The single-integer array_t constructor builds a stride-0 array here, so 1-D
// outputs always go through an explicit shape container.
template <class T>
py::array_t<T> make_1d(const std::vector<T>& v) {
  py::array_t<T> arr(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::memcpy(arr.mutable_data(), v.data(), v.size() * sizeof(T));
  return arr;
}

py::array_t<float> tensor_values(const pipeline::SegmentTensor& t) {
  py::array_t<float> arr({t.size(), t.seq_len, t.channels});
  std::memcpy(arr.mutable_data(), t.values.data(), t.values.size() * sizeof(float));
  return arr;
}

py::array_t<std::uint8_t> tensor_labels(const pipeline::SegmentTensor& t) {
  return make_1d(t.labels);
}

std::vector<double> as_vector(py::array_t<double, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return std::vector<double>(a.data(), a.data() + a.size());
}

std::vector<std::uint8_t> as_labels(
    py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return std::vector<std::uint8_t>(a.data(), a.data() + a.size());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "EDF ingestion, segmentation and 1D-CNN severity classification";

  py::register_exception<edf::EdfError>(m, "EdfError");
  py::register_exception<cohort::CohortError>(m, "CohortError");
  py::register_exception<pipeline::PipelineError>(m, "PipelineError");
  py::register_exception<nn::NnError>(m, "NnError");
  py::register_exception<train::TrainError>(m, "TrainError");
  py::register_exception<metrics::MetricsError>(m, "MetricsError");
  py::register_exception<synth::SynthError>(m, "SynthError");
  py::register_exception<config::ConfigError>(m, "ConfigError");

  // --- cohort -----------------------------------------------------------
  py::enum_<cohort::SeverityLabel>(m, "SeverityLabel")
      .value("NL", cohort::SeverityLabel::NL)
      .value("MIN", cohort::SeverityLabel::MIN)
      .value("MOD", cohort::SeverityLabel::MOD)
      .value("SV", cohort::SeverityLabel::SV);

  m.def("label_from_oahi3", &cohort::label_from_oahi3, py::arg("oahi3"),
        "Severity band for an oAHI3 value: (0,1] NL, (1,5] MIN, (5,10] MOD, (10,inf) SV");

  py::class_<cohort::Subject>(m, "Subject")
      .def_readonly("subject_id", &cohort::Subject::subject_id)
      .def_readonly("edf_path", &cohort::Subject::edf_path)
      .def_readonly("oahi3", &cohort::Subject::oahi3)
      .def_readonly("label", &cohort::Subject::label);

  py::class_<cohort::Cohort>(m, "Cohort")
      .def_property_readonly("subjects", &cohort::Cohort::subjects)
      .def("__len__", &cohort::Cohort::size)
      .def_property_readonly("per_class_counts", [](const cohort::Cohort& c) {
        return std::vector<std::size_t>(c.per_class_counts().begin(), c.per_class_counts().end());
      });

  m.def("load_manifest", &cohort::load_manifest, py::arg("path"));
  m.def("undersample", &cohort::undersample, py::arg("cohort"), py::arg("per_class"),
        py::arg("seed"));

  // --- edf --------------------------------------------------------------
  py::class_<edf::SignalTrace>(m, "SignalTrace")
      .def_readonly("label", &edf::SignalTrace::label)
      .def_readonly("sampling_rate", &edf::SignalTrace::sampling_rate)
      .def_property_readonly("samples",
                             [](const edf::SignalTrace& t) { return make_1d(t.samples); });

  m.def(
      "read_edf_signals",
      [](const std::filesystem::path& path) {
        const auto raw = edf::read_file(path);
        const auto [header, specs] = edf::parse_header(raw);
        std::vector<edf::SignalTrace> traces;
        for (std::size_t i = 0; i < specs.size(); ++i) {
          traces.push_back(edf::read_signal(raw, header, specs, i));
        }
        return traces;
      },
      py::arg("path"), "All signals of an EDF file in physical units");

  m.def(
      "edf_signal_labels",
      [](const std::filesystem::path& path) {
        const auto raw = edf::read_file(path);
        const auto [header, specs] = edf::parse_header(raw);
        std::vector<std::string> labels;
        for (const auto& s : specs) labels.push_back(s.label);
        return labels;
      },
      py::arg("path"));

  // --- pipeline ---------------------------------------------------------
  m.def("out_length", &nn::out_length, py::arg("length"), py::arg("kernel"), py::arg("stride"),
        "floor((length - kernel) / stride) + 1");

  m.def(
      "normalize",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> x) {
        const auto v = as_vector(std::move(x));
        return make_1d(pipeline::normalize(v));
      },
      py::arg("samples"), "Per-trace z-score (population std; near-constant input becomes zeros)");

  m.def(
      "segment",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> x, std::size_t seq_len) {
        const auto v = as_vector(std::move(x));
        const auto windows = pipeline::segment(v, seq_len);
        py::array_t<double> arr({windows.size(), seq_len});
        for (std::size_t i = 0; i < windows.size(); ++i) {
          std::memcpy(arr.mutable_data() + i * seq_len, windows[i].data(),
                      seq_len * sizeof(double));
        }
        return arr;
      },
      py::arg("samples"), py::arg("seq_len"),
      "Non-overlapping windows; the trailing remainder is dropped");

  py::class_<pipeline::SegmentTensor>(m, "SegmentTensor")
      .def_property_readonly("seq_len", [](const pipeline::SegmentTensor& t) { return t.seq_len; })
      .def_property_readonly("channels",
                             [](const pipeline::SegmentTensor& t) { return t.channels; })
      .def("__len__", &pipeline::SegmentTensor::size)
      .def_property_readonly("values", &tensor_values)
      .def_property_readonly("labels", &tensor_labels)
      .def_property_readonly("subject_ids", [](const pipeline::SegmentTensor& t) {
        std::vector<std::string> ids;
        ids.reserve(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) ids.push_back(t.subject_id(i));
        return ids;
      });

  m.def("load_tensor", &pipeline::load_tensor, py::arg("path"));
  m.def("save_tensor", &pipeline::save_tensor, py::arg("path"), py::arg("tensor"));

  m.def(
      "preprocess",
      [](const std::filesystem::path& manifest, const std::string& group,
         const std::filesystem::path& annotations, double seq_seconds) {
        const auto name = pipeline::group_from_string(group);
        if (!name) throw py::value_error("unknown group '" + group + "' (want ecg|eeg|emg|resp)");
        const auto cohort = cohort::load_manifest(manifest);
        std::map<std::string, pipeline::SleepWindow> windows;
        if (!annotations.empty()) windows = pipeline::load_annotations(annotations);
        return pipeline::build_tensor(cohort, pipeline::standard_group(*name), windows,
                                      seq_seconds);
      },
      py::arg("manifest"), py::arg("group") = "ecg", py::arg("annotations") = "",
      py::arg("seq_seconds") = 60.0,
      "Manifest + EDFs -> segment tensor (trim, normalize, segment, stack)");

  // --- synth ------------------------------------------------------------
  py::class_<synth::SynthSpec>(m, "SynthSpec")
      .def(py::init<>())
      .def_readwrite("subjects_per_class", &synth::SynthSpec::subjects_per_class)
      .def_readwrite("duration_sec", &synth::SynthSpec::duration_sec)
      .def_readwrite("noise_level", &synth::SynthSpec::noise_level)
      .def_readwrite("seed", &synth::SynthSpec::seed)
      .def_readwrite("id_prefix", &synth::SynthSpec::id_prefix);

  m.def(
      "generate_cohort",
      [](const synth::SynthSpec& spec, const std::filesystem::path& out_dir) {
        const auto g = synth::generate_cohort(spec, out_dir);
        return py::make_tuple(g.manifest_path, g.annotations_path);
      },
      py::arg("spec"), py::arg("out_dir"),
      "Write a synthetic EDF cohort; returns (manifest_path, annotations_path)");

  // --- model / training ---------------------------------------------------
  py::class_<nn::ModelConfig>(m, "ModelConfig")
      .def_readwrite("hidden_units", &nn::ModelConfig::hidden_units)
      .def_readwrite("dropout_keep", &nn::ModelConfig::dropout_keep);

  m.def("full_architecture", &nn::full_architecture);
  m.def("compact_architecture", &nn::compact_architecture);

  py::class_<nn::Model>(m, "Model")
      .def_property_readonly("seq_len", &nn::Model::seq_len)
      .def_property_readonly("in_channels", &nn::Model::in_channels)
      .def_property_readonly("flatten_width", &nn::Model::flatten_width)
      .def("chain_lengths", &nn::Model::chain_lengths);

  m.def("build_model", &nn::build_model, py::arg("seq_len"), py::arg("in_channels"),
        py::arg("config") = nn::full_architecture(), py::arg("seed") = 1);
  m.def(
      "save_checkpoint",
      [](const std::filesystem::path& path, const nn::Model& model) {
        nn::save_checkpoint(path, model);
      },
      py::arg("path"), py::arg("model"));
  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& path) { return std::move(nn::load_checkpoint(path).model); },
      py::arg("path"));

  py::class_<train::SplitPlan>(m, "SplitPlan")
      .def_readonly("seed", &train::SplitPlan::seed)
      .def_readonly("test_subjects", &train::SplitPlan::test_subjects)
      .def_readonly("train_subjects", &train::SplitPlan::train_subjects)
      .def_readonly("val_subjects", &train::SplitPlan::val_subjects);

  m.def("stratified_split", &train::stratified_split, py::arg("cohort"), py::arg("seed"));

  py::class_<train::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &train::TrainConfig::learning_rate)
      .def_readwrite("iterations", &train::TrainConfig::iterations)
      .def_readwrite("batch_size", &train::TrainConfig::batch_size)
      .def_readwrite("dropout_keep", &train::TrainConfig::dropout_keep)
      .def_readwrite("seed", &train::TrainConfig::seed)
      .def_readwrite("eval_every", &train::TrainConfig::eval_every);

  py::class_<train::CurvePoint>(m, "CurvePoint")
      .def_readonly("iteration", &train::CurvePoint::iteration)
      .def_readonly("train_acc", &train::CurvePoint::train_acc)
      .def_readonly("train_loss", &train::CurvePoint::train_loss)
      .def_readonly("val_acc", &train::CurvePoint::val_acc)
      .def_readonly("val_loss", &train::CurvePoint::val_loss);

  m.def(
      "train",
      [](const nn::Model& model, const pipeline::SegmentTensor& train_tensor,
         const pipeline::SegmentTensor& val_tensor, const train::TrainConfig& config) {
        auto result = train::train(model, train_tensor, val_tensor, config);
        if (result.diverged_at) {
          throw train::TrainError("non-finite loss at iteration " +
                                  std::to_string(*result.diverged_at));
        }
        return py::make_tuple(std::move(result.model), result.curve.points);
      },
      py::arg("model"), py::arg("train_tensor"), py::arg("val_tensor"), py::arg("config"),
      "Returns (trained model, list of curve points)");

  m.def(
      "evaluate",
      [](const nn::Model& model, const pipeline::SegmentTensor& tensor) {
        const auto ev = train::evaluate(model, tensor);
        return py::make_tuple(ev.accuracy, ev.mean_loss, make_1d(ev.predictions));
      },
      py::arg("model"), py::arg("tensor"), "Returns (accuracy, mean_loss, predictions)");

  // --- metrics ------------------------------------------------------------
  m.def(
      "confusion",
      [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> predictions,
         py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> labels) {
        const auto cm =
            metrics::confusion(as_labels(std::move(predictions)), as_labels(std::move(labels)));
        py::array_t<std::uint64_t> arr({cohort::kNumClasses, cohort::kNumClasses});
        for (std::size_t t = 0; t < cohort::kNumClasses; ++t) {
          for (std::size_t p = 0; p < cohort::kNumClasses; ++p) {
            arr.mutable_at(t, p) = cm.counts[t][p];
          }
        }
        return arr;
      },
      py::arg("predictions"), py::arg("labels"),
      "4x4 confusion counts, rows = true class, columns = predicted");

  m.def(
      "report",
      [](py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast> cm_array) {
        if (cm_array.ndim() != 2 || cm_array.shape(0) != 4 || cm_array.shape(1) != 4) {
          throw py::value_error("expected a 4x4 confusion matrix");
        }
        metrics::ConfusionMatrix cm;
        for (std::size_t t = 0; t < 4; ++t)
          for (std::size_t p = 0; p < 4; ++p) cm.counts[t][p] = cm_array.at(t, p);
        const auto rep = metrics::report(cm);
        py::dict out;
        out["accuracy"] = rep.accuracy;
        py::list classes;
        for (const auto& s : rep.per_class) {
          py::dict d;
          d["precision"] = s.precision;
          d["recall"] = s.recall;
          d["f1"] = s.f1;
          classes.append(d);
        }
        out["classes"] = classes;
        return out;
      },
      py::arg("confusion"), "Per-class precision/recall/F1 plus overall accuracy");
}
