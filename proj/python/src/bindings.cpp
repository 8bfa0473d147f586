#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <string>

#include "arcstab/classify.hpp"
#include "arcstab/config.hpp"
#include "arcstab/errors.hpp"
#include "arcstab/eval.hpp"
#include "arcstab/features.hpp"
#include "arcstab/monitor.hpp"
#include "arcstab/signal.hpp"
#include "arcstab/tfr.hpp"

namespace py = pybind11;
using namespace arcstab;
using nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Array2 = Array;

std::span<const double> view(const Array& a) {
  if (a.ndim() != 1) throw InvalidArgument("expected a one-dimensional array");
  return {a.data(), static_cast<std::size_t>(a.size())};
}

Array to_array(const std::vector<double>& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

py::dict feature_dict(const FeatureVector& v) {
  py::dict d;
  const auto values = v.to_array();
  for (std::size_t i = 0; i < kFeatureCount; ++i) d[py::str(std::string(kFeatureNames[i]))] = values[i];
  return d;
}

py::object from_json(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json to_json(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

RunConfig run_config(const py::object& config) {
  RunConfig cfg = config.is_none() ? RunConfig{} : config_from_json(to_json(config));
  cfg.resolve();
  return cfg;
}

Dataset dataset(const Array2& x,
                const std::vector<std::string>& labels) {
  if (x.ndim() != 2) throw InvalidArgument("features must be a two-dimensional array");
  const auto rows = static_cast<std::size_t>(x.shape(0));
  const auto cols = static_cast<std::size_t>(x.shape(1));
  if (labels.size() != rows) throw InvalidArgument("one label per row required");
  Dataset ds;
  for (std::size_t i = 0; i < rows; ++i) {
    ds.x.emplace_back(x.data() + i * cols, x.data() + (i + 1) * cols);
    ds.y.push_back(parse_regime(labels[i]));
  }
  if (cols == kFeatureCount) {
    for (auto n : kFeatureNames) ds.feature_names.emplace_back(n);
  } else {
    for (std::size_t c = 0; c < cols; ++c) ds.feature_names.push_back("f" + std::to_string(c));
  }
  return ds;
}

class PyModel {
 public:
  explicit PyModel(TrainedModel m) : model_(std::make_shared<TrainedModel>(std::move(m))) {}

  std::pair<std::string, std::vector<double>> predict(const Array& v) const {
    const auto p = model_->predict(view(v));
    return {std::string(regime_name(p.label)), {p.scores.begin(), p.scores.end()}};
  }
  std::string kind() const { return std::string(model_kind_name(model_->kind)); }
  std::optional<double> asi_threshold() const { return model_->asi_threshold; }
  void set_asi_threshold(std::optional<double> v) { model_->asi_threshold = v; }
  py::object to_json_obj() const { return from_json(model_to_json(*model_)); }
  std::shared_ptr<const TrainedModel> shared() const { return model_; }

 private:
  std::shared_ptr<TrainedModel> model_;
};

class PyMonitor {
 public:
  PyMonitor(const PyModel& model, std::optional<double> asi_threshold, std::size_t warmup)
      : monitor_(make_config(asi_threshold, warmup), model.shared()), state_(monitor_.initial_state()) {}

  py::list step(const Array& chunk) {
    py::list out;
    for (const auto& e : monitor_.step(state_, view(chunk))) out.append(from_json(event_to_json(e)));
    return out;
  }
  double threshold() const { return monitor_.threshold(); }

 private:
  static MonitorConfig make_config(std::optional<double> asi_threshold, std::size_t warmup) {
    MonitorConfig c;
    c.asi_threshold = asi_threshold;
    c.warmup_windows = warmup;
    return c;
  }
  Monitor monitor_;
  MonitorState state_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Arc stability analysis: synthesis, spectral descriptors, classifiers and monitoring";

  static py::exception<Error> error(m, "ArcstabError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (e.code() + ": " + e.what()).c_str());
    }
  });

  m.attr("FEATURE_NAMES") = [] {
    py::list names;
    for (auto n : kFeatureNames) names.append(std::string(n));
    return names;
  }();

  m.def(
      "generate_phase",
      [](const std::string& regime, const py::object& params, std::uint64_t seed) {
        const Regime r = parse_regime(regime);
        RegimeParams p = default_params(r);
        if (!params.is_none()) p = regime_params_from_json(to_json(params), p);
        p.seed = seed;
        return to_array(generate_phase(r, p).samples);
      },
      py::arg("regime"), py::arg("params") = py::none(), py::arg("seed") = 0,
      "Synthesize one regime phase; params overrides the regime defaults.");

  m.def(
      "synthesize_dataset",
      [](const py::object& config) {
        const auto cfg = run_config(config);
        const auto t = synthesize_dataset(cfg.generate);
        std::vector<std::pair<std::size_t, std::string>> labels;
        for (const auto& l : t.labels) labels.emplace_back(l.window_index, std::string(regime_name(l.label)));
        return std::make_tuple(to_array(t.samples), t.sample_rate, labels);
      },
      py::arg("config") = py::none(), "Labeled three-phase trace: (samples, sample_rate, labels).");

  m.def(
      "psd",
      [](const Array& frame, std::size_t nfft, double sample_rate) {
        const auto x = view(frame);
        return to_array(psd_frame(x, hann_window(x.size()), nfft, sample_rate).power);
      },
      py::arg("frame"), py::arg("nfft") = 4096, py::arg("sample_rate") = 10000.0);

  m.def(
      "features",
      [](const Array& frame, double sample_rate) {
        PipelineConfig cfg;
        cfg.segmentation.window_len = static_cast<std::size_t>(frame.size());
        return feature_dict(FeaturePipeline(cfg, sample_rate).extract(view(frame)));
      },
      py::arg("frame"), py::arg("sample_rate") = 10000.0, "The ten descriptors of one window.");

  m.def(
      "extract",
      [](const py::object& config) {
        const auto cfg = run_config(config);
        const auto t = synthesize_dataset(cfg.generate);
        const auto rows = FeaturePipeline(cfg.pipeline, cfg.sample_rate()).extract_trace(t);
        py::array_t<double> x({static_cast<py::ssize_t>(rows.size()), static_cast<py::ssize_t>(kFeatureCount)});
        auto w = x.mutable_unchecked<2>();
        std::vector<std::string> labels;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const auto v = rows[i].features.to_array();
          for (std::size_t c = 0; c < kFeatureCount; ++c) w(i, c) = v[c];
          labels.emplace_back(regime_name(*rows[i].label));
        }
        return std::make_pair(x, labels);
      },
      py::arg("config") = py::none(), "Synthesize and extract the labeled feature table: (X, labels).");

  py::class_<PyModel>(m, "Model")
      .def_property_readonly("kind", &PyModel::kind)
      .def_property("asi_threshold", &PyModel::asi_threshold, &PyModel::set_asi_threshold)
      .def("predict", &PyModel::predict, py::arg("features"), "(label, scores in Transient, Stable, Extinction order)")
      .def("to_json", &PyModel::to_json_obj)
      .def_static("from_json", [](const py::object& doc) { return PyModel(model_from_json(to_json(doc))); });

  m.def(
      "train",
      [](const Array2& x, const std::vector<std::string>& labels, const std::string& kind,
         const py::object& hyperparams) {
        const Hyperparams hp = hyperparams.is_none() ? Hyperparams{} : hyperparams_from_json(to_json(hyperparams));
        return PyModel(train(dataset(x, labels), parse_model_kind(kind), hp));
      },
      py::arg("x"), py::arg("labels"), py::arg("kind") = "svm_rbf", py::arg("hyperparams") = py::none());

  m.def(
      "evaluate",
      [](const Array2& x, const std::vector<std::string>& labels, const std::string& kind, std::uint64_t seed) {
        EvalOptions opt;
        opt.seed = seed;
        Hyperparams hp;
        hp.seed = seed;
        return from_json(report_to_json(evaluate(dataset(x, labels), parse_model_kind(kind), hp, opt)));
      },
      py::arg("x"), py::arg("labels"), py::arg("kind") = "svm_rbf", py::arg("seed") = 42,
      "Hold-out and 10-fold evaluation report as a dict.");

  m.def(
      "binomial_ci",
      [](double accuracy, std::size_t n, double level, const std::string& method) {
        const auto ci = binomial_ci(accuracy, n, level, method == "wilson" ? CiMethod::Wilson : CiMethod::Wald);
        return std::make_pair(ci.low, ci.high);
      },
      py::arg("accuracy"), py::arg("n"), py::arg("level") = 0.95, py::arg("method") = "wald");

  py::class_<PyMonitor>(m, "Monitor")
      .def(py::init<const PyModel&, std::optional<double>, std::size_t>(), py::arg("model"),
           py::arg("asi_threshold") = py::none(), py::arg("warmup_windows") = 3)
      .def_property_readonly("threshold", &PyMonitor::threshold)
      .def("step", &PyMonitor::step, py::arg("chunk"), "Feed samples; returns the completed window events.");

  m.def(
      "config_hash", [](const py::object& config) { return config_hash(run_config(config)); },
      py::arg("config") = py::none());
  m.def(
      "default_config", []() { return from_json(config_to_json(run_config(py::none()))); });
}
