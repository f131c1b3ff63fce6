// Copyright 2026 The liptraj Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "liptraj/binary_io.hpp"
#include "liptraj/cli.hpp"
#include "liptraj/corpus.hpp"
#include "liptraj/metrics.hpp"
#include "liptraj/net.hpp"
#include "liptraj/trainer.hpp"

namespace py = pybind11;
using namespace liptraj;

namespace {

py::array_t<double> ToArray(const corpus::Trajectory& t) {
  py::array_t<double> a({t.rows, t.cols});
  std::copy(t.data.begin(), t.data.end(), a.mutable_data());
  return a;
}

corpus::Trajectory FromArray(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-d array of frames");
  corpus::Trajectory t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), t.data.begin());
  return t;
}

nlohmann::json ToJson(const py::object& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object FromJson(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

const corpus::NormalizedClip& FindClip(const corpus::Dataset& ds, const std::string& id) {
  for (const auto& c : ds.clips) {
    if (c.clip_id == id) return c;
  }
  throw py::key_error(id);
}

// Model in float precision, the same as the command-line tool trains.
struct PyModel {
  std::unique_ptr<net::LandmarkModel<float>> model;

  static PyModel Create(const py::dict& config, uint64_t seed) {
    return {std::make_unique<net::LandmarkModel<float>>(net::ModelConfig::FromJson(ToJson(config)), seed)};
  }
  static PyModel Load(const std::string& path) {
    const net::Checkpoint ck = net::LoadCheckpoint(io::ReadFileBytes(path));
    PyModel m{std::make_unique<net::LandmarkModel<float>>(ck.config, 0)};
    net::ApplyCheckpoint(ck, *m.model);
    return m;
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Text-driven lip landmark trajectories";
  m.attr("__version__") = cli::kVersion;

  static py::exception<Error> error(m, "LiptrajError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(error.ptr())(std::string(ErrorKindName(e.kind())) + ": " + e.what());
      exc.attr("kind") = ErrorKindName(e.kind());
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"liptraj"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::Main(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a liptraj command line; returns (exit code, stdout, stderr).");

  m.def(
      "synth_corpus",
      [](uint64_t seed, int clips) {
        std::vector<std::pair<std::string, std::string>> files;
        for (auto& f : corpus::SynthCorpus(seed, clips, corpus::Charset())) files.emplace_back(f.name, f.contents);
        return files;
      },
      py::arg("seed") = 1234, py::arg("clips") = 10, "Synthetic corpus as (file name, contents) pairs.");

  py::class_<corpus::Dataset>(m, "Dataset")
      .def_static(
          "build",
          [](const std::string& root, const std::string& landmark_set, double confidence, double validation, uint64_t seed) {
            corpus::DatasetConfig cfg;
            cfg.landmark_set = corpus::ParseLandmarkSet(landmark_set);
            cfg.confidence_threshold = confidence;
            cfg.validation_fraction = validation;
            cfg.seed = seed;
            corpus::BuildResult r = corpus::BuildDataset(root, cfg);
            std::vector<std::pair<std::string, std::string>> rejected;
            for (const auto& x : r.rejections) rejected.emplace_back(x.clip_id, x.reason);
            return py::make_tuple(std::move(r.dataset), rejected);
          },
          py::arg("root"), py::arg("landmark_set") = "lips",
          py::arg("confidence_threshold") = corpus::kDefaultConfidenceThreshold, py::arg("validation_fraction") = 0.15,
          py::arg("seed") = 1234, "Builds a dataset from a corpus directory; returns (dataset, rejections).")
      .def_static("load", [](const std::string& path) { return corpus::DeserializeDataset(io::ReadFileBytes(path)); })
      .def("save", [](const corpus::Dataset& ds, const std::string& path) {
        io::WriteFileBytes(path, corpus::SerializeDataset(ds));
      })
      .def("__len__", [](const corpus::Dataset& ds) { return ds.clips.size(); })
      .def_property_readonly("landmark_set", [](const corpus::Dataset& ds) { return corpus::LandmarkSetName(ds.landmark_set); })
      .def_property_readonly("clip_ids",
                             [](const corpus::Dataset& ds) {
                               std::vector<std::string> ids;
                               for (const auto& c : ds.clips) ids.push_back(c.clip_id);
                               return ids;
                             })
      .def("split", [](const corpus::Dataset& ds, const std::string& id) {
        for (size_t i = 0; i < ds.clips.size(); ++i) {
          if (ds.clips[i].clip_id == id) return ds.split[i] == corpus::Split::kTrain ? "train" : "validation";
        }
        throw py::key_error(id);
      })
      .def("text",
           [](const corpus::Dataset& ds, const std::string& id) {
             std::string text;
             for (const int t : FindClip(ds, id).tokens) text += ds.charset.Symbol(t);
             return text;
           })
      .def("speaker", [](const corpus::Dataset& ds, const std::string& id) { return FindClip(ds, id).speaker_id; })
      .def("displacements", [](const corpus::Dataset& ds, const std::string& id) { return ToArray(FindClip(ds, id).displacements); })
      .def(
          "positions",
          [](const corpus::Dataset& ds, const std::string& id, const py::object& displacements) {
            const auto& clip = FindClip(ds, id);
            const corpus::Trajectory d = displacements.is_none() ? clip.displacements : FromArray(displacements);
            return ToArray(corpus::Denormalize(d, clip.reference, ds.landmark_set));
          },
          py::arg("clip_id"), py::arg("displacements") = py::none(),
          "Absolute landmark positions in mm, using the clip's speaker reference.");

  py::class_<PyModel>(m, "Model")
      .def(py::init(&PyModel::Create), py::arg("config"), py::arg("seed") = 0)
      .def_static("load", &PyModel::Load, py::arg("path"))
      .def_static("preset", [](const std::string& name) { return FromJson(net::ModelConfig::Preset(name).ToJson()); })
      .def_property_readonly("config", [](const PyModel& m) { return FromJson(m.model->config().ToJson()); })
      .def_property_readonly("parameter_count", [](const PyModel& m) { return m.model->params().ParameterCount(); })
      .def("save",
           [](const PyModel& m, const std::string& path) {
             io::WriteFileBytes(path, net::SaveCheckpoint(m.model->params(), m.model->config(), {}));
           })
      .def(
          "infer",
          [](PyModel& m, const std::string& text, const corpus::Dataset& ds, double threshold, int max_frames) {
            const auto tokens = corpus::EncodeText(text, ds.charset);
            net::InferenceResult r;
            {
              py::gil_scoped_release release;
              r = m.model->Infer(tokens, threshold, max_frames);
            }
            return py::make_tuple(ToArray(r.frames), r.stopped_by_gate);
          },
          py::arg("text"), py::arg("dataset"), py::arg("gate_threshold") = net::kDefaultGateThreshold,
          py::arg("max_frames") = net::kDefaultMaxFrames,
          "Free-running displacement frames for a text; returns (frames, stopped_by_gate).")
      .def(
          "train",
          [](PyModel& m, const corpus::Dataset& ds, const py::dict& config) {
            const train::TrainConfig tc = train::TrainConfig::FromJson(ToJson(config));
            train::TrainResult r;
            {
              py::gil_scoped_release release;
              r = train::Train(ds, *m.model, tc);
            }
            py::dict out;
            out["history_csv"] = r.history.ToCsv();
            out["epoch_losses"] = r.history.epoch_losses;
            out["best_epoch"] = r.history.best_epoch;
            out["best_validation_loss"] = r.history.best_validation_loss;
            out["final_validation_loss"] = r.final_validation_loss;
            return out;
          },
          py::arg("dataset"), py::arg("config") = py::dict(), "Teacher-forced training in place.");

  m.def(
      "manhattan_error",
      [](const py::array_t<double>& predicted, const py::array_t<double>& truth) {
        const metrics::ErrorReport r = metrics::ManhattanError(FromArray(predicted), FromArray(truth));
        py::dict out;
        out["frames"] = r.frames;
        out["mean_manhattan"] = r.mean_manhattan;
        out["mean_abs_error"] = r.mean_abs_error;
        out["per_axis"] = r.per_axis;
        out["per_landmark"] = r.per_landmark;
        out["note"] = r.note;
        return out;
      },
      py::arg("predicted"), py::arg("truth"));

  m.def(
      "one_cycle_lr",
      [](int64_t iteration, double lr_peak, double div_factor, int step_size) {
        train::TrainConfig c;
        c.lr_peak = lr_peak;
        c.div_factor = div_factor;
        c.step_size = step_size;
        return train::OneCycleLr(iteration, c);
      },
      py::arg("iteration"), py::arg("lr_peak") = 0.002, py::arg("div_factor") = 25.0, py::arg("step_size") = 4000);

  m.def(
      "trajectory_to_csv", [](const py::array_t<double>& positions) { return metrics::TrajectoryToCsv(FromArray(positions)); },
      py::arg("positions"));
  m.def(
      "trajectory_from_csv", [](const std::string& text) { return ToArray(metrics::TrajectoryFromCsv(text)); },
      py::arg("text"));
}
