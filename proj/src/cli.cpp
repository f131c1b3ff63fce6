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

#include "liptraj/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <string_view>
#include <filesystem>
#include <ostream>

#include "CLI11.hpp"
#include "liptraj/binary_io.hpp"
#include "liptraj/corpus.hpp"
#include "liptraj/error.hpp"
#include "liptraj/metrics.hpp"
#include "liptraj/net.hpp"
#include "liptraj/trainer.hpp"

namespace liptraj::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kSubcommands[] = {"synth", "prepare", "pretrain", "train", "ablate", "infer", "eval", "export"};

json TrainerDefaults() {
  json j = train::TrainConfig{}.ToJson();
  j.erase("output_dir");
  return j;
}

}  // namespace

json DefaultConfig() {
  const corpus::DatasetConfig data;
  return {{"seed", 1234},
          {"data",
           {{"landmark_set", corpus::LandmarkSetName(data.landmark_set)},
            {"confidence_threshold", data.confidence_threshold},
            {"validation_fraction", data.validation_fraction},
            {"seed", data.seed},
            {"dataset", ""}}},
          {"synth", {{"seed", 1234}, {"clips", 10}}},
          {"model", {{"preset", "full"}}},
          {"trainer", TrainerDefaults()},
          {"pretrain", TrainerDefaults()},
          {"infer", {{"gate_threshold", net::kDefaultGateThreshold}, {"max_frames", net::kDefaultMaxFrames}}}};
}

json ConfigSchema() {
  json j = DefaultConfig();
  j["model"] = net::ModelConfig::Full().ToJson();
  return j;
}

// --- arguments --------------------------------------------------------------------

Command ParseArgs(int argc, const char* const* argv) {
  Command cmd;
  CLI::App app{"Text-driven lip landmark trajectories", "liptraj"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::vector<std::string> sets;
  uint64_t seed = 0;
  int clips = 0;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", cmd.config_path, "JSON config file (or a manifest.json from an earlier run)");
    sub->add_option("--set", sets, "Override a config value, e.g. trainer.epochs=50")->take_all();
    sub->add_option("--seed", seed, "Seed for every random stream");
    sub->add_option("--out", cmd.output_dir, std::string("Output directory (default $") + kOutputRootEnv + "/<command>)");
  };

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic OpenFace-style corpus");
  synth->add_option("--clips", clips, "Number of clips");
  CLI::App* prepare = app.add_subcommand("prepare", "Filter, reproject, resample and normalize a corpus");
  prepare->add_option("--input", cmd.input, "Corpus directory")->required();
  CLI::App* pretrain = app.add_subcommand("pretrain", "Pretrain on one dataset, then transfer encoder and gate");
  pretrain->add_option("--dataset", cmd.dataset, "Pretraining dataset")->required();
  pretrain->add_option("--target-dataset", cmd.target_dataset, "Transfer dataset")->required();
  CLI::App* trainc = app.add_subcommand("train", "Train a model with teacher forcing");
  trainc->add_option("--dataset", cmd.dataset, "Prepared dataset file (default data.dataset)");
  CLI::App* ablate = app.add_subcommand("ablate", "Pre-Net / Post-Net / pretrained encoder ablation");
  ablate->add_option("--dataset", cmd.dataset, "Dataset the rows are trained on (default data.dataset)");
  ablate->add_option("--pretrain-dataset", cmd.pretrain_dataset, "Dataset for the shared encoder")->required();
  CLI::App* infer = app.add_subcommand("infer", "Generate a trajectory for a text");
  infer->add_option("--checkpoint", cmd.checkpoint, "Checkpoint file")->required();
  infer->add_option("--dataset", cmd.dataset,
                    "Dataset providing charset and reference frame (default: the one the checkpoint was trained on)");
  infer->add_option("--text", cmd.text, "Input text");
  infer->add_option("--clip", cmd.clip, "Use the transcript and speaker of this clip");
  infer->add_option("--speaker", cmd.speaker, "Speaker whose reference frame is used");
  infer->add_option("--format", cmd.format, "csv or svg-frames");
  CLI::App* eval = app.add_subcommand("eval", "Manhattan error of trajectories against ground truth");
  eval->add_option("--prediction", cmd.predictions, "Trajectory CSV (repeatable)")->required();
  eval->add_option("--label", cmd.labels, "Label per prediction (repeatable)");
  eval->add_option("--truth", cmd.truth, "Ground-truth trajectory CSV");
  eval->add_option("--dataset", cmd.dataset, "Dataset holding the ground-truth clip");
  eval->add_option("--clip", cmd.clip, "Ground-truth clip id");
  CLI::App* exportc = app.add_subcommand("export", "Export a clip or trajectory as CSV or SVG frames");
  exportc->add_option("--dataset", cmd.dataset, "Dataset file (default data.dataset)");
  exportc->add_option("--clip", cmd.clip, "Clip to export");
  exportc->add_option("--trajectory", cmd.trajectory, "Trajectory CSV to export instead of a clip");
  exportc->add_option("--speaker", cmd.speaker, "Speaker reference for --trajectory");
  exportc->add_option("--format", cmd.format, "csv or svg-frames");
  for (CLI::App* sub : {synth, prepare, pretrain, trainc, ablate, infer, eval, exportc}) common(sub);

  if (argc > 1 && argv[1][0] != '-' &&
      std::find(std::begin(kSubcommands), std::end(kSubcommands), std::string_view(argv[1])) ==
          std::end(kSubcommands)) {
    Fail(ErrorKind::kUsage, "unknown subcommand '" + std::string(argv[1]) + "'");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    cmd.name = "help";
    cmd.help_text = app.help("", CLI::AppFormatMode::All) + "\nConfiguration keys and defaults:\n" +
                    ConfigSchema().dump(2) + "\n";
    return cmd;
  } catch (const CLI::CallForVersion&) {
    cmd.name = "help";
    cmd.help_text = std::string(kVersion) + "\n";
    return cmd;
  } catch (const CLI::ParseError& e) {
    Fail(ErrorKind::kUsage, e.what());
  }
  for (const char* name : kSubcommands) {
    if (app.got_subcommand(name)) cmd.name = name;
  }
  for (const std::string& s : sets) {
    const size_t eq = s.find('=');
    if (eq == std::string::npos || eq == 0) Fail(ErrorKind::kUsage, "--set expects key=value, got '" + s + "'");
    cmd.overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  for (CLI::App* sub : {synth, prepare, pretrain, trainc, ablate, infer, eval, exportc}) {
    if (sub->count("--seed")) cmd.seed = seed;
  }
  if (synth->count("--clips")) cmd.clips = clips;
  return cmd;
}

// --- configuration ----------------------------------------------------------------

namespace {

void CheckAgainstSchema(const json& value, const json& schema, const std::string& path) {
  if (!value.is_object()) Fail(ErrorKind::kUsage, "config section '" + path + "' must be an object");
  for (const auto& [key, v] : value.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!schema.contains(key)) Fail(ErrorKind::kUsage, "unknown config key '" + full + "'");
    const json& s = schema.at(key);
    if (s.is_object()) {
      CheckAgainstSchema(v, s, full);
    } else if (s.is_number() != v.is_number() || s.is_string() != v.is_string() ||
               s.is_boolean() != v.is_boolean() || s.is_array() != v.is_array()) {
      Fail(ErrorKind::kUsage, "config key '" + full + "' expects " + s.type_name() + ", got " + v.type_name());
    }
  }
}

void MergeInto(json& dst, const json& src) {
  for (const auto& [key, v] : src.items()) {
    if (v.is_object() && dst.contains(key) && dst[key].is_object()) {
      MergeInto(dst[key], v);
    } else {
      dst[key] = v;
    }
  }
}

json ParseValue(const std::string& raw) {
  try {
    return json::parse(raw);
  } catch (const json::exception&) {
    return json(raw);
  }
}

}  // namespace

json ResolveConfig(const Command& cmd) {
  const json schema = ConfigSchema();
  json config = DefaultConfig();
  if (!cmd.config_path.empty()) {
    json file;
    try {
      file = json::parse(io::ReadFileText(cmd.config_path));
    } catch (const json::exception& e) {
      Fail(ErrorKind::kParse, "config " + cmd.config_path + ": " + e.what());
    }
    if (file.contains("command") && file.contains("config")) file = file.at("config");  // a manifest
    CheckAgainstSchema(file, schema, "");
    MergeInto(config, file);
  }
  for (const auto& [key, raw] : cmd.overrides) {
    json patch = ParseValue(raw);
    std::string rest = key;
    std::vector<std::string> parts;
    for (size_t dot; (dot = rest.find('.')) != std::string::npos; rest = rest.substr(dot + 1)) {
      parts.push_back(rest.substr(0, dot));
    }
    parts.push_back(rest);
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
    CheckAgainstSchema(patch, schema, "");
    MergeInto(config, patch);
  }
  if (cmd.seed) {
    const uint64_t s = *cmd.seed;
    config["seed"] = s;
    config["data"]["seed"] = s;
    config["synth"]["seed"] = s;
    config["trainer"]["seed"] = s;
    config["pretrain"]["seed"] = s;
  }
  // Fail early on values the modules reject.
  net::ModelConfig::FromJson(config.at("model"));
  train::TrainConfig::FromJson(config.at("trainer"));
  train::TrainConfig::FromJson(config.at("pretrain"));
  corpus::ParseLandmarkSet(config.at("data").at("landmark_set").get<std::string>());
  return config;
}

// --- runners ----------------------------------------------------------------------

namespace {

class Runner {
 public:
  Runner(const Command& cmd, std::ostream& out) : cmd_(cmd), out_(out), config_(ResolveConfig(cmd)) {
    dir_ = cmd.output_dir;
    if (dir_.empty()) {
      const char* root = std::getenv(kOutputRootEnv);
      dir_ = (fs::path(root && *root ? root : "liptraj_out") / cmd.name).string();
    }
    fs::create_directories(dir_);
  }

  void Dispatch() {
    if (cmd_.name == "synth") Synth();
    else if (cmd_.name == "prepare") Prepare();
    else if (cmd_.name == "train") Train();
    else if (cmd_.name == "pretrain") Pretrain();
    else if (cmd_.name == "ablate") Ablate();
    else if (cmd_.name == "infer") Infer();
    else if (cmd_.name == "eval") Eval();
    else if (cmd_.name == "export") Export();
    else Fail(ErrorKind::kUsage, "unknown subcommand '" + cmd_.name + "'");
    WriteManifest();
  }

 private:
  std::string Path(const std::string& name) const { return (fs::path(dir_) / name).string(); }

  void Wrote(const std::string& path) {
    artifacts_.push_back(path);
    out_ << "wrote " << path << "\n";
  }

  void WriteText(const std::string& name, const std::string& text) {
    io::WriteFileText(Path(name), text);
    Wrote(Path(name));
  }

  uint64_t Seed() const { return config_.at("seed").get<uint64_t>(); }

  corpus::Dataset LoadDataset(const std::string& path) const {
    return corpus::DeserializeDataset(io::ReadFileBytes(path));
  }

  net::ModelConfig ModelFor(const corpus::Dataset& ds) const {
    net::ModelConfig mc = net::ModelConfig::FromJson(config_.at("model"));
    mc.output_width = corpus::RowWidth(ds.landmark_set);
    mc.charset_size = ds.charset.size();
    mc.Validate();
    return mc;
  }

  train::TrainConfig TrainerConfig(const std::string& section, const std::string& subdir) const {
    train::TrainConfig tc = train::TrainConfig::FromJson(config_.at(section));
    tc.output_dir = subdir.empty() ? dir_ : Path(subdir);
    return tc;
  }

  train::ProgressFn Progress(const std::string& phase) {
    return [this, phase](const train::TrainEvent& e) {
      if (std::isnan(e.validation_loss)) return;
      char buf[200];
      std::snprintf(buf, sizeof(buf), "%sepoch %d iteration %lld train_loss %.6g val_loss %.6g lr %.6g\n",
                    phase.c_str(), e.epoch, static_cast<long long>(e.iteration), e.train_loss, e.validation_loss,
                    e.lr);
      out_ << buf << std::flush;
    };
  }

  void RecordTraining(const train::TrainResult& r, const std::string& subdir) {
    const std::string base = subdir.empty() ? dir_ : Path(subdir);
    for (const char* f : {"history.csv", "best.ckpt", "final.ckpt"}) Wrote((fs::path(base) / f).string());
    char buf[160];
    std::snprintf(buf, sizeof(buf), "best val_loss %.6g at epoch %d\n", r.history.best_validation_loss,
                  r.history.best_epoch);
    out_ << buf;
  }

  void Synth() {
    const int n = cmd_.clips.value_or(config_.at("synth").at("clips").get<int>());
    const corpus::Charset charset;
    for (const auto& f : corpus::SynthCorpus(config_.at("synth").at("seed").get<uint64_t>(), n, charset)) {
      WriteText(f.name, f.contents);
    }
  }

  void Prepare() {
    const json& d = config_.at("data");
    corpus::DatasetConfig dc;
    dc.landmark_set = corpus::ParseLandmarkSet(d.at("landmark_set").get<std::string>());
    dc.confidence_threshold = d.at("confidence_threshold").get<double>();
    dc.validation_fraction = d.at("validation_fraction").get<double>();
    dc.seed = d.at("seed").get<uint64_t>();
    const corpus::BuildResult r = corpus::BuildDataset(cmd_.input, dc);
    io::WriteFileBytes(Path("dataset.ltds"), corpus::SerializeDataset(r.dataset));
    Wrote(Path("dataset.ltds"));
    WriteText("rejections.tsv", corpus::FormatRejections(r.rejections));
    out_ << "kept " << r.dataset.clips.size() << " clips (" << r.dataset.Indices(corpus::Split::kTrain).size()
         << " train, " << r.dataset.Indices(corpus::Split::kValidation).size() << " validation), rejected "
         << r.rejections.size() << "\n";
  }

  void Train() {
    const corpus::Dataset ds = LoadDataset(DatasetPath());
    net::LandmarkModel<float> model(ModelFor(ds), Seed());
    const auto r = train::Train(ds, model, TrainerConfig("trainer", ""), Progress(""));
    RecordTraining(r, "");
  }

  void Pretrain() {
    const corpus::Dataset a = LoadDataset(cmd_.dataset);
    const corpus::Dataset b = LoadDataset(cmd_.target_dataset);
    if (a.landmark_set != b.landmark_set) Fail(ErrorKind::kConsistency, "datasets use different landmark sets");
    const auto r = train::PretrainThenTransfer(a, b, ModelFor(a), TrainerConfig("pretrain", "pretrain"),
                                               TrainerConfig("trainer", "transfer"), Seed(), Progress(""));
    RecordTraining(r.pretrain, "pretrain");
    RecordTraining(r.transfer, "transfer");
    std::string report;
    for (const auto& n : r.load_report.loaded) report += "loaded\t" + n + "\n";
    for (const auto& n : r.load_report.fresh) report += "fresh\t" + n + "\n";
    WriteText("load_report.tsv", report);
  }

  void Ablate() {
    const corpus::Dataset a = LoadDataset(cmd_.pretrain_dataset);
    const corpus::Dataset b = LoadDataset(DatasetPath());
    if (a.landmark_set != b.landmark_set) Fail(ErrorKind::kConsistency, "datasets use different landmark sets");
    const auto table = train::Ablate(a, b, ModelFor(b), TrainerConfig("pretrain", "pretrain"),
                                     TrainerConfig("trainer", ""), Seed(), Progress(""));
    Wrote(Path("ablation.csv"));
    Wrote(Path("ablation.md"));
    out_ << table.ToMarkdown();
  }

  const corpus::NormalizedClip& FindClip(const corpus::Dataset& ds, const std::string& id) const {
    for (const auto& c : ds.clips) {
      if (c.clip_id == id) return c;
    }
    Fail(ErrorKind::kUsage, "no clip '" + id + "' in dataset");
  }

  const corpus::ReferenceFrame& ReferenceFor(const corpus::Dataset& ds, const std::string& speaker) const {
    if (ds.clips.empty()) Fail(ErrorKind::kEmptyInput, "dataset has no clips");
    if (speaker.empty()) return ds.clips.front().reference;
    for (const auto& c : ds.clips) {
      if (c.speaker_id == speaker) return c.reference;
    }
    Fail(ErrorKind::kUsage, "no speaker '" + speaker + "' in dataset");
  }

  // Dataset recorded by the train/pretrain/ablate run that wrote the checkpoint.
  std::string TrainingDataset() const {
    fs::path dir = fs::absolute(cmd_.checkpoint).parent_path();
    const bool phase_one = dir.filename() == "pretrain";
    for (int up = 0; up < 2 && !dir.empty(); ++up, dir = dir.parent_path()) {
      const fs::path manifest = dir / "manifest.json";
      if (!fs::exists(manifest)) continue;
      const json inputs = json::parse(io::ReadFileText(manifest.string())).value("inputs", json::object());
      for (const char* key : {phase_one ? "dataset" : "target_dataset", "dataset"}) {
        if (inputs.contains(key)) return inputs.at(key).get<std::string>();
      }
    }
    Fail(ErrorKind::kUsage, "infer needs --dataset: no training manifest found next to " + cmd_.checkpoint);
  }

  // --dataset, else data.dataset from the config.
  std::string DatasetPath() const {
    if (!cmd_.dataset.empty()) return cmd_.dataset;
    const std::string configured = config_.at("data").at("dataset").get<std::string>();
    if (!configured.empty()) return configured;
    Fail(ErrorKind::kUsage, cmd_.name + " needs --dataset or data.dataset in the config");
  }

  void Infer() {
    const bool given = !cmd_.dataset.empty() || !config_.at("data").at("dataset").get<std::string>().empty();
    const corpus::Dataset ds = LoadDataset(given ? DatasetPath() : TrainingDataset());
    std::string text = cmd_.text, speaker = cmd_.speaker;
    if (!cmd_.clip.empty()) {
      const auto& clip = FindClip(ds, cmd_.clip);
      if (text.empty()) {
        for (const int t : clip.tokens) text += ds.charset.Symbol(t);
      }
      if (speaker.empty()) speaker = clip.speaker_id;
    }
    if (text.empty()) Fail(ErrorKind::kUsage, "infer needs --text or --clip");
    const net::Checkpoint ckpt = net::LoadCheckpoint(io::ReadFileBytes(cmd_.checkpoint));
    if (ckpt.config.output_width != corpus::RowWidth(ds.landmark_set)) {
      Fail(ErrorKind::kCompatibility, "checkpoint predicts " + std::to_string(ckpt.config.output_width) +
                                          " values per frame but the dataset holds " +
                                          std::to_string(corpus::RowWidth(ds.landmark_set)));
    }
    net::LandmarkModel<float> model(ckpt.config, 0);
    net::ApplyCheckpoint(ckpt, model);
    const json& ic = config_.at("infer");
    const auto tokens = corpus::EncodeText(text, ds.charset);
    const net::InferenceResult r =
        model.Infer(tokens, ic.at("gate_threshold").get<double>(), ic.at("max_frames").get<int>());
    const auto& reference = ReferenceFor(ds, speaker);
    for (const auto& p : metrics::ExportTrajectory(r.frames, reference, metrics::ExportFormat::kCsv,
                                                   Path("trajectory.csv"))) {
      Wrote(p);
    }
    if (metrics::ParseExportFormat(cmd_.format) == metrics::ExportFormat::kSvgFrames) {
      const auto files =
          metrics::ExportTrajectory(r.frames, reference, metrics::ExportFormat::kSvgFrames, Path("frames"));
      for (const auto& p : files) Wrote(p);
    }
    char buf[200];
    std::snprintf(buf, sizeof(buf), "\"%s\": %d frames of %d values, %.4f s, %s\n", text.c_str(), r.frames.rows,
                  r.frames.cols, r.duration_seconds(), r.stopped_by_gate ? "stopped by gate" : "hit max_frames");
    out_ << buf;
  }

  void Eval() {
    corpus::Trajectory truth;
    if (!cmd_.truth.empty()) {
      truth = metrics::TrajectoryFromCsv(io::ReadFileText(cmd_.truth));
    } else if (!cmd_.clip.empty()) {
      const corpus::Dataset ds = LoadDataset(DatasetPath());
      const auto& clip = FindClip(ds, cmd_.clip);
      truth = corpus::Denormalize(clip.displacements, clip.reference, ds.landmark_set);
    } else {
      Fail(ErrorKind::kUsage, "eval needs --truth or --dataset with --clip");
    }
    std::vector<corpus::Trajectory> outputs;
    std::vector<std::string> labels = cmd_.labels;
    if (!labels.empty() && labels.size() != cmd_.predictions.size()) {
      Fail(ErrorKind::kUsage, "give one --label per --prediction");
    }
    for (const auto& p : cmd_.predictions) {
      outputs.push_back(metrics::TrajectoryFromCsv(io::ReadFileText(p)));
      if (cmd_.labels.empty()) labels.push_back(fs::path(p).parent_path().filename().string() + "/" +
                                                fs::path(p).filename().string());
    }
    const metrics::Comparison c = metrics::CompareReport(outputs, truth, labels);
    WriteText("report.md", c.ToMarkdown());
    WriteText("report.csv", c.ToCsv());
    out_ << c.ToMarkdown();
  }

  void Export() {
    const corpus::Dataset ds = LoadDataset(DatasetPath());
    const auto format = metrics::ParseExportFormat(cmd_.format);
    corpus::Trajectory displacements;
    const corpus::ReferenceFrame* reference = nullptr;
    std::string stem;
    if (!cmd_.trajectory.empty()) {
      reference = &ReferenceFor(ds, cmd_.speaker);
      const corpus::Trajectory positions = metrics::TrajectoryFromCsv(io::ReadFileText(cmd_.trajectory));
      const int first = corpus::FirstLandmark(corpus::LandmarkSetForWidth(positions.cols));
      displacements = positions;
      for (int f = 0; f < positions.rows; ++f) {
        for (int k = 0; k < positions.cols / 3; ++k) {
          const corpus::Vec3& p = reference->points[static_cast<size_t>(first + k)];
          displacements.at(f, 3 * k) -= p.x;
          displacements.at(f, 3 * k + 1) -= p.y;
          displacements.at(f, 3 * k + 2) -= p.z;
        }
      }
      stem = fs::path(cmd_.trajectory).stem().string();
    } else if (!cmd_.clip.empty()) {
      const auto& clip = FindClip(ds, cmd_.clip);
      displacements = clip.displacements;
      reference = &clip.reference;
      stem = clip.clip_id;
    } else {
      Fail(ErrorKind::kUsage, "export needs --clip or --trajectory");
    }
    const std::string target = format == metrics::ExportFormat::kCsv ? Path(stem + ".csv") : Path(stem + "_frames");
    for (const auto& p : metrics::ExportTrajectory(displacements, *reference, format, target)) Wrote(p);
  }

  void WriteManifest() {
    json inputs;
    auto add = [&](const char* key, const std::string& v) {
      if (!v.empty()) inputs[key] = v;
    };
    auto add_path = [&](const char* key, const std::string& v) {
      if (!v.empty()) inputs[key] = fs::absolute(v).lexically_normal().string();
    };
    add_path("input", cmd_.input);
    add_path("dataset", cmd_.dataset);
    add_path("target_dataset", cmd_.target_dataset);
    add_path("pretrain_dataset", cmd_.pretrain_dataset);
    add_path("checkpoint", cmd_.checkpoint);
    add("text", cmd_.text);
    add("clip", cmd_.clip);
    add("speaker", cmd_.speaker);
    add_path("truth", cmd_.truth);
    add_path("trajectory", cmd_.trajectory);
    if (!cmd_.predictions.empty()) inputs["predictions"] = cmd_.predictions;
    if (cmd_.clips) inputs["clips"] = *cmd_.clips;
    const json manifest = {{"command", cmd_.name}, {"version", kVersion}, {"seed", Seed()},
                           {"config", config_},    {"inputs", inputs},    {"artifacts", artifacts_}};
    io::WriteFileText(Path("manifest.json"), manifest.dump(2) + "\n");
    out_ << "wrote " << Path("manifest.json") << "\n";
  }

  const Command& cmd_;
  std::ostream& out_;
  json config_;
  std::string dir_;
  std::vector<std::string> artifacts_;
};

}  // namespace

int Run(const Command& cmd, std::ostream& out, std::ostream& err) {
  if (cmd.name == "help") {
    out << cmd.help_text;
    return 0;
  }
  try {
    Runner(cmd, out).Dispatch();
    return 0;
  } catch (const Error& e) {
    err << "liptraj " << cmd.name << ": " << ErrorKindName(e.kind()) << ": " << e.what() << "\n";
    return ExitCodeFor(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "liptraj " << cmd.name << ": io error: " << e.what() << "\n";
    return ExitCodeFor(ErrorKind::kIo);
  } catch (const json::exception& e) {
    err << "liptraj " << cmd.name << ": usage error: " << e.what() << "\n";
    return ExitCodeFor(ErrorKind::kUsage);
  }
}

int Main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Command cmd;
  try {
    cmd = ParseArgs(argc, argv);
  } catch (const Error& e) {
    err << "liptraj: " << e.what() << "\nRun 'liptraj --help' for usage.\n";
    return ExitCodeFor(e.kind());
  }
  return Run(cmd, out, err);
}

}  // namespace liptraj::cli
