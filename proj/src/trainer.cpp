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

#include "liptraj/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "liptraj/binary_io.hpp"
#include "liptraj/error.hpp"
#include "liptraj/rng.hpp"

namespace liptraj::train {

namespace {

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
bool GateTrained(const ad::ParamStore<T>& params) {
  return !params.AnyFrozen("gate.");
}

// L2 norm of the gradients per top-level block, for diagnostics.
std::string GradNorms(const ad::ParamStore<float>& params) {
  std::map<std::string, double> sq;
  for (const auto& [name, entry] : params.entries()) {
    const std::string block = name.substr(0, name.find('.'));
    double& acc = sq[block];
    for (const float g : entry.tensor.grad()) acc += static_cast<double>(g) * g;
  }
  std::string out;
  for (const auto& [block, s] : sq) out += (out.empty() ? "" : ", ") + block + "=" + FormatDouble(std::sqrt(s));
  return out;
}

}  // namespace

// --- config -----------------------------------------------------------------------

void TrainConfig::Validate() const {
  if (!(lr_peak > 0) || !(div_factor >= 1.0)) Fail(ErrorKind::kContract, "train config: bad learning rate");
  if (step_size <= 0) Fail(ErrorKind::kContract, "train config: step_size must be positive");
  if (!(smooth_l1_beta > 0)) Fail(ErrorKind::kContract, "train config: smooth_l1_beta must be positive");
  if (batch_size <= 0) Fail(ErrorKind::kContract, "train config: batch_size must be positive");
  if (epochs <= 0) Fail(ErrorKind::kContract, "train config: epochs must be positive");
  if (validation_interval <= 0) Fail(ErrorKind::kContract, "train config: validation_interval must be positive");
  if (!(gate_weight >= 0)) Fail(ErrorKind::kContract, "train config: gate_weight must be >= 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1) || !(adam_epsilon > 0)) {
    Fail(ErrorKind::kContract, "train config: bad Adam constants");
  }
}

nlohmann::json TrainConfig::ToJson() const {
  return {{"lr_peak", lr_peak},
          {"div_factor", div_factor},
          {"step_size", step_size},
          {"smooth_l1_beta", smooth_l1_beta},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"validation_interval", validation_interval},
          {"seed", seed},
          {"freeze", freeze},
          {"gate_weight", gate_weight},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"adam_epsilon", adam_epsilon},
          {"output_dir", output_dir}};
}

TrainConfig TrainConfig::FromJson(const nlohmann::json& j) {
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "lr_peak") c.lr_peak = value.get<double>();
    else if (key == "div_factor") c.div_factor = value.get<double>();
    else if (key == "step_size") c.step_size = value.get<int>();
    else if (key == "smooth_l1_beta") c.smooth_l1_beta = value.get<double>();
    else if (key == "batch_size") c.batch_size = value.get<int>();
    else if (key == "epochs") c.epochs = value.get<int>();
    else if (key == "validation_interval") c.validation_interval = value.get<int>();
    else if (key == "seed") c.seed = value.get<uint64_t>();
    else if (key == "freeze") c.freeze = value.get<std::vector<std::string>>();
    else if (key == "gate_weight") c.gate_weight = value.get<double>();
    else if (key == "adam_beta1") c.adam_beta1 = value.get<double>();
    else if (key == "adam_beta2") c.adam_beta2 = value.get<double>();
    else if (key == "adam_epsilon") c.adam_epsilon = value.get<double>();
    else if (key == "output_dir") c.output_dir = value.get<std::string>();
    else Fail(ErrorKind::kUsage, "unknown train config key '" + key + "'");
  }
  c.Validate();
  return c;
}

// --- history ----------------------------------------------------------------------

std::string TrainHistory::ToCsv() const {
  std::string out = "iteration,epoch,train_loss,val_loss,lr\n";
  for (const HistoryRow& r : rows) {
    out += std::to_string(r.iteration) + "," + std::to_string(r.epoch) + "," + FormatDouble(r.train_loss) + "," +
           FormatDouble(r.validation_loss) + "," + FormatDouble(r.lr) + "\n";
  }
  return out;
}

TrainHistory TrainHistory::FromCsv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "iteration,epoch,train_loss,val_loss,lr") {
    Fail(ErrorKind::kFormat, "history: unexpected header");
  }
  TrainHistory h;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 5) Fail(ErrorKind::kFormat, "history: line " + std::to_string(line_no) + " needs 5 fields");
    HistoryRow r;
    try {
      r.iteration = std::stoll(f[0]);
      r.epoch = std::stoi(f[1]);
      r.train_loss = std::stod(f[2]);
      r.validation_loss = std::stod(f[3]);
      r.lr = std::stod(f[4]);
    } catch (const std::exception&) {
      Fail(ErrorKind::kParse, "history: bad number on line " + std::to_string(line_no));
    }
    h.rows.push_back(r);
    if (r.validation_loss < h.best_validation_loss) {
      h.best_validation_loss = r.validation_loss;
      h.best_epoch = r.epoch;
    }
  }
  return h;
}

// --- batches ----------------------------------------------------------------------

template <typename T>
Batch<T> MakeBatch(const corpus::Dataset& dataset, std::span<const size_t> clips) {
  if (clips.empty()) Fail(ErrorKind::kContract, "batch needs at least one clip");
  Batch<T> b;
  std::vector<std::vector<int>> tokens;
  std::vector<const corpus::Trajectory*> frames;
  for (const size_t i : clips) {
    const corpus::NormalizedClip& clip = dataset.clips.at(i);
    tokens.push_back(clip.tokens);
    frames.push_back(&clip.displacements);
    b.clips.push_back(i);
  }
  b.tokens = net::TokenBatch::FromSequences(tokens);
  b.frames = net::FrameBatch<T>::FromTrajectories(frames);
  b.frame_mask = b.frames.Layout().RowMask();
  b.gate_targets.resize(static_cast<size_t>(b.frames.steps) * b.frames.batch);
  for (int t = 0; t < b.frames.steps; ++t) {
    for (int k = 0; k < b.frames.batch; ++k) {
      b.gate_targets[static_cast<size_t>(t) * b.frames.batch + k] =
          t >= b.frames.lengths[static_cast<size_t>(k)] - 1 ? T(1) : T(0);
    }
  }
  return b;
}

template <typename T>
std::vector<Batch<T>> MakeBatches(const corpus::Dataset& dataset, std::span<const size_t> indices,
                                  int batch_size, uint64_t seed, int epoch) {
  if (batch_size <= 0) Fail(ErrorKind::kContract, "batch size must be positive");
  std::vector<size_t> order(indices.begin(), indices.end());
  if (epoch >= 0) {
    Rng rng(MixSeed(seed, static_cast<uint64_t>(epoch)));
    rng.Shuffle(order);
  }
  std::vector<Batch<T>> out;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
    const size_t n = std::min(order.size() - start, static_cast<size_t>(batch_size));
    out.push_back(MakeBatch<T>(dataset, std::span<const size_t>(order).subspan(start, n)));
  }
  return out;
}

// --- losses -----------------------------------------------------------------------

namespace {

template <typename F>
double MaskedMean(std::span<const double> pred, std::span<const double> target, std::span<const uint8_t> mask,
                  F term) {
  if (pred.size() != target.size()) Fail(ErrorKind::kShape, "loss: prediction and target sizes differ");
  size_t width = 1;
  if (!mask.empty()) {
    if (pred.size() % mask.size() != 0) Fail(ErrorKind::kShape, "loss: mask does not divide the data");
    width = pred.size() / mask.size();
  }
  double sum = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!mask.empty() && !mask[i / width]) continue;
    sum += term(pred[i] - target[i]);
    ++count;
  }
  if (count == 0) Fail(ErrorKind::kContract, "loss over an empty mask");
  return sum / static_cast<double>(count);
}

}  // namespace

double SmoothL1(std::span<const double> pred, std::span<const double> target, double beta,
                std::span<const uint8_t> mask) {
  if (!(beta > 0)) Fail(ErrorKind::kContract, "smooth L1 beta must be positive");
  return MaskedMean(pred, target, mask, [beta](double d) {
    const double a = std::abs(d);
    return a < beta ? 0.5 * d * d / beta : a - 0.5 * beta;
  });
}

double Mse(std::span<const double> pred, std::span<const double> target, std::span<const uint8_t> mask) {
  return MaskedMean(pred, target, mask, [](double d) { return d * d; });
}

template <typename T>
LossResult<T> TotalLoss(ad::Tape<T>& tape, const net::TeacherForcedOutput<T>& out, const Batch<T>& batch,
                        const net::ModelConfig& model, const TrainConfig& config, bool gate_trained) {
  const auto& fb = batch.frames;
  const ad::Tensor<T> target = ad::Tensor<T>::Constant({fb.steps * fb.batch, fb.width}, fb.values);
  LossResult<T> r;
  r.total = ad::SmoothL1Loss(tape, out.frames, target, std::span<const uint8_t>(batch.frame_mask),
                             static_cast<T>(config.smooth_l1_beta));
  r.parts.decoder = static_cast<double>(r.total.item());
  if (model.use_postnet) {
    const ad::Tensor<T> post = ad::MseLoss(tape, out.postnet_frames, target, std::span<const uint8_t>(batch.frame_mask));
    r.parts.postnet = static_cast<double>(post.item());
    r.total = ad::Add(tape, r.total, post);
  }
  if (gate_trained && config.gate_weight > 0) {
    const ad::Tensor<T> gate_target = ad::Tensor<T>::Constant({fb.steps * fb.batch, 1}, batch.gate_targets);
    const ad::Tensor<T> gate = ad::BceWithLogitsLoss(tape, out.gates, gate_target, std::span<const uint8_t>());
    r.parts.gate = static_cast<double>(gate.item()) * config.gate_weight;
    r.total = ad::Add(tape, r.total, ad::Scale(tape, gate, static_cast<T>(config.gate_weight)));
  }
  r.parts.total = static_cast<double>(r.total.item());
  return r;
}

// --- optimizer and schedule ------------------------------------------------------

template <typename T>
void AdamStep(ad::ParamStore<T>& params, AdamState& state, double lr, const TrainConfig& config) {
  ++state.step;
  const double c1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));
  for (const auto& [name, entry] : params.entries()) {
    if (!entry.trainable || entry.frozen) continue;
    ad::Tensor<T> tensor = entry.tensor;
    const auto grad = tensor.grad();
    if (grad.empty()) continue;
    if (grad.size() != tensor.size()) {
      Fail(ErrorKind::kShape, "adam: gradient of " + name + " has " + std::to_string(grad.size()) +
                                  " entries for " + std::to_string(tensor.size()) + " values");
    }
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) {
      m.assign(tensor.size(), 0.0);
      v.assign(tensor.size(), 0.0);
    }
    auto values = tensor.mutable_value();
    for (size_t i = 0; i < values.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * g;
      v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * g * g;
      const double update = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.adam_epsilon);
      values[i] = static_cast<T>(static_cast<double>(values[i]) - update);
    }
  }
}

double OneCycleLr(int64_t iteration, const TrainConfig& config) {
  const double floor = config.lr_peak / config.div_factor;
  const int64_t step = config.step_size;
  if (iteration < 0) Fail(ErrorKind::kContract, "iteration must be >= 0");
  if (iteration >= 2 * step) return floor;
  const double x = iteration <= step ? static_cast<double>(iteration) / static_cast<double>(step)
                                     : static_cast<double>(2 * step - iteration) / static_cast<double>(step);
  return floor + (config.lr_peak - floor) * x;
}

// --- training ---------------------------------------------------------------------

template <typename T>
double EvaluateLoss(net::LandmarkModel<T>& model, const corpus::Dataset& dataset, std::span<const size_t> indices,
                    const TrainConfig& config) {
  if (indices.empty()) Fail(ErrorKind::kInsufficientData, "evaluation split is empty");
  const bool gate = GateTrained(model.params());
  double sum = 0.0;
  size_t count = 0;
  for (const Batch<T>& b : MakeBatches<T>(dataset, indices, config.batch_size, config.seed, -1)) {
    ad::Tape<T> tape(false);
    const auto out = model.ForwardTeacherForced(tape, b.tokens, b.frames, net::ForwardOptions{false, nullptr});
    sum += TotalLoss(tape, out, b, model.config(), config, gate).parts.total * b.size();
    count += static_cast<size_t>(b.size());
  }
  return sum / static_cast<double>(count);
}

TrainResult Train(const corpus::Dataset& dataset, net::LandmarkModel<float>& model, const TrainConfig& config,
                  const ProgressFn& progress) {
  config.Validate();
  const auto train_idx = dataset.Indices(corpus::Split::kTrain);
  const auto val_idx = dataset.Indices(corpus::Split::kValidation);
  if (train_idx.empty() || val_idx.empty()) {
    Fail(ErrorKind::kInsufficientData, "training needs non-empty train and validation splits");
  }
  const int width = corpus::RowWidth(dataset.landmark_set);
  if (width != model.config().output_width) {
    Fail(ErrorKind::kShape, "dataset rows have " + std::to_string(width) + " values but the model outputs " +
                                std::to_string(model.config().output_width));
  }
  auto& params = model.params();
  for (const auto& prefix : config.freeze) params.SetFrozen(prefix, true);
  const bool gate = GateTrained(params);
  if (!config.output_dir.empty()) std::filesystem::create_directories(config.output_dir);

  Rng dropout_rng(MixSeed(config.seed, 0x64726f70));
  AdamState adam;
  TrainResult result;
  TrainHistory& history = result.history;
  int64_t iteration = 0;
  double lr = OneCycleLr(0, config);

  auto metadata = [&](int epoch, double val) {
    net::CheckpointMetadata md;
    md.epoch = epoch;
    md.validation_loss = val;
    md.frozen_prefixes = params.FrozenPrefixes();
    return md;
  };

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_sum = 0.0;
    size_t epoch_count = 0;
    for (const Batch<float>& b : MakeBatches<float>(dataset, train_idx, config.batch_size, config.seed, epoch)) {
      params.ZeroGrad();
      ad::Tape<float> tape;
      const auto out = model.ForwardTeacherForced(tape, b.tokens, b.frames, net::ForwardOptions{true, &dropout_rng});
      const LossResult<float> loss = TotalLoss(tape, out, b, model.config(), config, gate);
      lr = OneCycleLr(iteration, config);
      tape.Backward(loss.total);
      if (!std::isfinite(loss.parts.total)) {
        Fail(ErrorKind::kNumericDomain, "non-finite training loss at iteration " + std::to_string(iteration) +
                                            " (epoch " + std::to_string(epoch) + ", lr " + FormatDouble(lr) +
                                            "); gradient norms: " + GradNorms(params));
      }
      AdamStep(params, adam, lr, config);
      ++iteration;
      epoch_sum += loss.parts.total * b.size();
      epoch_count += static_cast<size_t>(b.size());
    }
    const double train_loss = epoch_sum / static_cast<double>(epoch_count);
    history.epoch_losses.push_back(train_loss);

    TrainEvent event{epoch, iteration, train_loss, std::numeric_limits<double>::quiet_NaN(), lr};
    if (epoch % config.validation_interval == 0 || epoch == config.epochs) {
      const double val = EvaluateLoss(model, dataset, val_idx, config);
      event.validation_loss = val;
      history.rows.push_back({iteration, epoch, train_loss, val, lr});
      if (val < history.best_validation_loss) {
        history.best_validation_loss = val;
        history.best_epoch = epoch;
        result.best_checkpoint = net::SaveCheckpoint(params, model.config(), metadata(epoch, val));
        if (!config.output_dir.empty()) {
          history.best_checkpoint_path = (std::filesystem::path(config.output_dir) / "best.ckpt").string();
          io::WriteFileBytes(history.best_checkpoint_path, result.best_checkpoint);
        }
      }
      result.final_validation_loss = val;
    }
    if (progress) progress(event);
  }
  if (result.best_checkpoint.empty()) {
    Fail(ErrorKind::kNumericDomain, "validation loss never became finite");
  }
  result.final_checkpoint =
      net::SaveCheckpoint(params, model.config(), metadata(config.epochs, result.final_validation_loss));
  if (!config.output_dir.empty()) {
    const std::filesystem::path dir(config.output_dir);
    io::WriteFileBytes((dir / "final.ckpt").string(), result.final_checkpoint);
    io::WriteFileText((dir / "history.csv").string(), history.ToCsv());
  }
  return result;
}

TransferResult PretrainThenTransfer(const corpus::Dataset& a, const corpus::Dataset& b,
                                    const net::ModelConfig& model, const TrainConfig& pretrain,
                                    const TrainConfig& transfer, uint64_t model_seed, const ProgressFn& progress) {
  TransferResult result;
  net::LandmarkModel<float> first(model, model_seed);
  result.pretrain = Train(a, first, pretrain, progress);

  net::LandmarkModel<float> second(model, MixSeed(model_seed, 2));
  result.load_report =
      net::LoadPartial(net::LoadCheckpoint(result.pretrain.best_checkpoint), second, kTransferPrefixes);
  TrainConfig cfg = transfer;
  for (const auto& p : kTransferPrefixes) {
    if (std::find(cfg.freeze.begin(), cfg.freeze.end(), p) == cfg.freeze.end()) cfg.freeze.push_back(p);
  }
  result.transfer = Train(b, second, cfg, progress);
  return result;
}

// --- ablation ---------------------------------------------------------------------

namespace {

struct AblationSetting {
  bool postnet, prenet, pretrained;
};

constexpr AblationSetting kAblationSettings[4] = {
    {true, true, true}, {false, true, true}, {false, false, true}, {false, false, false}};
constexpr const char* kReferenceLosses[4] = {"1.7127e-1", "7.1896e-2", "1.5066e-2", "8.9430e-3"};

}  // namespace

AblationTable Ablate(const corpus::Dataset& pretrain_data, const corpus::Dataset& data,
                     const net::ModelConfig& model, const TrainConfig& pretrain, const TrainConfig& train,
                     uint64_t model_seed, const ProgressFn& progress) {
  net::ModelConfig base = model;
  base.use_prenet = false;
  base.use_postnet = false;
  net::LandmarkModel<float> source(base, model_seed);
  const net::Checkpoint encoder = net::LoadCheckpoint(Train(pretrain_data, source, pretrain, progress).best_checkpoint);

  AblationTable table;
  for (int i = 0; i < 4; ++i) {
    const AblationSetting& s = kAblationSettings[i];
    net::ModelConfig mc = model;
    mc.use_postnet = s.postnet;
    mc.use_prenet = s.prenet;
    net::LandmarkModel<float> m(mc, MixSeed(model_seed, 10 + static_cast<uint64_t>(i)));
    TrainConfig cfg = train;
    cfg.epochs = std::min(cfg.epochs, kAblationEpochCap);
    cfg.freeze.clear();
    if (!cfg.output_dir.empty()) {
      cfg.output_dir = (std::filesystem::path(train.output_dir) / ("row" + std::to_string(i + 1))).string();
    }
    if (s.pretrained) {
      net::LoadPartial(encoder, m, kTransferPrefixes);
      cfg.freeze = kTransferPrefixes;
    }
    const TrainResult r = Train(data, m, cfg, progress);
    table.rows.push_back({s.postnet, s.prenet, s.pretrained, r.history.best_validation_loss, r.history.best_epoch,
                          r.final_validation_loss});
  }
  if (!train.output_dir.empty()) {
    const std::filesystem::path dir(train.output_dir);
    io::WriteFileText((dir / "ablation.csv").string(), table.ToCsv());
    io::WriteFileText((dir / "ablation.md").string(), table.ToMarkdown());
  }
  return table;
}

std::string AblationTable::ToCsv() const {
  std::string out = "val_loss,epoch,postnet,prenet,pretrained\n";
  for (const AblationRow& r : rows) {
    out += FormatDouble(r.best_validation_loss) + "," + std::to_string(r.best_epoch) + "," +
           (r.postnet ? "1" : "0") + "," + (r.prenet ? "1" : "0") + "," + (r.pretrained ? "1" : "0") + "\n";
  }
  return out;
}

std::string AblationTable::ToMarkdown() const {
  auto mark = [](bool b) { return b ? "x" : " "; };
  std::string out =
      "| Val loss (best) | Epoch | Val loss (final) | Post-Net | Pre-Net | Pretrained | Published |\n"
      "|---|---|---|---|---|---|---|\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const AblationRow& r = rows[i];
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4e | %d | %.4e", r.best_validation_loss, r.best_epoch,
                  r.final_validation_loss);
    out += "| " + std::string(buf) + " | " + mark(r.postnet) + " | " + mark(r.prenet) + " | " + mark(r.pretrained) +
           " | " + (i < 4 ? kReferenceLosses[i] : "") + " |\n";
  }
  return out;
}

#define LIPTRAJ_INSTANTIATE(T)                                                                                \
  template Batch<T> MakeBatch<T>(const corpus::Dataset&, std::span<const size_t>);                            \
  template std::vector<Batch<T>> MakeBatches<T>(const corpus::Dataset&, std::span<const size_t>, int,          \
                                                uint64_t, int);                                               \
  template LossResult<T> TotalLoss<T>(ad::Tape<T>&, const net::TeacherForcedOutput<T>&, const Batch<T>&,       \
                                      const net::ModelConfig&, const TrainConfig&, bool);                     \
  template void AdamStep<T>(ad::ParamStore<T>&, AdamState&, double, const TrainConfig&);                      \
  template double EvaluateLoss<T>(net::LandmarkModel<T>&, const corpus::Dataset&, std::span<const size_t>,    \
                                  const TrainConfig&);
LIPTRAJ_INSTANTIATE(float)
LIPTRAJ_INSTANTIATE(double)
#undef LIPTRAJ_INSTANTIATE

}  // namespace liptraj::train
