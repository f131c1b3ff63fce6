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

#pragma once

// Losses, Adam, the one-cycle schedule and the teacher-forced training loop,
// plus encoder transfer and the Pre-Net/Post-Net/pretraining ablation.

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "liptraj/autodiff.hpp"
#include "liptraj/corpus.hpp"
#include "liptraj/net.hpp"

namespace liptraj::train {

struct TrainConfig {
  double lr_peak = 0.002;
  double div_factor = 25.0;  // lr floor is lr_peak / div_factor
  int step_size = 4000;      // iterations from floor to peak
  double smooth_l1_beta = 1.0;
  int batch_size = 8;
  int epochs = 500;
  int validation_interval = 5;
  uint64_t seed = 1234;
  std::vector<std::string> freeze;  // parameter name prefixes, e.g. "encoder."
  double gate_weight = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::string output_dir;  // best.ckpt and history.csv land here when set

  void Validate() const;
  nlohmann::json ToJson() const;
  static TrainConfig FromJson(const nlohmann::json& j);
};

struct HistoryRow {
  int64_t iteration = 0;
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<HistoryRow> rows;     // one per validation point
  std::vector<double> epoch_losses;  // mean training loss of every epoch
  int best_epoch = 0;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  std::string best_checkpoint_path;

  std::string ToCsv() const;
  static TrainHistory FromCsv(std::string_view text);
};

// Padded batch; frames are time-major like net::FrameBatch.
template <typename T>
struct Batch {
  net::TokenBatch tokens;
  net::FrameBatch<T> frames;
  std::vector<T> gate_targets;     // one per frame row
  std::vector<uint8_t> frame_mask;  // 1 on real frames
  std::vector<size_t> clips;        // dataset indices

  int size() const { return tokens.batch; }
};

template <typename T>
Batch<T> MakeBatch(const corpus::Dataset& dataset, std::span<const size_t> clips);

// Seeded shuffle of the split for the given epoch, cut into batches of at most
// batch_size. epoch < 0 keeps the dataset order.
template <typename T>
std::vector<Batch<T>> MakeBatches(const corpus::Dataset& dataset, std::span<const size_t> indices,
                                  int batch_size, uint64_t seed, int epoch);

double SmoothL1(std::span<const double> pred, std::span<const double> target, double beta,
                std::span<const uint8_t> mask = {});
double Mse(std::span<const double> pred, std::span<const double> target, std::span<const uint8_t> mask = {});

struct LossBreakdown {
  double decoder = 0.0;
  double postnet = 0.0;
  double gate = 0.0;
  double total = 0.0;
};

template <typename T>
struct LossResult {
  ad::Tensor<T> total;
  LossBreakdown parts;
};

// decoder smooth L1 + Post-Net MSE when enabled + weighted gate BCE when the
// gate is trained. Landmark terms ignore padding; the gate term covers it.
template <typename T>
LossResult<T> TotalLoss(ad::Tape<T>& tape, const net::TeacherForcedOutput<T>& out, const Batch<T>& batch,
                        const net::ModelConfig& model, const TrainConfig& config, bool gate_trained);

struct AdamState {
  int64_t step = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

// One bias-corrected Adam update of every trainable, unfrozen entry.
template <typename T>
void AdamStep(ad::ParamStore<T>& params, AdamState& state, double lr, const TrainConfig& config);

double OneCycleLr(int64_t iteration, const TrainConfig& config);

// Mean composite loss over a split with dropout off.
template <typename T>
double EvaluateLoss(net::LandmarkModel<T>& model, const corpus::Dataset& dataset,
                    std::span<const size_t> indices, const TrainConfig& config);

struct TrainResult {
  TrainHistory history;
  std::vector<uint8_t> best_checkpoint;
  std::vector<uint8_t> final_checkpoint;
  double final_validation_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainEvent {
  int epoch = 0;
  int64_t iteration = 0;
  double train_loss = 0.0;
  double validation_loss = std::numeric_limits<double>::quiet_NaN();  // NaN between validations
  double lr = 0.0;
};
using ProgressFn = std::function<void(const TrainEvent&)>;

// Trains the model in place. Parameters under config.freeze are frozen first.
TrainResult Train(const corpus::Dataset& dataset, net::LandmarkModel<float>& model, const TrainConfig& config,
                  const ProgressFn& progress = nullptr);

inline const std::vector<std::string> kTransferPrefixes = {"encoder.", "gate."};

struct TransferResult {
  TrainResult pretrain;
  TrainResult transfer;
  net::PartialLoadReport load_report;
};

// Phase one trains every parameter on corpus a; phase two starts a fresh
// model, copies encoder.* and gate.* from the phase-one best checkpoint,
// freezes them and trains the rest on corpus b.
TransferResult PretrainThenTransfer(const corpus::Dataset& a, const corpus::Dataset& b,
                                    const net::ModelConfig& model, const TrainConfig& pretrain,
                                    const TrainConfig& transfer, uint64_t model_seed,
                                    const ProgressFn& progress = nullptr);

struct AblationRow {
  bool postnet = false;
  bool prenet = false;
  bool pretrained = false;
  double best_validation_loss = 0.0;
  int best_epoch = 0;
  double final_validation_loss = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;

  std::string ToCsv() const;
  std::string ToMarkdown() const;
};

inline constexpr int kAblationEpochCap = 50;

// Runs (post+pre+pretrained), (pre+pretrained), (pretrained) and (none), each
// for at most 50 epochs. Pretrained rows reuse one encoder and gate trained
// on the pretraining corpus; the last row trains everything from scratch.
AblationTable Ablate(const corpus::Dataset& pretrain_data, const corpus::Dataset& data,
                     const net::ModelConfig& model, const TrainConfig& pretrain, const TrainConfig& train,
                     uint64_t model_seed, const ProgressFn& progress = nullptr);

}  // namespace liptraj::train
