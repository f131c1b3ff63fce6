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

// Character encoder, location-sensitive attention and the autoregressive
// landmark decoder with its stop-token (gate) head. Pre-Net and Post-Net are
// optional blocks kept for ablations.

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "liptraj/autodiff.hpp"
#include "liptraj/corpus.hpp"

namespace liptraj::net {

struct ModelConfig {
  std::string preset = "full";
  int charset_size = 30;
  int embedding_dim = 512;
  int encoder_convs = 3;
  int encoder_filters = 512;
  int encoder_kernel = 5;
  int encoder_lstm_dim = 512;  // both directions together
  int decoder_lstm_dim = 1024;
  int attention_dim = 128;
  int location_filters = 32;
  int location_kernel = 31;
  int output_width = 60;
  bool use_prenet = false;
  bool use_postnet = false;
  int prenet_dim = 256;
  int postnet_layers = 5;
  int postnet_filters = 512;
  int postnet_kernel = 5;
  double encoder_dropout = 0.5;
  double prenet_dropout = 0.5;
  double decoder_dropout = 0.1;
  double postnet_dropout = 0.5;

  static ModelConfig Full();
  static ModelConfig Toy();
  static ModelConfig Preset(const std::string& name);

  void Validate() const;
  nlohmann::json ToJson() const;
  static ModelConfig FromJson(const nlohmann::json& j);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Tokens padded with -1, stored batch-major.
struct TokenBatch {
  int batch = 0;
  int max_len = 0;
  std::vector<int> ids;
  std::vector<int> lengths;

  static TokenBatch Single(std::span<const int> tokens);
  static TokenBatch FromSequences(const std::vector<std::vector<int>>& seqs);
};

// Target frames padded with zeros, stored time-major (row t * batch + b).
template <typename T>
struct FrameBatch {
  int batch = 0;
  int steps = 0;
  int width = 0;
  std::vector<T> values;
  std::vector<int> lengths;

  static FrameBatch Single(const corpus::Trajectory& frames);
  static FrameBatch FromTrajectories(const std::vector<const corpus::Trajectory*>& frames);
  ad::SeqLayout Layout() const { return {batch, steps, lengths, true}; }
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;  // required when training with non-zero dropout
};

template <typename T>
struct EncoderOutput {
  ad::Tensor<T> memory;     // (batch * max_len) x encoder dim, batch-major
  ad::Tensor<T> processed;  // memory projected to attention dim
  ad::SeqLayout layout;
};

template <typename T>
struct DecoderState {
  ad::Tensor<T> h1, c1, h2, c2;
  ad::Tensor<T> context;
  ad::Tensor<T> prev_alignment;  // batch x max_len
  ad::Tensor<T> cum_alignment;
};

template <typename T>
struct AttentionOutput {
  ad::Tensor<T> context;
  ad::Tensor<T> alignment;
};

template <typename T>
struct StepOutput {
  ad::Tensor<T> frame;  // batch x output width
  ad::Tensor<T> gate;   // batch x 1 logits
  DecoderState<T> state;
};

template <typename T>
struct TeacherForcedOutput {
  int batch = 0;
  int steps = 0;
  ad::Tensor<T> frames;          // (steps * batch) x width, time-major
  ad::Tensor<T> gates;           // (steps * batch) x 1
  ad::Tensor<T> alignments;      // (steps * batch) x max_len
  ad::Tensor<T> postnet_frames;  // frames + residual; undefined without Post-Net
};

struct InferenceResult {
  corpus::Trajectory frames;
  std::vector<double> gate_probabilities;
  bool stopped_by_gate = false;
  double duration_seconds() const { return frames.rows / corpus::kTargetFps; }
};

inline constexpr double kDefaultGateThreshold = 0.5;
inline constexpr int kDefaultMaxFrames = 1000;

template <typename T>
class LandmarkModel {
 public:
  explicit LandmarkModel(ModelConfig config, uint64_t seed = 0);

  const ModelConfig& config() const { return config_; }
  ad::ParamStore<T>& params() { return params_; }
  const ad::ParamStore<T>& params() const { return params_; }

  EncoderOutput<T> Encode(ad::Tape<T>& tape, const TokenBatch& tokens, const ForwardOptions& opts);
  DecoderState<T> InitialState(const EncoderOutput<T>& enc) const;
  AttentionOutput<T> Attend(ad::Tape<T>& tape, const ad::Tensor<T>& query,
                            const EncoderOutput<T>& enc, const ad::Tensor<T>& prev_alignment,
                            const ad::Tensor<T>& cum_alignment);
  StepOutput<T> DecoderStep(ad::Tape<T>& tape, const ad::Tensor<T>& prev_frame,
                            const DecoderState<T>& state, const EncoderOutput<T>& enc,
                            const ForwardOptions& opts);
  ad::Tensor<T> Prenet(ad::Tape<T>& tape, const ad::Tensor<T>& frames, const ForwardOptions& opts);
  ad::Tensor<T> Postnet(ad::Tape<T>& tape, const ad::Tensor<T>& frames, const ad::SeqLayout& layout,
                        const ForwardOptions& opts);
  TeacherForcedOutput<T> ForwardTeacherForced(ad::Tape<T>& tape, const TokenBatch& tokens,
                                              const FrameBatch<T>& targets, const ForwardOptions& opts);
  InferenceResult Infer(std::span<const int> tokens, double gate_threshold = kDefaultGateThreshold,
                        int max_frames = kDefaultMaxFrames);

 private:
  void AddWeight(const std::string& name, int rows, int cols, double fan_in, double fan_out, Rng& rng);
  void AddZeros(const std::string& name, int rows, int cols, bool trainable = true);
  void AddFilled(const std::string& name, int rows, int cols, T value, bool trainable);
  void AddBatchNorm(const std::string& prefix, int channels);
  ad::Tensor<T> ConvBlock(ad::Tape<T>& tape, const std::string& prefix, const ad::Tensor<T>& x,
                          const ad::SeqLayout& layout, bool training);
  ad::Tensor<T> P(const std::string& name) { return params_.Get(name); }

  ModelConfig config_;
  ad::ParamStore<T> params_;
};

// --- checkpoints ---------------------------------------------------------------

struct CheckpointMetadata {
  int epoch = 0;
  double validation_loss = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> frozen_prefixes;
  std::map<std::string, std::string> extra;
};

struct CheckpointRecord {
  ad::Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  ModelConfig config;
  CheckpointMetadata metadata;
  std::map<std::string, CheckpointRecord> records;
};

template <typename T>
std::vector<uint8_t> SaveCheckpoint(const ad::ParamStore<T>& params, const ModelConfig& config,
                                    const CheckpointMetadata& metadata);
Checkpoint LoadCheckpoint(std::span<const uint8_t> bytes);

// Replaces every array of the model; config and name set must match.
template <typename T>
void ApplyCheckpoint(const Checkpoint& ckpt, LandmarkModel<T>& model);

struct PartialLoadReport {
  std::vector<std::string> loaded;
  std::vector<std::string> fresh;
};

// Loads only names under the given prefixes; everything else keeps its fresh
// initialization.
template <typename T>
PartialLoadReport LoadPartial(const Checkpoint& ckpt, LandmarkModel<T>& model,
                              const std::vector<std::string>& prefixes);

}  // namespace liptraj::net
