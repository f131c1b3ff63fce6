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

#include "liptraj/net.hpp"

#include <algorithm>
#include <cmath>

#include "liptraj/error.hpp"

namespace liptraj::net {

using ad::SeqLayout;
using ad::Shape;
using ad::Tape;
using ad::Tensor;

ModelConfig ModelConfig::Full() { return ModelConfig{}; }

ModelConfig ModelConfig::Toy() {
  ModelConfig c;
  c.preset = "toy";
  c.embedding_dim = 32;
  c.encoder_convs = 1;
  c.encoder_filters = 32;
  c.encoder_kernel = 5;
  c.encoder_lstm_dim = 32;
  c.decoder_lstm_dim = 64;
  c.attention_dim = 32;
  c.location_filters = 8;
  c.location_kernel = 7;
  c.postnet_filters = 32;
  c.encoder_dropout = 0.0;
  c.decoder_dropout = 0.0;
  c.postnet_dropout = 0.1;
  return c;
}

ModelConfig ModelConfig::Preset(const std::string& name) {
  if (name == "full") return Full();
  if (name == "toy") return Toy();
  Fail(ErrorKind::kUsage, "unknown model preset '" + name + "' (expected full or toy)");
}

void ModelConfig::Validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) Fail(ErrorKind::kContract, std::string("model config: ") + what + " must be positive");
  };
  positive(charset_size, "charset_size");
  positive(embedding_dim, "embedding_dim");
  positive(encoder_filters, "encoder_filters");
  positive(encoder_lstm_dim, "encoder_lstm_dim");
  positive(decoder_lstm_dim, "decoder_lstm_dim");
  positive(attention_dim, "attention_dim");
  positive(location_filters, "location_filters");
  positive(prenet_dim, "prenet_dim");
  positive(postnet_filters, "postnet_filters");
  if (encoder_convs < 0) Fail(ErrorKind::kContract, "model config: encoder_convs must be >= 0");
  if (postnet_layers < 2) Fail(ErrorKind::kContract, "model config: postnet_layers must be >= 2");
  if (encoder_lstm_dim % 2 != 0) {
    Fail(ErrorKind::kContract, "model config: encoder_lstm_dim must be even (two directions)");
  }
  for (const int k : {encoder_kernel, location_kernel, postnet_kernel}) {
    if (k <= 0 || k % 2 == 0) Fail(ErrorKind::kContract, "model config: kernel sizes must be odd");
  }
  if (output_width != 60 && output_width != 204) {
    Fail(ErrorKind::kContract, "model config: output_width must be 60 or 204");
  }
  for (const double p : {encoder_dropout, prenet_dropout, decoder_dropout, postnet_dropout}) {
    if (!(p >= 0.0 && p < 1.0)) Fail(ErrorKind::kContract, "model config: dropout must lie in [0, 1)");
  }
}

nlohmann::json ModelConfig::ToJson() const {
  return {{"preset", preset},
          {"charset_size", charset_size},
          {"embedding_dim", embedding_dim},
          {"encoder_convs", encoder_convs},
          {"encoder_filters", encoder_filters},
          {"encoder_kernel", encoder_kernel},
          {"encoder_lstm_dim", encoder_lstm_dim},
          {"decoder_lstm_dim", decoder_lstm_dim},
          {"attention_dim", attention_dim},
          {"location_filters", location_filters},
          {"location_kernel", location_kernel},
          {"output_width", output_width},
          {"use_prenet", use_prenet},
          {"use_postnet", use_postnet},
          {"prenet_dim", prenet_dim},
          {"postnet_layers", postnet_layers},
          {"postnet_filters", postnet_filters},
          {"postnet_kernel", postnet_kernel},
          {"encoder_dropout", encoder_dropout},
          {"prenet_dropout", prenet_dropout},
          {"decoder_dropout", decoder_dropout},
          {"postnet_dropout", postnet_dropout}};
}

ModelConfig ModelConfig::FromJson(const nlohmann::json& j) {
  ModelConfig c = Preset(j.value("preset", std::string("full")));
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") continue;
    if (key == "charset_size") c.charset_size = value.get<int>();
    else if (key == "embedding_dim") c.embedding_dim = value.get<int>();
    else if (key == "encoder_convs") c.encoder_convs = value.get<int>();
    else if (key == "encoder_filters") c.encoder_filters = value.get<int>();
    else if (key == "encoder_kernel") c.encoder_kernel = value.get<int>();
    else if (key == "encoder_lstm_dim") c.encoder_lstm_dim = value.get<int>();
    else if (key == "decoder_lstm_dim") c.decoder_lstm_dim = value.get<int>();
    else if (key == "attention_dim") c.attention_dim = value.get<int>();
    else if (key == "location_filters") c.location_filters = value.get<int>();
    else if (key == "location_kernel") c.location_kernel = value.get<int>();
    else if (key == "output_width") c.output_width = value.get<int>();
    else if (key == "use_prenet") c.use_prenet = value.get<bool>();
    else if (key == "use_postnet") c.use_postnet = value.get<bool>();
    else if (key == "prenet_dim") c.prenet_dim = value.get<int>();
    else if (key == "postnet_layers") c.postnet_layers = value.get<int>();
    else if (key == "postnet_filters") c.postnet_filters = value.get<int>();
    else if (key == "postnet_kernel") c.postnet_kernel = value.get<int>();
    else if (key == "encoder_dropout") c.encoder_dropout = value.get<double>();
    else if (key == "prenet_dropout") c.prenet_dropout = value.get<double>();
    else if (key == "decoder_dropout") c.decoder_dropout = value.get<double>();
    else if (key == "postnet_dropout") c.postnet_dropout = value.get<double>();
    else Fail(ErrorKind::kUsage, "unknown model config key '" + key + "'");
  }
  c.Validate();
  return c;
}

TokenBatch TokenBatch::Single(std::span<const int> tokens) {
  return FromSequences({std::vector<int>(tokens.begin(), tokens.end())});
}

TokenBatch TokenBatch::FromSequences(const std::vector<std::vector<int>>& seqs) {
  TokenBatch b;
  b.batch = static_cast<int>(seqs.size());
  for (const auto& s : seqs) b.max_len = std::max(b.max_len, static_cast<int>(s.size()));
  b.ids.assign(static_cast<size_t>(b.batch) * b.max_len, -1);
  for (int i = 0; i < b.batch; ++i) {
    const auto& s = seqs[static_cast<size_t>(i)];
    std::copy(s.begin(), s.end(), b.ids.begin() + static_cast<ptrdiff_t>(i) * b.max_len);
    b.lengths.push_back(static_cast<int>(s.size()));
  }
  return b;
}

template <typename T>
FrameBatch<T> FrameBatch<T>::Single(const corpus::Trajectory& frames) {
  return FromTrajectories({&frames});
}

template <typename T>
FrameBatch<T> FrameBatch<T>::FromTrajectories(const std::vector<const corpus::Trajectory*>& frames) {
  FrameBatch<T> fb;
  fb.batch = static_cast<int>(frames.size());
  if (frames.empty()) return fb;
  fb.width = frames.front()->cols;
  for (const auto* f : frames) {
    if (f->cols != fb.width) Fail(ErrorKind::kShape, "frame batch mixes widths");
    fb.steps = std::max(fb.steps, f->rows);
    fb.lengths.push_back(f->rows);
  }
  fb.values.assign(static_cast<size_t>(fb.steps) * fb.batch * fb.width, T(0));
  for (int b = 0; b < fb.batch; ++b) {
    const auto* f = frames[static_cast<size_t>(b)];
    for (int t = 0; t < f->rows; ++t) {
      T* dst = fb.values.data() + (static_cast<size_t>(t) * fb.batch + b) * fb.width;
      for (int c = 0; c < fb.width; ++c) dst[c] = static_cast<T>(f->at(t, c));
    }
  }
  return fb;
}

namespace {

Rng& DropoutRng(const ForwardOptions& opts, bool active) {
  static thread_local Rng unused(0);
  if (opts.rng != nullptr) return *opts.rng;
  if (active) Fail(ErrorKind::kContract, "training with dropout needs a random generator");
  return unused;
}

}  // namespace

// --- construction ----------------------------------------------------------------

template <typename T>
LandmarkModel<T>::LandmarkModel(ModelConfig config, uint64_t seed) : config_(std::move(config)) {
  config_.Validate();
  Rng rng(seed);
  const ModelConfig& c = config_;

  AddWeight("encoder.embedding", c.charset_size, c.embedding_dim, c.charset_size, c.embedding_dim, rng);
  int channels = c.embedding_dim;
  for (int i = 0; i < c.encoder_convs; ++i) {
    const std::string p = "encoder.conv" + std::to_string(i);
    AddWeight(p + ".weight", c.encoder_kernel * channels, c.encoder_filters,
              c.encoder_kernel * channels, c.encoder_kernel * c.encoder_filters, rng);
    AddBatchNorm(p + ".bn", c.encoder_filters);
    channels = c.encoder_filters;
  }
  const int dir = c.encoder_lstm_dim / 2;
  for (const char* d : {"encoder.lstm_fwd", "encoder.lstm_bwd"}) {
    AddWeight(std::string(d) + ".weight", channels + dir, 4 * dir, channels + dir, 4 * dir, rng);
    AddZeros(std::string(d) + ".bias", 1, 4 * dir);
  }

  const int enc = c.encoder_lstm_dim, dec = c.decoder_lstm_dim, att = c.attention_dim;
  AddWeight("attention.query.weight", dec, att, dec, att, rng);
  AddWeight("attention.memory.weight", enc, att, enc, att, rng);
  AddWeight("attention.v.weight", att, 1, att, 1, rng);
  AddWeight("attention.location_conv.weight", c.location_kernel * 2, c.location_filters,
            c.location_kernel * 2, c.location_kernel * c.location_filters, rng);
  AddWeight("attention.location_dense.weight", c.location_filters, att, c.location_filters, att, rng);

  const int frame_in = c.use_prenet ? c.prenet_dim : c.output_width;
  AddWeight("decoder.lstm1.weight", frame_in + enc + dec, 4 * dec, frame_in + enc + dec, 4 * dec, rng);
  AddZeros("decoder.lstm1.bias", 1, 4 * dec);
  AddWeight("decoder.lstm2.weight", dec + enc + dec, 4 * dec, dec + enc + dec, 4 * dec, rng);
  AddZeros("decoder.lstm2.bias", 1, 4 * dec);
  AddWeight("decoder.proj.weight", dec + enc, c.output_width, dec + enc, c.output_width, rng);
  AddZeros("decoder.proj.bias", 1, c.output_width);

  AddWeight("gate.weight", dec + enc, 1, dec + enc, 1, rng);
  AddZeros("gate.bias", 1, 1);

  if (c.use_prenet) {
    AddWeight("prenet.fc0.weight", c.output_width, c.prenet_dim, c.output_width, c.prenet_dim, rng);
    AddWeight("prenet.fc1.weight", c.prenet_dim, c.prenet_dim, c.prenet_dim, c.prenet_dim, rng);
  }
  if (c.use_postnet) {
    for (int i = 0; i < c.postnet_layers; ++i) {
      const int in = i == 0 ? c.output_width : c.postnet_filters;
      const int out = i == c.postnet_layers - 1 ? c.output_width : c.postnet_filters;
      const std::string p = "postnet.conv" + std::to_string(i);
      AddWeight(p + ".weight", c.postnet_kernel * in, out, c.postnet_kernel * in, c.postnet_kernel * out, rng);
      AddBatchNorm(p + ".bn", out);
    }
  }
}

template <typename T>
void LandmarkModel<T>::AddWeight(const std::string& name, int rows, int cols, double fan_in,
                                 double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::vector<T> v(static_cast<size_t>(rows) * cols);
  for (T& x : v) x = static_cast<T>(rng.Uniform(-limit, limit));
  params_.Add(name, {rows, cols}, std::move(v));
}

template <typename T>
void LandmarkModel<T>::AddZeros(const std::string& name, int rows, int cols, bool trainable) {
  AddFilled(name, rows, cols, T(0), trainable);
}

template <typename T>
void LandmarkModel<T>::AddFilled(const std::string& name, int rows, int cols, T value, bool trainable) {
  params_.Add(name, {rows, cols}, std::vector<T>(static_cast<size_t>(rows) * cols, value), trainable);
}

template <typename T>
void LandmarkModel<T>::AddBatchNorm(const std::string& prefix, int channels) {
  AddFilled(prefix + ".gamma", 1, channels, T(1), true);
  AddFilled(prefix + ".beta", 1, channels, T(0), true);
  AddFilled(prefix + ".running_mean", 1, channels, T(0), false);
  AddFilled(prefix + ".running_var", 1, channels, T(1), false);
}

// conv -> batchnorm (the conv carries no bias, beta plays that role); a frozen block normalizes with its running statistics.
template <typename T>
Tensor<T> LandmarkModel<T>::ConvBlock(Tape<T>& tape, const std::string& prefix, const Tensor<T>& x,
                                      const SeqLayout& layout, bool training) {
  const Tensor<T> y = ad::Conv1d(tape, x, P(prefix + ".weight"), Tensor<T>(), layout);
  const bool bn_training = training && !params_.IsFrozen(prefix + ".bn.gamma");
  return ad::BatchNorm(tape, y, P(prefix + ".bn.gamma"), P(prefix + ".bn.beta"),
                       params_.Get(prefix + ".bn.running_mean"), params_.Get(prefix + ".bn.running_var"),
                       layout, bn_training);
}

// --- forward ----------------------------------------------------------------------

template <typename T>
EncoderOutput<T> LandmarkModel<T>::Encode(Tape<T>& tape, const TokenBatch& tokens, const ForwardOptions& opts) {
  if (tokens.batch == 0 || tokens.max_len == 0 ||
      std::any_of(tokens.lengths.begin(), tokens.lengths.end(), [](int n) { return n <= 0; })) {
    Fail(ErrorKind::kContract, "encoder input must be a non-empty token sequence");
  }
  for (const int id : tokens.ids) {
    if (id >= config_.charset_size) {
      Fail(ErrorKind::kShape, "token id " + std::to_string(id) + " outside charset of " +
                                  std::to_string(config_.charset_size));
    }
  }
  const int batch = tokens.batch, steps = tokens.max_len;
  const SeqLayout layout{batch, steps, tokens.lengths, false};
  const bool training = opts.training;

  Tensor<T> x = ad::Embedding(tape, P("encoder.embedding"), tokens.ids);
  for (int i = 0; i < config_.encoder_convs; ++i) {
    x = ConvBlock(tape, "encoder.conv" + std::to_string(i), x, layout, training);
    x = ad::Relu(tape, x);
    const bool drop = training && config_.encoder_dropout > 0;
    x = ad::Dropout(tape, x, config_.encoder_dropout, DropoutRng(opts, drop), drop);
  }

  // Bidirectional LSTM over time-major rows; padded steps leave the state as is.
  std::vector<int> to_time_major(static_cast<size_t>(batch) * steps);
  std::vector<int> to_batch_major(static_cast<size_t>(batch) * steps);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < steps; ++t) {
      to_time_major[static_cast<size_t>(t) * batch + b] = b * steps + t;
      to_batch_major[static_cast<size_t>(b) * steps + t] = t * batch + b;
    }
  }
  const Tensor<T> xt = ad::GatherRows(tape, x, to_time_major);
  const int dir = config_.encoder_lstm_dim / 2;
  std::vector<Tensor<T>> outputs[2];
  for (int d = 0; d < 2; ++d) {
    const std::string p = d == 0 ? "encoder.lstm_fwd" : "encoder.lstm_bwd";
    const Tensor<T> w = P(p + ".weight"), bias = P(p + ".bias");
    Tensor<T> h = Tensor<T>::Zeros({batch, dir});
    Tensor<T> c = Tensor<T>::Zeros({batch, dir});
    outputs[d].resize(static_cast<size_t>(steps));
    for (int i = 0; i < steps; ++i) {
      const int t = d == 0 ? i : steps - 1 - i;
      std::vector<uint8_t> mask(static_cast<size_t>(batch));
      for (int b = 0; b < batch; ++b) mask[static_cast<size_t>(b)] = t < tokens.lengths[static_cast<size_t>(b)];
      const auto out = ad::LstmCell(tape, ad::SliceRows(tape, xt, t * batch, batch), h, c, w, bias, mask);
      h = out.h;
      c = out.c;
      outputs[d][static_cast<size_t>(t)] = h;
    }
  }
  const Tensor<T> both = ad::ConcatCols(
      tape, {ad::ConcatRows(tape, outputs[0]), ad::ConcatRows(tape, outputs[1])});
  EncoderOutput<T> enc;
  enc.memory = ad::GatherRows(tape, both, to_batch_major);
  enc.processed = ad::MatMul(tape, enc.memory, P("attention.memory.weight"));
  enc.layout = layout;
  return enc;
}

template <typename T>
DecoderState<T> LandmarkModel<T>::InitialState(const EncoderOutput<T>& enc) const {
  const int batch = enc.layout.batch, dec = config_.decoder_lstm_dim;
  DecoderState<T> s;
  s.h1 = Tensor<T>::Zeros({batch, dec});
  s.c1 = Tensor<T>::Zeros({batch, dec});
  s.h2 = Tensor<T>::Zeros({batch, dec});
  s.c2 = Tensor<T>::Zeros({batch, dec});
  s.context = Tensor<T>::Zeros({batch, config_.encoder_lstm_dim});
  s.prev_alignment = Tensor<T>::Zeros({batch, enc.layout.time});
  s.cum_alignment = Tensor<T>::Zeros({batch, enc.layout.time});
  return s;
}

template <typename T>
AttentionOutput<T> LandmarkModel<T>::Attend(Tape<T>& tape, const Tensor<T>& query, const EncoderOutput<T>& enc,
                                            const Tensor<T>& prev_alignment, const Tensor<T>& cum_alignment) {
  const int batch = enc.layout.batch, steps = enc.layout.time;
  if (!(prev_alignment.shape() == Shape{batch, steps}) || !(cum_alignment.shape() == Shape{batch, steps})) {
    Fail(ErrorKind::kShape, "attention: alignments " + ad::ToString(prev_alignment.shape()) + " / " +
                                ad::ToString(cum_alignment.shape()) + " for memory of " +
                                std::to_string(steps) + " steps");
  }
  const Tensor<T> pq = ad::MatMul(tape, query, P("attention.query.weight"));
  const Tensor<T> stacked = ad::ConcatCols(tape, {ad::Reshape(tape, prev_alignment, batch * steps, 1),
                                                  ad::Reshape(tape, cum_alignment, batch * steps, 1)});
  const Tensor<T> location = ad::MatMul(
      tape, ad::Conv1d(tape, stacked, P("attention.location_conv.weight"), Tensor<T>(), enc.layout),
      P("attention.location_dense.weight"));
  const Tensor<T> hidden =
      ad::Tanh(tape, ad::AddGroupBroadcast(tape, ad::Add(tape, enc.processed, location), pq, steps));
  const Tensor<T> energies = ad::Reshape(tape, ad::MatMul(tape, hidden, P("attention.v.weight")), batch, steps);
  AttentionOutput<T> out;
  out.alignment = ad::Softmax(tape, energies, enc.layout.lengths);
  out.context = ad::GroupMatVec(tape, out.alignment, enc.memory);
  return out;
}

template <typename T>
Tensor<T> LandmarkModel<T>::Prenet(Tape<T>& tape, const Tensor<T>& frames, const ForwardOptions& opts) {
  if (!config_.use_prenet) Fail(ErrorKind::kContract, "prenet is disabled in this model");
  Tensor<T> x = frames;
  for (const char* name : {"prenet.fc0.weight", "prenet.fc1.weight"}) {
    x = ad::Relu(tape, ad::MatMul(tape, x, P(name)));
    const bool drop = opts.training && config_.prenet_dropout > 0;
    x = ad::Dropout(tape, x, config_.prenet_dropout, DropoutRng(opts, drop), drop);
  }
  return x;
}

template <typename T>
StepOutput<T> LandmarkModel<T>::DecoderStep(Tape<T>& tape, const Tensor<T>& prev_frame,
                                            const DecoderState<T>& state, const EncoderOutput<T>& enc,
                                            const ForwardOptions& opts) {
  if (prev_frame.cols() != config_.output_width || prev_frame.rows() != enc.layout.batch) {
    Fail(ErrorKind::kShape, "decoder step: previous frame " + ad::ToString(prev_frame.shape()) +
                                " but output width is " + std::to_string(config_.output_width));
  }
  const bool drop = opts.training && config_.decoder_dropout > 0;
  const Tensor<T> frame_in = config_.use_prenet ? Prenet(tape, prev_frame, opts) : prev_frame;

  StepOutput<T> out;
  DecoderState<T>& s = out.state;
  const auto l1 = ad::LstmCell(tape, ad::ConcatCols(tape, {frame_in, state.context}), state.h1, state.c1,
                               P("decoder.lstm1.weight"), P("decoder.lstm1.bias"));
  s.h1 = ad::Dropout(tape, l1.h, config_.decoder_dropout, DropoutRng(opts, drop), drop);
  s.c1 = l1.c;

  const AttentionOutput<T> att = Attend(tape, s.h1, enc, state.prev_alignment, state.cum_alignment);
  s.context = att.context;
  s.prev_alignment = att.alignment;
  s.cum_alignment = ad::Add(tape, state.cum_alignment, att.alignment);

  const auto l2 = ad::LstmCell(tape, ad::ConcatCols(tape, {s.h1, s.context}), state.h2, state.c2,
                               P("decoder.lstm2.weight"), P("decoder.lstm2.bias"));
  s.h2 = ad::Dropout(tape, l2.h, config_.decoder_dropout, DropoutRng(opts, drop), drop);
  s.c2 = l2.c;

  const Tensor<T> features = ad::ConcatCols(tape, {s.h2, s.context});
  out.frame = ad::AddBias(tape, ad::MatMul(tape, features, P("decoder.proj.weight")), P("decoder.proj.bias"));
  out.gate = ad::AddBias(tape, ad::MatMul(tape, features, P("gate.weight")), P("gate.bias"));
  return out;
}

template <typename T>
Tensor<T> LandmarkModel<T>::Postnet(Tape<T>& tape, const Tensor<T>& frames, const SeqLayout& layout,
                                    const ForwardOptions& opts) {
  if (!config_.use_postnet) Fail(ErrorKind::kContract, "postnet is disabled in this model");
  if (frames.cols() != config_.output_width || frames.rows() != layout.rows()) {
    Fail(ErrorKind::kShape, "postnet: frames " + ad::ToString(frames.shape()) + " do not match layout");
  }
  Tensor<T> x = frames;
  for (int i = 0; i < config_.postnet_layers; ++i) {
    x = ConvBlock(tape, "postnet.conv" + std::to_string(i), x, layout, opts.training);
    if (i + 1 < config_.postnet_layers) x = ad::Tanh(tape, x);
    const bool drop = opts.training && config_.postnet_dropout > 0;
    x = ad::Dropout(tape, x, config_.postnet_dropout, DropoutRng(opts, drop), drop);
  }
  return x;
}

template <typename T>
TeacherForcedOutput<T> LandmarkModel<T>::ForwardTeacherForced(Tape<T>& tape, const TokenBatch& tokens,
                                                              const FrameBatch<T>& targets,
                                                              const ForwardOptions& opts) {
  if (targets.width != config_.output_width) {
    Fail(ErrorKind::kShape, "target width " + std::to_string(targets.width) + " but model outputs " +
                                std::to_string(config_.output_width));
  }
  if (targets.batch != tokens.batch) Fail(ErrorKind::kShape, "token and frame batches differ in size");
  if (targets.steps == 0) Fail(ErrorKind::kContract, "teacher forcing needs at least one target frame");

  const EncoderOutput<T> enc = Encode(tape, tokens, opts);
  const int batch = targets.batch;
  const Tensor<T> target = Tensor<T>::Constant({targets.steps * batch, targets.width}, targets.values);
  DecoderState<T> state = InitialState(enc);
  Tensor<T> prev = Tensor<T>::Zeros({batch, config_.output_width});

  std::vector<Tensor<T>> frames, gates, aligns;
  for (int t = 0; t < targets.steps; ++t) {
    if (t > 0) prev = ad::SliceRows(tape, target, (t - 1) * batch, batch);
    StepOutput<T> step = DecoderStep(tape, prev, state, enc, opts);
    frames.push_back(step.frame);
    gates.push_back(step.gate);
    aligns.push_back(step.state.prev_alignment);
    state = std::move(step.state);
  }
  TeacherForcedOutput<T> out;
  out.batch = batch;
  out.steps = targets.steps;
  out.frames = ad::ConcatRows(tape, frames);
  out.gates = ad::ConcatRows(tape, gates);
  out.alignments = ad::ConcatRows(tape, aligns);
  if (config_.use_postnet) {
    out.postnet_frames = ad::Add(tape, out.frames, Postnet(tape, out.frames, targets.Layout(), opts));
  }
  return out;
}

template <typename T>
InferenceResult LandmarkModel<T>::Infer(std::span<const int> tokens, double gate_threshold, int max_frames) {
  if (max_frames <= 0) Fail(ErrorKind::kContract, "max_frames must be positive");
  Tape<T> tape(false);
  const ForwardOptions opts{false, nullptr};
  const EncoderOutput<T> enc = Encode(tape, TokenBatch::Single(tokens), opts);
  DecoderState<T> state = InitialState(enc);
  Tensor<T> prev = Tensor<T>::Zeros({1, config_.output_width});

  InferenceResult result;
  std::vector<Tensor<T>> frames;
  for (int t = 0; t < max_frames; ++t) {
    StepOutput<T> step = DecoderStep(tape, prev, state, enc, opts);
    frames.push_back(step.frame);
    const double logit = static_cast<double>(step.gate.item());
    const double prob = 1.0 / (1.0 + std::exp(-logit));
    result.gate_probabilities.push_back(prob);
    prev = step.frame;
    state = std::move(step.state);
    if (prob > gate_threshold) {
      result.stopped_by_gate = true;
      break;
    }
  }
  Tensor<T> all = ad::ConcatRows(tape, frames);
  if (config_.use_postnet) {
    const SeqLayout layout{1, all.rows(), {all.rows()}, true};
    all = ad::Add(tape, all, Postnet(tape, all, layout, opts));
  }
  result.frames = corpus::Trajectory(all.rows(), all.cols());
  for (size_t i = 0; i < all.size(); ++i) result.frames.data[i] = static_cast<double>(all.value()[i]);
  return result;
}

template struct FrameBatch<float>;
template struct FrameBatch<double>;
template class LandmarkModel<float>;
template class LandmarkModel<double>;

}  // namespace liptraj::net
