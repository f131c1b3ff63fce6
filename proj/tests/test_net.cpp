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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "liptraj/net.hpp"
#include "test_util.hpp"

using namespace liptraj;
using namespace liptraj::net;
using ad::Tape;
using ad::Tensor;

namespace {

ModelConfig TinyConfig() {
  ModelConfig c = ModelConfig::Toy();
  c.embedding_dim = 6;
  c.encoder_filters = 6;
  c.encoder_kernel = 3;
  c.encoder_lstm_dim = 6;
  c.decoder_lstm_dim = 8;
  c.attention_dim = 5;
  c.location_filters = 3;
  c.location_kernel = 3;
  c.prenet_dim = 5;
  c.postnet_filters = 4;
  c.postnet_kernel = 3;
  return c;
}

corpus::Trajectory RandomFrames(int rows, int width, uint64_t seed) {
  Rng rng(seed);
  corpus::Trajectory t(rows, width);
  for (double& v : t.data) v = rng.Normal(0.0, 0.5);
  return t;
}

template <typename T>
void Fill(ad::ParamStore<T>& ps, const std::string& name, T value) {
  auto v = ps.Get(name).mutable_value();
  std::fill(v.begin(), v.end(), value);
}

template <typename T>
std::vector<T> Values(const Tensor<T>& t) {
  return {t.value().begin(), t.value().end()};
}

}  // namespace

TEST_SUITE("net") {
  TEST_CASE("presets validate and round-trip through json") {
    for (const char* name : {"full", "toy"}) {
      const ModelConfig c = ModelConfig::Preset(name);
      c.Validate();
      CHECK(ModelConfig::FromJson(c.ToJson()) == c);
    }
    CHECK(ModelConfig::Full().output_width == 60);
    CHECK(ModelConfig::Full().prenet_dim == 256);
    CHECK_FALSE(ModelConfig::Full().use_prenet);
    CHECK_FALSE(ModelConfig::Full().use_postnet);
    test::CheckError(ErrorKind::kUsage, [] { ModelConfig::Preset("huge"); });
    nlohmann::json j = ModelConfig::Toy().ToJson();
    j["bogus"] = 1;
    test::CheckError(ErrorKind::kUsage, [&] { ModelConfig::FromJson(j); });
  }

  TEST_CASE("encoder output shapes") {
    LandmarkModel<float> model(ModelConfig::Toy(), 1);
    Tape<float> tape(false);
    const std::vector<int> five{3, 4, 5, 6, 7}, one{2};
    const auto enc = model.Encode(tape, TokenBatch::Single(five), {});
    CHECK(enc.memory.shape() == ad::Shape{5, 32});
    CHECK(enc.processed.shape() == ad::Shape{5, 32});
    CHECK(model.Encode(tape, TokenBatch::Single(one), {}).memory.shape() == ad::Shape{1, 32});
    const std::vector<int> empty;
    test::CheckError(ErrorKind::kContract, [&] { model.Encode(tape, TokenBatch::Single(empty), {}); });
    const std::vector<int> outside{1, 500};
    test::CheckError(ErrorKind::kShape, [&] { model.Encode(tape, TokenBatch::Single(outside), {}); });
  }

  TEST_CASE("alignments are distributions over the valid characters") {
    LandmarkModel<double> model(ModelConfig::Toy(), 2);
    const auto a = RandomFrames(7, 60, 1), b = RandomFrames(4, 60, 2);
    const auto tokens = TokenBatch::FromSequences({{1, 2, 3, 4, 5, 6}, {7, 8, 9}});
    const auto frames = FrameBatch<double>::FromTrajectories({&a, &b});
    Tape<double> tape(false);
    const auto out = model.ForwardTeacherForced(tape, tokens, frames, {});
    CHECK(out.alignments.shape() == ad::Shape{7 * 2, 6});
    std::vector<double> cum(2, 0.0);
    for (int t = 0; t < 7; ++t) {
      for (int s = 0; s < 2; ++s) {
        double row = 0.0;
        for (int j = 0; j < 6; ++j) {
          const double v = out.alignments.at(t * 2 + s, j);
          CHECK(v >= 0.0);
          if (j >= tokens.lengths[static_cast<size_t>(s)]) CHECK(v == 0.0);
          row += v;
        }
        CHECK(std::abs(row - 1.0) < 1e-9);
        cum[static_cast<size_t>(s)] += row;
      }
    }
    for (const double c : cum) CHECK(std::abs(c - 7.0) < 1e-4);
  }

  TEST_CASE("zero attention projections spread evenly") {
    LandmarkModel<double> model(ModelConfig::Toy(), 3);
    Fill(model.params(), "attention.v.weight", 0.0);
    Tape<double> tape(false);
    const std::vector<int> tokens{4, 5, 6, 7};
    const auto enc = model.Encode(tape, TokenBatch::Single(tokens), {});
    const auto state = model.InitialState(enc);
    const auto query = Tensor<double>::Constant({1, 64}, std::vector<double>(64, 0.3));
    const auto att = model.Attend(tape, query, enc, state.prev_alignment, state.cum_alignment);
    for (int j = 0; j < 4; ++j) CHECK(att.alignment.at(0, j) == doctest::Approx(0.25));
    for (int d = 0; d < 32; ++d) {
      double mean = 0.0;
      for (int j = 0; j < 4; ++j) mean += enc.memory.at(j, d) / 4.0;
      CHECK(att.context.at(0, d) == doctest::Approx(mean).epsilon(1e-12));
    }
  }

  TEST_CASE("a sharp energy peak selects one memory row") {
    ModelConfig c = ModelConfig::Toy();
    LandmarkModel<double> model(c, 4);
    auto& ps = model.params();
    Fill(ps, "attention.query.weight", 0.0);
    Fill(ps, "attention.location_dense.weight", 0.0);
    Fill(ps, "attention.v.weight", 0.0);
    ps.Get("attention.v.weight").mutable_value()[0] = 60.0;
    const int steps = 5, focus = 3;
    Rng rng(9);
    std::vector<double> memory(static_cast<size_t>(steps) * 32), processed(static_cast<size_t>(steps) * 32, 0.0);
    for (double& v : memory) v = rng.Normal();
    processed[static_cast<size_t>(focus) * 32] = 10.0;
    EncoderOutput<double> enc;
    enc.memory = Tensor<double>::Constant({steps, 32}, memory);
    enc.processed = Tensor<double>::Constant({steps, 32}, processed);
    enc.layout = {1, steps, {steps}, false};
    const auto state = model.InitialState(enc);
    Tape<double> tape(false);
    const auto att = model.Attend(tape, Tensor<double>::Zeros({1, 64}), enc, state.prev_alignment, state.cum_alignment);
    CHECK(att.alignment.at(0, focus) > 1.0 - 1e-12);
    for (int d = 0; d < 32; ++d) CHECK(att.context.at(0, d) == doctest::Approx(enc.memory.at(focus, d)).epsilon(1e-9));
    test::CheckError(ErrorKind::kShape, [&] {
      model.Attend(tape, Tensor<double>::Zeros({1, 64}), enc, Tensor<double>::Zeros({1, 4}), state.cum_alignment);
    });
  }

  TEST_CASE("teacher forcing emits one frame and gate per target step") {
    LandmarkModel<float> model(ModelConfig::Toy(), 5);
    const auto a = RandomFrames(9, 60, 3), b = RandomFrames(6, 60, 4);
    const auto tokens = TokenBatch::FromSequences({{1, 2, 3}, {4, 5, 6, 7}});
    const auto frames = FrameBatch<float>::FromTrajectories({&a, &b});
    Tape<float> tape(false);
    const auto out = model.ForwardTeacherForced(tape, tokens, frames, {});
    CHECK(out.steps == 9);
    CHECK(out.frames.shape() == ad::Shape{18, 60});
    CHECK(out.gates.shape() == ad::Shape{18, 1});
    CHECK_FALSE(out.postnet_frames.defined());

    const auto wide = RandomFrames(3, 204, 5);
    test::CheckError(ErrorKind::kShape, [&] {
      model.ForwardTeacherForced(tape, TokenBatch::Single(std::vector<int>{1}), FrameBatch<float>::Single(wide), {});
    });
    const auto enc = model.Encode(tape, TokenBatch::Single(std::vector<int>{1, 2}), {});
    test::CheckError(ErrorKind::kShape, [&] {
      model.DecoderStep(tape, Tensor<float>::Zeros({1, 59}), model.InitialState(enc), enc, {});
    });
  }

  TEST_CASE("zero output weights leave the biases") {
    LandmarkModel<double> model(ModelConfig::Toy(), 6);
    auto& ps = model.params();
    Fill(ps, "decoder.proj.weight", 0.0);
    Fill(ps, "gate.weight", 0.0);
    auto bias = ps.Get("decoder.proj.bias").mutable_value();
    for (size_t i = 0; i < bias.size(); ++i) bias[i] = 0.01 * static_cast<double>(i);
    Fill(ps, "gate.bias", -0.75);
    Tape<double> tape(false);
    const auto a = RandomFrames(4, 60, 6);
    const auto out = model.ForwardTeacherForced(tape, TokenBatch::Single(std::vector<int>{3, 4}), FrameBatch<double>::Single(a), {});
    for (int t = 0; t < 4; ++t) {
      CHECK(out.gates.at(t, 0) == -0.75);
      for (int j = 0; j < 60; ++j) CHECK(out.frames.at(t, j) == 0.01 * j);
    }
  }

  TEST_CASE("postnet adds a residual of matching shape") {
    ModelConfig c = ModelConfig::Toy();
    c.use_postnet = true;
    LandmarkModel<double> model(c, 7);
    const auto a = RandomFrames(5, 60, 7);
    const auto tokens = TokenBatch::Single(std::vector<int>{1, 2, 3});
    const auto frames = FrameBatch<double>::Single(a);
    Tape<double> tape(false);
    const auto out = model.ForwardTeacherForced(tape, tokens, frames, {});
    CHECK(out.postnet_frames.shape() == out.frames.shape());
    CHECK(Values(out.postnet_frames) != Values(out.frames));
    Fill(model.params(), "postnet.conv4.weight", 0.0);
    const auto zeroed = model.ForwardTeacherForced(tape, tokens, frames, {});
    CHECK(Values(zeroed.postnet_frames) == Values(zeroed.frames));

    LandmarkModel<double> plain(ModelConfig::Toy(), 7);
    test::CheckError(ErrorKind::kContract, [&] { plain.Postnet(tape, out.frames, frames.Layout(), {}); });
    test::CheckError(ErrorKind::kContract, [&] { plain.Prenet(tape, Tensor<double>::Zeros({1, 60}), {}); });
  }

  TEST_CASE("prenet maps frames to its hidden width") {
    ModelConfig c = ModelConfig::Toy();
    c.use_prenet = true;
    LandmarkModel<float> model(c, 8);
    Tape<float> tape(false);
    const auto y = model.Prenet(tape, Tensor<float>::Zeros({3, 60}), {});
    CHECK(y.shape() == ad::Shape{3, 256});
    Rng rng(1);
    const auto dropped = model.Prenet(tape, Tensor<float>::Constant({1, 60}, std::vector<float>(60, 1.0f)), {true, &rng});
    CHECK(dropped.cols() == 256);
    CHECK(model.params().Contains("prenet.fc0.weight"));
    CHECK_FALSE(LandmarkModel<float>(ModelConfig::Toy(), 8).params().Contains("prenet.fc0.weight"));
  }

  TEST_CASE("inference stops on the gate or at the frame limit") {
    LandmarkModel<float> model(ModelConfig::Toy(), 9);
    Fill(model.params(), "gate.weight", 0.0f);
    const std::vector<int> tokens{8, 5, 12, 12, 15};
    Fill(model.params(), "gate.bias", 10.0f);
    const auto stop = model.Infer(tokens, 0.5, 50);
    CHECK(stop.frames.rows == 1);
    CHECK(stop.frames.cols == 60);
    CHECK(stop.stopped_by_gate);
    Fill(model.params(), "gate.bias", -10.0f);
    const auto run = model.Infer(tokens, 0.5, 37);
    CHECK(run.frames.rows == 37);
    CHECK_FALSE(run.stopped_by_gate);
    CHECK(run.duration_seconds() == doctest::Approx(37.0 / 80.0));
    CHECK(run.gate_probabilities.size() == 37);
    test::CheckError(ErrorKind::kContract, [&] { model.Infer(tokens, 0.5, 0); });
  }

  TEST_CASE("evaluation passes are deterministic") {
    LandmarkModel<float> model(ModelConfig::Toy(), 10);
    const std::vector<int> tokens{1, 2, 3, 4};
    const auto a = model.Infer(tokens, 0.5, 20), b = model.Infer(tokens, 0.5, 20);
    CHECK(a.frames.data == b.frames.data);
    LandmarkModel<float> twin(ModelConfig::Toy(), 10);
    CHECK(twin.Infer(tokens, 0.5, 20).frames.data == a.frames.data);
  }

  TEST_CASE("padding does not change a sequence's outputs") {
    LandmarkModel<double> model(ModelConfig::Toy(), 11);
    const auto a = RandomFrames(5, 60, 11), b = RandomFrames(9, 60, 12);
    const std::vector<int> ta{1, 2, 3}, tb{4, 5, 6, 7, 8, 9, 10};
    Tape<double> tape(false);
    const auto alone = model.ForwardTeacherForced(tape, TokenBatch::Single(ta), FrameBatch<double>::Single(a), {});
    const auto both = model.ForwardTeacherForced(tape, TokenBatch::FromSequences({ta, tb}),
                                                 FrameBatch<double>::FromTrajectories({&a, &b}), {});
    double worst = 0.0;
    for (int t = 0; t < 5; ++t) {
      for (int j = 0; j < 60; ++j) worst = std::max(worst, std::abs(alone.frames.at(t, j) - both.frames.at(t * 2, j)));
    }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("full model gradients match finite differences") {
    ModelConfig c = TinyConfig();
    c.use_prenet = true;
    c.use_postnet = true;
    c.encoder_dropout = 0.2;
    c.prenet_dropout = 0.3;
    c.decoder_dropout = 0.1;
    c.postnet_dropout = 0.1;
    LandmarkModel<double> model(c, 7);
    const auto a = RandomFrames(3, 60, 3), b = RandomFrames(2, 60, 4);
    const auto tokens = TokenBatch::FromSequences({{1, 2, 3, 4}, {5, 6}});
    const auto fb = FrameBatch<double>::FromTrajectories({&a, &b});
    const auto mask = fb.Layout().RowMask();
    std::vector<double> gates(static_cast<size_t>(fb.steps) * 2, 0.0);
    for (int t = 0; t < fb.steps; ++t) {
      for (int s = 0; s < 2; ++s) gates[static_cast<size_t>(t * 2 + s)] = t >= fb.lengths[static_cast<size_t>(s)] - 1;
    }
    const auto target = Tensor<double>::Constant({fb.steps * 2, 60}, fb.values);
    const auto gate_target = Tensor<double>::Constant({fb.steps * 2, 1}, gates);
    const auto result = ad::GradCheck(model.params(), [&](Tape<double>& tape) {
      Rng rng(99);
      const auto out = model.ForwardTeacherForced(tape, tokens, fb, {true, &rng});
      auto loss = ad::SmoothL1Loss(tape, out.frames, target, std::span<const uint8_t>(mask), 1.0);
      loss = ad::Add(tape, loss, ad::MseLoss(tape, out.postnet_frames, target, std::span<const uint8_t>(mask)));
      return ad::Add(tape, loss, ad::BceWithLogitsLoss(tape, out.gates, gate_target, std::span<const uint8_t>()));
    });
    INFO("worst " << result.worst_parameter << "[" << result.worst_index << "]");
    CHECK(result.max_relative_error < 1e-4);
  }

  TEST_CASE("checkpoints round-trip bit-exact") {
    ModelConfig c = ModelConfig::Toy();
    c.use_postnet = true;
    LandmarkModel<float> model(c, 12);
    model.params().SetFrozen("encoder.", true);
    CheckpointMetadata meta;
    meta.epoch = 17;
    meta.validation_loss = 0.0123;
    meta.frozen_prefixes = {"encoder."};
    meta.extra["note"] = "x";
    const auto bytes = SaveCheckpoint(model.params(), c, meta);
    const Checkpoint ck = LoadCheckpoint(bytes);
    CHECK(ck.config == c);
    CHECK(ck.metadata.epoch == 17);
    CHECK(ck.metadata.validation_loss == 0.0123);
    CHECK(ck.metadata.frozen_prefixes == meta.frozen_prefixes);
    CHECK(ck.metadata.extra == meta.extra);
    CHECK(ck.records.size() == model.params().Names().size());

    LandmarkModel<float> other(c, 99);
    ApplyCheckpoint(ck, other);
    for (const auto& name : model.params().Names()) {
      CHECK(Values(other.params().Get(name)) == Values(model.params().Get(name)));
    }
    CHECK(SaveCheckpoint(other.params(), c, meta) == bytes);

    ModelConfig wide = c;
    wide.output_width = 204;
    LandmarkModel<float> mismatch(wide, 1);
    test::CheckError(ErrorKind::kCompatibility, [&] { ApplyCheckpoint(ck, mismatch); });
    LandmarkModel<float> no_postnet(ModelConfig::Toy(), 1);
    test::CheckError(ErrorKind::kCompatibility, [&] { ApplyCheckpoint(ck, no_postnet); });

    auto corrupt = bytes;
    corrupt[0] ^= 0xff;
    test::CheckError(ErrorKind::kFormat, [&] { LoadCheckpoint(corrupt); });
    test::CheckError(ErrorKind::kFormat, [&] { LoadCheckpoint(std::span(bytes).first(bytes.size() - 3)); });
    auto trailing = bytes;
    trailing.push_back(0);
    test::CheckError(ErrorKind::kFormat, [&] { LoadCheckpoint(trailing); });
  }

  TEST_CASE("partial loads touch only the requested prefixes") {
    ModelConfig source_config = ModelConfig::Toy();
    LandmarkModel<float> source(source_config, 13);
    const Checkpoint ck = LoadCheckpoint(SaveCheckpoint(source.params(), source_config, {}));
    ModelConfig target_config = source_config;
    target_config.use_prenet = true;
    target_config.use_postnet = true;
    LandmarkModel<float> target(target_config, 14);
    LandmarkModel<float> fresh(target_config, 14);
    const auto report = LoadPartial(ck, target, {"encoder.", "gate."});
    CHECK(report.loaded.size() + report.fresh.size() == target.params().Names().size());
    for (const auto& name : report.loaded) {
      CHECK((name.rfind("encoder.", 0) == 0 || name.rfind("gate.", 0) == 0));
      CHECK(Values(target.params().Get(name)) == Values(source.params().Get(name)));
    }
    for (const auto& name : report.fresh) {
      CHECK(name.rfind("encoder.", 0) != 0);
      CHECK(Values(target.params().Get(name)) == Values(fresh.params().Get(name)));
    }
    CHECK(std::find(report.loaded.begin(), report.loaded.end(), "gate.weight") != report.loaded.end());
    CHECK(std::find(report.fresh.begin(), report.fresh.end(), "postnet.conv0.weight") != report.fresh.end());
  }
}
