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
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "liptraj/binary_io.hpp"
#include "liptraj/corpus.hpp"
#include "liptraj/rng.hpp"
#include "test_util.hpp"

using namespace liptraj;
using namespace liptraj::corpus;

namespace {

// Rotation about a unit axis by Rodrigues' formula, row-major.
std::array<double, 9> AxisAngle(double ax, double ay, double az, double angle) {
  const double c = std::cos(angle), s = std::sin(angle), t = 1 - c;
  return {t * ax * ax + c,      t * ax * ay - s * az, t * ax * az + s * ay,
          t * ax * ay + s * az, t * ay * ay + c,      t * ay * az - s * ax,
          t * ax * az - s * ay, t * ay * az + s * ax, t * az * az + c};
}

std::array<double, 9> MatMul3(const std::array<double, 9>& a, const std::array<double, 9>& b) {
  std::array<double, 9> r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
  return r;
}

RawFrame FrameWithPose(const PoseParams& pose, const LandmarkPoints& head) {
  RawFrame f;
  f.pose = pose;
  f.points = ApplyPose(pose, head);
  f.success = true;
  f.confidence = 1.0;
  return f;
}

ClipRecord ClipWithConfidences(std::vector<double> conf) {
  ClipRecord c;
  c.clip_id = "c";
  c.speaker_id = "s";
  c.transcript = "A";
  for (size_t i = 0; i < conf.size(); ++i) {
    RawFrame f;
    f.frame = static_cast<int>(i);
    f.timestamp = i / 25.0;
    f.confidence = conf[i];
    f.success = true;
    c.frames.push_back(f);
  }
  return c;
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("golden OpenFace fixture parses field by field") {
    const auto frames = ParseOpenFaceCsv(io::ReadFileText(test::DataPath("openface_golden.csv")));
    REQUIRE(frames.size() == 2);
    const RawFrame& a = frames[0];
    CHECK(a.frame == 1);
    CHECK(a.face_id == 0);
    CHECK(a.timestamp == 0.0);
    CHECK(a.confidence == 0.98);
    CHECK(a.success);
    CHECK(a.pose == PoseParams{12.5, -4.75, 610.5, 0.0625, -0.25, 0.03125});
    const RawFrame& b = frames[1];
    CHECK(b.frame == 2);
    CHECK(b.timestamp == 0.04);
    CHECK(b.confidence == 0.65);
    CHECK_FALSE(b.success);
    CHECK(b.pose == PoseParams{-3.25, 8, 598.125, -0.125, 0.1875, -0.015625});
    for (int r = 0; r < 2; ++r) {
      for (int k = 0; k < kNumLandmarks; ++k) {
        const Vec3& p = frames[static_cast<size_t>(r)].points[static_cast<size_t>(k)];
        CHECK(p.x == k * 0.5 + r);
        CHECK(p.y == -k * 0.25 - 2 * r);
        CHECK(p.z == 600 + k * 0.125 + r * 0.5);
      }
    }
  }

  TEST_CASE("OpenFace parse errors") {
    const std::string text = io::ReadFileText(test::DataPath("openface_golden.csv"));
    const std::string header = text.substr(0, text.find('\n') + 1);
    test::CheckError(ErrorKind::kEmptyInput, [&] { ParseOpenFaceCsv(header); });
    std::string missing = text;
    missing.replace(missing.find("pose_Rx"), 7, "pose_Qx");
    const std::string what = test::CheckError(ErrorKind::kFormat, [&] { ParseOpenFaceCsv(missing); });
    CHECK(what.find("pose_Rx") != std::string::npos);
    std::string bad = text;
    bad.replace(bad.find("12.5"), 4, "12.x");
    test::CheckError(ErrorKind::kParse, [&] { ParseOpenFaceCsv(bad); });
  }

  TEST_CASE("transcripts") {
    CHECK(ParseTranscript("Text:  it's not just my work\nConf: 4\n") == "IT'S NOT JUST MY WORK");
    CHECK(ParseTranscript("Text: forty two") == "FORTY TWO");
    CHECK(ParseTranscript("Text: \t a   b  \n") == "A B");
    test::CheckError(ErrorKind::kFormat, [] { ParseTranscript("Conf: 3\n"); });
  }

  TEST_CASE("clip filter") {
    CHECK(FilterClip(ClipWithConfidences({0.9, 0.9, 0.9})).accepted);
    const FilterResult r = FilterClip(ClipWithConfidences({0.9, 0.65, 0.9}), 0.7);
    CHECK_FALSE(r.accepted);
    CHECK(r.offending_frames == std::vector<int>{1});
    CHECK(FilterClip(ClipWithConfidences({0.0, 0.1}), 0.0).accepted);
    ClipRecord failed = ClipWithConfidences({0.9, 0.9});
    failed.frames[1].success = false;
    CHECK_FALSE(FilterClip(failed, 0.0).accepted);
    test::CheckError(ErrorKind::kContract, [] { FilterClip(ClipWithConfidences({1.0}), 1.5); });
  }

  TEST_CASE("filter is monotone in the threshold") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> conf;
      for (int i = 0; i < 6; ++i) conf.push_back(rng.Uniform());
      const ClipRecord clip = ClipWithConfidences(conf);
      const double lo = rng.Uniform(), hi = lo + (1 - lo) * rng.Uniform();
      if (!FilterClip(clip, lo).accepted) CHECK_FALSE(FilterClip(clip, hi).accepted);
    }
  }

  TEST_CASE("rotation matrix matches composed axis rotations") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
      const PoseParams p{0, 0, 0, rng.Uniform(-3, 3), rng.Uniform(-3, 3), rng.Uniform(-3, 3)};
      const auto oracle =
          MatMul3(AxisAngle(0, 0, 1, p.rz), MatMul3(AxisAngle(0, 1, 0, p.ry), AxisAngle(1, 0, 0, p.rx)));
      const auto r = RotationMatrix(p);
      for (int i = 0; i < 9; ++i) CHECK(r[static_cast<size_t>(i)] == doctest::Approx(oracle[static_cast<size_t>(i)]).epsilon(1e-12));
    }
  }

  TEST_CASE("reprojection examples") {
    LandmarkPoints pts{};
    for (int k = 0; k < kNumLandmarks; ++k) pts[static_cast<size_t>(k)] = {k * 1.0, -k * 2.0, 3.0 + k};
    CHECK(ReprojectFrame(FrameWithPose({}, pts)).at(5) == pts[5]);

    RawFrame shifted;
    shifted.pose.tx = 10;
    shifted.points[0] = {10, 0, 0};
    const Vec3 z = ReprojectFrame(shifted)[0];
    CHECK(z == Vec3{0, 0, 0});

    const PoseParams quarter{0, 0, 0, 0, 0, std::numbers::pi / 2};
    const auto back = ReprojectFrame(FrameWithPose(quarter, pts));
    for (int k = 0; k < kNumLandmarks; ++k) {
      CHECK(std::abs(back[static_cast<size_t>(k)].x - pts[static_cast<size_t>(k)].x) <= 1e-9);
      CHECK(std::abs(back[static_cast<size_t>(k)].y - pts[static_cast<size_t>(k)].y) <= 1e-9);
      CHECK(std::abs(back[static_cast<size_t>(k)].z - pts[static_cast<size_t>(k)].z) <= 1e-9);
    }
    RawFrame nan_pose;
    nan_pose.pose.ry = std::nan("");
    test::CheckError(ErrorKind::kNumericDomain, [&] { ReprojectFrame(nan_pose); });
  }

  TEST_CASE("resampling") {
    std::vector<TimedPoints> two(2);
    two[1].t = 0.025;
    for (auto& p : two[1].points) p = {1, 1, 1};
    const auto out = Resample80Fps(two);
    REQUIRE(out.size() == 3);
    CHECK(out[0][7].x == 0.0);
    CHECK(out[1][7].x == 0.5);
    CHECK(out[2][7].y == 1.0);

    std::vector<TimedPoints> grid(9);
    Rng rng(2);
    for (size_t i = 0; i < grid.size(); ++i) {
      grid[i].t = 0.5 + static_cast<double>(i) / 80.0;
      for (auto& p : grid[i].points) p = {rng.Normal(), rng.Normal(), rng.Normal()};
    }
    const auto same = Resample80Fps(grid);
    REQUIRE(same.size() == grid.size());
    for (size_t i = 0; i < grid.size(); ++i) CHECK(same[i] == grid[i].points);

    std::vector<TimedPoints> constant(20);
    for (size_t i = 0; i < constant.size(); ++i) {
      constant[i].t = static_cast<double>(i) / 29.97;
      for (auto& p : constant[i].points) p = {3.25, -1.5, 7};
    }
    for (const auto& f : Resample80Fps(constant)) CHECK(f[30] == Vec3{3.25, -1.5, 7});

    std::vector<TimedPoints> affine(13);
    for (size_t i = 0; i < affine.size(); ++i) {
      affine[i].t = static_cast<double>(i) / 25.0;
      for (auto& p : affine[i].points) p.x = 2.0 * affine[i].t;
    }
    const auto lin = Resample80Fps(affine);
    CHECK(lin.size() == 39);
    for (size_t k = 0; k < lin.size(); ++k) CHECK(lin[k][0].x == doctest::Approx(2.0 * k / 80.0).epsilon(1e-12));

    test::CheckError(ErrorKind::kInsufficientData, [&] { Resample80Fps(std::span(two).first(1)); });
    std::swap(two[0].t, two[1].t);
    test::CheckError(ErrorKind::kFormat, [&] { Resample80Fps(two); });
  }

  TEST_CASE("speaker reference") {
    LandmarkPoints a{}, b{};
    a[48].x = 1.0;
    b[48].x = 3.0;
    const std::vector<LandmarkPoints> two{a, b};
    CHECK(SpeakerReference("s", two).points[48].x == 2.0);
    CHECK(SpeakerReference("s", std::span(two).first(1)).points == a);
    const std::vector<LandmarkPoints> ten(10, b);
    CHECK(SpeakerReference("s", ten).points == b);
    test::CheckError(ErrorKind::kInsufficientData, [] { SpeakerReference("s", {}); });
  }

  TEST_CASE("normalize and denormalize") {
    Rng rng(9);
    ReferenceFrame ref{"s", {}};
    for (auto& p : ref.points) p = {SnapToGrid(rng.Normal(0, 30)), SnapToGrid(rng.Normal(0, 30)), SnapToGrid(rng.Normal(600, 5))};
    std::vector<LandmarkPoints> frames(4);
    for (auto& f : frames)
      for (auto& p : f) p = {SnapToGrid(rng.Normal(0, 30)), SnapToGrid(rng.Normal(0, 30)), SnapToGrid(rng.Normal(600, 5))};
    frames[0] = ref.points;

    const Trajectory lips = Normalize(frames, ref, LandmarkSet::kLips);
    CHECK(lips.cols == 60);
    CHECK(Normalize(frames, ref, LandmarkSet::kAll).cols == 204);
    for (const double v : lips.row(0)) CHECK(v == 0.0);

    for (const LandmarkSet set : {LandmarkSet::kLips, LandmarkSet::kAll}) {
      const Trajectory back = Denormalize(Normalize(frames, ref, set), ref, set);
      const int first = FirstLandmark(set);
      for (int f = 0; f < 4; ++f) {
        for (int k = 0; k < LandmarkCount(set); ++k) {
          const Vec3& p = frames[static_cast<size_t>(f)][static_cast<size_t>(first + k)];
          CHECK(back.at(f, 3 * k) == p.x);
          CHECK(back.at(f, 3 * k + 1) == p.y);
          CHECK(back.at(f, 3 * k + 2) == p.z);
        }
      }
    }

    Trajectory zeros(2, 60);
    const Trajectory at_ref = Denormalize(zeros, ref, LandmarkSet::kLips);
    CHECK(at_ref.at(1, 3) == ref.points[49].x);
    zeros.at(0, 4) = 1.0;
    const Trajectory bumped = Denormalize(zeros, ref, LandmarkSet::kLips);
    CHECK(bumped.at(0, 4) == ref.points[49].y + 1.0);
    CHECK(bumped.at(0, 3) == ref.points[49].x);

    test::CheckError(ErrorKind::kShape, [&] { Denormalize(zeros, ref, LandmarkSet::kAll); });
    test::CheckError(ErrorKind::kConsistency, [&] { NormalizeClip("c", "other", frames, ref, LandmarkSet::kLips); });
  }

  TEST_CASE("lip selection takes landmarks 48 to 67") {
    Trajectory all(2, 204);
    for (size_t i = 0; i < all.data.size(); ++i) all.data[i] = static_cast<double>(i);
    const Trajectory lips = SelectLips(all);
    CHECK(lips.cols == 60);
    CHECK(lips.at(0, 0) == 144.0);
    CHECK(lips.at(1, 59) == 204.0 + 203.0);
  }

  TEST_CASE("charset and text encoding") {
    const Charset cs;
    CHECK(cs.size() == 30);
    const auto ab = EncodeText("AB", cs);
    CHECK(ab == std::vector<int>{*cs.Lookup('A'), *cs.Lookup('B')});
    CHECK(EncodeText("", cs).empty());
    CHECK(cs.Lookup('?') == cs.Lookup('.'));
    CHECK(cs.Lookup('!') == cs.Lookup('.'));
    CHECK(cs.Lookup('-') == cs.Lookup(','));
    const std::string what = test::CheckError(ErrorKind::kVocabulary, [&] { EncodeText("A#B", cs); });
    CHECK(what.find("offset 1") != std::string::npos);
  }

  TEST_CASE("synthetic corpus") {
    const Charset cs;
    const auto a = SynthCorpus(77, 6, cs);
    const auto b = SynthCorpus(77, 6, cs);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].name == b[i].name);
      CHECK(a[i].contents == b[i].contents);
    }
    CHECK(SynthCorpus(78, 6, cs)[0].contents != a[0].contents);
    const BuildResult built = BuildDatasetFromFiles(a, DatasetConfig{});
    CHECK(built.rejections.empty());
    CHECK(built.dataset.clips.size() == 6);
    test::CheckError(ErrorKind::kContract, [&] { SynthCorpus(1, 1, cs); });
  }

  TEST_CASE("vowel opens the lips wider than a bilabial") {
    const SynthSpeaker spk{"s", 1.0, 0.0};
    SynthClipOptions opt;
    opt.source_fps = 80.0;
    const ClipRecord open = SynthClip("a", "A", spk, opt);
    const ClipRecord closed = SynthClip("m", "M", spk, opt);
    double max_open = 0, max_closed = 0;
    for (const auto& f : open.frames) max_open = std::max(max_open, LipAperture(ReprojectFrame(f)));
    for (const auto& f : closed.frames) max_closed = std::max(max_closed, LipAperture(ReprojectFrame(f)));
    CHECK(max_open > max_closed);
    CHECK(CharacterTemplate('A').aperture > CharacterTemplate('M').aperture);
  }

  TEST_CASE("dataset build, split and file round trip") {
    const Charset cs;
    const auto files = SynthCorpus(3, 12, cs);
    DatasetConfig cfg;
    cfg.seed = 21;
    const Dataset ds = BuildDatasetFromFiles(files, cfg).dataset;
    CHECK(ds.Indices(Split::kValidation).size() == 2);
    CHECK(ds.Indices(Split::kTrain).size() == 10);
    for (const auto& c : ds.clips) {
      CHECK(c.displacements.cols == 60);
      for (const int t : c.tokens) CHECK(t < cs.size());
    }
    const auto bytes = SerializeDataset(ds);
    CHECK(SerializeDataset(DeserializeDataset(bytes)) == bytes);
    const Dataset loaded = DeserializeDataset(bytes);
    for (size_t i = 0; i < ds.clips.size(); ++i) CHECK(loaded.clips[i].displacements.data == ds.clips[i].displacements.data);
    CHECK(SerializeDataset(BuildDatasetFromFiles(files, cfg).dataset) == bytes);
    auto corrupt = bytes;
    corrupt[0] = 'X';
    test::CheckError(ErrorKind::kFormat, [&] { DeserializeDataset(corrupt); });
    test::CheckError(ErrorKind::kFormat, [&] { DeserializeDataset(std::span(bytes).first(bytes.size() - 3)); });

    cfg.landmark_set = LandmarkSet::kAll;
    CHECK(BuildDatasetFromFiles(files, cfg).dataset.clips[0].displacements.cols == 204);
  }

  TEST_CASE("dataset build from a directory reports rejections") {
    const auto dir = test::TempDir("corpus_dir");
    WriteSynthCorpus(dir, 4, 5, Charset());
    // Drop one clip below the confidence threshold and corrupt another.
    const std::string low_path = (std::filesystem::path(dir) / "clip_001.csv").string();
    std::string low = io::ReadFileText(low_path);
    const size_t row = low.find('\n') + 1;
    size_t field = row;
    for (int i = 0; i < 3; ++i) field = low.find(',', field) + 1;
    low.replace(field, low.find(',', field) - field, " 0.500");
    io::WriteFileText(low_path, low);
    io::WriteFileText((std::filesystem::path(dir) / "clip_002.csv").string(), "frame, junk\n1, 2\n");

    const BuildResult r = BuildDataset(dir, DatasetConfig{});
    CHECK(r.dataset.clips.size() == 3);
    REQUIRE(r.rejections.size() == 2);
    CHECK(r.rejections[0].clip_id == "clip_001");
    CHECK(r.rejections[1].clip_id == "clip_002");
  }

  TEST_CASE("zero surviving clips is an error") {
    const Charset cs;
    auto files = SynthCorpus(5, 3, cs);
    std::vector<ClipRecord> clips;
    for (int i = 0; i < 3; ++i) {
      ClipRecord c;
      c.clip_id = "c" + std::to_string(i);
      c.speaker_id = "s";
      c.transcript = "A";
      c.frames = ParseOpenFaceCsv(files[static_cast<size_t>(2 * i)].contents);
      c.frames[1].confidence = 0.1;
      clips.push_back(c);
    }
    const std::string what =
        test::CheckError(ErrorKind::kInsufficientData, [&] { BuildDatasetFromClips(clips, DatasetConfig{}); });
    CHECK(what.find("zero clips survive") != std::string::npos);
  }
}
