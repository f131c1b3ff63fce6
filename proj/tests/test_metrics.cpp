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

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "liptraj/binary_io.hpp"
#include "liptraj/metrics.hpp"
#include "liptraj/rng.hpp"
#include "test_util.hpp"

using namespace liptraj;
using namespace liptraj::metrics;
using corpus::Trajectory;

namespace {

Trajectory Random(int rows, int cols, Rng& rng, double scale = 5.0) {
  Trajectory t(rows, cols);
  for (double& v : t.data) v = rng.Normal(0.0, scale);
  return t;
}

double OracleManhattan(const Trajectory& a, const Trajectory& b) {
  const int frames = std::min(a.rows, b.rows);
  double total = 0.0;
  for (int f = 0; f < frames; ++f) {
    for (int c = 0; c < a.cols; ++c) total += std::fabs(a.at(f, c) - b.at(f, c));
  }
  return total / frames;
}

corpus::ReferenceFrame Reference() {
  corpus::ReferenceFrame r;
  r.speaker_id = "s";
  r.points = corpus::NeutralFace(corpus::SynthSpeaker{"s"});
  return r;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("hand-computed errors") {
    Rng rng(1);
    const Trajectory a = Random(4, 60, rng);
    const ErrorReport same = ManhattanError(a, a);
    CHECK(same.mean_manhattan == 0.0);
    CHECK(same.mean_abs_error == 0.0);
    CHECK_FALSE(same.truncated());

    Trajectory b = a;
    for (int f = 0; f < 4; ++f) {
      b.at(f, 0) += 1.0;
      b.at(f, 1) -= 2.0;
      b.at(f, 2) += 3.0;
    }
    const ErrorReport r = ManhattanError(b, a);
    CHECK(r.mean_manhattan == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(r.mean_abs_error == doctest::Approx(6.0 / 60).epsilon(1e-12));
    REQUIRE(r.per_landmark.size() == 20);
    CHECK(r.per_landmark[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.per_landmark[1] == 0.0);
    CHECK(r.per_axis[0] == doctest::Approx(1.0 / 20).epsilon(1e-12));
    CHECK(r.per_axis[2] == doctest::Approx(3.0 / 20).epsilon(1e-12));
  }

  TEST_CASE("manhattan error equals direct summation") {
    Rng rng(2);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const int width = rng.Uniform() < 0.5 ? 60 : 204;
      const Trajectory a = Random(1 + static_cast<int>(rng.Uniform() * 40), width, rng);
      const Trajectory b = Random(1 + static_cast<int>(rng.Uniform() * 40), width, rng);
      worst = std::max(worst, std::fabs(ManhattanError(a, b).mean_manhattan - OracleManhattan(a, b)));
    }
    CHECK(worst <= 1e-9);
  }

  TEST_CASE("metric axioms and scaling") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      const Trajectory a = Random(6, 60, rng), b = Random(6, 60, rng), c = Random(6, 60, rng);
      const double ab = ManhattanError(a, b).mean_manhattan;
      CHECK(ab > 0.0);
      CHECK(ManhattanError(a, a).mean_manhattan == 0.0);
      CHECK(ab == doctest::Approx(ManhattanError(b, a).mean_manhattan).epsilon(1e-12));
      CHECK(ManhattanError(a, c).mean_manhattan <= ab + ManhattanError(b, c).mean_manhattan + 1e-9);
      Trajectory a2 = a, b2 = b;
      for (double& v : a2.data) v *= 2.5;
      for (double& v : b2.data) v *= 2.5;
      CHECK(ManhattanError(a2, b2).mean_manhattan == doctest::Approx(2.5 * ab).epsilon(1e-12));
    }
  }

  TEST_CASE("length mismatches compare the common prefix") {
    Rng rng(4);
    const Trajectory a = Random(10, 60, rng), b = Random(7, 60, rng);
    const ErrorReport r = ManhattanError(a, b);
    CHECK(r.frames == 7);
    CHECK(r.truncated());
    CHECK_FALSE(r.note.empty());
    test::CheckError(ErrorKind::kShape, [&] { ManhattanError(a, Random(3, 204, rng)); });
    test::CheckError(ErrorKind::kContract, [&] { ManhattanError(a, Trajectory(0, 60)); });
  }

  TEST_CASE("comparison slices full-face outputs to the lips") {
    Rng rng(5);
    const Trajectory full = Random(5, 204, rng);
    const Trajectory lips = corpus::SelectLips(full);
    const Comparison c = CompareReport({full, lips}, lips, {"model_a", "model_b"});
    REQUIRE(c.reports.size() == 2);
    CHECK(c.reports[0].mean_manhattan == 0.0);
    CHECK(c.reports[1].mean_manhattan == 0.0);
    CHECK(c.ToMarkdown().find("| model_a |") != std::string::npos);
    const std::string csv = c.ToCsv();
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    const Comparison d = CompareReport({lips}, full, {"x"});
    CHECK(d.reports[0].mean_manhattan == 0.0);
    test::CheckError(ErrorKind::kContract, [&] { CompareReport({lips}, lips, {}); });
  }

  TEST_CASE("trajectory csv") {
    Rng rng(6);
    const Trajectory t = Random(3, 60, rng, 30.0);
    const std::string csv = TrajectoryToCsv(t);
    CHECK(csv.rfind("frame,landmark,x_mm,y_mm,z_mm\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 61);
    CHECK(csv.find("\n0,48,") != std::string::npos);
    CHECK(csv.find("\n2,67,") != std::string::npos);
    const Trajectory back = TrajectoryFromCsv(csv);
    CHECK(back.rows == 3);
    CHECK(back.cols == 60);
    CHECK(back.data == t.data);
    const Trajectory all = Random(2, 204, rng);
    CHECK(TrajectoryFromCsv(TrajectoryToCsv(all)).data == all.data);
    test::CheckError(ErrorKind::kFormat, [] { TrajectoryFromCsv("frame,landmark,x_mm,y_mm,z_mm\n0,48,1,2\n"); });
  }

  TEST_CASE("export writes csv or one svg per frame") {
    const std::string dir = test::TempDir("export");
    Trajectory disp(4, 60);
    const auto ref = Reference();
    const auto csv = ExportTrajectory(disp, ref, ExportFormat::kCsv, dir + "/traj.csv");
    REQUIRE(csv.size() == 1);
    const Trajectory positions = TrajectoryFromCsv(io::ReadFileText(csv[0]));
    CHECK(positions.at(0, 0) == ref.points[48].x);
    CHECK(positions.at(3, 59) == ref.points[67].z);

    const auto svgs = ExportTrajectory(disp, ref, ExportFormat::kSvgFrames, dir + "/frames");
    CHECK(svgs.size() == 4);
    CHECK(std::filesystem::exists(dir + "/frames/frame_00003.svg"));
    const std::string svg = FrameToSvg(positions, 2, ref);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(ParseExportFormat("csv") == ExportFormat::kCsv);
    CHECK(ParseExportFormat("svg-frames") == ExportFormat::kSvgFrames);
    test::CheckError(ErrorKind::kUsage, [] { ParseExportFormat("gif"); });
  }
}
