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

#include "liptraj/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "liptraj/binary_io.hpp"
#include "liptraj/error.hpp"

namespace liptraj::metrics {

namespace {

std::string Fmt(const char* f, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

bool IsLipLandmark(int k) { return k >= corpus::kFirstLipLandmark; }

}  // namespace

ErrorReport ManhattanError(const corpus::Trajectory& predicted, const corpus::Trajectory& truth) {
  if (predicted.cols != truth.cols) {
    Fail(ErrorKind::kShape, "trajectories cover different landmark sets (" + std::to_string(predicted.cols) +
                                " vs " + std::to_string(truth.cols) + " values per frame)");
  }
  if (truth.cols % 3 != 0) Fail(ErrorKind::kShape, "trajectory width is not a multiple of 3");
  ErrorReport r;
  r.predicted_frames = predicted.rows;
  r.truth_frames = truth.rows;
  r.frames = std::min(predicted.rows, truth.rows);
  if (r.frames == 0) Fail(ErrorKind::kContract, "trajectories share no frames");
  if (r.truncated()) {
    r.note = "compared the first " + std::to_string(r.frames) + " frames (predicted " +
             std::to_string(predicted.rows) + ", truth " + std::to_string(truth.rows) + ")";
  }
  const int landmarks = truth.cols / 3;
  r.per_landmark.assign(static_cast<size_t>(landmarks), 0.0);
  double total = 0.0;
  for (int f = 0; f < r.frames; ++f) {
    for (int k = 0; k < landmarks; ++k) {
      for (int a = 0; a < 3; ++a) {
        const double d = std::abs(predicted.at(f, 3 * k + a) - truth.at(f, 3 * k + a));
        total += d;
        r.per_landmark[static_cast<size_t>(k)] += d;
        r.per_axis[static_cast<size_t>(a)] += d;
      }
    }
  }
  const double frames = r.frames;
  r.mean_manhattan = total / frames;
  r.mean_abs_error = total / (frames * truth.cols);
  for (double& v : r.per_landmark) v /= frames * 3.0;
  for (double& v : r.per_axis) v /= frames * landmarks;
  return r;
}

Comparison CompareReport(const std::vector<corpus::Trajectory>& outputs, const corpus::Trajectory& truth,
                         const std::vector<std::string>& labels) {
  if (outputs.empty()) Fail(ErrorKind::kContract, "comparison needs at least one output");
  if (outputs.size() != labels.size()) Fail(ErrorKind::kContract, "one label per output is required");
  const int lips = corpus::RowWidth(corpus::LandmarkSet::kLips);
  const int all = corpus::RowWidth(corpus::LandmarkSet::kAll);
  const corpus::Trajectory truth_view = truth.cols == all && std::any_of(outputs.begin(), outputs.end(), [&](const auto& o) {
                                          return o.cols == lips;
                                        })
                                            ? corpus::SelectLips(truth)
                                            : truth;
  Comparison c;
  c.labels = labels;
  for (const auto& out : outputs) {
    if (out.cols == all && truth_view.cols == lips) {
      c.reports.push_back(ManhattanError(corpus::SelectLips(out), truth_view));
    } else {
      c.reports.push_back(ManhattanError(out, truth_view));
    }
  }
  return c;
}

std::string Comparison::ToMarkdown() const {
  std::string out =
      "| Output | Frames | Manhattan per frame (mm) | Mean abs error (mm) | x | y | z | Note |\n"
      "|---|---|---|---|---|---|---|---|\n";
  for (size_t i = 0; i < reports.size(); ++i) {
    const ErrorReport& r = reports[i];
    out += "| " + labels[i] + " | " + std::to_string(r.frames) + " | " + Fmt("%.4f", r.mean_manhattan) + " | " +
           Fmt("%.4f", r.mean_abs_error) + " | " + Fmt("%.4f", r.per_axis[0]) + " | " + Fmt("%.4f", r.per_axis[1]) +
           " | " + Fmt("%.4f", r.per_axis[2]) + " | " + r.note + " |\n";
  }
  return out;
}

std::string Comparison::ToCsv() const {
  std::string out = "label,frames,predicted_frames,truth_frames,mean_manhattan_mm,mean_abs_error_mm,x_mm,y_mm,z_mm\n";
  for (size_t i = 0; i < reports.size(); ++i) {
    const ErrorReport& r = reports[i];
    out += labels[i] + "," + std::to_string(r.frames) + "," + std::to_string(r.predicted_frames) + "," +
           std::to_string(r.truth_frames) + "," + Fmt("%.17g", r.mean_manhattan) + "," +
           Fmt("%.17g", r.mean_abs_error) + "," + Fmt("%.17g", r.per_axis[0]) + "," + Fmt("%.17g", r.per_axis[1]) +
           "," + Fmt("%.17g", r.per_axis[2]) + "\n";
  }
  return out;
}

ExportFormat ParseExportFormat(std::string_view name) {
  if (name == "csv") return ExportFormat::kCsv;
  if (name == "svg-frames") return ExportFormat::kSvgFrames;
  Fail(ErrorKind::kUsage, "unknown export format '" + std::string(name) + "' (expected csv or svg-frames)");
}

std::string TrajectoryToCsv(const corpus::Trajectory& positions) {
  const int first = corpus::FirstLandmark(corpus::LandmarkSetForWidth(positions.cols));
  const int landmarks = positions.cols / 3;
  std::string out = "frame,landmark,x_mm,y_mm,z_mm\n";
  char buf[160];
  for (int f = 0; f < positions.rows; ++f) {
    for (int k = 0; k < landmarks; ++k) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g\n", f, first + k, positions.at(f, 3 * k),
                    positions.at(f, 3 * k + 1), positions.at(f, 3 * k + 2));
      out += buf;
    }
  }
  return out;
}

corpus::Trajectory TrajectoryFromCsv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "frame,landmark,x_mm,y_mm,z_mm") {
    Fail(ErrorKind::kFormat, "trajectory csv: unexpected header");
  }
  struct Row {
    int frame, landmark;
    double v[3];
  };
  std::vector<Row> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 5) Fail(ErrorKind::kFormat, "trajectory csv: line " + std::to_string(line_no) + " needs 5 fields");
    Row r{};
    try {
      r.frame = std::stoi(f[0]);
      r.landmark = std::stoi(f[1]);
      for (int a = 0; a < 3; ++a) r.v[a] = std::stod(f[2 + a]);
    } catch (const std::exception&) {
      Fail(ErrorKind::kParse, "trajectory csv: bad number on line " + std::to_string(line_no));
    }
    rows.push_back(r);
  }
  if (rows.empty()) Fail(ErrorKind::kEmptyInput, "trajectory csv has no rows");
  int landmarks = 0;
  while (landmarks < static_cast<int>(rows.size()) && rows[static_cast<size_t>(landmarks)].frame == rows[0].frame) {
    ++landmarks;
  }
  if (rows.size() % static_cast<size_t>(landmarks) != 0) {
    Fail(ErrorKind::kFormat, "trajectory csv: frames list different landmark counts");
  }
  corpus::Trajectory t(static_cast<int>(rows.size()) / landmarks, 3 * landmarks);
  corpus::LandmarkSetForWidth(t.cols);
  for (size_t i = 0; i < rows.size(); ++i) {
    const int f = static_cast<int>(i) / landmarks, k = static_cast<int>(i) % landmarks;
    if (rows[i].frame != f || rows[i].landmark != rows[static_cast<size_t>(k)].landmark) {
      Fail(ErrorKind::kFormat, "trajectory csv: rows out of order at data row " + std::to_string(i + 1));
    }
    for (int a = 0; a < 3; ++a) t.at(f, 3 * k + a) = rows[i].v[a];
  }
  return t;
}

std::string FrameToSvg(const corpus::Trajectory& positions, int frame, const corpus::ReferenceFrame& reference) {
  if (frame < 0 || frame >= positions.rows) Fail(ErrorKind::kContract, "frame index out of range");
  const int first = corpus::FirstLandmark(corpus::LandmarkSetForWidth(positions.cols));
  const int landmarks = positions.cols / 3;

  // Fit the view to the reference face and this frame; image y points down.
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  auto extend = [&](double x, double y) {
    min_x = std::min(min_x, x);
    max_x = std::max(max_x, x);
    min_y = std::min(min_y, y);
    max_y = std::max(max_y, y);
  };
  for (const auto& p : reference.points) extend(p.x, p.y);
  for (int k = 0; k < landmarks; ++k) extend(positions.at(frame, 3 * k), positions.at(frame, 3 * k + 1));
  const double size = 400.0, margin = 20.0;
  const double span = std::max({max_x - min_x, max_y - min_y, 1e-6});
  const double scale = (size - 2 * margin) / span;
  auto px = [&](double x) { return margin + (x - min_x) * scale; };
  auto py = [&](double y) { return margin + (y - min_y) * scale; };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"400\" viewBox=\"0 0 400 400\">\n";
  out += "<rect width=\"400\" height=\"400\" fill=\"white\"/>\n";
  char buf[160];
  for (int k = 0; k < corpus::kNumLandmarks; ++k) {
    if (k >= first && k < first + landmarks) continue;
    const auto& p = reference.points[static_cast<size_t>(k)];
    std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\" fill=\"#999999\"/>\n", px(p.x), py(p.y));
    out += buf;
  }
  for (int k = 0; k < landmarks; ++k) {
    const bool lip = IsLipLandmark(first + k);
    std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n",
                  px(positions.at(frame, 3 * k)), py(positions.at(frame, 3 * k + 1)), lip ? "red" : "black");
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "<text x=\"10\" y=\"390\" font-size=\"12\">frame %d (%.4f s)</text>\n", frame,
                frame / corpus::kTargetFps);
  out += buf;
  out += "</svg>\n";
  return out;
}

std::vector<std::string> ExportTrajectory(const corpus::Trajectory& displacements,
                                          const corpus::ReferenceFrame& reference, ExportFormat format,
                                          const std::string& path) {
  const corpus::Trajectory positions =
      corpus::Denormalize(displacements, reference, corpus::LandmarkSetForWidth(displacements.cols));
  std::vector<std::string> written;
  if (format == ExportFormat::kCsv) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    io::WriteFileText(path, TrajectoryToCsv(positions));
    written.push_back(path);
    return written;
  }
  std::filesystem::create_directories(path);
  for (int f = 0; f < positions.rows; ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05d.svg", f);
    const std::string file = (std::filesystem::path(path) / name).string();
    io::WriteFileText(file, FrameToSvg(positions, f, reference));
    written.push_back(file);
  }
  return written;
}

}  // namespace liptraj::metrics
