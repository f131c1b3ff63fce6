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

// Manhattan error between trajectories and trajectory export (CSV, SVG frames).

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "liptraj/corpus.hpp"

namespace liptraj::metrics {

struct ErrorReport {
  int frames = 0;  // compared (overlapping) frames
  int predicted_frames = 0;
  int truth_frames = 0;
  double mean_manhattan = 0.0;           // per frame, summed over all coordinates
  double mean_abs_error = 0.0;           // per coordinate
  std::vector<double> per_landmark;      // mean absolute coordinate error of each landmark
  std::array<double, 3> per_axis{};      // mean absolute error along x, y, z
  std::string note;                      // set when the lengths differ

  bool truncated() const { return predicted_frames != truth_frames; }
};

// Compares two trajectories of the same width over their common prefix.
ErrorReport ManhattanError(const corpus::Trajectory& predicted, const corpus::Trajectory& truth);

struct Comparison {
  std::vector<std::string> labels;
  std::vector<ErrorReport> reports;

  std::string ToMarkdown() const;
  std::string ToCsv() const;
};

// One report per labelled output. Outputs covering all 68 landmarks are cut
// down to the lips when the truth holds lips only.
Comparison CompareReport(const std::vector<corpus::Trajectory>& outputs, const corpus::Trajectory& truth,
                         const std::vector<std::string>& labels);

enum class ExportFormat { kCsv, kSvgFrames };

ExportFormat ParseExportFormat(std::string_view name);

// header frame,landmark,x_mm,y_mm,z_mm; one row per frame and landmark, with
// landmarks numbered in the 68-point scheme.
std::string TrajectoryToCsv(const corpus::Trajectory& positions);
// Returns positions with rows = frames and 3 columns per landmark.
corpus::Trajectory TrajectoryFromCsv(std::string_view text);

// Orthographic X-Y drawing of one frame; the reference face is drawn in grey
// behind the predicted points, lip landmarks in red.
std::string FrameToSvg(const corpus::Trajectory& positions, int frame, const corpus::ReferenceFrame& reference);

// Denormalizes displacements against the reference and writes them. csv
// writes one file at path; svg-frames writes frame_NNNNN.svg files into the
// directory at path. Returns the written paths.
std::vector<std::string> ExportTrajectory(const corpus::Trajectory& displacements,
                                          const corpus::ReferenceFrame& reference, ExportFormat format,
                                          const std::string& path);

}  // namespace liptraj::metrics
