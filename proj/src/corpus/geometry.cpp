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
#include <sstream>

#include "liptraj/corpus.hpp"
#include "liptraj/error.hpp"

namespace liptraj::corpus {

int LandmarkCount(LandmarkSet set) {
  return set == LandmarkSet::kLips ? kNumLipLandmarks : kNumLandmarks;
}

int FirstLandmark(LandmarkSet set) {
  return set == LandmarkSet::kLips ? kFirstLipLandmark : 0;
}

LandmarkSet LandmarkSetForWidth(int width) {
  if (width == 3 * kNumLipLandmarks) return LandmarkSet::kLips;
  if (width == 3 * kNumLandmarks) return LandmarkSet::kAll;
  Fail(ErrorKind::kShape, "row width " + std::to_string(width) + " is neither 60 nor 204");
}

LandmarkSet ParseLandmarkSet(std::string_view name) {
  if (name == "lips") return LandmarkSet::kLips;
  if (name == "all") return LandmarkSet::kAll;
  Fail(ErrorKind::kUsage, "landmark set must be 'lips' or 'all', got '" + std::string(name) + "'");
}

const char* LandmarkSetName(LandmarkSet set) {
  return set == LandmarkSet::kLips ? "lips" : "all";
}

std::array<double, 9> RotationMatrix(const PoseParams& pose) {
  const double cx = std::cos(pose.rx), sx = std::sin(pose.rx);
  const double cy = std::cos(pose.ry), sy = std::sin(pose.ry);
  const double cz = std::cos(pose.rz), sz = std::sin(pose.rz);
  // Rz * Ry * Rx
  return {cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx,
          sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx,
          -sy,     cy * sx,                cy * cx};
}

Vec3 ApplyPose(const PoseParams& pose, const Vec3& p) {
  const auto r = RotationMatrix(pose);
  return {r[0] * p.x + r[1] * p.y + r[2] * p.z + pose.tx,
          r[3] * p.x + r[4] * p.y + r[5] * p.z + pose.ty,
          r[6] * p.x + r[7] * p.y + r[8] * p.z + pose.tz};
}

LandmarkPoints ApplyPose(const PoseParams& pose, const LandmarkPoints& points) {
  LandmarkPoints out;
  for (int k = 0; k < kNumLandmarks; ++k) out[k] = ApplyPose(pose, points[k]);
  return out;
}

LandmarkPoints ReprojectFrame(const RawFrame& frame) {
  const PoseParams& pose = frame.pose;
  for (const double v : {pose.tx, pose.ty, pose.tz, pose.rx, pose.ry, pose.rz}) {
    if (!std::isfinite(v)) Fail(ErrorKind::kNumericDomain, "non-finite pose parameter");
  }
  const auto r = RotationMatrix(pose);
  LandmarkPoints out;
  for (int k = 0; k < kNumLandmarks; ++k) {
    const Vec3& p = frame.points[k];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      Fail(ErrorKind::kNumericDomain, "non-finite landmark " + std::to_string(k));
    }
    const double dx = p.x - pose.tx, dy = p.y - pose.ty, dz = p.z - pose.tz;
    out[k] = {r[0] * dx + r[3] * dy + r[6] * dz,
              r[1] * dx + r[4] * dy + r[7] * dz,
              r[2] * dx + r[5] * dy + r[8] * dz};
  }
  return out;
}

std::vector<LandmarkPoints> Resample80Fps(std::span<const TimedPoints> frames) {
  if (frames.size() < 2) {
    Fail(ErrorKind::kInsufficientData, "resampling needs at least 2 frames");
  }
  for (size_t i = 1; i < frames.size(); ++i) {
    if (!(frames[i].t > frames[i - 1].t)) {
      std::ostringstream msg;
      msg << "timestamps not strictly increasing at frame " << i;
      Fail(ErrorKind::kFormat, msg.str());
    }
  }
  const double t0 = frames.front().t;
  const double span_s = frames.back().t - t0;
  const auto count = static_cast<size_t>(std::floor(span_s * kTargetFps + 1e-9)) + 1;
  constexpr double kSnap = 1e-9;

  std::vector<LandmarkPoints> out;
  out.reserve(count);
  size_t seg = 0;
  for (size_t k = 0; k < count; ++k) {
    const double t = t0 + static_cast<double>(k) / kTargetFps;
    while (seg + 2 < frames.size() && frames[seg + 1].t <= t) ++seg;
    const TimedPoints& a = frames[seg];
    const TimedPoints& b = frames[seg + 1];
    if (std::abs(t - a.t) < kSnap) {
      out.push_back(a.points);
      continue;
    }
    if (std::abs(t - b.t) < kSnap || t > b.t) {
      out.push_back(b.points);
      continue;
    }
    const double w = (t - a.t) / (b.t - a.t);
    LandmarkPoints p;
    for (int i = 0; i < kNumLandmarks; ++i) {
      p[i] = {a.points[i].x + w * (b.points[i].x - a.points[i].x),
              a.points[i].y + w * (b.points[i].y - a.points[i].y),
              a.points[i].z + w * (b.points[i].z - a.points[i].z)};
    }
    out.push_back(p);
  }
  return out;
}

double SnapToGrid(double v) { return std::nearbyint(v / kPositionGrid) * kPositionGrid; }

LandmarkPoints SnapToGrid(const LandmarkPoints& points) {
  LandmarkPoints out;
  for (int k = 0; k < kNumLandmarks; ++k) {
    out[k] = {SnapToGrid(points[k].x), SnapToGrid(points[k].y), SnapToGrid(points[k].z)};
  }
  return out;
}

ReferenceFrame SpeakerReference(const std::string& speaker_id,
                                std::span<const LandmarkPoints> first_frames) {
  if (first_frames.empty()) {
    Fail(ErrorKind::kInsufficientData, "speaker " + speaker_id + " has no clips");
  }
  ReferenceFrame ref;
  ref.speaker_id = speaker_id;
  const double n = static_cast<double>(first_frames.size());
  for (int k = 0; k < kNumLandmarks; ++k) {
    Vec3 sum;
    for (const LandmarkPoints& f : first_frames) {
      sum.x += f[k].x;
      sum.y += f[k].y;
      sum.z += f[k].z;
    }
    ref.points[k] = {SnapToGrid(sum.x / n), SnapToGrid(sum.y / n), SnapToGrid(sum.z / n)};
  }
  return ref;
}

Trajectory Normalize(std::span<const LandmarkPoints> frames,
                     const ReferenceFrame& reference, LandmarkSet set) {
  const int first = FirstLandmark(set);
  const int count = LandmarkCount(set);
  Trajectory out(static_cast<int>(frames.size()), 3 * count);
  for (size_t r = 0; r < frames.size(); ++r) {
    auto row = out.row(static_cast<int>(r));
    for (int j = 0; j < count; ++j) {
      const Vec3& p = frames[r][first + j];
      const Vec3& q = reference.points[first + j];
      row[3 * j + 0] = p.x - q.x;
      row[3 * j + 1] = p.y - q.y;
      row[3 * j + 2] = p.z - q.z;
    }
  }
  return out;
}

NormalizedClip NormalizeClip(const std::string& clip_id, const std::string& speaker_id,
                             std::span<const LandmarkPoints> frames,
                             const ReferenceFrame& reference, LandmarkSet set) {
  if (reference.speaker_id != speaker_id) {
    Fail(ErrorKind::kConsistency, "clip " + clip_id + " belongs to speaker " + speaker_id +
                                      " but reference is for " + reference.speaker_id);
  }
  NormalizedClip clip;
  clip.clip_id = clip_id;
  clip.speaker_id = speaker_id;
  clip.displacements = Normalize(frames, reference, set);
  clip.reference = reference;
  clip.landmark_set = set;
  return clip;
}

Trajectory Denormalize(const Trajectory& displacements, const ReferenceFrame& reference,
                       LandmarkSet set) {
  const int first = FirstLandmark(set);
  const int count = LandmarkCount(set);
  if (displacements.cols != 3 * count) {
    Fail(ErrorKind::kShape, "displacement width " + std::to_string(displacements.cols) +
                                " does not match landmark set " + LandmarkSetName(set));
  }
  Trajectory out(displacements.rows, displacements.cols);
  for (int r = 0; r < displacements.rows; ++r) {
    for (int j = 0; j < count; ++j) {
      const Vec3& q = reference.points[first + j];
      out.at(r, 3 * j + 0) = displacements.at(r, 3 * j + 0) + q.x;
      out.at(r, 3 * j + 1) = displacements.at(r, 3 * j + 1) + q.y;
      out.at(r, 3 * j + 2) = displacements.at(r, 3 * j + 2) + q.z;
    }
  }
  return out;
}

Trajectory SelectLips(const Trajectory& all_landmarks) {
  if (all_landmarks.cols != 3 * kNumLandmarks) {
    Fail(ErrorKind::kShape, "lip selection needs width 204, got " +
                                std::to_string(all_landmarks.cols));
  }
  Trajectory out(all_landmarks.rows, 3 * kNumLipLandmarks);
  for (int r = 0; r < all_landmarks.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) {
      out.at(r, c) = all_landmarks.at(r, 3 * kFirstLipLandmark + c);
    }
  }
  return out;
}

}  // namespace liptraj::corpus
