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

// Label generation: OpenFace CSV ingestion, pose removal, 80 fps resampling,
// per-speaker reference normalization, text tokenization and the dataset
// container. Also hosts the deterministic synthetic corpus generator.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace liptraj::corpus {

inline constexpr int kNumLandmarks = 68;
inline constexpr int kFirstLipLandmark = 48;
inline constexpr int kNumLipLandmarks = 20;
inline constexpr double kTargetFps = 80.0;
inline constexpr double kDefaultConfidenceThreshold = 0.7;

// Positions entering normalization live on a binary grid of this spacing (mm),
// which makes position - reference and displacement + reference exact.
inline constexpr double kPositionGrid = 0x1.0p-32;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

using LandmarkPoints = std::array<Vec3, kNumLandmarks>;

struct PoseParams {
  double tx = 0.0, ty = 0.0, tz = 0.0;  // mm
  double rx = 0.0, ry = 0.0, rz = 0.0;  // radians

  friend bool operator==(const PoseParams&, const PoseParams&) = default;
};

struct RawFrame {
  int frame = 0;
  int face_id = 0;
  double timestamp = 0.0;
  double confidence = 0.0;
  bool success = false;
  PoseParams pose;
  LandmarkPoints points{};

  friend bool operator==(const RawFrame&, const RawFrame&) = default;
};

struct ClipRecord {
  std::string clip_id;
  std::string speaker_id;
  std::string transcript;
  double source_fps = 0.0;
  std::vector<RawFrame> frames;
};

struct ReferenceFrame {
  std::string speaker_id;
  LandmarkPoints points{};
};

enum class LandmarkSet { kLips, kAll };

int LandmarkCount(LandmarkSet set);
int FirstLandmark(LandmarkSet set);
inline int RowWidth(LandmarkSet set) { return 3 * LandmarkCount(set); }
LandmarkSet LandmarkSetForWidth(int width);
LandmarkSet ParseLandmarkSet(std::string_view name);
const char* LandmarkSetName(LandmarkSet set);

// Row-major frame matrix; rows are frames at 80 fps, each row flattened as
// (x0, y0, z0, x1, ...) over the retained landmarks.
struct Trajectory {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Trajectory() = default;
  Trajectory(int r, int c) : rows(r), cols(c), data(size_t(r) * c, 0.0) {}

  double& at(int r, int c) { return data[size_t(r) * cols + c]; }
  double at(int r, int c) const { return data[size_t(r) * cols + c]; }
  std::span<double> row(int r) { return {data.data() + size_t(r) * cols, size_t(cols)}; }
  std::span<const double> row(int r) const {
    return {data.data() + size_t(r) * cols, size_t(cols)};
  }
  double duration_seconds() const { return rows / kTargetFps; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct NormalizedClip {
  std::string clip_id;
  std::string speaker_id;
  std::vector<int> tokens;
  Trajectory displacements;
  ReferenceFrame reference;
  LandmarkSet landmark_set = LandmarkSet::kLips;

  static constexpr double frame_rate() { return kTargetFps; }
};

// 30-symbol character vocabulary. '?' and '!' share the '.' id and '-' shares
// the ',' id.
class Charset {
 public:
  Charset();  // default vocabulary
  explicit Charset(std::string symbols);

  const std::string& symbols() const { return symbols_; }
  int size() const { return static_cast<int>(symbols_.size()); }
  std::optional<int> Lookup(char c) const;
  char Symbol(int id) const { return symbols_.at(static_cast<size_t>(id)); }

  friend bool operator==(const Charset& a, const Charset& b) {
    return a.symbols_ == b.symbols_;
  }

 private:
  std::string symbols_;
  std::array<int, 256> ids_{};
};

enum class Split : uint8_t { kTrain = 0, kValidation = 1 };

struct Dataset {
  Charset charset;
  uint64_t split_seed = 0;
  LandmarkSet landmark_set = LandmarkSet::kLips;
  std::vector<NormalizedClip> clips;
  std::vector<Split> split;

  std::vector<size_t> Indices(Split which) const;
};

// --- ingestion -------------------------------------------------------------

std::vector<RawFrame> ParseOpenFaceCsv(std::string_view text);
std::string ParseTranscript(std::string_view text);

struct FilterResult {
  bool accepted = false;
  std::vector<int> offending_frames;
};
FilterResult FilterClip(const ClipRecord& clip,
                        double threshold = kDefaultConfidenceThreshold);

// --- geometry --------------------------------------------------------------

// Row-major 3x3 rotation R = Rz * Ry * Rx.
std::array<double, 9> RotationMatrix(const PoseParams& pose);
Vec3 ApplyPose(const PoseParams& pose, const Vec3& p);
LandmarkPoints ApplyPose(const PoseParams& pose, const LandmarkPoints& points);
// R^T (p - T) for every landmark.
LandmarkPoints ReprojectFrame(const RawFrame& frame);

struct TimedPoints {
  double t = 0.0;
  LandmarkPoints points{};
};
std::vector<LandmarkPoints> Resample80Fps(std::span<const TimedPoints> frames);

double SnapToGrid(double v);
LandmarkPoints SnapToGrid(const LandmarkPoints& points);

// first_frames holds each clip's first reprojected, resampled frame.
ReferenceFrame SpeakerReference(const std::string& speaker_id,
                                std::span<const LandmarkPoints> first_frames);

Trajectory Normalize(std::span<const LandmarkPoints> frames,
                     const ReferenceFrame& reference, LandmarkSet set);
NormalizedClip NormalizeClip(const std::string& clip_id,
                             const std::string& speaker_id,
                             std::span<const LandmarkPoints> frames,
                             const ReferenceFrame& reference, LandmarkSet set);
// Absolute positions for the retained landmarks, same layout as the input.
Trajectory Denormalize(const Trajectory& displacements,
                       const ReferenceFrame& reference, LandmarkSet set);

// Columns of the lip landmarks (48..67) taken out of a full 68-landmark row.
Trajectory SelectLips(const Trajectory& all_landmarks);

std::vector<int> EncodeText(std::string_view text, const Charset& charset);

// --- dataset ---------------------------------------------------------------

struct DatasetConfig {
  LandmarkSet landmark_set = LandmarkSet::kLips;
  double confidence_threshold = kDefaultConfidenceThreshold;
  double validation_fraction = 0.15;
  uint64_t seed = 1234;
};

struct Rejection {
  std::string clip_id;
  std::string reason;
};

struct BuildResult {
  Dataset dataset;
  std::vector<Rejection> rejections;
};

std::map<std::string, std::string> ParseSpeakersManifest(std::string_view text);

// Processes <id>.csv / <id>.txt pairs listed in speakers.tsv under root.
BuildResult BuildDataset(const std::string& root, const DatasetConfig& config);
// Same pipeline over in-memory clips (already parsed).
BuildResult BuildDatasetFromClips(std::vector<ClipRecord> clips,
                                  const DatasetConfig& config);

struct SynthCorpusFile;
// Same as BuildDataset over an in-memory directory listing.
BuildResult BuildDatasetFromFiles(std::span<const SynthCorpusFile> files, const DatasetConfig& config);

std::vector<uint8_t> SerializeDataset(const Dataset& dataset);
Dataset DeserializeDataset(std::span<const uint8_t> bytes);
std::string FormatRejections(std::span<const Rejection> rejections);

// --- synthetic corpus ------------------------------------------------------

// Mouth shape targets of one character: aperture in [0, 1], spread in
// [-1, 1] (negative = rounded), protrusion in [0, 1], and duration in 12.5 ms
// steps.
struct MouthShape {
  double aperture = 0.0;
  double spread = 0.0;
  double protrusion = 0.0;
  int steps = 1;
};
MouthShape CharacterTemplate(char c);

struct SynthSpeaker {
  std::string id;
  double scale = 1.0;
  double mouth_width = 0.0;  // mm offset of the lip corners
};

struct SynthClipOptions {
  double source_fps = 30.0;
  PoseParams pose;
  double pose_wobble = 0.0;  // radians of slow per-frame head rotation drift
  uint64_t seed = 0;
};

// Neutral 68-point face in head coordinates (mm).
LandmarkPoints NeutralFace(const SynthSpeaker& speaker);
// Face with the mouth posed; aperture/spread/protrusion as in MouthShape.
LandmarkPoints PosedFace(const SynthSpeaker& speaker, double aperture,
                         double spread, double protrusion);
// Per-80fps-step mouth parameters for a text, including rest lead-in/out.
std::vector<MouthShape> MouthTrack(std::string_view text);
ClipRecord SynthClip(const std::string& clip_id, const std::string& text,
                     const SynthSpeaker& speaker,
                     const SynthClipOptions& options);
double LipAperture(const LandmarkPoints& head_frame_points);

std::string FormatOpenFaceCsv(std::span<const RawFrame> frames);

struct SynthCorpusFile {
  std::string name;
  std::string contents;
};
// Deterministic in (seed, n_clips, charset); file order is stable.
std::vector<SynthCorpusFile> SynthCorpus(uint64_t seed, int n_clips,
                                         const Charset& charset);
void WriteSynthCorpus(const std::string& dir, uint64_t seed, int n_clips,
                      const Charset& charset);

}  // namespace liptraj::corpus
