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
#include <functional>
#include <sstream>

#include "liptraj/binary_io.hpp"
#include "liptraj/corpus.hpp"
#include "liptraj/error.hpp"
#include "liptraj/rng.hpp"

namespace liptraj::corpus {
namespace {

constexpr char kDatasetMagic[] = "LTDS1";
constexpr uint32_t kDatasetVersion = 1;

struct PreparedClip {
  std::string clip_id;
  std::string speaker_id;
  std::vector<int> tokens;
  std::vector<LandmarkPoints> frames;  // reprojected, 80 fps, on grid
};

PreparedClip PrepareClip(const ClipRecord& clip, const Charset& charset) {
  if (clip.transcript.empty()) Fail(ErrorKind::kContract, "empty transcript");
  if (clip.frames.size() < 2) {
    Fail(ErrorKind::kInsufficientData, "clip has fewer than 2 frames");
  }
  std::vector<TimedPoints> timed;
  timed.reserve(clip.frames.size());
  for (const RawFrame& f : clip.frames) timed.push_back({f.timestamp, ReprojectFrame(f)});

  PreparedClip out;
  out.clip_id = clip.clip_id;
  out.speaker_id = clip.speaker_id;
  out.tokens = EncodeText(clip.transcript, charset);
  out.frames = Resample80Fps(timed);
  for (auto& f : out.frames) f = SnapToGrid(f);
  return out;
}

std::string Describe(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return std::string(ErrorKindName(err->kind())) + ": " + err->what();
  }
  return e.what();
}

}  // namespace

std::vector<size_t> Dataset::Indices(Split which) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < split.size(); ++i) {
    if (split[i] == which) out.push_back(i);
  }
  return out;
}

std::map<std::string, std::string> ParseSpeakersManifest(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      Fail(ErrorKind::kFormat,
           "speakers manifest line " + std::to_string(line_no) + " is not clip_id<TAB>speaker_id");
    }
    out[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return out;
}

BuildResult BuildDatasetFromClips(std::vector<ClipRecord> clips, const DatasetConfig& config) {
  const Charset charset;
  std::sort(clips.begin(), clips.end(),
            [](const ClipRecord& a, const ClipRecord& b) { return a.clip_id < b.clip_id; });

  BuildResult result;
  std::vector<PreparedClip> prepared;
  for (const ClipRecord& clip : clips) {
    const FilterResult filter = FilterClip(clip, config.confidence_threshold);
    if (!filter.accepted) {
      std::ostringstream reason;
      reason << "low confidence or failed tracking in frames";
      for (size_t i = 0; i < filter.offending_frames.size() && i < 20; ++i) {
        reason << ' ' << filter.offending_frames[i];
      }
      if (filter.offending_frames.size() > 20) reason << " ...";
      result.rejections.push_back({clip.clip_id, reason.str()});
      continue;
    }
    try {
      prepared.push_back(PrepareClip(clip, charset));
    } catch (const Error& e) {
      result.rejections.push_back({clip.clip_id, Describe(e)});
    }
  }
  if (prepared.empty()) {
    Fail(ErrorKind::kInsufficientData, "zero clips survive filtering");
  }
  if (prepared.size() < 2) {
    Fail(ErrorKind::kInsufficientData,
         "only one clip survives; a train/validation split needs at least two");
  }

  std::map<std::string, std::vector<LandmarkPoints>> first_frames;
  for (const PreparedClip& c : prepared) first_frames[c.speaker_id].push_back(c.frames.front());
  std::map<std::string, ReferenceFrame> references;
  for (const auto& [speaker, frames] : first_frames) {
    references[speaker] = SpeakerReference(speaker, frames);
  }

  Dataset& ds = result.dataset;
  ds.charset = charset;
  ds.split_seed = config.seed;
  ds.landmark_set = config.landmark_set;
  for (PreparedClip& c : prepared) {
    NormalizedClip clip = NormalizeClip(c.clip_id, c.speaker_id, c.frames,
                                        references.at(c.speaker_id), config.landmark_set);
    clip.tokens = std::move(c.tokens);
    // Held at the precision of the dataset file.
    for (double& v : clip.displacements.data) v = static_cast<float>(v);
    ds.clips.push_back(std::move(clip));
  }

  const size_t n = ds.clips.size();
  auto n_val = static_cast<size_t>(std::llround(config.validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<size_t>(n_val, 1, n - 1);
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(config.seed);
  rng.Shuffle(order);
  ds.split.assign(n, Split::kTrain);
  for (size_t i = 0; i < n_val; ++i) ds.split[order[i]] = Split::kValidation;
  return result;
}

namespace {

BuildResult BuildWithReader(const std::function<std::string(const std::string&)>& read,
                            const DatasetConfig& config) {
  const auto manifest = ParseSpeakersManifest(read("speakers.tsv"));
  if (manifest.empty()) Fail(ErrorKind::kEmptyInput, "speakers manifest lists no clips");

  std::vector<ClipRecord> clips;
  std::vector<Rejection> unreadable;
  for (const auto& [clip_id, speaker] : manifest) {
    try {
      ClipRecord clip;
      clip.clip_id = clip_id;
      clip.speaker_id = speaker;
      clip.frames = ParseOpenFaceCsv(read(clip_id + ".csv"));
      clip.transcript = ParseTranscript(read(clip_id + ".txt"));
      if (clip.frames.size() >= 2) {
        const double span = clip.frames.back().timestamp - clip.frames.front().timestamp;
        if (span > 0) clip.source_fps = static_cast<double>(clip.frames.size() - 1) / span;
      }
      clips.push_back(std::move(clip));
    } catch (const Error& e) {
      unreadable.push_back({clip_id, Describe(e)});
    }
  }
  if (clips.empty()) Fail(ErrorKind::kInsufficientData, "zero clips survive filtering");

  BuildResult result = BuildDatasetFromClips(std::move(clips), config);
  result.rejections.insert(result.rejections.end(), unreadable.begin(), unreadable.end());
  std::sort(result.rejections.begin(), result.rejections.end(),
            [](const Rejection& a, const Rejection& b) { return a.clip_id < b.clip_id; });
  return result;
}

}  // namespace

BuildResult BuildDataset(const std::string& root, const DatasetConfig& config) {
  const std::filesystem::path dir(root);
  return BuildWithReader(
      [&](const std::string& name) { return io::ReadFileText((dir / name).string()); }, config);
}

BuildResult BuildDatasetFromFiles(std::span<const SynthCorpusFile> files, const DatasetConfig& config) {
  return BuildWithReader(
      [&](const std::string& name) {
        for (const auto& f : files) {
          if (f.name == name) return f.contents;
        }
        Fail(ErrorKind::kIo, "no file named " + name);
      },
      config);
}

std::string FormatRejections(std::span<const Rejection> rejections) {
  std::string out = "clip_id\treason\n";
  for (const Rejection& r : rejections) out += r.clip_id + '\t' + r.reason + '\n';
  return out;
}

std::vector<uint8_t> SerializeDataset(const Dataset& ds) {
  io::ByteWriter w;
  w.Magic(kDatasetMagic);
  w.U32(kDatasetVersion);
  w.Str(ds.charset.symbols());
  w.U64(ds.split_seed);
  w.U32(static_cast<uint32_t>(LandmarkCount(ds.landmark_set)));
  w.U32(static_cast<uint32_t>(ds.clips.size()));
  for (size_t i = 0; i < ds.clips.size(); ++i) {
    const NormalizedClip& c = ds.clips[i];
    w.Str(c.clip_id);
    w.Str(c.speaker_id);
    w.U8(static_cast<uint8_t>(ds.split.at(i)));
    w.U32(static_cast<uint32_t>(c.tokens.size()));
    for (const int t : c.tokens) w.U32(static_cast<uint32_t>(t));
    for (const Vec3& p : c.reference.points) {
      w.F64(p.x);
      w.F64(p.y);
      w.F64(p.z);
    }
    w.U32(static_cast<uint32_t>(c.displacements.rows));
    w.U32(static_cast<uint32_t>(c.displacements.cols));
    for (const double v : c.displacements.data) w.F32(static_cast<float>(v));
  }
  return w.Take();
}

Dataset DeserializeDataset(std::span<const uint8_t> bytes) {
  io::ByteReader r(bytes, "dataset");
  r.ExpectMagic(kDatasetMagic);
  const uint32_t version = r.U32();
  if (version != kDatasetVersion) {
    Fail(ErrorKind::kFormat, "unsupported dataset version " + std::to_string(version));
  }
  Dataset ds;
  ds.charset = Charset(r.Str());
  ds.split_seed = r.U64();
  const uint32_t landmarks = r.U32();
  if (landmarks != kNumLipLandmarks && landmarks != kNumLandmarks) {
    Fail(ErrorKind::kFormat, "dataset landmark count must be 20 or 68");
  }
  ds.landmark_set = landmarks == kNumLipLandmarks ? LandmarkSet::kLips : LandmarkSet::kAll;
  const uint32_t count = r.U32();
  for (uint32_t i = 0; i < count; ++i) {
    NormalizedClip c;
    c.clip_id = r.Str();
    c.speaker_id = r.Str();
    const uint8_t split = r.U8();
    if (split > 1) Fail(ErrorKind::kFormat, "bad split flag for clip " + c.clip_id);
    ds.split.push_back(static_cast<Split>(split));
    const uint32_t n_tokens = r.U32();
    for (uint32_t t = 0; t < n_tokens; ++t) {
      const uint32_t id = r.U32();
      if (id >= static_cast<uint32_t>(ds.charset.size())) {
        Fail(ErrorKind::kFormat, "token id out of range in clip " + c.clip_id);
      }
      c.tokens.push_back(static_cast<int>(id));
    }
    c.reference.speaker_id = c.speaker_id;
    for (Vec3& p : c.reference.points) {
      p.x = r.F64();
      p.y = r.F64();
      p.z = r.F64();
    }
    const uint32_t rows = r.U32();
    const uint32_t cols = r.U32();
    if (cols != 3 * landmarks) Fail(ErrorKind::kFormat, "displacement width mismatch in " + c.clip_id);
    c.displacements = Trajectory(static_cast<int>(rows), static_cast<int>(cols));
    for (double& v : c.displacements.data) v = r.F32();
    c.landmark_set = ds.landmark_set;
    ds.clips.push_back(std::move(c));
  }
  if (!r.AtEnd()) Fail(ErrorKind::kFormat, "trailing bytes after dataset");
  return ds;
}

}  // namespace liptraj::corpus
