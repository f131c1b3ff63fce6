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
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "liptraj/binary_io.hpp"
#include "liptraj/corpus.hpp"
#include "liptraj/error.hpp"
#include "liptraj/rng.hpp"

namespace liptraj::corpus {
namespace {

constexpr double kStepSeconds = 1.0 / kTargetFps;
constexpr int kRestSteps = 8;
constexpr MouthShape kRest{0.05, 0.0, 0.0, kRestSteps};

// Lower lip drop and upper lip lift at full aperture, mm.
constexpr double kLowerDrop = 9.0;
constexpr double kUpperLift = 2.0;

constexpr const char* kWords[] = {
    "IT'S",  "NOT",   "JUST",  "MY",    "WORK", "HELLO", "WORLD", "FORTY",
    "TWO",   "THE",   "OF",    "AND",   "TO",   "IN",    "IS",    "YOU",
    "THAT",  "WAS",   "FOR",   "ON",    "ARE",  "WITH",  "AS",    "HIS",
    "THEY",  "BE",    "AT",    "ONE",   "HAVE", "THIS",  "FROM",  "OR",
    "HAD",   "BY",    "WORD",  "BUT",   "WHAT", "SOME",  "WE",    "CAN",
    "OUT",   "OTHER", "WERE",  "ALL",   "WHEN", "UP",    "USE",   "YOUR",
    "HOW",   "SAID",  "EACH",  "SHE",   "MOVE", "BOOK",  "PAGE",  "IDEA"};

}  // namespace

MouthShape CharacterTemplate(char c) {
  switch (c) {
    case 'A': return {1.00, 0.20, 0.00, 8};
    case 'E': return {0.60, 0.60, 0.00, 8};
    case 'I': return {0.45, 0.80, 0.00, 8};
    case 'O': return {0.80, -0.60, 0.60, 8};
    case 'U': return {0.40, -0.80, 0.80, 8};
    case 'Y': return {0.40, 0.50, 0.00, 6};
    case 'M': case 'B': case 'P': return {0.00, 0.00, 0.00, 5};
    case 'F': case 'V': return {0.10, 0.10, 0.00, 5};
    case 'W': return {0.15, -0.90, 0.90, 5};
    case 'R': return {0.30, -0.40, 0.40, 5};
    case 'S': case 'Z': return {0.15, 0.50, 0.00, 5};
    case 'T': case 'D': case 'N': case 'L': return {0.30, 0.10, 0.00, 5};
    case 'C': case 'G': case 'H': case 'J': case 'K': case 'Q': case 'X':
      return {0.35, 0.00, 0.00, 5};
    case ' ': return {0.10, 0.00, 0.00, 4};
    case '\'': return {0.20, 0.00, 0.00, 2};
    default: return {0.05, 0.00, 0.00, 8};  // punctuation pause
  }
}

LandmarkPoints NeutralFace(const SynthSpeaker& speaker) {
  return PosedFace(speaker, 0.0, 0.0, 0.0);
}

LandmarkPoints PosedFace(const SynthSpeaker& speaker, double aperture, double spread,
                         double protrusion) {
  using std::numbers::pi;
  LandmarkPoints p{};
  // Jaw line, ear to ear through the chin; chin drops with the lower lip.
  for (int i = 0; i <= 16; ++i) {
    const double phi = -pi / 2 + pi * i / 16.0;
    const double chin_weight = std::pow(std::cos(phi), 4);
    p[i] = {70.0 * std::sin(phi), -5.0 + 80.0 * std::cos(phi) + 0.6 * kLowerDrop * aperture * chin_weight,
            40.0 * (1.0 - std::cos(phi))};
  }
  for (int i = 0; i < 5; ++i) {
    const double u = i / 4.0;
    const double arch = 4.0 * std::sin(pi * u);
    p[17 + i] = {-55.0 + 40.0 * u, -40.0 - arch, -5.0};
    p[22 + i] = {15.0 + 40.0 * u, -40.0 - arch, -5.0};
  }
  for (int i = 0; i < 4; ++i) p[27 + i] = {0.0, -30.0 + 11.0 * i, -10.0 - 6.0 * i};
  for (int i = 0; i < 5; ++i) p[31 + i] = {-12.0 + 6.0 * i, 12.0, -18.0 + 2.0 * std::abs(i - 2)};
  for (int i = 0; i < 6; ++i) {
    const double th = pi - 2.0 * pi * i / 6.0;
    p[36 + i] = {-32.0 + 12.0 * std::cos(th), -25.0 - 4.0 * std::sin(th), -8.0};
    p[42 + i] = {32.0 + 12.0 * std::cos(th), -25.0 - 4.0 * std::sin(th), -8.0};
  }

  constexpr double kMouthY = 38.0;
  const double half_width = (25.0 + speaker.mouth_width) * (1.0 + 0.12 * spread) * (1.0 - 0.2 * protrusion);
  // Profile weight: 1 at the lip centre, smaller toward the corners.
  auto profile = [](double u) { return std::cos(0.5 * pi * u); };
  auto lip_z = [&](double w) { return -20.0 - 5.0 * w - 4.0 * protrusion * w; };

  p[48] = {-half_width, kMouthY + 0.5 * aperture, lip_z(0.0)};
  p[54] = {half_width, p[48].y, lip_z(0.0)};
  const double outer_x[] = {-0.68, -0.32, 0.0, 0.32, 0.68};
  for (int i = 0; i < 5; ++i) {
    const double w = profile(std::abs(outer_x[i]));
    p[49 + i] = {outer_x[i] * half_width, kMouthY - 5.0 * w - kUpperLift * aperture * w, lip_z(w)};
    // 55..59 run right to left.
    const double xl = outer_x[4 - i];
    const double wl = profile(std::abs(xl));
    p[55 + i] = {xl * half_width, kMouthY + 7.0 * wl + kLowerDrop * aperture * wl, lip_z(wl)};
  }
  const double inner_half = 0.8 * half_width;
  p[60] = {-inner_half, kMouthY + 0.5 * aperture, lip_z(0.1)};
  p[64] = {inner_half, p[60].y, lip_z(0.1)};
  const double inner_x[] = {-0.4, 0.0, 0.4};
  for (int i = 0; i < 3; ++i) {
    const double w = profile(std::abs(inner_x[i]));
    p[61 + i] = {inner_x[i] * inner_half, kMouthY - kUpperLift * aperture * w, lip_z(w) + 1.0};
    const double xl = inner_x[2 - i];
    const double wl = profile(std::abs(xl));
    p[65 + i] = {xl * inner_half, kMouthY + kLowerDrop * aperture * wl, lip_z(wl) + 1.0};
  }

  for (Vec3& v : p) {
    v.x *= speaker.scale;
    v.y *= speaker.scale;
    v.z *= speaker.scale;
  }
  return p;
}

double LipAperture(const LandmarkPoints& points) { return points[66].y - points[62].y; }

std::vector<MouthShape> MouthTrack(std::string_view text) {
  std::vector<MouthShape> steps;
  auto hold = [&](const MouthShape& s) {
    for (int i = 0; i < s.steps; ++i) steps.push_back({s.aperture, s.spread, s.protrusion, 1});
  };
  hold(kRest);
  for (const char c : text) hold(CharacterTemplate(c));
  hold(kRest);

  // Triangular smoothing (weights 1..4..1) with clamped edges.
  constexpr int kHalf = 3;
  std::vector<MouthShape> smooth(steps.size());
  const int n = static_cast<int>(steps.size());
  for (int i = 0; i < n; ++i) {
    double a = 0, s = 0, pr = 0, wsum = 0;
    for (int d = -kHalf; d <= kHalf; ++d) {
      const int j = std::clamp(i + d, 0, n - 1);
      const double w = kHalf + 1 - std::abs(d);
      a += w * steps[j].aperture;
      s += w * steps[j].spread;
      pr += w * steps[j].protrusion;
      wsum += w;
    }
    smooth[i] = {a / wsum, s / wsum, pr / wsum, 1};
  }
  return smooth;
}

ClipRecord SynthClip(const std::string& clip_id, const std::string& text,
                     const SynthSpeaker& speaker, const SynthClipOptions& options) {
  const std::vector<MouthShape> track = MouthTrack(text);
  const double duration = (static_cast<double>(track.size()) - 1.0) * kStepSeconds;
  Rng rng(options.seed);
  const double ph_x = rng.Uniform(0.0, 2.0 * std::numbers::pi);
  const double ph_y = rng.Uniform(0.0, 2.0 * std::numbers::pi);
  const double ph_z = rng.Uniform(0.0, 2.0 * std::numbers::pi);

  ClipRecord clip;
  clip.clip_id = clip_id;
  clip.speaker_id = speaker.id;
  clip.transcript = text;
  clip.source_fps = options.source_fps;
  const auto n_frames = static_cast<int>(std::floor(duration * options.source_fps + 1e-9)) + 1;
  for (int j = 0; j < n_frames; ++j) {
    const double t = j / options.source_fps;
    const double pos = t / kStepSeconds;
    const int k = std::min(static_cast<int>(pos), static_cast<int>(track.size()) - 2);
    const double w = std::clamp(pos - k, 0.0, 1.0);
    auto lerp = [&](double MouthShape::*field) {
      return track[k].*field + w * (track[k + 1].*field - track[k].*field);
    };
    const LandmarkPoints face = PosedFace(speaker, lerp(&MouthShape::aperture),
                                          lerp(&MouthShape::spread), lerp(&MouthShape::protrusion));
    PoseParams pose = options.pose;
    const double omega = 2.0 * std::numbers::pi * 0.7;
    pose.rx += options.pose_wobble * std::sin(omega * t + ph_x);
    pose.ry += options.pose_wobble * std::sin(1.3 * omega * t + ph_y);
    pose.rz += 0.5 * options.pose_wobble * std::sin(0.8 * omega * t + ph_z);

    RawFrame f;
    f.frame = j + 1;
    f.face_id = 0;
    f.timestamp = t;
    f.confidence = 1.0;
    f.success = true;
    f.pose = pose;
    f.points = ApplyPose(pose, face);
    clip.frames.push_back(f);
  }
  return clip;
}

std::vector<SynthCorpusFile> SynthCorpus(uint64_t seed, int n_clips, const Charset& charset) {
  if (n_clips < 2) Fail(ErrorKind::kContract, "synthetic corpus needs at least 2 clips");
  std::vector<std::string> words;
  for (const char* w : kWords) {
    const std::string_view word(w);
    if (std::all_of(word.begin(), word.end(), [&](char c) { return charset.Lookup(c).has_value(); })) {
      words.emplace_back(word);
    }
  }
  if (words.empty() || !charset.Lookup(' ')) {
    Fail(ErrorKind::kVocabulary, "charset cannot spell any synthetic word");
  }

  // The first clip always says HELLO WORLD so demos have a known transcript.
  const bool spells_greeting =
      std::count(words.begin(), words.end(), "HELLO") && std::count(words.begin(), words.end(), "WORLD");

  Rng rng(seed);
  const int n_speakers = std::max(1, (n_clips + 4) / 5);
  std::vector<SynthSpeaker> speakers;
  for (int s = 0; s < n_speakers; ++s) {
    char id[16];
    std::snprintf(id, sizeof(id), "spk%02d", s);
    speakers.push_back({id, rng.Uniform(0.92, 1.08), rng.Uniform(-2.0, 2.0)});
  }

  constexpr double kFps[] = {25.0, 29.97, 30.0};
  std::vector<SynthCorpusFile> files;
  std::string manifest;
  for (int i = 0; i < n_clips; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "clip_%03d", i);
    std::string text;
    if (i == 0 && spells_greeting) {
      text = "HELLO WORLD";
    } else {
      const int n_words = 2 + static_cast<int>(rng.Below(2));
      for (int w = 0; w < n_words; ++w) {
        if (w) text += ' ';
        text += words[rng.Below(words.size())];
      }
    }
    SynthClipOptions options;
    options.source_fps = kFps[rng.Below(3)];
    options.pose = {rng.Normal(0.0, 25.0), rng.Normal(0.0, 20.0), 600.0 + rng.Normal(0.0, 40.0),
                    rng.Normal(0.0, 0.08), rng.Normal(0.0, 0.12), rng.Normal(0.0, 0.05)};
    options.pose_wobble = 0.02;
    options.seed = rng.NextU64();
    const SynthSpeaker& speaker = speakers[static_cast<size_t>(i % n_speakers)];
    const ClipRecord clip = SynthClip(id, text, speaker, options);
    files.push_back({std::string(id) + ".csv", FormatOpenFaceCsv(clip.frames)});
    files.push_back({std::string(id) + ".txt", "Text:  " + text + "\nConf: 4\n"});
    manifest += std::string(id) + '\t' + speaker.id + '\n';
  }
  files.push_back({"speakers.tsv", manifest});
  return files;
}

void WriteSynthCorpus(const std::string& dir, uint64_t seed, int n_clips, const Charset& charset) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const SynthCorpusFile& f : SynthCorpus(seed, n_clips, charset)) {
    io::WriteFileText((fs::path(dir) / f.name).string(), f.contents);
  }
}

}  // namespace liptraj::corpus
