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

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "liptraj/corpus.hpp"
#include "liptraj/error.hpp"

namespace liptraj::corpus {
namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(Trim(line.substr(start)));
      break;
    }
    fields.push_back(Trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (start <= text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

double ParseCell(std::string_view cell, size_t row, std::string_view column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    std::ostringstream msg;
    msg << "non-numeric cell '" << cell << "' at row " << row << ", column "
        << column;
    Fail(ErrorKind::kParse, msg.str());
  }
  return value;
}

constexpr const char* kScalarColumns[] = {
    "frame",   "face_id", "timestamp", "confidence", "success", "pose_Tx",
    "pose_Ty", "pose_Tz", "pose_Rx",   "pose_Ry",    "pose_Rz"};

}  // namespace

std::vector<RawFrame> ParseOpenFaceCsv(std::string_view text) {
  const auto lines = SplitLines(text);
  size_t header_line = 0;
  while (header_line < lines.size() && Trim(lines[header_line]).empty()) ++header_line;
  if (header_line == lines.size()) Fail(ErrorKind::kEmptyInput, "OpenFace CSV is empty");

  const auto header = SplitFields(lines[header_line]);
  std::map<std::string_view, size_t> column_of;
  for (size_t i = 0; i < header.size(); ++i) column_of.emplace(header[i], i);

  auto require = [&](const std::string& name) {
    const auto it = column_of.find(name);
    if (it == column_of.end()) {
      Fail(ErrorKind::kFormat, "OpenFace CSV missing required column " + name);
    }
    return it->second;
  };

  std::array<size_t, std::size(kScalarColumns)> scalar_idx{};
  for (size_t i = 0; i < std::size(kScalarColumns); ++i) {
    scalar_idx[i] = require(kScalarColumns[i]);
  }
  std::array<std::array<size_t, 3>, kNumLandmarks> point_idx{};
  for (int k = 0; k < kNumLandmarks; ++k) {
    point_idx[k][0] = require("X_" + std::to_string(k));
    point_idx[k][1] = require("Y_" + std::to_string(k));
    point_idx[k][2] = require("Z_" + std::to_string(k));
  }

  std::vector<RawFrame> frames;
  for (size_t li = header_line + 1; li < lines.size(); ++li) {
    if (Trim(lines[li]).empty()) continue;
    const auto fields = SplitFields(lines[li]);
    const size_t row = li - header_line;  // 1-based data row
    if (fields.size() < header.size()) {
      std::ostringstream msg;
      msg << "row " << row << " has " << fields.size() << " cells, header has "
          << header.size();
      Fail(ErrorKind::kParse, msg.str());
    }
    auto cell = [&](size_t col) { return ParseCell(fields[col], row, header[col]); };

    RawFrame f;
    f.frame = static_cast<int>(cell(scalar_idx[0]));
    f.face_id = static_cast<int>(cell(scalar_idx[1]));
    f.timestamp = cell(scalar_idx[2]);
    f.confidence = cell(scalar_idx[3]);
    f.success = cell(scalar_idx[4]) != 0.0;
    f.pose = {cell(scalar_idx[5]), cell(scalar_idx[6]), cell(scalar_idx[7]),
              cell(scalar_idx[8]), cell(scalar_idx[9]), cell(scalar_idx[10])};
    for (int k = 0; k < kNumLandmarks; ++k) {
      f.points[k] = {cell(point_idx[k][0]), cell(point_idx[k][1]), cell(point_idx[k][2])};
    }
    frames.push_back(f);
  }
  if (frames.empty()) Fail(ErrorKind::kEmptyInput, "OpenFace CSV has a header but no data rows");
  return frames;
}

std::string FormatOpenFaceCsv(std::span<const RawFrame> frames) {
  std::string out = "frame, face_id, timestamp, confidence, success, pose_Tx, pose_Ty, "
                    "pose_Tz, pose_Rx, pose_Ry, pose_Rz";
  for (const char axis : {'X', 'Y', 'Z'}) {
    for (int k = 0; k < kNumLandmarks; ++k) {
      out += ", ";
      out += axis;
      out += '_' + std::to_string(k);
    }
  }
  out += '\n';
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), ", %.9f", v);
    out += buf;
  };
  for (const RawFrame& f : frames) {
    std::snprintf(buf, sizeof(buf), "%d, %d, %.6f, %.3f, %d", f.frame, f.face_id,
                  f.timestamp, f.confidence, f.success ? 1 : 0);
    out += buf;
    num(f.pose.tx);
    num(f.pose.ty);
    num(f.pose.tz);
    num(f.pose.rx);
    num(f.pose.ry);
    num(f.pose.rz);
    for (int k = 0; k < kNumLandmarks; ++k) num(f.points[k].x);
    for (int k = 0; k < kNumLandmarks; ++k) num(f.points[k].y);
    for (int k = 0; k < kNumLandmarks; ++k) num(f.points[k].z);
    out += '\n';
  }
  return out;
}

std::string ParseTranscript(std::string_view text) {
  for (std::string_view line : SplitLines(text)) {
    if (line.substr(0, 5) != "Text:") continue;
    std::string out;
    bool pending_space = false;
    for (const char ch : line.substr(5)) {
      if (std::isspace(static_cast<unsigned char>(ch))) {
        pending_space = !out.empty();
        continue;
      }
      if (pending_space) out += ' ';
      pending_space = false;
      out += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    return out;
  }
  Fail(ErrorKind::kFormat, "transcript has no 'Text:' line");
}

FilterResult FilterClip(const ClipRecord& clip, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    Fail(ErrorKind::kContract, "confidence threshold must lie in [0, 1]");
  }
  FilterResult result;
  for (size_t i = 0; i < clip.frames.size(); ++i) {
    const RawFrame& f = clip.frames[i];
    if (!f.success || !(f.confidence >= threshold)) {
      result.offending_frames.push_back(static_cast<int>(i));
    }
  }
  result.accepted = result.offending_frames.empty();
  return result;
}

// --- vocabulary ------------------------------------------------------------

Charset::Charset() : Charset("ABCDEFGHIJKLMNOPQRSTUVWXYZ '.,") {}

Charset::Charset(std::string symbols) : symbols_(std::move(symbols)) {
  ids_.fill(-1);
  for (size_t i = 0; i < symbols_.size(); ++i) {
    const auto c = static_cast<unsigned char>(symbols_[i]);
    if (ids_[c] != -1) {
      Fail(ErrorKind::kContract, std::string("duplicate charset symbol '") + symbols_[i] + "'");
    }
    ids_[c] = static_cast<int>(i);
  }
  auto alias = [&](char from, char to) {
    const auto f = static_cast<unsigned char>(from);
    const auto t = static_cast<unsigned char>(to);
    if (ids_[f] == -1 && ids_[t] != -1) ids_[f] = ids_[t];
  };
  alias('?', '.');
  alias('!', '.');
  alias('-', ',');
}

std::optional<int> Charset::Lookup(char c) const {
  const int id = ids_[static_cast<unsigned char>(c)];
  if (id < 0) return std::nullopt;
  return id;
}

std::vector<int> EncodeText(std::string_view text, const Charset& charset) {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    const auto id = charset.Lookup(text[i]);
    if (!id) {
      std::ostringstream msg;
      msg << "character '" << text[i] << "' at offset " << i
          << " is not in the vocabulary";
      Fail(ErrorKind::kVocabulary, msg.str());
    }
    ids.push_back(*id);
  }
  return ids;
}

}  // namespace liptraj::corpus
