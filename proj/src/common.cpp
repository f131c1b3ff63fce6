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

#include <fstream>
#include <iterator>
#include <sstream>

#include "liptraj/binary_io.hpp"
#include "liptraj/error.hpp"

namespace liptraj {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kEmptyInput: return "empty input";
    case ErrorKind::kInsufficientData: return "insufficient data";
    case ErrorKind::kNumericDomain: return "numeric domain error";
    case ErrorKind::kConsistency: return "consistency error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kVocabulary: return "vocabulary error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kCompatibility: return "compatibility error";
    case ErrorKind::kUsage: return "usage error";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return 2;
    case ErrorKind::kIo: return 3;
    case ErrorKind::kFormat: return 4;
    case ErrorKind::kParse: return 5;
    case ErrorKind::kEmptyInput: return 6;
    case ErrorKind::kInsufficientData: return 7;
    case ErrorKind::kNumericDomain: return 8;
    case ErrorKind::kConsistency: return 9;
    case ErrorKind::kShape: return 10;
    case ErrorKind::kVocabulary: return 11;
    case ErrorKind::kContract: return 12;
    case ErrorKind::kCompatibility: return 13;
  }
  return 1;
}

namespace io {

std::vector<uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string ReadFileText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileBytes(const std::string& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorKind::kIo, "short write to " + path);
}

void WriteFileText(const std::string& path, std::string_view text) {
  WriteFileBytes(path, {reinterpret_cast<const uint8_t*>(text.data()), text.size()});
}

}  // namespace io
}  // namespace liptraj
