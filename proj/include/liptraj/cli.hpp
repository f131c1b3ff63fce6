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

// Command-line front end: argument parsing, JSON configuration with dotted
// overrides, and one runner per subcommand.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace liptraj::cli {

inline constexpr const char* kVersion = "0.1.0";
// Default output root when --out is not given.
inline constexpr const char* kOutputRootEnv = "LIPTRAJ_OUT";

struct Command {
  std::string name;  // synth, prepare, pretrain, train, ablate, infer, eval, export; "help" for --help
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;  // dotted key, raw value
  std::optional<uint64_t> seed;
  std::string output_dir;

  std::string input;           // prepare: corpus directory
  std::string dataset;         // prepared dataset file
  std::string target_dataset;   // pretrain: dataset for the transfer phase
  std::string pretrain_dataset;  // ablate: dataset the shared encoder is trained on
  std::string checkpoint;
  std::string text;
  std::string clip;
  std::string speaker;
  std::string format = "csv";
  std::string truth;
  std::string trajectory;
  std::vector<std::string> predictions;
  std::vector<std::string> labels;
  std::optional<int> clips;

  std::string help_text;
};

// Throws Error(kUsage) on unknown subcommands or flags.
Command ParseArgs(int argc, const char* const* argv);

// Defaults for every configurable key; model and both trainer sections list
// all of their fields.
nlohmann::json DefaultConfig();
nlohmann::json ConfigSchema();

// Defaults, then the config file, then --set overrides, then --seed. Every key
// is checked against the schema before anything runs.
nlohmann::json ResolveConfig(const Command& cmd);

// Runs the command and returns the process exit code. Errors are reported on
// err and mapped to distinct non-zero codes.
int Run(const Command& cmd, std::ostream& out, std::ostream& err);

// ParseArgs + Run with the same error mapping.
int Main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace liptraj::cli
