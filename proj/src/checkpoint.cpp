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

#include "liptraj/binary_io.hpp"
#include "liptraj/error.hpp"
#include "liptraj/net.hpp"

namespace liptraj::net {

namespace {

constexpr char kMagic[] = "LTCK1";
constexpr uint32_t kVersion = 1;

bool HasPrefix(const std::string& name, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(),
                     [&](const std::string& p) { return name.rfind(p, 0) == 0; });
}

std::string JoinNames(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

template <typename T>
void CopyInto(const CheckpointRecord& rec, const std::string& name, ad::Tensor<T>& dst) {
  if (!(rec.shape == dst.shape())) {
    Fail(ErrorKind::kCompatibility, "checkpoint array " + name + " has shape " + ad::ToString(rec.shape) +
                                        ", model expects " + ad::ToString(dst.shape()));
  }
  auto v = dst.mutable_value();
  for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(rec.values[i]);
}

void CheckConfig(const ModelConfig& ckpt, const ModelConfig& model) {
  if (ckpt == model) return;
  const auto a = ckpt.ToJson(), b = model.ToJson();
  std::vector<std::string> diffs;
  for (const auto& [key, value] : a.items()) {
    if (key == "preset" || key.find("dropout") != std::string::npos) continue;
    if (b.at(key) != value) diffs.push_back(key + " " + value.dump() + " vs " + b.at(key).dump());
  }
  if (!diffs.empty()) {
    Fail(ErrorKind::kCompatibility, "checkpoint config differs from model: " + JoinNames(diffs));
  }
}

}  // namespace

template <typename T>
std::vector<uint8_t> SaveCheckpoint(const ad::ParamStore<T>& params, const ModelConfig& config,
                                    const CheckpointMetadata& metadata) {
  io::ByteWriter w;
  w.Magic(kMagic);
  w.U32(kVersion);
  w.Str(config.ToJson().dump());
  w.I32(metadata.epoch);
  w.F64(metadata.validation_loss);
  w.U32(static_cast<uint32_t>(metadata.frozen_prefixes.size()));
  for (const auto& p : metadata.frozen_prefixes) w.Str(p);
  w.U32(static_cast<uint32_t>(metadata.extra.size()));
  for (const auto& [k, v] : metadata.extra) {
    w.Str(k);
    w.Str(v);
  }
  w.U32(static_cast<uint32_t>(params.entries().size()));
  for (const auto& [name, entry] : params.entries()) {
    w.Str(name);
    w.U32(static_cast<uint32_t>(entry.tensor.rows()));
    w.U32(static_cast<uint32_t>(entry.tensor.cols()));
    for (const T x : entry.tensor.value()) w.F32(static_cast<float>(x));
  }
  return w.Take();
}

Checkpoint LoadCheckpoint(std::span<const uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  r.ExpectMagic(kMagic);
  const uint32_t version = r.U32();
  if (version != kVersion) {
    Fail(ErrorKind::kFormat, "checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  try {
    ckpt.config = ModelConfig::FromJson(nlohmann::json::parse(r.Str()));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kFormat, std::string("checkpoint: bad config block: ") + e.what());
  } catch (const Error& e) {
    Fail(ErrorKind::kFormat, std::string("checkpoint: bad config block: ") + e.what());
  }
  ckpt.metadata.epoch = r.I32();
  ckpt.metadata.validation_loss = r.F64();
  const uint32_t n_frozen = r.U32();
  for (uint32_t i = 0; i < n_frozen; ++i) ckpt.metadata.frozen_prefixes.push_back(r.Str());
  const uint32_t n_extra = r.U32();
  for (uint32_t i = 0; i < n_extra; ++i) {
    std::string k = r.Str();
    ckpt.metadata.extra[k] = r.Str();
  }
  const uint32_t n_records = r.U32();
  for (uint32_t i = 0; i < n_records; ++i) {
    std::string name = r.Str();
    CheckpointRecord rec;
    rec.shape.rows = static_cast<int>(r.U32());
    rec.shape.cols = static_cast<int>(r.U32());
    if (rec.shape.rows < 0 || rec.shape.cols < 0 || rec.shape.size() * 4 > r.remaining()) {
      Fail(ErrorKind::kFormat, "checkpoint: truncated input");
    }
    rec.values.resize(rec.shape.size());
    for (float& x : rec.values) x = r.F32();
    if (!ckpt.records.emplace(std::move(name), std::move(rec)).second) {
      Fail(ErrorKind::kFormat, "checkpoint: duplicate array name");
    }
  }
  if (!r.AtEnd()) Fail(ErrorKind::kFormat, "checkpoint: trailing bytes");
  return ckpt;
}

template <typename T>
void ApplyCheckpoint(const Checkpoint& ckpt, LandmarkModel<T>& model) {
  CheckConfig(ckpt.config, model.config());
  std::vector<std::string> missing, unexpected;
  for (const auto& name : model.params().Names()) {
    if (!ckpt.records.count(name)) missing.push_back(name);
  }
  for (const auto& [name, rec] : ckpt.records) {
    if (!model.params().Contains(name)) unexpected.push_back(name);
  }
  if (!missing.empty() || !unexpected.empty()) {
    Fail(ErrorKind::kCompatibility, "checkpoint array names differ; missing: [" + JoinNames(missing) +
                                        "], unexpected: [" + JoinNames(unexpected) + "]");
  }
  for (const auto& [name, rec] : ckpt.records) CopyInto(rec, name, model.params().Get(name));
}

template <typename T>
PartialLoadReport LoadPartial(const Checkpoint& ckpt, LandmarkModel<T>& model,
                              const std::vector<std::string>& prefixes) {
  PartialLoadReport report;
  std::vector<std::string> missing;
  for (const auto& name : model.params().Names()) {
    if (!HasPrefix(name, prefixes)) {
      report.fresh.push_back(name);
      continue;
    }
    const auto it = ckpt.records.find(name);
    if (it == ckpt.records.end()) {
      missing.push_back(name);
      continue;
    }
    CopyInto(it->second, name, model.params().Get(name));
    report.loaded.push_back(name);
  }
  if (!missing.empty()) {
    Fail(ErrorKind::kCompatibility, "checkpoint lacks arrays: " + JoinNames(missing));
  }
  return report;
}

#define LIPTRAJ_INSTANTIATE(T)                                                                  \
  template std::vector<uint8_t> SaveCheckpoint<T>(const ad::ParamStore<T>&, const ModelConfig&, \
                                                  const CheckpointMetadata&);                   \
  template void ApplyCheckpoint<T>(const Checkpoint&, LandmarkModel<T>&);                       \
  template PartialLoadReport LoadPartial<T>(const Checkpoint&, LandmarkModel<T>&,               \
                                            const std::vector<std::string>&);
LIPTRAJ_INSTANTIATE(float)
LIPTRAJ_INSTANTIATE(double)
#undef LIPTRAJ_INSTANTIATE

}  // namespace liptraj::net
