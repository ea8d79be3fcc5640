// Copyright 2026 The ctxrank Authors.
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

#include <filesystem>
#include <optional>

#include "ctxrank/gcn.hpp"

namespace ctxrank {

inline constexpr char kCheckpointMagic[8] = {'C', 'T', 'X', 'R', 'G', 'C', 'N', '\0'};
inline constexpr uint32_t kCheckpointVersion = 1;

/// Binary layout, all little-endian:
///   magic[8] | u32 version | u32 dim | u32 edge_dim | u32 layers | u32 hidden
///   | u32 sections | f64 bn_eps | f64 bn_momentum
///   | every tensor of ModelParams in declaration order as f64
///   | (sections == 2) the momentum buffers, same order
struct Checkpoint {
  ModelParams params;
  std::optional<ModelParams> velocity;
};

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                      const ModelParams* velocity = nullptr);

/// Throws DataError on bad magic, unknown version, truncation, non-finite
/// values or trailing bytes.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace ctxrank
