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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxrank/common.hpp"
#include "ctxrank/config.hpp"

namespace ctxrank {

enum class Split : uint8_t { Probe, Gallery, Train };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// Labels of one embedding. The feature lives in the owning store's matrix
/// row with the same index.
struct EmbeddingRecord {
  int64_t id = 0;
  int64_t identity = 0;
  int64_t camera = 0;
  Split split = Split::Gallery;

  bool operator==(const EmbeddingRecord&) const = default;
};

/// Immutable labeled embedding set.
///
/// Features are stored at 32-bit precision (the on-disk format) and exposed
/// as 64-bit values for arithmetic. When `normalized()` is set, the exposed
/// features are the L2-normalized storage rows, computed in 64-bit.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  /// Validates ids and shape. `features` is rounded to storage precision.
  EmbeddingStore(std::vector<EmbeddingRecord> records, const Matrix& features,
                 bool normalized = false);

  size_t size() const { return records_.size(); }
  int dim() const { return dim_; }
  bool normalized() const { return normalized_; }

  const std::vector<EmbeddingRecord>& records() const { return records_; }
  const EmbeddingRecord& record(size_t index) const { return records_[index]; }
  const Matrix& features() const { return features_; }
  auto feature(size_t index) const { return features_.row(static_cast<Eigen::Index>(index)); }
  std::span<const float> storage() const { return storage_; }

  std::optional<size_t> index_of(int64_t id) const;
  size_t require_index(int64_t id) const;

  /// Store indices tagged with `split`, in store order.
  std::vector<size_t> indices(Split split) const;

  /// Probe indices without a valid match in the gallery (same identity, and
  /// a different camera when `cross_camera`).
  std::vector<size_t> unmatched_probes(bool cross_camera) const;

  /// Field-for-field equality: labels, flags and storage bits.
  bool operator==(const EmbeddingStore& other) const;

 private:
  friend EmbeddingStore normalize(const EmbeddingStore& store);
  void rebuild_features();

  std::vector<EmbeddingRecord> records_;
  std::vector<float> storage_;  // row-major [size x dim]
  Matrix features_;
  std::unordered_map<int64_t, size_t> index_;
  int dim_ = 0;
  bool normalized_ = false;
};

/// Returns a copy whose exposed features have unit L2 norm. Idempotent.
/// Throws DataError naming the record id of any zero-norm feature.
EmbeddingStore normalize(const EmbeddingStore& store);

/// Reads a JSON manifest and its raw little-endian float32 payload.
EmbeddingStore load(const std::filesystem::path& manifest_path);

/// Writes `<manifest>` plus a sibling feature file (manifest stem + ".f32").
void write(const EmbeddingStore& store, const std::filesystem::path& manifest_path);

/// Synthetic identities on the unit sphere with per-camera appearance shifts.
///
/// Each identity gets a random unit centroid. Camera directions form a
/// chain: camera 0 points in a random direction and camera c + 1 is camera c
/// rotated by `camera_angle` towards a fresh random orthogonal direction, so
/// neighbouring cameras look alike and distant ones do not. For a given
/// identity the camera direction is orthogonalized against the centroid,
/// normalized and scaled by `camera_offset`. A sample is
/// normalize(centroid + offset + N(0, sigma^2 I)). The first
/// `train_fraction` of identities are tagged train. For the others, sample 0
/// of every camera is a probe (only camera `identity % cameras` when
/// per_camera == 1) and the rest are gallery.
EmbeddingStore synth_generate(const SynthConfig& cfg);

}  // namespace ctxrank
