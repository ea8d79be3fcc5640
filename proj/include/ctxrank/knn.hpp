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
#include <span>
#include <vector>

#include "ctxrank/common.hpp"
#include "ctxrank/embedding_store.hpp"

namespace ctxrank {

struct Neighbor {
  size_t index = 0;  // store index
  int64_t id = 0;
  double similarity = 0.0;

  bool operator==(const Neighbor&) const = default;
};

/// Ordered by (similarity desc, id asc).
struct NeighborList {
  int64_t query_id = 0;
  std::vector<Neighbor> neighbors;

  std::vector<size_t> indices() const;
};

/// Dot product. Equals cosine similarity on unit vectors.
double similarity(std::span<const double> a, std::span<const double> b);
double similarity(const Eigen::Ref<const RowVector>& a, const Eigen::Ref<const RowVector>& b);

/// d_o = 1 - similarity.
inline double feature_distance(double sim) { return 1.0 - sim; }

/// Strict total order used everywhere a neighbor ranking is produced.
inline bool ranks_before(const Neighbor& a, const Neighbor& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.id < b.id;
}

/// Exact top-k of `candidates` (store indices) against the store row
/// `query`. The query itself is never returned. k clamps to the number of
/// eligible candidates.
NeighborList topk(const EmbeddingStore& store, size_t query, std::span<const size_t> candidates,
                  size_t k);

}  // namespace ctxrank
