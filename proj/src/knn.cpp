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

#include "ctxrank/knn.hpp"

#include <algorithm>

namespace ctxrank {

std::vector<size_t> NeighborList::indices() const {
  std::vector<size_t> out;
  out.reserve(neighbors.size());
  for (const auto& n : neighbors) out.push_back(n.index);
  return out;
}

double similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError("similarity: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  }
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double similarity(const Eigen::Ref<const RowVector>& a, const Eigen::Ref<const RowVector>& b) {
  return similarity(std::span<const double>(a.data(), static_cast<size_t>(a.size())),
                    std::span<const double>(b.data(), static_cast<size_t>(b.size())));
}

NeighborList topk(const EmbeddingStore& store, size_t query, std::span<const size_t> candidates,
                  size_t k) {
  NeighborList out;
  out.query_id = store.record(query).id;
  const auto q = store.feature(query);
  out.neighbors.reserve(candidates.size());
  for (size_t c : candidates) {
    if (c == query) continue;
    out.neighbors.push_back({c, store.record(c).id, similarity(q, store.feature(c))});
  }
  const size_t keep = std::min(k, out.neighbors.size());
  std::partial_sort(out.neighbors.begin(), out.neighbors.begin() + static_cast<long>(keep),
                    out.neighbors.end(), ranks_before);
  out.neighbors.resize(keep);
  return out;
}

}  // namespace ctxrank
