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
#include <optional>
#include <span>
#include <vector>

#include "ctxrank/config.hpp"
#include "ctxrank/embedding_store.hpp"
#include "ctxrank/knn.hpp"

namespace ctxrank {

/// Gallery candidates chosen for one probe, in sampler insertion order.
struct CandidateSet {
  size_t probe = 0;  // store index
  int64_t probe_id = 0;
  std::vector<size_t> members;  // store indices
  std::optional<std::vector<uint8_t>> labels;  // 1 where identity matches the probe

  size_t size() const { return members.size(); }
  std::vector<int64_t> ids(const EmbeddingStore& store) const;
};

/// Set difference that keeps the order of `second_hop` (N'(g, k2)).
std::vector<size_t> remove_overlap(std::span<const size_t> second_hop,
                                   std::span<const size_t> first_hop);

/// G_c = top-k of the gallery around the probe.
CandidateSet plain_sample(const EmbeddingStore& store, size_t probe,
                          std::span<const size_t> gallery, size_t k);

/// Two-hop hard gallery sampler. Starts from the probe's k1 nearest gallery
/// entries, then walks them in rank order, appending each one's k2 nearest
/// gallery neighbors (itself excluded, first-hop members removed, already
/// present ids skipped) until k members are collected. May return fewer
/// than k when the expansions run dry.
CandidateSet hgs_sample(const EmbeddingStore& store, size_t probe,
                        std::span<const size_t> gallery, const SamplerConfig& cfg);

/// Dispatches on cfg.mode.
CandidateSet sample(const EmbeddingStore& store, size_t probe, std::span<const size_t> gallery,
                    const SamplerConfig& cfg);

/// Fills `labels` from identity equality with the probe.
void attach_labels(CandidateSet& set, const EmbeddingStore& store);

struct RecallReport {
  std::optional<double> recall;  // empty when the probe has no positives at all
  double precision = 0.0;
  size_t positives_sampled = 0;
  size_t positives_total = 0;
};

/// Positives are gallery entries with the probe's identity, restricted to
/// other cameras when `cross_camera`.
RecallReport recall_report(const CandidateSet& set, const EmbeddingStore& store,
                           std::span<const size_t> gallery, bool cross_camera = true);

}  // namespace ctxrank
