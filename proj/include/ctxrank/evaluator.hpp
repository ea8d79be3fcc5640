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
#include "ctxrank/gcn.hpp"
#include "ctxrank/sampler.hpp"

namespace ctxrank {

/// d_g = 1 - sigmoid(logit), evaluated stably. Lies in [0, 1].
Vector gcn_distance(const Vector& logits);

/// d = d_o + lambda * d_g, elementwise.
Vector fuse(const Vector& d_o, const Vector& d_g, double lambda);

/// Precision at each positive hit, averaged over positives. `relevant` is
/// in rank order with excluded entries already removed. Empty when there
/// are no positives.
std::optional<double> average_precision(std::span<const uint8_t> relevant);

/// 1-based rank of the first positive, or empty.
std::optional<size_t> first_hit(std::span<const uint8_t> relevant);

struct RankedEntry {
  int64_t id = 0;
  double distance = 0.0;
  bool candidate = false;  // member of G_c
  bool excluded = false;   // same identity and camera as the probe
  bool positive = false;
};

struct RankingResult {
  int64_t probe_id = 0;
  std::vector<RankedEntry> entries;  // final order
  std::optional<double> ap;
  std::optional<size_t> first_hit;
  RecallReport recall;
};

/// Ranks the gallery for one probe. Candidates from the sampler get the fused
/// distance. Under OutsidePolicy::Pad, every other gallery gets
/// d_o + lambda (d_g taken as 1) and the whole list is sorted by distance;
/// under Append, non-candidates follow all candidates, ordered by d_o.
/// Ties break by ascending id. `params` may be null only when lambda == 0.
RankingResult rank(const EmbeddingStore& store, size_t probe, std::span<const size_t> gallery,
                   const ModelParams* params, const EvalConfig& eval,
                   const SamplerConfig& sampler, const GraphConfig& graph);

struct EvalSummary {
  double map = 0.0;
  double rank1 = 0.0;
  double rank5 = 0.0;
  double rank10 = 0.0;
  size_t probes = 0;            // probes counted in the metrics
  size_t excluded_probes = 0;   // probes without any valid positive
  double mean_recall = 0.0;     // over probes with defined recall
  double mean_precision = 0.0;
  std::vector<RankingResult> results;  // one per probe, probe-split order
};

/// Standard single-gallery-shot protocol over the store's probe split.
EvalSummary evaluate(const EmbeddingStore& store, const ModelParams* params,
                     const EvalConfig& eval, const SamplerConfig& sampler,
                     const GraphConfig& graph);

/// Metrics from already-ranked lists (one relevance vector per probe, with
/// exclusions removed).
EvalSummary summarize(std::span<const std::vector<uint8_t>> relevance);

}  // namespace ctxrank
