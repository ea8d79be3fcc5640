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

#include "ctxrank/sampler.hpp"

#include <algorithm>
#include <unordered_set>

namespace ctxrank {

std::vector<int64_t> CandidateSet::ids(const EmbeddingStore& store) const {
  std::vector<int64_t> out;
  out.reserve(members.size());
  for (size_t m : members) out.push_back(store.record(m).id);
  return out;
}

std::vector<size_t> remove_overlap(std::span<const size_t> second_hop,
                                   std::span<const size_t> first_hop) {
  const std::unordered_set<size_t> drop(first_hop.begin(), first_hop.end());
  std::vector<size_t> out;
  for (size_t g : second_hop) {
    if (!drop.contains(g)) out.push_back(g);
  }
  return out;
}

void attach_labels(CandidateSet& set, const EmbeddingStore& store) {
  std::vector<uint8_t> labels;
  labels.reserve(set.members.size());
  const int64_t identity = store.record(set.probe).identity;
  for (size_t m : set.members) labels.push_back(store.record(m).identity == identity ? 1 : 0);
  set.labels = std::move(labels);
}

CandidateSet plain_sample(const EmbeddingStore& store, size_t probe,
                          std::span<const size_t> gallery, size_t k) {
  CandidateSet out;
  out.probe = probe;
  out.probe_id = store.record(probe).id;
  out.members = topk(store, probe, gallery, k).indices();
  attach_labels(out, store);
  return out;
}

CandidateSet hgs_sample(const EmbeddingStore& store, size_t probe,
                        std::span<const size_t> gallery, const SamplerConfig& cfg) {
  cfg.validate();
  const size_t eligible = static_cast<size_t>(
      std::count_if(gallery.begin(), gallery.end(), [&](size_t g) { return g != probe; }));
  if (eligible < static_cast<size_t>(cfg.k1)) {
    throw DataError("hgs_sample: gallery has " + std::to_string(eligible) +
                    " entries, fewer than k1 = " + std::to_string(cfg.k1));
  }
  const size_t budget = static_cast<size_t>(cfg.k);

  CandidateSet out;
  out.probe = probe;
  out.probe_id = store.record(probe).id;
  const auto first_hop = topk(store, probe, gallery, static_cast<size_t>(cfg.k1)).indices();
  out.members = first_hop;
  std::unordered_set<size_t> present(first_hop.begin(), first_hop.end());

  for (size_t anchor : first_hop) {
    if (out.members.size() >= budget) break;
    const auto second_hop = topk(store, anchor, gallery, static_cast<size_t>(cfg.k2)).indices();
    for (size_t g : remove_overlap(second_hop, first_hop)) {
      if (out.members.size() >= budget) break;
      if (g == probe || !present.insert(g).second) continue;
      out.members.push_back(g);
    }
  }
  attach_labels(out, store);
  return out;
}

CandidateSet sample(const EmbeddingStore& store, size_t probe, std::span<const size_t> gallery,
                    const SamplerConfig& cfg) {
  if (cfg.mode == SamplerMode::Plain) {
    return plain_sample(store, probe, gallery, static_cast<size_t>(cfg.k));
  }
  return hgs_sample(store, probe, gallery, cfg);
}

RecallReport recall_report(const CandidateSet& set, const EmbeddingStore& store,
                           std::span<const size_t> gallery, bool cross_camera) {
  const auto& probe = store.record(set.probe);
  auto is_positive = [&](size_t g) {
    const auto& r = store.record(g);
    return g != set.probe && r.identity == probe.identity &&
           (!cross_camera || r.camera != probe.camera);
  };
  RecallReport out;
  out.positives_total = static_cast<size_t>(std::count_if(gallery.begin(), gallery.end(), is_positive));
  out.positives_sampled =
      static_cast<size_t>(std::count_if(set.members.begin(), set.members.end(), is_positive));
  if (out.positives_total > 0) {
    out.recall = static_cast<double>(out.positives_sampled) / static_cast<double>(out.positives_total);
  }
  if (!set.members.empty()) {
    out.precision = static_cast<double>(out.positives_sampled) / static_cast<double>(set.members.size());
  }
  return out;
}

}  // namespace ctxrank
