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

#include <cmath>
#include <algorithm>
#include <numbers>
#include <vector>

#include "ctxrank/config.hpp"
#include "ctxrank/embedding_store.hpp"
#include "ctxrank/graph.hpp"
#include "ctxrank/rng.hpp"

namespace ctxrank::fixtures {

// Unit vectors on a circle. The probe (id 0) sits at 0 degrees, an easy
// positive at 8, a hard positive at 25, nine negatives packed on the other
// side between -10 and -26 and nine more far away. With k = 4 the plain
// top-k fills up with negatives before reaching the hard positive, but the
// easy positive's own nearest neighbor is the hard positive.
struct HardPositiveInstance {
  EmbeddingStore store;
  size_t probe = 0;
  std::vector<size_t> gallery;
  size_t easy = 0;
  size_t hard = 0;
  SamplerConfig sampler;
};

inline HardPositiveInstance hard_positive_instance() {
  std::vector<double> angles{0, 8, 25};
  std::vector<int64_t> identities{0, 0, 0};
  for (int i = 0; i < 9; ++i) {
    angles.push_back(-10.0 - 2.0 * i);
    identities.push_back(1);
  }
  for (int i = 0; i < 9; ++i) {
    angles.push_back(100.0 + 10.0 * i);
    identities.push_back(2);
  }
  Matrix f(static_cast<Eigen::Index>(angles.size()), 2);
  std::vector<EmbeddingRecord> recs;
  for (size_t i = 0; i < angles.size(); ++i) {
    double rad = angles[i] * std::numbers::pi / 180.0;
    f(static_cast<Eigen::Index>(i), 0) = std::cos(rad);
    f(static_cast<Eigen::Index>(i), 1) = std::sin(rad);
    recs.push_back({static_cast<int64_t>(i), identities[i], static_cast<int64_t>(i % 3),
                    i == 0 ? Split::Probe : Split::Gallery});
  }
  HardPositiveInstance out{EmbeddingStore(std::move(recs), f, true), 0, {}, 1, 2, {}};
  for (size_t i = 1; i < angles.size(); ++i) out.gallery.push_back(i);
  out.sampler.k1 = 2;
  out.sampler.k2 = 2;
  out.sampler.k = 4;
  return out;
}

// Random graph with up to `kprime` supported neighbors per row and at least
// one positive label. Rows may have empty support when `allow_empty` is set.
inline ContextGraph random_graph(Rng& rng, int n, int dim, int kprime, bool allow_empty = false) {
  ContextGraph g;
  g.nodes.resize(n, dim);
  for (Eigen::Index i = 0; i < g.nodes.size(); ++i) g.nodes.data()[i] = 0.5 * rng.normal();
  g.edge_input = g.nodes;
  g.support = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    std::vector<size_t> others;
    for (int j = 0; j < n; ++j)
      if (j != i) others.push_back(static_cast<size_t>(j));
    rng.shuffle(others.begin(), others.end());
    size_t lo = allow_empty ? 0 : 1;
    size_t cap = std::min<size_t>(static_cast<size_t>(kprime), others.size());
    size_t count = cap < lo ? cap : lo + rng.below(cap - lo + 1);
    for (size_t c = 0; c < count; ++c) g.support(i, static_cast<Eigen::Index>(others[c])) = 1.0;
  }
  std::vector<uint8_t> labels(static_cast<size_t>(n));
  for (auto& l : labels) l = rng.uniform() < 0.3 ? 1 : 0;
  labels[rng.below(static_cast<uint64_t>(n))] = 1;
  g.labels = labels;
  for (int i = 0; i < n; ++i) g.candidate_ids.push_back(i + 1);
  return g;
}

// Eight small fixed graphs for the overfit check.
inline std::vector<ContextGraph> overfit_graphs(int dim = 8) {
  Rng rng(20260101);
  std::vector<ContextGraph> out;
  for (int i = 0; i < 8; ++i) out.push_back(random_graph(rng, 5 + i % 4, dim, 3));
  return out;
}

// Hand-evaluated ranking fixtures: relevance in rank order and the exact AP
// (numerator / denominator) and first-hit rank.
struct MetricFixture {
  std::vector<uint8_t> relevant;
  double ap;
  size_t first_hit;
};

inline std::vector<MetricFixture> metric_fixtures() {
  return {
      {{1, 0, 1}, (1.0 + 2.0 / 3.0) / 2.0, 1},                    // 5/6
      {{1, 1, 1}, 1.0, 1},                                          // perfect
      {{0, 1}, 1.0 / 2.0, 2},
      {{0, 0, 0, 0, 1}, 1.0 / 5.0, 5},
      {{0, 1, 0, 1}, (1.0 / 2.0 + 2.0 / 4.0) / 2.0, 2},            // 1/2
      {{1, 0, 0, 0, 0, 0, 0, 0, 0, 1}, (1.0 + 2.0 / 10.0) / 2.0, 1},  // 3/5
      {{0, 0, 1, 1, 0, 1}, (1.0 / 3.0 + 2.0 / 4.0 + 3.0 / 6.0) / 3.0, 3},  // 4/9
      {{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1}, 1.0 / 11.0, 11},
      {{1}, 1.0, 1},
      {{0, 1, 1, 0, 0, 0, 1}, (1.0 / 2.0 + 2.0 / 3.0 + 3.0 / 7.0) / 3.0, 2},
  };
}

}  // namespace ctxrank::fixtures
