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

#include "ctxrank/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "ctxrank/graph.hpp"
#include "ctxrank/knn.hpp"

namespace ctxrank {

Vector gcn_distance(const Vector& logits) {
  Vector d(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    // 1 - sigmoid(z) = sigmoid(-z)
    const double z = logits[i];
    d[i] = z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
  }
  return d;
}

Vector fuse(const Vector& d_o, const Vector& d_g, double lambda) {
  if (d_o.size() != d_g.size()) throw DataError("fuse: length mismatch");
  if (lambda < 0.0) throw ConfigError("fuse: lambda must be >= 0");
  return d_o + lambda * d_g;
}

std::optional<double> average_precision(std::span<const uint8_t> relevant) {
  size_t hits = 0;
  double sum = 0.0;
  for (size_t i = 0; i < relevant.size(); ++i) {
    if (!relevant[i]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

std::optional<size_t> first_hit(std::span<const uint8_t> relevant) {
  for (size_t i = 0; i < relevant.size(); ++i) {
    if (relevant[i]) return i + 1;
  }
  return std::nullopt;
}

RankingResult rank(const EmbeddingStore& store, size_t probe, std::span<const size_t> gallery,
                   const ModelParams* params, const EvalConfig& eval,
                   const SamplerConfig& sampler, const GraphConfig& graph) {
  if (gallery.empty()) throw DataError("rank: empty gallery");
  const auto& p = store.record(probe);
  RankingResult out;
  out.probe_id = p.id;

  const CandidateSet set = sample(store, probe, gallery, sampler.clamped_to(gallery.size()));
  out.recall = recall_report(set, store, gallery, eval.cross_camera);

  Vector d_g = Vector::Ones(static_cast<Eigen::Index>(set.size()));
  if (eval.lambda != 0.0) {
    if (params == nullptr) throw ConfigError("rank: lambda > 0 requires a trained model");
    const ContextGraph g = build_graph(store, set, graph);
    d_g = gcn_distance(forward(g, *params, Mode::Eval));
  }

  std::vector<double> graph_distance(store.size(), 1.0);
  std::vector<uint8_t> in_set(store.size(), 0);
  for (size_t i = 0; i < set.size(); ++i) {
    graph_distance[set.members[i]] = d_g[static_cast<Eigen::Index>(i)];
    in_set[set.members[i]] = 1;
  }

  const auto fp = store.feature(probe);
  out.entries.reserve(gallery.size());
  std::vector<double> original;
  original.reserve(gallery.size());
  for (size_t g : gallery) {
    const auto& r = store.record(g);
    const double d_o = feature_distance(similarity(fp, store.feature(g)));
    RankedEntry e;
    e.id = r.id;
    e.candidate = in_set[g] != 0;
    e.positive = r.identity == p.identity;
    e.excluded = eval.cross_camera && e.positive && r.camera == p.camera;
    e.distance = (e.candidate || eval.outside == OutsidePolicy::Pad)
                     ? d_o + eval.lambda * graph_distance[g]
                     : d_o;
    out.entries.push_back(e);
  }
  const bool append = eval.outside == OutsidePolicy::Append;
  std::sort(out.entries.begin(), out.entries.end(), [&](const RankedEntry& a, const RankedEntry& b) {
    if (append && a.candidate != b.candidate) return a.candidate;
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.id < b.id;
  });

  std::vector<uint8_t> relevant;
  relevant.reserve(out.entries.size());
  for (const auto& e : out.entries) {
    if (!e.excluded) relevant.push_back(e.positive ? 1 : 0);
  }
  out.ap = average_precision(relevant);
  out.first_hit = first_hit(relevant);
  return out;
}

EvalSummary summarize(std::span<const std::vector<uint8_t>> relevance) {
  EvalSummary s;
  for (const auto& rel : relevance) {
    const auto ap = average_precision(rel);
    if (!ap) {
      ++s.excluded_probes;
      continue;
    }
    const auto hit = *first_hit(rel);
    ++s.probes;
    s.map += *ap;
    s.rank1 += hit <= 1 ? 1.0 : 0.0;
    s.rank5 += hit <= 5 ? 1.0 : 0.0;
    s.rank10 += hit <= 10 ? 1.0 : 0.0;
  }
  if (s.probes > 0) {
    const double n = static_cast<double>(s.probes);
    s.map /= n;
    s.rank1 /= n;
    s.rank5 /= n;
    s.rank10 /= n;
  }
  return s;
}

EvalSummary evaluate(const EmbeddingStore& store, const ModelParams* params,
                     const EvalConfig& eval, const SamplerConfig& sampler,
                     const GraphConfig& graph) {
  eval.validate();
  const auto probes = store.indices(Split::Probe);
  const auto gallery = store.indices(Split::Gallery);
  if (probes.empty()) throw DataError("evaluate: probe split is empty");
  if (gallery.empty()) throw DataError("evaluate: gallery split is empty");
  if (params != nullptr && params->config.dim != store.dim()) {
    throw DataError("evaluate: model dim " + std::to_string(params->config.dim) +
                    " does not match store dim " + std::to_string(store.dim()));
  }

  std::vector<RankingResult> results(probes.size());
  auto work = [&](size_t first, size_t stride) {
    for (size_t i = first; i < probes.size(); i += stride) {
      results[i] = rank(store, probes[i], gallery, params, eval, sampler, graph);
    }
  };
  const size_t workers = std::min<size_t>(static_cast<size_t>(eval.workers), probes.size());
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w, workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  // Aggregate in probe order so worker count never changes the sums.
  std::vector<std::vector<uint8_t>> relevance;
  relevance.reserve(results.size());
  double recall_sum = 0.0, precision_sum = 0.0;
  size_t recall_count = 0;
  for (const auto& r : results) {
    std::vector<uint8_t> rel;
    for (const auto& e : r.entries) {
      if (!e.excluded) rel.push_back(e.positive ? 1 : 0);
    }
    relevance.push_back(std::move(rel));
    if (r.recall.recall) {
      recall_sum += *r.recall.recall;
      ++recall_count;
    }
    precision_sum += r.recall.precision;
  }
  EvalSummary s = summarize(relevance);
  s.mean_recall = recall_count > 0 ? recall_sum / static_cast<double>(recall_count) : 0.0;
  s.mean_precision = precision_sum / static_cast<double>(results.size());
  s.results = std::move(results);
  return s;
}

}  // namespace ctxrank
