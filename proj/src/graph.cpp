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

#include "ctxrank/graph.hpp"

#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ctxrank/knn.hpp"

namespace ctxrank {

std::vector<std::vector<int>> ContextGraph::support_rows() const {
  std::vector<std::vector<int>> rows(static_cast<size_t>(support.rows()));
  for (Eigen::Index i = 0; i < support.rows(); ++i) {
    for (Eigen::Index j = 0; j < support.cols(); ++j) {
      if (support(i, j) != 0.0) rows[static_cast<size_t>(i)].push_back(static_cast<int>(j));
    }
  }
  return rows;
}

Matrix build_nodes(const EmbeddingStore& store, size_t probe, std::span<const size_t> members) {
  Matrix x(static_cast<Eigen::Index>(members.size()), store.dim());
  const auto fp = store.feature(probe);
  for (size_t i = 0; i < members.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = fp - store.feature(members[i]);
  }
  return x;
}

Matrix build_support(const EmbeddingStore& store, std::span<const size_t> members, int kprime) {
  if (kprime < 1) throw ConfigError("kprime must be >= 1");
  const auto n = static_cast<Eigen::Index>(members.size());
  Matrix support = Matrix::Zero(n, n);
  std::unordered_map<size_t, Eigen::Index> position;
  for (Eigen::Index i = 0; i < n; ++i) position.emplace(members[static_cast<size_t>(i)], i);
  if (static_cast<Eigen::Index>(position.size()) != n) {
    throw DataError("build_support: candidate set contains duplicates");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto near = topk(store, members[static_cast<size_t>(i)], members,
                           static_cast<size_t>(kprime));
    for (const auto& nb : near.neighbors) support(i, position.at(nb.index)) = 1.0;
  }
  return support;
}

ContextGraph build_graph(const EmbeddingStore& store, const CandidateSet& candidates,
                         const GraphConfig& cfg) {
  ContextGraph g;
  g.probe_id = candidates.probe_id;
  g.candidate_ids = candidates.ids(store);
  g.nodes = build_nodes(store, candidates.probe, candidates.members);
  if (cfg.edge_input == EdgeInput::Nodes) {
    g.edge_input = g.nodes;
  } else {
    g.edge_input.resize(g.nodes.rows(), g.nodes.cols());
    for (size_t i = 0; i < candidates.members.size(); ++i) {
      g.edge_input.row(static_cast<Eigen::Index>(i)) = store.feature(candidates.members[i]);
    }
  }
  g.support = build_support(store, candidates.members, cfg.kprime);
  g.labels = candidates.labels;
  return g;
}

nlohmann::json graph_to_json(const ContextGraph& graph) {
  nlohmann::json j;
  j["probe_id"] = graph.probe_id;
  j["candidate_ids"] = graph.candidate_ids;
  if (graph.labels) {
    j["labels"] = *graph.labels;
  } else {
    j["labels"] = nullptr;
  }
  j["support"] = graph.support_rows();
  return j;
}

}  // namespace ctxrank
