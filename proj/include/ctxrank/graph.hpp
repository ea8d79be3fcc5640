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

#include <nlohmann/json_fwd.hpp>

#include "ctxrank/common.hpp"
#include "ctxrank/config.hpp"
#include "ctxrank/embedding_store.hpp"
#include "ctxrank/sampler.hpp"

namespace ctxrank {

/// One probe's context graph: a node per candidate, node features
/// f_probe - f_candidate, and a binary support mask over candidate pairs.
struct ContextGraph {
  int64_t probe_id = 0;
  std::vector<int64_t> candidate_ids;
  Matrix nodes;       // n x d
  Matrix edge_input;  // n x d; rows fed to the edge-weight transforms
  Matrix support;     // n x n, entries 0 or 1, zero diagonal
  std::optional<std::vector<uint8_t>> labels;

  size_t size() const { return static_cast<size_t>(nodes.rows()); }
  int dim() const { return static_cast<int>(nodes.cols()); }
  /// Column indices of the nonzero entries of each support row, ascending.
  std::vector<std::vector<int>> support_rows() const;
};

/// Row i is f_probe - f_{members[i]}.
Matrix build_nodes(const EmbeddingStore& store, size_t probe, std::span<const size_t> members);

/// support(i, j) = 1 iff members[j] is among the kprime most similar members
/// to members[i] (itself excluded, ties by ascending id). kprime clamps to n - 1.
Matrix build_support(const EmbeddingStore& store, std::span<const size_t> members, int kprime);

ContextGraph build_graph(const EmbeddingStore& store, const CandidateSet& candidates,
                         const GraphConfig& cfg);

/// Dump used by `inspect`: probe id, candidate ids, labels, support rows.
nlohmann::json graph_to_json(const ContextGraph& graph);

}  // namespace ctxrank
