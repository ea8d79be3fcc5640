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

#include <functional>
#include <vector>

#include "ctxrank/config.hpp"
#include "ctxrank/embedding_store.hpp"
#include "ctxrank/gcn.hpp"
#include "ctxrank/graph.hpp"

namespace ctxrank {

struct TrainingGraphs {
  std::vector<ContextGraph> graphs;
  size_t skipped = 0;  // probes whose candidates held no positive
};

/// Every train-split image becomes a probe once; its candidates come from
/// the remaining train images. The sampler is clamped to the available
/// gallery size.
TrainingGraphs build_training_graphs(const EmbeddingStore& store, const SamplerConfig& sampler,
                                     const GraphConfig& graph);

/// Resumable optimizer state. The per-epoch shuffle is a pure function of
/// (train seed, epoch), so no generator state needs to be stored.
struct TrainState {
  ModelParams params;
  SgdState sgd;
  int epoch = 0;  // completed epochs
  std::vector<double> loss_history;

  explicit TrainState(ModelParams p) : params(std::move(p)), sgd(params) {}
};

struct EpochReport {
  int epoch = 0;  // 1-based index of the epoch just finished
  double loss = 0.0;
  double seconds = 0.0;
};

struct TrainHooks {
  std::function<void(const EpochReport&)> on_epoch;
  // Called with the state after each epoch that should be checkpointed.
  std::function<void(const TrainState&)> on_checkpoint;
};

/// Order in which graphs are visited during `epoch` (0-based).
std::vector<size_t> epoch_order(size_t graph_count, uint64_t seed, int epoch);

/// Runs epochs until state.epoch == cfg.epochs. Each step: train-mode
/// forward over `cfg.batch` graphs, mean of per-graph mean focal losses,
/// backward, running-stat update, SGD. Epoch loss is the mean step loss.
/// A non-finite loss throws NumericError before the update is applied.
void train(const std::vector<ContextGraph>& graphs, TrainState& state, const TrainConfig& cfg,
           const TrainHooks& hooks = {});

}  // namespace ctxrank
