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

#include "ctxrank/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ctxrank/log.hpp"
#include "ctxrank/rng.hpp"
#include "ctxrank/sampler.hpp"

namespace ctxrank {

TrainingGraphs build_training_graphs(const EmbeddingStore& store, const SamplerConfig& sampler,
                                     const GraphConfig& graph) {
  sampler.validate();
  graph.validate();
  const auto train_ids = store.indices(Split::Train);
  if (train_ids.size() < 2) {
    throw DataError("training split needs at least 2 images, found " +
                    std::to_string(train_ids.size()));
  }
  const SamplerConfig cfg = sampler.clamped_to(train_ids.size() - 1);

  TrainingGraphs out;
  std::vector<size_t> gallery;
  gallery.reserve(train_ids.size() - 1);
  for (size_t probe : train_ids) {
    gallery.clear();
    for (size_t g : train_ids) {
      if (g != probe) gallery.push_back(g);
    }
    CandidateSet set = sample(store, probe, gallery, cfg);
    const auto& labels = *set.labels;
    if (std::find(labels.begin(), labels.end(), 1) == labels.end()) {
      ++out.skipped;
      continue;
    }
    out.graphs.push_back(build_graph(store, set, graph));
  }
  if (out.skipped > 0) {
    log_info("skipped " + std::to_string(out.skipped) + " training probes without positives");
  }
  return out;
}

std::vector<size_t> epoch_order(size_t graph_count, uint64_t seed, int epoch) {
  std::vector<size_t> order(graph_count);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(sub_seed(seed, "shuffle", static_cast<uint64_t>(epoch)));
  rng.shuffle(order.begin(), order.end());
  return order;
}

void train(const std::vector<ContextGraph>& graphs, TrainState& state, const TrainConfig& cfg,
           const TrainHooks& hooks) {
  cfg.validate();
  if (graphs.empty() && state.epoch < cfg.epochs) {
    throw DataError("no training graphs");
  }
  const size_t batch = static_cast<size_t>(cfg.batch);
  while (state.epoch < cfg.epochs) {
    const auto started = std::chrono::steady_clock::now();
    const auto order = epoch_order(graphs.size(), cfg.seed, state.epoch);
    double loss_sum = 0.0;
    size_t steps = 0;
    std::vector<const ContextGraph*> members;
    for (size_t begin = 0; begin < order.size(); begin += batch) {
      members.clear();
      for (size_t i = begin; i < std::min(order.size(), begin + batch); ++i) {
        members.push_back(&graphs[order[i]]);
      }
      const BatchTrace trace = forward_batch(members, state.params, Mode::Train);
      const double loss = batch_loss(trace, cfg.focal_alpha, cfg.focal_gamma);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(state.epoch + 1) +
                           ", step " + std::to_string(steps + 1));
      }
      const ModelParams grads = backward(trace, state.params, cfg.focal_alpha, cfg.focal_gamma);
      sgd_step(state.params, grads, state.sgd, cfg);
      update_running_stats(state.params, trace);
      loss_sum += loss;
      ++steps;
    }
    ++state.epoch;
    const double epoch_loss = loss_sum / static_cast<double>(steps);
    state.loss_history.push_back(epoch_loss);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (hooks.on_epoch) hooks.on_epoch({state.epoch, epoch_loss, seconds});
    const bool periodic = cfg.checkpoint_every > 0 && state.epoch % cfg.checkpoint_every == 0;
    if (hooks.on_checkpoint && (periodic || state.epoch == cfg.epochs)) hooks.on_checkpoint(state);
  }
}

}  // namespace ctxrank
