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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxrank/config.hpp"
#include "ctxrank/embedding_store.hpp"
#include "ctxrank/evaluator.hpp"
#include "ctxrank/gcn.hpp"
#include "ctxrank/trainer.hpp"

// End-to-end operations on a RunConfig. These back both the C API and the
// acceptance suite.
namespace ctxrank {

/// Synthesizes the store described by cfg.synth, seeded from cfg.seed.
EmbeddingStore synth_store(const RunConfig& cfg);

/// Checkpoint file names inside a run directory.
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int epoch);
std::optional<int> latest_checkpoint_epoch(const std::filesystem::path& dir);

struct TrainRun {
  TrainState state;
  size_t graphs = 0;
  size_t skipped = 0;
};

/// Builds training graphs and trains. When `dir` is non-empty it receives
/// ckpt_{epoch}.bin/.json (including ckpt_0 for a fresh run) and
/// train_log.jsonl. With `resume`, training continues from the newest
/// checkpoint in `dir`.
TrainRun run_training(const EmbeddingStore& store, const RunConfig& cfg,
                      const std::filesystem::path& dir = {}, bool resume = false);

/// Model dimension resolved against the store (model.dim == 0 takes the store's).
ModelConfig resolve_model_config(const RunConfig& cfg, int store_dim);

struct Sweep {
  std::vector<double> lambdas;          // empty: cfg.eval.lambda
  std::vector<int> ks;                  // empty: cfg.sampler.k
  std::vector<int> kprimes;             // empty: cfg.graph.kprime
  std::vector<SamplerMode> modes;       // empty: cfg.sampler.mode
};

/// Sampler settings for one sweep point; k1 shrinks to k when needed.
SamplerConfig sweep_sampler(const SamplerConfig& base, int k, SamplerMode mode);

/// Evaluates every (model, mode, k, kprime, lambda) combination. The summary
/// holds the config, its hash and one row per combination, in that nesting
/// order. A null model is allowed only for lambda == 0.
nlohmann::json run_eval(const EmbeddingStore& store, const std::vector<const ModelParams*>& models,
                        const RunConfig& cfg, const Sweep& sweep = {});

/// Metrics of an evaluation as a summary row.
nlohmann::json summary_row(const EvalSummary& s);

/// CSV of the sweep rows of a run_eval summary.
std::string plot_csv(const nlohmann::json& summary);

/// One JSON object per probe: ids, distances, AP.
void write_rankings(std::ostream& out, const EvalSummary& summary, const std::string& hash);

struct GradcheckOptions {
  std::vector<int> node_counts{3, 10, 50};
  double step = 1e-5;
  double tolerance = 1e-4;
  bool inject_fault = false;
};

/// Central finite differences against backward() for every trainable tensor,
/// on batches of two random graphs per node count. Report lists each tensor
/// once with its worst relative error.
nlohmann::json gradcheck(const RunConfig& cfg, const GradcheckOptions& options = {});

/// Graph dump for one probe of the store.
nlohmann::json inspect(const EmbeddingStore& store, const RunConfig& cfg, int64_t probe_id);

}  // namespace ctxrank
