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

#include "ctxrank/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <regex>
#include <sstream>

#include "ctxrank/checkpoint.hpp"
#include "ctxrank/graph.hpp"
#include "ctxrank/log.hpp"
#include "ctxrank/rng.hpp"

namespace ctxrank {
namespace {

using nlohmann::json;

std::filesystem::path metadata_path(const std::filesystem::path& dir, int epoch) {
  return dir / ("ckpt_" + std::to_string(epoch) + ".json");
}

void write_metadata(const std::filesystem::path& dir, const TrainState& state,
                    const RunConfig& cfg, const TrainRun& run) {
  json meta;
  meta["format_version"] = kCheckpointVersion;
  meta["epoch"] = state.epoch;
  meta["loss_history"] = state.loss_history;
  meta["config"] = cfg;
  meta["config_hash"] = config_hash(cfg);
  meta["graphs"] = run.graphs;
  meta["skipped"] = run.skipped;
  std::ofstream out(metadata_path(dir, state.epoch), std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint metadata in " + dir.string());
  out << meta.dump(1) << '\n';
}

void save(const std::filesystem::path& dir, const TrainState& state, const RunConfig& cfg,
          const TrainRun& run) {
  write_checkpoint(checkpoint_path(dir, state.epoch), state.params, &state.sgd.velocity);
  write_metadata(dir, state, cfg, run);
}

}  // namespace

EmbeddingStore synth_store(const RunConfig& cfg) {
  return synth_generate(cfg.with_derived_seeds().synth);
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int epoch) {
  return dir / ("ckpt_" + std::to_string(epoch) + ".bin");
}

std::optional<int> latest_checkpoint_epoch(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) return std::nullopt;
  static const std::regex pattern(R"(ckpt_(\d+)\.bin)");
  std::optional<int> best;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) {
      const int e = std::stoi(m[1].str());
      if (!best || e > *best) best = e;
    }
  }
  return best;
}

ModelConfig resolve_model_config(const RunConfig& cfg, int store_dim) {
  ModelConfig m = cfg.with_derived_seeds().model;
  if (m.dim == 0) m.dim = store_dim;
  if (m.dim != store_dim) {
    throw DataError("model.dim " + std::to_string(m.dim) + " does not match store dim " +
                    std::to_string(store_dim));
  }
  return m;
}

TrainRun run_training(const EmbeddingStore& store, const RunConfig& raw, const std::filesystem::path& dir,
                      bool resume) {
  raw.validate();
  const RunConfig cfg = raw.with_derived_seeds();
  const ModelConfig model = resolve_model_config(raw, store.dim());

  TrainingGraphs data = build_training_graphs(store, cfg.sampler, cfg.graph);
  TrainRun run{TrainState(ModelParams::init(model)), data.graphs.size(), data.skipped};

  const bool persist = !dir.empty();
  if (persist) std::filesystem::create_directories(dir);
  if (resume) {
    if (!persist) throw ConfigError("resume requires a checkpoint directory");
    const auto epoch = latest_checkpoint_epoch(dir);
    if (!epoch) throw DataError("no checkpoint to resume from in " + dir.string());
    Checkpoint ck = read_checkpoint(checkpoint_path(dir, *epoch));
    if (ck.params.config.dim != model.dim || ck.params.config.layers != model.layers ||
        ck.params.config.resolved_edge_dim() != model.resolved_edge_dim() ||
        ck.params.config.resolved_hidden() != model.resolved_hidden()) {
      throw DataError("checkpoint shape does not match the configured model");
    }
    std::ifstream in(metadata_path(dir, *epoch));
    if (!in) throw DataError("missing checkpoint metadata for epoch " + std::to_string(*epoch));
    json meta;
    try {
      in >> meta;
      run.state.loss_history = meta.at("loss_history").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw DataError(std::string("corrupt checkpoint metadata: ") + e.what());
    }
    run.state.params = std::move(ck.params);
    run.state.sgd.velocity =
        ck.velocity ? std::move(*ck.velocity) : ModelParams::zeros_like(run.state.params);
    run.state.epoch = *epoch;
    log_info("resuming from epoch " + std::to_string(*epoch));
  } else if (persist) {
    save(dir, run.state, cfg, run);
  }

  std::ofstream log_file;
  if (persist) log_file.open(dir / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);

  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochReport& r) {
    log_debug("epoch " + std::to_string(r.epoch) + " loss " + std::to_string(r.loss));
    if (log_file) {
      log_file << json{{"epoch", r.epoch}, {"loss", r.loss}, {"wall_time", r.seconds}}.dump()
               << '\n';
    }
  };
  if (persist) hooks.on_checkpoint = [&](const TrainState& s) { save(dir, s, cfg, run); };
  train(data.graphs, run.state, cfg.train, hooks);
  return run;
}

SamplerConfig sweep_sampler(const SamplerConfig& base, int k, SamplerMode mode) {
  SamplerConfig s = base;
  s.k = k;
  s.k1 = std::min(base.k1, k);
  s.mode = mode;
  s.validate();
  return s;
}

json summary_row(const EvalSummary& s) {
  return json{{"mAP", s.map},
              {"rank1", s.rank1},
              {"rank5", s.rank5},
              {"rank10", s.rank10},
              {"probes", s.probes},
              {"excluded_probes", s.excluded_probes},
              {"recall", s.mean_recall},
              {"precision", s.mean_precision}};
}

json run_eval(const EmbeddingStore& store, const std::vector<const ModelParams*>& models,
              const RunConfig& cfg, const Sweep& sweep) {
  cfg.validate();
  const auto lambdas = sweep.lambdas.empty() ? std::vector<double>{cfg.eval.lambda} : sweep.lambdas;
  const auto ks = sweep.ks.empty() ? std::vector<int>{cfg.sampler.k} : sweep.ks;
  const auto kprimes = sweep.kprimes.empty() ? std::vector<int>{cfg.graph.kprime} : sweep.kprimes;
  const auto modes = sweep.modes.empty() ? std::vector<SamplerMode>{cfg.sampler.mode} : sweep.modes;
  const std::vector<const ModelParams*> model_list =
      models.empty() ? std::vector<const ModelParams*>{nullptr} : models;

  json rows = json::array();
  for (size_t m = 0; m < model_list.size(); ++m) {
    const ModelParams* params = model_list[m];
    if (params != nullptr && params->config.dim != store.dim()) {
      throw DataError("checkpoint dim " + std::to_string(params->config.dim) +
                      " does not match store dim " + std::to_string(store.dim()));
    }
    for (SamplerMode mode : modes) {
      for (int k : ks) {
        for (int kprime : kprimes) {
          for (double lambda : lambdas) {
            const SamplerConfig sampler = sweep_sampler(cfg.sampler, k, mode);
            GraphConfig graph = cfg.graph;
            graph.kprime = kprime;
            graph.validate();
            EvalConfig eval = cfg.eval;
            eval.lambda = lambda;
            const EvalSummary s = evaluate(store, lambda == 0.0 ? nullptr : params, eval, sampler, graph);
            json row = summary_row(s);
            row["model"] = m;
            row["layers"] = params ? json(params->config.layers) : json(nullptr);
            row["mode"] = to_string(mode);
            row["k"] = sampler.k;
            row["k1"] = sampler.k1;
            row["k2"] = sampler.k2;
            row["kprime"] = kprime;
            row["lambda"] = lambda;
            rows.push_back(std::move(row));
          }
        }
      }
    }
  }
  json summary;
  summary["config"] = cfg;
  summary["config_hash"] = config_hash(cfg);
  summary["rows"] = rows;
  const json& first = rows.front();
  for (const char* key : {"mAP", "rank1", "rank5", "rank10"}) summary[key] = first[key];
  return summary;
}

std::string plot_csv(const json& summary) {
  static const char* columns[] = {"model", "layers", "mode", "k", "k1", "k2", "kprime", "lambda",
                                  "mAP", "rank1", "rank5", "rank10", "recall", "precision"};
  std::ostringstream out;
  out << std::setprecision(17);
  for (size_t i = 0; i < std::size(columns); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const auto& row : summary.at("rows")) {
    for (size_t i = 0; i < std::size(columns); ++i) {
      if (i) out << ',';
      const json& v = row.at(columns[i]);
      if (v.is_string()) {
        out << v.get<std::string>();
      } else if (v.is_null()) {
        out << "";
      } else if (v.is_number_float()) {
        out << v.get<double>();
      } else {
        out << v.dump();
      }
    }
    out << '\n';
  }
  return out.str();
}

void write_rankings(std::ostream& out, const EvalSummary& summary, const std::string& hash) {
  for (const auto& r : summary.results) {
    json line;
    line["probe_id"] = r.probe_id;
    std::vector<int64_t> ids;
    std::vector<double> distances;
    std::vector<int64_t> excluded;
    for (const auto& e : r.entries) {
      ids.push_back(e.id);
      distances.push_back(e.distance);
      if (e.excluded) excluded.push_back(e.id);
    }
    line["ids"] = ids;
    line["distances"] = distances;
    line["excluded"] = excluded;
    line["ap"] = r.ap ? json(*r.ap) : json(nullptr);
    line["config_hash"] = hash;
    out << line.dump() << '\n';
  }
}

namespace {

ContextGraph random_graph(Rng& rng, int n, int dim, const GraphConfig& gc) {
  ContextGraph g;
  g.probe_id = -1;
  g.nodes.resize(n, dim);
  for (Eigen::Index i = 0; i < g.nodes.size(); ++i) g.nodes.data()[i] = 0.5 * rng.normal();
  if (gc.edge_input == EdgeInput::Nodes) {
    g.edge_input = g.nodes;
  } else {
    g.edge_input.resize(n, dim);
    for (Eigen::Index i = 0; i < g.edge_input.size(); ++i) g.edge_input.data()[i] = rng.normal();
  }
  g.support = Matrix::Zero(n, n);
  const int per_row = std::min(gc.kprime, n - 1);
  for (int i = 0; i < n; ++i) {
    std::vector<int> others;
    for (int j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    rng.shuffle(others.begin(), others.end());
    for (int t = 0; t < per_row; ++t) g.support(i, others[t]) = 1.0;
  }
  std::vector<uint8_t> labels(static_cast<size_t>(n));
  for (auto& l : labels) l = rng.uniform() < 0.4 ? 1 : 0;
  labels[0] = 1;
  if (n > 1) labels[1] = 0;
  g.labels = labels;
  for (int i = 0; i < n; ++i) g.candidate_ids.push_back(i);
  return g;
}

// Hash of the on/off state of every ReLU in the pass.
uint64_t activation_pattern(const BatchTrace& trace) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto absorb = [&](const Matrix& pre) {
    for (Eigen::Index i = 0; i < pre.size(); ++i) {
      h ^= pre.data()[i] > 0.0 ? 1u : 0u;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& t : trace.traces) {
    for (const auto& pre : t.pre) absorb(pre);
    absorb(t.a1);
    absorb(t.a2);
  }
  return h;
}

}  // namespace

json gradcheck(const RunConfig& raw, const GradcheckOptions& options) {
  raw.validate();
  const RunConfig cfg = raw.with_derived_seeds();
  ModelConfig mc = cfg.model;
  if (mc.dim == 0) mc.dim = 8;
  const ModelParams base = ModelParams::init(mc);
  const double alpha = cfg.train.focal_alpha;
  const double gamma = cfg.train.focal_gamma;

  struct BlockStat {
    double max_rel = 0.0;
    double max_abs = 0.0;
    size_t count = 0;
    size_t kinks = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, BlockStat> stats;
  base.visit([&](const std::string& name, const Matrix&, bool trainable) {
    if (trainable) {
      order.push_back(name);
      stats[name] = {};
    }
  });

  Rng rng(sub_seed(cfg.seed, "gradcheck"));
  for (int n : options.node_counts) {
    if (n < 1) throw ConfigError("gradcheck node count must be >= 1");
    const ContextGraph g1 = random_graph(rng, n, mc.dim, cfg.graph);
    const ContextGraph g2 = random_graph(rng, n, mc.dim, cfg.graph);
    const ContextGraph* batch[] = {&g1, &g2};

    ModelParams params = base;
    const ModelParams analytic = [&] {
      ModelParams grads = backward(forward_batch(batch, params, Mode::Train), params, alpha, gamma);
      if (options.inject_fault) {
        grads.fc3.bias(0, 0) = 1.5 * grads.fc3.bias(0, 0) + 1e-3;
      }
      return grads;
    }();
    // The loss is piecewise smooth: ReLU switches make it non-differentiable
    // on a measure-zero set. A stencil whose endpoints see a different
    // activation pattern than the centre straddles a switch, so its finite
    // difference says nothing about the derivative.
    auto evaluate = [&](uint64_t& pattern) {
      const BatchTrace trace = forward_batch(batch, params, Mode::Train);
      pattern = activation_pattern(trace);
      return batch_loss(trace, alpha, gamma);
    };
    uint64_t centre = 0;
    evaluate(centre);

    std::vector<const Matrix*> grad_tensors;
    analytic.visit([&](const std::string&, const Matrix& t, bool) { grad_tensors.push_back(&t); });
    size_t index = 0;
    params.visit([&](const std::string& name, Matrix& t, bool trainable) {
      const Matrix& a = *grad_tensors[index++];
      if (!trainable) return;
      BlockStat& st = stats[name];
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double saved = t.data()[i];
        std::optional<double> numeric;
        for (double h = options.step; h >= options.step * 1e-2 && !numeric; h *= 0.1) {
          uint64_t pat_up = 0, pat_down = 0;
          t.data()[i] = saved + h;
          const double up = evaluate(pat_up);
          t.data()[i] = saved - h;
          const double down = evaluate(pat_down);
          t.data()[i] = saved;
          if (pat_up == centre && pat_down == centre) numeric = (up - down) / (2.0 * h);
        }
        if (!numeric) {
          ++st.kinks;
          continue;
        }
        const double an = a.data()[i];
        const double abs_err = std::abs(an - *numeric);
        const double scale = std::max({std::abs(an), std::abs(*numeric), 1e-6});
        st.max_abs = std::max(st.max_abs, abs_err);
        st.max_rel = std::max(st.max_rel, abs_err / scale);
        ++st.count;
      }
    });
  }

  json blocks = json::array();
  bool passed = true;
  for (const auto& name : order) {
    const BlockStat& st = stats[name];
    const bool ok = st.max_rel < options.tolerance;
    passed = passed && ok;
    blocks.push_back({{"name", name},
                      {"max_rel_error", st.max_rel},
                      {"max_abs_error", st.max_abs},
                      {"elements_checked", st.count},
                      {"elements_at_relu_switch", st.kinks},
                      {"passed", ok}});
  }
  return json{{"passed", passed},
              {"tolerance", options.tolerance},
              {"step", options.step},
              {"node_counts", options.node_counts},
              {"fault_injected", options.inject_fault},
              {"config_hash", config_hash(raw)},
              {"blocks", blocks}};
}

json inspect(const EmbeddingStore& store, const RunConfig& cfg, int64_t probe_id) {
  cfg.validate();
  const size_t probe = store.require_index(probe_id);
  std::vector<size_t> gallery;
  if (store.record(probe).split == Split::Train) {
    for (size_t g : store.indices(Split::Train)) {
      if (g != probe) gallery.push_back(g);
    }
  } else {
    gallery = store.indices(Split::Gallery);
  }
  if (gallery.empty()) throw DataError("inspect: no gallery for probe " + std::to_string(probe_id));
  const CandidateSet set = sample(store, probe, gallery, cfg.sampler.clamped_to(gallery.size()));
  json j = graph_to_json(build_graph(store, set, cfg.graph));
  j["config_hash"] = config_hash(cfg);
  j["mode"] = to_string(cfg.sampler.mode);
  j["kprime"] = cfg.graph.kprime;
  return j;
}

}  // namespace ctxrank
