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

#include "ctxrank/c_api.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "ctxrank/checkpoint.hpp"
#include "ctxrank/common.hpp"
#include "ctxrank/config.hpp"
#include "ctxrank/embedding_store.hpp"
#include "ctxrank/evaluator.hpp"
#include "ctxrank/gcn.hpp"
#include "ctxrank/graph.hpp"
#include "ctxrank/pipeline.hpp"
#include "ctxrank/sampler.hpp"

struct ctx_store {
  ctxrank::EmbeddingStore store;
};

struct ctx_model {
  ctxrank::ModelParams params;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

ctx_status fail(ctx_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
ctx_status guarded(F&& body) {
  g_last_error.clear();
  try {
    return body();
  } catch (const ctxrank::Error& e) {
    return fail(static_cast<ctx_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return fail(CTX_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(CTX_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CTX_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(CTX_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ctxrank::RunConfig parse_config(const char* text) {
  ctxrank::RunConfig cfg = ctxrank::parse_run_config(text ? text : "");
  return cfg;
}

template <typename T>
void require_arg(const T* p, const char* name) {
  if (p == nullptr) throw ctxrank::ConfigError(std::string(name) + " must not be NULL");
}

ctxrank::Sweep parse_sweep(const char* text) {
  ctxrank::Sweep sweep;
  if (text == nullptr || *text == '\0') return sweep;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ctxrank::ConfigError(std::string("sweep is not valid JSON: ") + e.what());
  }
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    if (key == "lambda") {
      sweep.lambdas = item.value().get<std::vector<double>>();
    } else if (key == "k") {
      sweep.ks = item.value().get<std::vector<int>>();
    } else if (key == "kprime") {
      sweep.kprimes = item.value().get<std::vector<int>>();
    } else if (key == "mode") {
      for (const auto& m : item.value()) {
        sweep.modes.push_back(ctxrank::sampler_mode_from_string(m.get<std::string>()));
      }
    } else {
      throw ctxrank::ConfigError("sweep: unknown key \"" + key + "\"");
    }
  }
  return sweep;
}

}  // namespace

extern "C" {

const char* ctx_version(void) { return "1.0.0"; }

const char* ctx_last_error(void) { return g_last_error.c_str(); }

void ctx_string_free(char* s) { std::free(s); }

ctx_status ctx_config_resolve(const char* config_json, char** out_json) {
  return guarded([&] {
    require_arg(out_json, "out_json");
    const ctxrank::RunConfig cfg = parse_config(config_json);
    json j = cfg;
    j["config_hash"] = ctxrank::config_hash(cfg);
    *out_json = dup_string(j.dump(2));
    return CTX_OK;
  });
}

ctx_status ctx_store_load(const char* manifest_path, ctx_store** out) {
  return guarded([&] {
    require_arg(manifest_path, "manifest_path");
    require_arg(out, "out");
    *out = new ctx_store{ctxrank::load(manifest_path)};
    return CTX_OK;
  });
}

ctx_status ctx_store_synth(const char* config_json, ctx_store** out) {
  return guarded([&] {
    require_arg(out, "out");
    *out = new ctx_store{ctxrank::synth_store(parse_config(config_json))};
    return CTX_OK;
  });
}

ctx_status ctx_store_write(const ctx_store* store, const char* manifest_path) {
  return guarded([&] {
    require_arg(store, "store");
    require_arg(manifest_path, "manifest_path");
    ctxrank::write(store->store, manifest_path);
    return CTX_OK;
  });
}

void ctx_store_free(ctx_store* store) { delete store; }

size_t ctx_store_count(const ctx_store* store) { return store ? store->store.size() : 0; }

int ctx_store_dim(const ctx_store* store) { return store ? store->store.dim() : 0; }

ctx_status ctx_store_feature(const ctx_store* store, size_t index, double* out, size_t out_len) {
  return guarded([&] {
    require_arg(store, "store");
    require_arg(out, "out");
    if (index >= store->store.size()) throw ctxrank::DataError("record index out of range");
    if (out_len < static_cast<size_t>(store->store.dim())) {
      throw ctxrank::ConfigError("output buffer smaller than the store dimension");
    }
    const auto row = store->store.feature(index);
    for (Eigen::Index i = 0; i < row.size(); ++i) out[i] = row[i];
    return CTX_OK;
  });
}

ctx_status ctx_train(const ctx_store* store, const char* config_json, const char* checkpoint_dir,
                     int resume, ctx_model** out_model, char** out_report_json) {
  return guarded([&] {
    require_arg(store, "store");
    const ctxrank::RunConfig cfg = parse_config(config_json);
    ctxrank::TrainRun run = ctxrank::run_training(
        store->store, cfg, checkpoint_dir ? std::filesystem::path(checkpoint_dir) : std::filesystem::path(),
        resume != 0);
    if (out_report_json) {
      json report{{"epochs", run.state.epoch},
                  {"graphs", run.graphs},
                  {"skipped", run.skipped},
                  {"loss_history", run.state.loss_history},
                  {"config_hash", ctxrank::config_hash(cfg)}};
      *out_report_json = dup_string(report.dump());
    }
    if (out_model) *out_model = new ctx_model{std::move(run.state.params)};
    return CTX_OK;
  });
}

ctx_status ctx_model_load(const char* checkpoint_path, ctx_model** out) {
  return guarded([&] {
    require_arg(checkpoint_path, "checkpoint_path");
    require_arg(out, "out");
    *out = new ctx_model{ctxrank::read_checkpoint(checkpoint_path).params};
    return CTX_OK;
  });
}

ctx_status ctx_model_save(const ctx_model* model, const char* checkpoint_path) {
  return guarded([&] {
    require_arg(model, "model");
    require_arg(checkpoint_path, "checkpoint_path");
    ctxrank::write_checkpoint(checkpoint_path, model->params);
    return CTX_OK;
  });
}

void ctx_model_free(ctx_model* model) { delete model; }

int ctx_model_dim(const ctx_model* model) { return model ? model->params.config.dim : 0; }

int ctx_model_layers(const ctx_model* model) { return model ? model->params.config.layers : 0; }

ctx_status ctx_model_logits(const ctx_model* model, const ctx_store* store, const char* config_json,
                            int64_t probe_id, double* out_logits, size_t capacity,
                            size_t* out_count) {
  return guarded([&] {
    require_arg(model, "model");
    require_arg(store, "store");
    require_arg(out_count, "out_count");
    const ctxrank::RunConfig cfg = parse_config(config_json);
    const auto& s = store->store;
    if (model->params.config.dim != s.dim()) {
      throw ctxrank::DataError("model dim does not match store dim");
    }
    const size_t probe = s.require_index(probe_id);
    const ctxrank::Split pool = s.record(probe).split == ctxrank::Split::Train
                                    ? ctxrank::Split::Train
                                    : ctxrank::Split::Gallery;
    std::vector<size_t> gallery;
    for (size_t g : s.indices(pool)) {
      if (g != probe) gallery.push_back(g);
    }
    if (gallery.empty()) throw ctxrank::DataError("no gallery for probe");
    const auto set = ctxrank::sample(s, probe, gallery, cfg.sampler.clamped_to(gallery.size()));
    const auto graph = ctxrank::build_graph(s, set, cfg.graph);
    const ctxrank::Vector logits = ctxrank::forward(graph, model->params, ctxrank::Mode::Eval);
    *out_count = static_cast<size_t>(logits.size());
    for (size_t i = 0; i < std::min(capacity, *out_count); ++i) {
      out_logits[i] = logits[static_cast<Eigen::Index>(i)];
    }
    return CTX_OK;
  });
}

ctx_status ctx_eval(const ctx_store* store, const ctx_model* const* models, size_t model_count,
                    const char* config_json, const char* sweep_json, char** out_summary_json) {
  return guarded([&] {
    require_arg(store, "store");
    require_arg(out_summary_json, "out_summary_json");
    if (model_count > 0) require_arg(models, "models");
    const ctxrank::RunConfig cfg = parse_config(config_json);
    std::vector<const ctxrank::ModelParams*> params;
    for (size_t i = 0; i < model_count; ++i) {
      require_arg(models[i], "models[i]");
      params.push_back(&models[i]->params);
    }
    const json summary = ctxrank::run_eval(store->store, params, cfg, parse_sweep(sweep_json));
    *out_summary_json = dup_string(summary.dump(2));
    return CTX_OK;
  });
}

ctx_status ctx_rank(const ctx_store* store, const ctx_model* model, const char* config_json,
                    const char* results_path, char** out_summary_json) {
  return guarded([&] {
    require_arg(store, "store");
    require_arg(results_path, "results_path");
    const ctxrank::RunConfig cfg = parse_config(config_json);
    const ctxrank::ModelParams* params = model ? &model->params : nullptr;
    const auto summary = ctxrank::evaluate(store->store, params, cfg.eval, cfg.sampler, cfg.graph);
    std::ofstream out(results_path, std::ios::trunc);
    if (!out) throw ctxrank::DataError(std::string("cannot write ") + results_path);
    const std::string hash = ctxrank::config_hash(cfg);
    ctxrank::write_rankings(out, summary, hash);
    if (out_summary_json) {
      json j = ctxrank::summary_row(summary);
      j["config_hash"] = hash;
      j["config"] = cfg;
      *out_summary_json = dup_string(j.dump(2));
    }
    return CTX_OK;
  });
}

ctx_status ctx_plot_csv(const char* summary_json, char** out_csv) {
  return guarded([&] {
    require_arg(summary_json, "summary_json");
    require_arg(out_csv, "out_csv");
    *out_csv = dup_string(ctxrank::plot_csv(json::parse(summary_json)));
    return CTX_OK;
  });
}

ctx_status ctx_gradcheck(const char* config_json, const char* options_json,
                         char** out_report_json) {
  return guarded([&] {
    const ctxrank::RunConfig cfg = parse_config(config_json);
    ctxrank::GradcheckOptions options;
    if (options_json != nullptr && *options_json != '\0') {
      const json j = json::parse(options_json);
      for (const auto& item : j.items()) {
        const std::string& key = item.key();
        if (key == "node_counts") {
          options.node_counts = item.value().get<std::vector<int>>();
        } else if (key == "step") {
          options.step = item.value().get<double>();
        } else if (key == "tolerance") {
          options.tolerance = item.value().get<double>();
        } else if (key == "fault") {
          options.inject_fault = item.value().get<bool>();
        } else {
          throw ctxrank::ConfigError("gradcheck options: unknown key \"" + key + "\"");
        }
      }
    }
    const json report = ctxrank::gradcheck(cfg, options);
    if (out_report_json) *out_report_json = dup_string(report.dump(2));
    if (!report.at("passed").get<bool>()) {
      return fail(CTX_ERR_NUMERIC, "gradient check failed");
    }
    return CTX_OK;
  });
}

ctx_status ctx_inspect(const ctx_store* store, const char* config_json, int64_t probe_id,
                       char** out_graph_json) {
  return guarded([&] {
    require_arg(store, "store");
    require_arg(out_graph_json, "out_graph_json");
    const json j = ctxrank::inspect(store->store, parse_config(config_json), probe_id);
    *out_graph_json = dup_string(j.dump());
    return CTX_OK;
  });
}

}  // extern "C"
