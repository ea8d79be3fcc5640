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

// Command-line front end. Everything goes through the C API in
// ctxrank/c_api.h; this file only parses flags and moves files around.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ctxrank/c_api.h"

namespace {

using nlohmann::json;

struct StoreDeleter {
  void operator()(ctx_store* s) const { ctx_store_free(s); }
};
struct ModelDeleter {
  void operator()(ctx_model* m) const { ctx_model_free(m); }
};
struct StringDeleter {
  void operator()(char* s) const { ctx_string_free(s); }
};
using StorePtr = std::unique_ptr<ctx_store, StoreDeleter>;
using ModelPtr = std::unique_ptr<ctx_model, ModelDeleter>;
using OwnedString = std::unique_ptr<char, StringDeleter>;

class Failure {
 public:
  Failure(int code, std::string message) : code_(code), message_(std::move(message)) {}
  int code() const { return code_; }
  const std::string& message() const { return message_; }

 private:
  int code_;
  std::string message_;
};

void check(ctx_status status) {
  if (status != CTX_OK) throw Failure(status, ctx_last_error());
}

std::string take(char* raw) {
  OwnedString owned(raw);
  return owned ? std::string(owned.get()) : std::string();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Failure(CTX_ERR_DATA, "cannot write " + path);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

// Flags that override fields of the JSON run config.
struct Overrides {
  std::string config_file;
  std::optional<uint64_t> seed;
  // synth
  std::optional<int> identities, cameras, per_camera, dim;
  std::optional<double> sigma, camera_offset, camera_angle, train_fraction;
  // sampler / graph
  std::optional<int> k1, k2, k, kprime;
  std::optional<std::string> mode, edge_input;
  // model
  std::optional<int> layers, edge_dim, hidden;
  // train
  std::optional<double> lr, momentum, weight_decay, focal_alpha, focal_gamma;
  std::optional<int> epochs, batch, checkpoint_every;
  // eval
  std::optional<double> lambda;
  std::optional<bool> cross_camera;
  std::optional<std::string> outside;
  std::optional<int> workers;

  template <typename T>
  static void set(json& j, const char* section, const char* key, const std::optional<T>& v) {
    if (v) j[section][key] = *v;
  }

  std::string build() const {
    json j = json::object();
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw Failure(CTX_ERR_CONFIG, "cannot open config file " + config_file);
      try {
        in >> j;
      } catch (const json::exception& e) {
        throw Failure(CTX_ERR_CONFIG, "config file " + config_file + ": " + e.what());
      }
    }
    if (seed) j["seed"] = *seed;
    set(j, "synth", "identities", identities);
    set(j, "synth", "cameras", cameras);
    set(j, "synth", "per_camera", per_camera);
    set(j, "synth", "dim", dim);
    set(j, "synth", "sigma", sigma);
    set(j, "synth", "camera_offset", camera_offset);
    set(j, "synth", "camera_angle", camera_angle);
    set(j, "synth", "train_fraction", train_fraction);
    set(j, "sampler", "k1", k1);
    set(j, "sampler", "k2", k2);
    set(j, "sampler", "k", k);
    set(j, "sampler", "mode", mode);
    set(j, "graph", "kprime", kprime);
    set(j, "graph", "edge_input", edge_input);
    set(j, "model", "layers", layers);
    set(j, "model", "edge_dim", edge_dim);
    set(j, "model", "hidden", hidden);
    set(j, "train", "lr", lr);
    set(j, "train", "momentum", momentum);
    set(j, "train", "weight_decay", weight_decay);
    set(j, "train", "epochs", epochs);
    set(j, "train", "batch", batch);
    set(j, "train", "focal_alpha", focal_alpha);
    set(j, "train", "focal_gamma", focal_gamma);
    set(j, "train", "checkpoint_every", checkpoint_every);
    set(j, "eval", "lambda", lambda);
    set(j, "eval", "cross_camera", cross_camera);
    set(j, "eval", "outside", outside);
    set(j, "eval", "workers", workers);
    return j.dump();
  }
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_file, "JSON run config; flags override its fields");
  cmd->add_option("--seed", o.seed, "Top-level seed; all sub-seeds derive from it");
}

void add_synth_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--identities", o.identities, "Number of identities");
  cmd->add_option("--cameras", o.cameras, "Number of cameras");
  cmd->add_option("--per-camera", o.per_camera, "Samples per identity and camera");
  cmd->add_option("--dim", o.dim, "Feature dimension");
  cmd->add_option("--sigma", o.sigma, "Per-component noise std");
  cmd->add_option("--camera-offset", o.camera_offset, "Camera offset length");
  cmd->add_option("--camera-angle", o.camera_angle, "Radians between consecutive camera directions");
  cmd->add_option("--train-fraction", o.train_fraction, "Fraction of identities tagged train");
}

void add_sampler_flags(CLI::App* cmd, Overrides& o, bool with_k_and_mode = true) {
  cmd->add_option("--k1", o.k1, "First-hop neighbors");
  cmd->add_option("--k2", o.k2, "Second-hop neighbors");
  if (with_k_and_mode) {
    cmd->add_option("--k", o.k, "Candidate budget");
    cmd->add_option("--mode", o.mode, "Sampler: plain or hgs");
    cmd->add_option("--kprime", o.kprime, "Support neighbors per node");
  }
  cmd->add_option("--edge-input", o.edge_input, "Edge transform input: nodes or gallery");
}

void add_model_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--layers", o.layers, "Residual GCN blocks");
  cmd->add_option("--edge-dim", o.edge_dim, "phi output width (0: feature dim)");
  cmd->add_option("--hidden", o.hidden, "MLP hidden width (0: twice the feature dim)");
}

void add_train_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--lr", o.lr, "Learning rate");
  cmd->add_option("--momentum", o.momentum, "SGD momentum");
  cmd->add_option("--weight-decay", o.weight_decay, "Weight decay");
  cmd->add_option("--epochs", o.epochs, "Epochs");
  cmd->add_option("--batch", o.batch, "Graphs per step");
  cmd->add_option("--focal-alpha", o.focal_alpha, "Focal loss alpha");
  cmd->add_option("--focal-gamma", o.focal_gamma, "Focal loss gamma");
  cmd->add_option("--checkpoint-every", o.checkpoint_every, "Checkpoint period in epochs (0: final only)");
}

void add_eval_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--cross-camera", o.cross_camera, "Exclude same-camera matches (true/false)");
  cmd->add_option("--outside", o.outside, "Non-candidate policy: pad or append");
  cmd->add_option("--workers", o.workers, "Parallel probe workers");
}

StorePtr load_store(const std::string& path) {
  ctx_store* raw = nullptr;
  check(ctx_store_load(path.c_str(), &raw));
  return StorePtr(raw);
}

ModelPtr load_model(const std::string& path) {
  ctx_model* raw = nullptr;
  check(ctx_model_load(path.c_str(), &raw));
  return ModelPtr(raw);
}

// A path may name a checkpoint file or a run directory (newest ckpt_N.bin).
std::string resolve_checkpoint(const std::string& path) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(path)) return path;
  int best = -1;
  for (const auto& entry : fs::directory_iterator(path)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("ckpt_", 0) == 0 && entry.path().extension() == ".bin") {
      try {
        best = std::max(best, std::stoi(name.substr(5)));
      } catch (const std::exception&) {
      }
    }
  }
  if (best < 0) throw Failure(CTX_ERR_DATA, "no checkpoint in " + path);
  return (fs::path(path) / ("ckpt_" + std::to_string(best) + ".bin")).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-graph re-ranking over precomputed embeddings"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ctx_version()));

  Overrides o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic embedding store");
  std::string synth_out;
  add_common(synth, o);
  add_synth_flags(synth, o);
  synth->add_option("--out", synth_out, "Manifest path to write")->required();

  auto* train = app.add_subcommand("train", "Train the graph model on the train split");
  std::string train_store, train_out;
  bool resume = false;
  add_common(train, o);
  add_sampler_flags(train, o);
  add_model_flags(train, o);
  add_train_flags(train, o);
  train->add_option("--store", train_store, "Store manifest")->required();
  train->add_option("--out", train_out, "Checkpoint directory")->required();
  train->add_flag("--resume", resume, "Continue from the newest checkpoint in --out");

  auto* eval = app.add_subcommand("eval", "Evaluate checkpoints with optional sweeps");
  std::string eval_store, eval_summary, eval_plot;
  std::vector<std::string> eval_ckpts;
  std::vector<double> sweep_lambda;
  std::vector<int> sweep_k, sweep_kprime;
  std::vector<std::string> sweep_mode;
  add_common(eval, o);
  add_sampler_flags(eval, o, false);
  add_eval_flags(eval, o);
  eval->add_option("--store", eval_store, "Store manifest")->required();
  eval->add_option("--checkpoint", eval_ckpts, "Checkpoint file or run directory (repeatable)");
  eval->add_option("--lambda", sweep_lambda, "Fusion weight(s)")->delimiter(',');
  eval->add_option("--k", sweep_k, "Candidate budget(s)")->delimiter(',');
  eval->add_option("--kprime", sweep_kprime, "Support neighbors per node")->delimiter(',');
  eval->add_option("--mode", sweep_mode, "Sampler mode(s): plain, hgs")->delimiter(',');
  eval->add_option("--summary", eval_summary, "Summary JSON path (default stdout)");
  eval->add_option("--emit-plot-data", eval_plot, "Write sweep rows as CSV");

  auto* rank = app.add_subcommand("rank", "Write per-probe rankings");
  std::string rank_store, rank_ckpt, rank_results, rank_summary;
  add_common(rank, o);
  add_sampler_flags(rank, o);
  add_eval_flags(rank, o);
  rank->add_option("--lambda", o.lambda, "Fusion weight");
  rank->add_option("--store", rank_store, "Store manifest")->required();
  rank->add_option("--checkpoint", rank_ckpt, "Checkpoint file or run directory");
  rank->add_option("--results", rank_results, "Line-delimited JSON output")->required();
  rank->add_option("--summary", rank_summary, "Summary JSON path (default stdout)");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  std::vector<int> grad_nodes{3, 10, 50};
  bool grad_fault = false;
  std::string grad_report;
  double grad_tol = 1e-4;
  add_common(grad, o);
  add_model_flags(grad, o);
  add_sampler_flags(grad, o);
  add_train_flags(grad, o);
  grad->add_option("--nodes", grad_nodes, "Graph sizes")->delimiter(',');
  grad->add_option("--tolerance", grad_tol, "Maximum relative error");
  grad->add_flag("--inject-fault", grad_fault, "Corrupt one gradient to exercise failure reporting");
  grad->add_option("--report", grad_report, "Report JSON path (default stdout)");

  auto* insp = app.add_subcommand("inspect", "Dump the context graph of one probe");
  std::string insp_store, insp_out;
  int64_t insp_probe = 0;
  add_common(insp, o);
  add_sampler_flags(insp, o);
  insp->add_option("--store", insp_store, "Store manifest")->required();
  insp->add_option("--probe", insp_probe, "Probe id")->required();
  insp->add_option("--out", insp_out, "Graph JSON path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : CTX_ERR_CONFIG;
  }

  try {
    const std::string config = o.build();
    if (*synth) {
      ctx_store* raw = nullptr;
      check(ctx_store_synth(config.c_str(), &raw));
      StorePtr store(raw);
      const auto parent = std::filesystem::path(synth_out).parent_path();
      if (!parent.empty()) std::filesystem::create_directories(parent);
      check(ctx_store_write(store.get(), synth_out.c_str()));
      std::cout << "wrote " << ctx_store_count(store.get()) << " records (dim "
                << ctx_store_dim(store.get()) << ") to " << synth_out << '\n';
    } else if (*train) {
      StorePtr store = load_store(train_store);
      char* report = nullptr;
      check(ctx_train(store.get(), config.c_str(), train_out.c_str(), resume ? 1 : 0, nullptr, &report));
      std::cout << take(report) << '\n';
    } else if (*eval) {
      StorePtr store = load_store(eval_store);
      std::vector<ModelPtr> owned;
      std::vector<const ctx_model*> models;
      for (const auto& c : eval_ckpts) {
        owned.push_back(load_model(resolve_checkpoint(c)));
        models.push_back(owned.back().get());
      }
      json sweep = json::object();
      if (!sweep_lambda.empty()) sweep["lambda"] = sweep_lambda;
      if (!sweep_k.empty()) sweep["k"] = sweep_k;
      if (!sweep_kprime.empty()) sweep["kprime"] = sweep_kprime;
      if (!sweep_mode.empty()) sweep["mode"] = sweep_mode;
      const std::string sweep_text = sweep.dump();
      char* summary = nullptr;
      check(ctx_eval(store.get(), models.empty() ? nullptr : models.data(), models.size(),
                     config.c_str(), sweep_text.c_str(), &summary));
      const std::string text = take(summary);
      if (!eval_plot.empty()) {
        char* csv = nullptr;
        check(ctx_plot_csv(text.c_str(), &csv));
        write_text(eval_plot, take(csv));
      }
      write_text(eval_summary, text);
    } else if (*rank) {
      StorePtr store = load_store(rank_store);
      ModelPtr model;
      if (!rank_ckpt.empty()) model = load_model(resolve_checkpoint(rank_ckpt));
      char* summary = nullptr;
      check(ctx_rank(store.get(), model.get(), config.c_str(), rank_results.c_str(), &summary));
      write_text(rank_summary, take(summary));
    } else if (*grad) {
      json options{{"node_counts", grad_nodes}, {"tolerance", grad_tol}, {"fault", grad_fault}};
      char* report = nullptr;
      const ctx_status status = ctx_gradcheck(config.c_str(), options.dump().c_str(), &report);
      const std::string text = take(report);
      if (!text.empty()) write_text(grad_report, text);
      check(status);
    } else if (*insp) {
      StorePtr store = load_store(insp_store);
      char* graph = nullptr;
      check(ctx_inspect(store.get(), config.c_str(), insp_probe, &graph));
      write_text(insp_out, take(graph));
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message() << '\n';
    return f.code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return CTX_ERR_INTERNAL;
  }
  return 0;
}
