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
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace ctxrank {

struct SynthConfig {
  int identities = 50;
  int cameras = 4;
  int per_camera = 4;
  int dim = 32;
  double sigma = 0.15;           // per-component gaussian noise std
  double camera_offset = 1.0;    // length of the per-camera offset
  double camera_angle = 1.0;     // radians between consecutive camera directions
  double train_fraction = 0.5;   // leading fraction of identities tagged train
  uint64_t seed = 0;

  void validate() const;
};

enum class SamplerMode { Plain, Hgs };

struct SamplerConfig {
  int k1 = 70;
  int k2 = 20;
  int k = 100;
  SamplerMode mode = SamplerMode::Hgs;

  void validate() const;
  // Shrinks k1 and k to fit a gallery of `gallery_size` entries.
  SamplerConfig clamped_to(size_t gallery_size) const;
};

enum class EdgeInput { Nodes, Gallery };

struct GraphConfig {
  int kprime = 8;
  EdgeInput edge_input = EdgeInput::Nodes;

  void validate() const;
};

struct ModelConfig {
  int dim = 0;          // node feature width d; 0 means "take from the store"
  int edge_dim = 0;     // phi output width; 0 means "same as dim"
  int layers = 9;
  int hidden = 0;       // MLP hidden width; 0 means 2 * dim
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  uint64_t seed = 0;

  int resolved_edge_dim() const { return edge_dim > 0 ? edge_dim : dim; }
  int resolved_hidden() const { return hidden > 0 ? hidden : 2 * dim; }
  void validate() const;
};

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 500;
  int batch = 4;
  double focal_alpha = 2.0;
  double focal_gamma = 0.25;
  uint64_t seed = 0;
  int checkpoint_every = 0;  // 0: only the final epoch is checkpointed

  void validate() const;
};

enum class OutsidePolicy { Pad, Append };

struct EvalConfig {
  double lambda = 1.0;
  bool cross_camera = true;
  OutsidePolicy outside = OutsidePolicy::Pad;
  int workers = 1;

  void validate() const;
};

// Everything a run needs. Serialized verbatim into every output for provenance.
// Component seeds are not serialized: they are always derived from `seed`.
struct RunConfig {
  SynthConfig synth;
  SamplerConfig sampler;
  GraphConfig graph;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;
  uint64_t seed = 0;

  void validate() const;
  // Propagates the top-level seed into per-component named sub-seeds.
  RunConfig with_derived_seeds() const;
};

std::string to_string(SamplerMode m);
std::string to_string(EdgeInput e);
std::string to_string(OutsidePolicy p);
SamplerMode sampler_mode_from_string(const std::string& s);
EdgeInput edge_input_from_string(const std::string& s);
OutsidePolicy outside_policy_from_string(const std::string& s);

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);
void to_json(nlohmann::json& j, const SamplerConfig& c);
void from_json(const nlohmann::json& j, SamplerConfig& c);
void to_json(nlohmann::json& j, const GraphConfig& c);
void from_json(const nlohmann::json& j, GraphConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

// Parses and validates a JSON document; unknown keys are a ConfigError.
RunConfig parse_run_config(const std::string& text);

// Hex FNV-1a of the canonical JSON dump.
std::string config_hash(const RunConfig& c);

}  // namespace ctxrank
