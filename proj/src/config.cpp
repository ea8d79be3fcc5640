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

#include "ctxrank/config.hpp"

#include <cstdio>
#include <initializer_list>
#include <string_view>

#include <nlohmann/json.hpp>

#include "ctxrank/common.hpp"

namespace ctxrank {
namespace {

using nlohmann::json;

void check_keys(const json& j, std::string_view section,
                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) {
    throw ConfigError(std::string(section) + ": expected a JSON object");
  }
  for (const auto& item : j.items()) {
    bool known = false;
    for (auto key : allowed) known = known || item.key() == key;
    if (!known) {
      throw ConfigError(std::string(section) + ": unknown key \"" + item.key() + "\"");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, std::string_view section) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(section) + "." + key + ": " + e.what());
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void SynthConfig::validate() const {
  require(identities >= 1, "synth.identities must be >= 1");
  require(cameras >= 1, "synth.cameras must be >= 1");
  require(per_camera >= 1, "synth.per_camera must be >= 1");
  require(dim >= 2, "synth.dim must be >= 2 to host distinct centroids");
  require(sigma >= 0.0, "synth.sigma must be >= 0");
  require(camera_offset >= 0.0, "synth.camera_offset must be >= 0");
  require(camera_angle >= 0.0, "synth.camera_angle must be >= 0");
  require(train_fraction >= 0.0 && train_fraction <= 1.0,
          "synth.train_fraction must lie in [0, 1]");
}

void SamplerConfig::validate() const {
  require(k >= 1, "sampler.k must be >= 1");
  require(k1 >= 1 && k1 <= k, "sampler.k1 must satisfy 1 <= k1 <= k");
  require(k2 >= 1, "sampler.k2 must be >= 1");
}

SamplerConfig SamplerConfig::clamped_to(size_t gallery_size) const {
  SamplerConfig out = *this;
  const int cap = static_cast<int>(std::min<size_t>(gallery_size, 1u << 30));
  if (out.k1 > cap) out.k1 = std::max(cap, 1);
  if (out.k > cap) out.k = std::max(cap, 1);
  if (out.k1 > out.k) out.k1 = out.k;
  return out;
}

void GraphConfig::validate() const { require(kprime >= 1, "graph.kprime must be >= 1"); }

void ModelConfig::validate() const {
  require(dim >= 0, "model.dim must be >= 0");
  require(edge_dim >= 0, "model.edge_dim must be >= 0");
  require(layers >= 0, "model.layers must be >= 0");
  require(hidden >= 0, "model.hidden must be >= 0");
  require(bn_eps > 0.0, "model.bn_eps must be > 0");
  require(bn_momentum >= 0.0 && bn_momentum <= 1.0, "model.bn_momentum must lie in [0, 1]");
}

void TrainConfig::validate() const {
  require(lr > 0.0, "train.lr must be > 0");
  require(momentum >= 0.0, "train.momentum must be >= 0");
  require(weight_decay >= 0.0, "train.weight_decay must be >= 0");
  require(epochs >= 0, "train.epochs must be >= 0");
  require(batch >= 1, "train.batch must be >= 1");
  require(focal_alpha > 0.0, "train.focal_alpha must be > 0");
  require(focal_gamma >= 0.0, "train.focal_gamma must be >= 0");
  require(checkpoint_every >= 0, "train.checkpoint_every must be >= 0");
}

void EvalConfig::validate() const {
  require(lambda >= 0.0, "eval.lambda must be >= 0");
  require(workers >= 1, "eval.workers must be >= 1");
}

void RunConfig::validate() const {
  synth.validate();
  sampler.validate();
  graph.validate();
  model.validate();
  train.validate();
  eval.validate();
}

RunConfig RunConfig::with_derived_seeds() const {
  RunConfig out = *this;
  out.synth.seed = sub_seed(seed, "synth");
  out.model.seed = sub_seed(seed, "model-init");
  out.train.seed = sub_seed(seed, "train");
  return out;
}

std::string to_string(SamplerMode m) { return m == SamplerMode::Plain ? "plain" : "hgs"; }
std::string to_string(EdgeInput e) { return e == EdgeInput::Nodes ? "nodes" : "gallery"; }
std::string to_string(OutsidePolicy p) { return p == OutsidePolicy::Pad ? "pad" : "append"; }

SamplerMode sampler_mode_from_string(const std::string& s) {
  if (s == "plain") return SamplerMode::Plain;
  if (s == "hgs") return SamplerMode::Hgs;
  throw ConfigError("sampler mode must be \"plain\" or \"hgs\", got \"" + s + "\"");
}

EdgeInput edge_input_from_string(const std::string& s) {
  if (s == "nodes") return EdgeInput::Nodes;
  if (s == "gallery") return EdgeInput::Gallery;
  throw ConfigError("edge input must be \"nodes\" or \"gallery\", got \"" + s + "\"");
}

OutsidePolicy outside_policy_from_string(const std::string& s) {
  if (s == "pad") return OutsidePolicy::Pad;
  if (s == "append") return OutsidePolicy::Append;
  throw ConfigError("outside policy must be \"pad\" or \"append\", got \"" + s + "\"");
}

void to_json(json& j, const SynthConfig& c) {
  j = json{{"identities", c.identities}, {"cameras", c.cameras},
           {"per_camera", c.per_camera}, {"dim", c.dim},
           {"sigma", c.sigma},           {"camera_offset", c.camera_offset},
           {"camera_angle", c.camera_angle},
           {"train_fraction", c.train_fraction}};
}

void from_json(const json& j, SynthConfig& c) {
  constexpr std::string_view s = "synth";
  check_keys(j, s, {"identities", "cameras", "per_camera", "dim", "sigma", "camera_offset",
                    "camera_angle", "train_fraction"});
  read(j, "identities", c.identities, s);
  read(j, "cameras", c.cameras, s);
  read(j, "per_camera", c.per_camera, s);
  read(j, "dim", c.dim, s);
  read(j, "sigma", c.sigma, s);
  read(j, "camera_offset", c.camera_offset, s);
  read(j, "camera_angle", c.camera_angle, s);
  read(j, "train_fraction", c.train_fraction, s);
}

void to_json(json& j, const SamplerConfig& c) {
  j = json{{"k1", c.k1}, {"k2", c.k2}, {"k", c.k}, {"mode", to_string(c.mode)}};
}

void from_json(const json& j, SamplerConfig& c) {
  constexpr std::string_view s = "sampler";
  check_keys(j, s, {"k1", "k2", "k", "mode"});
  read(j, "k1", c.k1, s);
  read(j, "k2", c.k2, s);
  read(j, "k", c.k, s);
  std::string mode = to_string(c.mode);
  read(j, "mode", mode, s);
  c.mode = sampler_mode_from_string(mode);
}

void to_json(json& j, const GraphConfig& c) {
  j = json{{"kprime", c.kprime}, {"edge_input", to_string(c.edge_input)}};
}

void from_json(const json& j, GraphConfig& c) {
  constexpr std::string_view s = "graph";
  check_keys(j, s, {"kprime", "edge_input"});
  read(j, "kprime", c.kprime, s);
  std::string input = to_string(c.edge_input);
  read(j, "edge_input", input, s);
  c.edge_input = edge_input_from_string(input);
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"dim", c.dim},       {"edge_dim", c.edge_dim}, {"layers", c.layers},
           {"hidden", c.hidden}, {"bn_eps", c.bn_eps},     {"bn_momentum", c.bn_momentum}};
}

void from_json(const json& j, ModelConfig& c) {
  constexpr std::string_view s = "model";
  check_keys(j, s, {"dim", "edge_dim", "layers", "hidden", "bn_eps", "bn_momentum"});
  read(j, "dim", c.dim, s);
  read(j, "edge_dim", c.edge_dim, s);
  read(j, "layers", c.layers, s);
  read(j, "hidden", c.hidden, s);
  read(j, "bn_eps", c.bn_eps, s);
  read(j, "bn_momentum", c.bn_momentum, s);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"lr", c.lr},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"epochs", c.epochs},
           {"batch", c.batch},
           {"focal_alpha", c.focal_alpha},
           {"focal_gamma", c.focal_gamma},
           {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const json& j, TrainConfig& c) {
  constexpr std::string_view s = "train";
  check_keys(j, s, {"lr", "momentum", "weight_decay", "epochs", "batch", "focal_alpha",
                    "focal_gamma", "checkpoint_every"});
  read(j, "lr", c.lr, s);
  read(j, "momentum", c.momentum, s);
  read(j, "weight_decay", c.weight_decay, s);
  read(j, "epochs", c.epochs, s);
  read(j, "batch", c.batch, s);
  read(j, "focal_alpha", c.focal_alpha, s);
  read(j, "focal_gamma", c.focal_gamma, s);
  read(j, "checkpoint_every", c.checkpoint_every, s);
}

void to_json(json& j, const EvalConfig& c) {
  j = json{{"lambda", c.lambda},
           {"cross_camera", c.cross_camera},
           {"outside", to_string(c.outside)},
           {"workers", c.workers}};
}

void from_json(const json& j, EvalConfig& c) {
  constexpr std::string_view s = "eval";
  check_keys(j, s, {"lambda", "cross_camera", "outside", "workers"});
  read(j, "lambda", c.lambda, s);
  read(j, "cross_camera", c.cross_camera, s);
  std::string outside = to_string(c.outside);
  read(j, "outside", outside, s);
  c.outside = outside_policy_from_string(outside);
  read(j, "workers", c.workers, s);
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"seed", c.seed},   {"synth", c.synth}, {"sampler", c.sampler}, {"graph", c.graph},
           {"model", c.model}, {"train", c.train}, {"eval", c.eval}};
}

void from_json(const json& j, RunConfig& c) {
  constexpr std::string_view s = "config";
  check_keys(j, s, {"seed", "synth", "sampler", "graph", "model", "train", "eval"});
  read(j, "seed", c.seed, s);
  if (j.contains("synth")) from_json(j.at("synth"), c.synth);
  if (j.contains("sampler")) from_json(j.at("sampler"), c.sampler);
  if (j.contains("graph")) from_json(j.at("graph"), c.graph);
  if (j.contains("model")) from_json(j.at("model"), c.model);
  if (j.contains("train")) from_json(j.at("train"), c.train);
  if (j.contains("eval")) from_json(j.at("eval"), c.eval);
}

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text.empty() ? std::string("{}") : text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  from_json(j, c);
  c.validate();
  return c;
}

std::string config_hash(const RunConfig& c) {
  const json j = c;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

}  // namespace ctxrank
