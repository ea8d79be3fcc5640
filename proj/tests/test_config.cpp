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

#include <doctest.h>

#include <nlohmann/json.hpp>

#include "ctxrank/common.hpp"
#include "ctxrank/config.hpp"

using namespace ctxrank;

TEST_CASE("defaults validate and round-trip through JSON") {
  RunConfig cfg;
  cfg.seed = 7;
  CHECK_NOTHROW(cfg.validate());
  nlohmann::json j = cfg;
  RunConfig back = parse_run_config(j.dump());
  CHECK(nlohmann::json(back) == j);
  CHECK(config_hash(back) == config_hash(cfg));
}

TEST_CASE("documented training defaults") {
  TrainConfig t;
  CHECK(t.lr == 0.01);
  CHECK(t.momentum == 0.9);
  CHECK(t.weight_decay == 1e-4);
  CHECK(t.epochs == 500);
  CHECK(t.batch == 4);
  CHECK(t.focal_alpha == 2.0);
  CHECK(t.focal_gamma == 0.25);
  SamplerConfig s;
  CHECK(s.k1 == 70);
  CHECK(s.k2 == 20);
  CHECK(s.k == 100);
  CHECK(GraphConfig{}.kprime == 8);
  CHECK(ModelConfig{}.layers == 9);
  CHECK(EvalConfig{}.lambda == 1.0);
}

TEST_CASE("unknown keys and bad values are config errors") {
  CHECK_THROWS_AS(parse_run_config(R"({"sampler":{"kk":3}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"sampler":{"mode":"triple"}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"sampler":{"k1":0}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"sampler":{"k1":20,"k":10}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"synth":{"dim":1}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"synth":{"sigma":-1}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(R"({"eval":{"lambda":-0.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("{not json"), ConfigError);
  CHECK(ConfigError("x").code() == 2);
}

TEST_CASE("partial config keeps remaining defaults") {
  RunConfig cfg = parse_run_config(R"({"sampler":{"k":30,"k1":15,"mode":"plain"},"seed":3})");
  CHECK(cfg.sampler.k == 30);
  CHECK(cfg.sampler.k1 == 15);
  CHECK(cfg.sampler.k2 == 20);
  CHECK(cfg.sampler.mode == SamplerMode::Plain);
  CHECK(cfg.seed == 3);
}

TEST_CASE("derived seeds are distinct and follow the top-level seed") {
  RunConfig a;
  a.seed = 1;
  RunConfig b = a;
  b.seed = 2;
  auto da = a.with_derived_seeds();
  auto db = b.with_derived_seeds();
  CHECK(da.synth.seed != da.model.seed);
  CHECK(da.model.seed != da.train.seed);
  CHECK(da.synth.seed != db.synth.seed);
  CHECK(a.with_derived_seeds().train.seed == da.train.seed);
}

TEST_CASE("sampler clamps to small galleries") {
  SamplerConfig s;
  auto c = s.clamped_to(40);
  CHECK(c.k <= 40);
  CHECK(c.k1 <= c.k);
  CHECK_NOTHROW(c.validate());
  auto same = s.clamped_to(1000);
  CHECK(same.k == s.k);
  CHECK(same.k1 == s.k1);
}
