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

#include <cstdlib>
#include <filesystem>
#include <algorithm>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "ctxrank/c_api.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kConfig = R"({
  "seed": 3,
  "synth": {"identities": 10, "cameras": 3, "per_camera": 3, "dim": 8},
  "sampler": {"k1": 8, "k2": 4, "k": 15},
  "model": {"layers": 2},
  "train": {"epochs": 3}
})";

// Takes ownership of a library string.
std::string take(char* s) {
  std::string out = s ? s : "";
  ctx_string_free(s);
  return out;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ctxrank_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct StoreGuard {
  ctx_store* s = nullptr;
  ~StoreGuard() { ctx_store_free(s); }
};
struct ModelGuard {
  ctx_model* m = nullptr;
  ~ModelGuard() { ctx_model_free(m); }
};

}  // namespace

TEST_CASE("version and config resolution") {
  CHECK(std::string(ctx_version()).size() > 0);
  char* out = nullptr;
  REQUIRE(ctx_config_resolve(kConfig, &out) == CTX_OK);
  auto j = json::parse(take(out));
  CHECK(j["sampler"]["k"] == 15);
  CHECK(j["train"]["lr"] == 0.01);
  CHECK(j.contains("config_hash"));
  REQUIRE(ctx_config_resolve(nullptr, &out) == CTX_OK);
  CHECK(json::parse(take(out))["sampler"]["k"] == 100);
}

TEST_CASE("config errors map to status 2") {
  char* out = nullptr;
  CHECK(ctx_config_resolve(R"({"bogus": 1})", &out) == CTX_ERR_CONFIG);
  CHECK(std::string(ctx_last_error()).find("bogus") != std::string::npos);
  CHECK(ctx_config_resolve("{", &out) == CTX_ERR_CONFIG);
  ctx_store* s = nullptr;
  CHECK(ctx_store_synth(R"({"synth": {"dim": 1}})", &s) == CTX_ERR_CONFIG);
  CHECK(s == nullptr);
}

TEST_CASE("null arguments are rejected, null frees are no-ops") {
  CHECK(ctx_store_load(nullptr, nullptr) != CTX_OK);
  CHECK(ctx_store_synth(kConfig, nullptr) != CTX_OK);
  ctx_store_free(nullptr);
  ctx_model_free(nullptr);
  ctx_string_free(nullptr);
}

TEST_CASE("store synth, write, load and feature access") {
  auto dir = scratch("store");
  StoreGuard a, b;
  REQUIRE(ctx_store_synth(kConfig, &a.s) == CTX_OK);
  CHECK(ctx_store_count(a.s) == 10u * 3u * 3u);
  CHECK(ctx_store_dim(a.s) == 8);
  REQUIRE(ctx_store_write(a.s, (dir / "s.json").c_str()) == CTX_OK);
  REQUIRE(ctx_store_load((dir / "s.json").c_str(), &b.s) == CTX_OK);
  double fa[8], fb[8];
  for (size_t i = 0; i < ctx_store_count(a.s); ++i) {
    REQUIRE(ctx_store_feature(a.s, i, fa, 8) == CTX_OK);
    REQUIRE(ctx_store_feature(b.s, i, fb, 8) == CTX_OK);
    for (int c = 0; c < 8; ++c) CHECK(fa[c] == fb[c]);
  }
  CHECK(ctx_store_feature(a.s, 10000, fa, 8) == CTX_ERR_DATA);
  CHECK(ctx_store_feature(a.s, 0, fa, 3) != CTX_OK);
  // Manifest count and dim agree with the payload size.
  auto m = json::parse(std::ifstream(dir / "s.json"));
  CHECK(fs::file_size(dir / m["feature_file"].get<std::string>()) ==
        m["count"].get<size_t>() * m["dim"].get<size_t>() * 4);
}

TEST_CASE("missing or corrupt store is a data error") {
  auto dir = scratch("missing");
  ctx_store* s = nullptr;
  CHECK(ctx_store_load((dir / "nope.json").c_str(), &s) == CTX_ERR_DATA);
  std::ofstream(dir / "bad.json") << "{\"count\": 2}";
  CHECK(ctx_store_load((dir / "bad.json").c_str(), &s) == CTX_ERR_DATA);
  CHECK(std::string(ctx_last_error()).size() > 0);
}

TEST_CASE("train with zero epochs writes only the initial checkpoint") {
  auto dir = scratch("train0");
  StoreGuard st;
  REQUIRE(ctx_store_synth(kConfig, &st.s) == CTX_OK);
  auto cfg = json::parse(kConfig);
  cfg["train"]["epochs"] = 0;
  ModelGuard m;
  char* report = nullptr;
  REQUIRE(ctx_train(st.s, cfg.dump().c_str(), dir.c_str(), 0, &m.m, &report) == CTX_OK);
  auto r = json::parse(take(report));
  CHECK(r["loss_history"].empty());
  CHECK(fs::exists(dir / "ckpt_0.bin"));
  CHECK(fs::exists(dir / "ckpt_0.json"));
  size_t bins = 0;
  for (const auto& e : fs::directory_iterator(dir)) bins += e.path().extension() == ".bin";
  CHECK(bins == 1);
  CHECK(ctx_model_dim(m.m) == 8);
  CHECK(ctx_model_layers(m.m) == 2);
}

TEST_CASE("resume continues epoch numbering and matches a straight run") {
  auto dir = scratch("resume");
  auto straight = scratch("straight");
  StoreGuard st;
  REQUIRE(ctx_store_synth(kConfig, &st.s) == CTX_OK);
  auto cfg = json::parse(kConfig);
  cfg["train"]["epochs"] = 2;
  REQUIRE(ctx_train(st.s, cfg.dump().c_str(), dir.c_str(), 0, nullptr, nullptr) == CTX_OK);
  CHECK(fs::exists(dir / "ckpt_2.bin"));
  cfg["train"]["epochs"] = 4;
  char* report = nullptr;
  REQUIRE(ctx_train(st.s, cfg.dump().c_str(), dir.c_str(), 1, nullptr, &report) == CTX_OK);
  auto r = json::parse(take(report));
  CHECK(r["loss_history"].size() == 4);
  CHECK(fs::exists(dir / "ckpt_4.bin"));
  auto meta = json::parse(std::ifstream(dir / "ckpt_4.json"));
  CHECK(meta["epoch"] == 4);
  CHECK(meta.contains("config_hash"));

  REQUIRE(ctx_train(st.s, cfg.dump().c_str(), straight.c_str(), 0, nullptr, &report) == CTX_OK);
  CHECK(json::parse(take(report))["loss_history"] == r["loss_history"]);
  std::ifstream a(dir / "ckpt_4.bin", std::ios::binary), b(straight / "ckpt_4.bin", std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);

  // The log has one line per epoch.
  std::ifstream log(dir / "train_log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    auto j = json::parse(line);
    CHECK(j.contains("wall_time"));
    CHECK(j["epoch"] == ++lines);
  }
  CHECK(lines == 4);
}

TEST_CASE("eval sweeps, sampler rows and plot data") {
  StoreGuard st;
  REQUIRE(ctx_store_synth(kConfig, &st.s) == CTX_OK);
  ModelGuard m;
  REQUIRE(ctx_train(st.s, kConfig, nullptr, 0, &m.m, nullptr) == CTX_OK);
  const ctx_model* models[] = {m.m};
  char* out = nullptr;
  REQUIRE(ctx_eval(st.s, models, 1, kConfig, R"({"k": [5, 15]})", &out) == CTX_OK);
  auto two = json::parse(take(out));
  CHECK(two["rows"].size() == 2);
  CHECK(two["rows"][0]["k"] == 5);
  CHECK(two["rows"][1]["k"] == 15);

  REQUIRE(ctx_eval(st.s, models, 1, kConfig, R"({"mode": ["hgs", "plain"], "lambda": [0, 1]})", &out) == CTX_OK);
  auto modes = json::parse(take(out));
  REQUIRE(modes["rows"].size() == 4);
  std::set<std::string> seen;
  for (const auto& row : modes["rows"]) {
    seen.insert(row["mode"].get<std::string>());
    CHECK(row.contains("recall"));
    CHECK(row.contains("precision"));
    CHECK(row.contains("mAP"));
  }
  CHECK(seen == std::set<std::string>{"hgs", "plain"});

  // lambda 0 equals the model-free baseline.
  REQUIRE(ctx_eval(st.s, nullptr, 0, kConfig, R"({"lambda": [0]})", &out) == CTX_OK);
  auto base = json::parse(take(out));
  CHECK(base["rows"][0]["mAP"] == modes["rows"][0]["mAP"]);

  REQUIRE(ctx_plot_csv(modes.dump().c_str(), &out) == CTX_OK);
  auto csv = take(out);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("eval rejects an incompatible checkpoint") {
  StoreGuard st;
  REQUIRE(ctx_store_synth(kConfig, &st.s) == CTX_OK);
  auto cfg = json::parse(kConfig);
  cfg["synth"]["dim"] = 6;
  StoreGuard other;
  REQUIRE(ctx_store_synth(cfg.dump().c_str(), &other.s) == CTX_OK);
  ModelGuard m;
  REQUIRE(ctx_train(other.s, cfg.dump().c_str(), nullptr, 0, &m.m, nullptr) == CTX_OK);
  const ctx_model* models[] = {m.m};
  char* out = nullptr;
  CHECK(ctx_eval(st.s, models, 1, kConfig, nullptr, &out) == CTX_ERR_DATA);
  CHECK(std::string(ctx_last_error()).find("dim") != std::string::npos);
}

TEST_CASE("rank writes per-probe results with the config hash") {
  auto dir = scratch("rank");
  StoreGuard st;
  REQUIRE(ctx_store_synth(kConfig, &st.s) == CTX_OK);
  ModelGuard m;
  REQUIRE(ctx_train(st.s, kConfig, nullptr, 0, &m.m, nullptr) == CTX_OK);
  char* out = nullptr;
  REQUIRE(ctx_rank(st.s, m.m, kConfig, (dir / "r.jsonl").c_str(), &out) == CTX_OK);
  auto summary = json::parse(take(out));
  std::ifstream in(dir / "r.jsonl");
  std::string line;
  size_t n = 0;
  while (std::getline(in, line)) {
    auto j = json::parse(line);
    CHECK(j["config_hash"] == summary["config_hash"]);
    auto d = j["distances"].get<std::vector<double>>();
    CHECK(std::is_sorted(d.begin(), d.end()));
    ++n;
  }
  CHECK(n == 5u * 3u);  // test identities x cameras
}

TEST_CASE("model save, load and logits") {
  auto dir = scratch("model");
  StoreGuard st;
  REQUIRE(ctx_store_synth(kConfig, &st.s) == CTX_OK);
  ModelGuard m, back;
  REQUIRE(ctx_train(st.s, kConfig, nullptr, 0, &m.m, nullptr) == CTX_OK);
  REQUIRE(ctx_model_save(m.m, (dir / "m.bin").c_str()) == CTX_OK);
  REQUIRE(ctx_model_load((dir / "m.bin").c_str(), &back.m) == CTX_OK);
  auto plain = json::parse(kConfig);
  plain["sampler"]["mode"] = "plain";  // fills the budget exactly
  const std::string pc = plain.dump();
  char* g = nullptr;
  REQUIRE(ctx_inspect(st.s, pc.c_str(), 75, &g) == CTX_OK);
  auto graph = json::parse(take(g));
  CHECK(graph["candidate_ids"].size() == 15);
  CHECK(graph["support"].size() == 15);
  CHECK(graph.contains("labels"));
  double a[32], b[32];
  size_t na = 0, nb = 0;
  REQUIRE(ctx_model_logits(m.m, st.s, pc.c_str(), 75, a, 32, &na) == CTX_OK);
  REQUIRE(ctx_model_logits(back.m, st.s, pc.c_str(), 75, b, 32, &nb) == CTX_OK);
  CHECK(na == 15);
  for (size_t i = 0; i < na; ++i) CHECK(a[i] == b[i]);
  CHECK(ctx_model_logits(m.m, st.s, kConfig, 123456, a, 32, &na) == CTX_ERR_DATA);
  std::ofstream(dir / "junk.bin") << "junk";
  ctx_model* bad = nullptr;
  CHECK(ctx_model_load((dir / "junk.bin").c_str(), &bad) == CTX_ERR_DATA);
}

TEST_CASE("gradcheck report and fault injection") {
  char* out = nullptr;
  const char* opts = R"({"node_counts": [10]})";
  REQUIRE(ctx_gradcheck(kConfig, opts, &out) == CTX_OK);
  auto r = json::parse(take(out));
  CHECK(r["passed"] == true);
  std::set<std::string> names;
  for (const auto& b : r["blocks"]) {
    CHECK(names.insert(b["name"].get<std::string>()).second);
    CHECK(b["max_rel_error"].get<double>() < 1e-4);
  }
  // phi, phi', 2 gcn weights, 2 x (gamma, beta), 3 x (weight, bias)
  CHECK(names.size() == 4 + 2 + 4 + 6);
  CHECK(ctx_gradcheck(kConfig, R"({"node_counts": [10], "fault": true})", &out) == CTX_ERR_NUMERIC);
  auto f = json::parse(take(out));
  CHECK(f["passed"] == false);
}
