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

#include <algorithm>
#include <set>

#include "ctxrank/sampler.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ctxrank;
using ctxrank::testing::all_indices;
using ctxrank::testing::random_store;

namespace {

bool contains(const std::vector<size_t>& v, size_t x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

SamplerConfig hgs_cfg(int k1, int k2, int k) {
  SamplerConfig c;
  c.k1 = k1;
  c.k2 = k2;
  c.k = k;
  c.mode = SamplerMode::Hgs;
  return c;
}

}  // namespace

TEST_CASE("overlap removal keeps second-hop order") {
  // a=1 b=2 c=3 d=4
  std::vector<size_t> second{1, 2, 3}, first{2, 4};
  CHECK(remove_overlap(second, first) == std::vector<size_t>{1, 3});
}

TEST_CASE("budget equal to k1 stops after the first hop") {
  auto s = random_store(5, 50, 6);
  std::vector<size_t> gallery;
  for (size_t i = 1; i < s.size(); ++i) gallery.push_back(i);
  auto set = hgs_sample(s, 0, gallery, hgs_cfg(10, 5, 10));
  CHECK(set.members == oracle::nearest(s, 0, gallery, 10));
}

TEST_CASE("constructed hard positive is reached by two hops only") {
  auto inst = fixtures::hard_positive_instance();
  const auto& s = inst.store;
  const auto& c = inst.sampler;
  // Preconditions established by brute force.
  REQUIRE(contains(oracle::nearest(s, inst.probe, inst.gallery, c.k1), inst.easy));
  REQUIRE_FALSE(contains(oracle::nearest(s, inst.probe, inst.gallery, c.k), inst.hard));
  REQUIRE(contains(oracle::nearest(s, inst.easy, inst.gallery, c.k2), inst.hard));

  auto hgs = hgs_sample(s, inst.probe, inst.gallery, c);
  auto plain = plain_sample(s, inst.probe, inst.gallery, c.k);
  CHECK(contains(hgs.members, inst.hard));
  CHECK_FALSE(contains(plain.members, inst.hard));
  CHECK(hgs.size() == 4);
  CHECK(plain.size() == 4);
}

TEST_CASE("plain sampler clamps and puts duplicates first") {
  Matrix f(4, 2);
  f << 1, 0, 0, 1, 1, 0, -1, 0;
  EmbeddingStore s({{1, 0, 0, Split::Probe},
                    {2, 1, 0, Split::Gallery},
                    {3, 0, 1, Split::Gallery},
                    {4, 2, 0, Split::Gallery}},
                   f);
  std::vector<size_t> gallery{1, 2, 3};
  auto set = plain_sample(s, 0, gallery, 5);
  CHECK(set.size() == 3);
  CHECK(set.members.front() == 2);
  REQUIRE(set.labels.has_value());
  CHECK((*set.labels)[0] == 1);
  CHECK(set.ids(s) == std::vector<int64_t>{3, 2, 4});
}

TEST_CASE("plain sampler delegates to topk") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    auto s = random_store(seed, 90, 7);
    std::vector<size_t> gallery;
    for (size_t i = 3; i < s.size(); ++i) gallery.push_back(i);
    auto set = plain_sample(s, 1, gallery, 25);
    CHECK(set.members == topk(s, 1, gallery, 25).indices());
  }
}

TEST_CASE("hgs matches the brute-force two-hop oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    size_t n = 20 + rng.below(150);
    auto s = random_store(1000 + static_cast<uint64_t>(trial), n, 2 + static_cast<int>(rng.below(10)));
    std::vector<size_t> gallery;
    for (size_t i = 1; i < n; ++i) gallery.push_back(i);
    int k = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(n - 1)));
    int k1 = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(k)));
    int k2 = 1 + static_cast<int>(rng.below(30));
    auto set = hgs_sample(s, 0, gallery, hgs_cfg(k1, k2, k));
    auto expect = oracle::hgs(s, 0, gallery, static_cast<size_t>(k1), static_cast<size_t>(k2),
                              static_cast<size_t>(k));
    CHECK(set.members == expect);
  }
}

TEST_CASE("hgs invariants") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    auto s = random_store(seed, 150, 5);
    std::vector<size_t> gallery;
    for (size_t i = 1; i < s.size(); ++i) gallery.push_back(i);
    auto cfg = hgs_cfg(12, 6, 40);
    auto set = hgs_sample(s, 0, gallery, cfg);
    auto first = oracle::nearest(s, 0, gallery, 12);
    CHECK(std::equal(first.begin(), first.end(), set.members.begin()));
    CHECK(set.size() <= 40);
    CHECK(std::set<size_t>(set.members.begin(), set.members.end()).size() == set.size());
    CHECK_FALSE(contains(set.members, 0));
    CHECK(hgs_sample(s, 0, gallery, cfg).members == set.members);
  }
}

TEST_CASE("hgs returns short when the two hops cannot fill the budget") {
  auto s = random_store(4, 30, 4);
  std::vector<size_t> gallery;
  for (size_t i = 1; i < s.size(); ++i) gallery.push_back(i);
  auto set = hgs_sample(s, 0, gallery, hgs_cfg(2, 1, 29));
  CHECK(set.size() <= 4);
  CHECK(set.size() >= 2);
}

TEST_CASE("hgs rejects a gallery smaller than k1") {
  auto s = random_store(4, 10, 4);
  std::vector<size_t> gallery{1, 2, 3};
  CHECK_THROWS_AS(hgs_sample(s, 0, gallery, hgs_cfg(5, 2, 6)), DataError);
}

TEST_CASE("recall report edge cases") {
  Matrix f(5, 2);
  f << 1, 0, 0.9, 0.1, 0.8, 0.2, -1, 0, 0, 1;
  EmbeddingStore s({{0, 7, 0, Split::Probe},
                    {1, 7, 1, Split::Gallery},
                    {2, 7, 2, Split::Gallery},
                    {3, 8, 0, Split::Gallery},
                    {4, 9, 0, Split::Gallery}},
                   f, true);
  std::vector<size_t> gallery{1, 2, 3, 4};
  auto all = plain_sample(s, 0, gallery, 2);
  auto r = recall_report(all, s, gallery);
  REQUIRE(r.recall.has_value());
  CHECK(*r.recall == 1.0);
  CHECK(r.precision == 1.0);

  CandidateSet none;
  none.probe = 0;
  none.members = {3, 4};
  r = recall_report(none, s, gallery);
  CHECK(*r.recall == 0.0);
  CHECK(r.precision == 0.0);

  // Probe of identity 9 has no other member of its identity.
  CandidateSet lonely;
  lonely.probe = 4;
  lonely.members = {1};
  CHECK_FALSE(recall_report(lonely, s, std::vector<size_t>{0, 1, 2, 3}).recall.has_value());
}

TEST_CASE("recall report matches set intersection on synthetic stores") {
  SynthConfig sc;
  sc.identities = 12;
  sc.seed = 6;
  auto s = synth_generate(sc);
  auto gallery = s.indices(Split::Gallery);
  auto cfg = hgs_cfg(10, 5, 20);
  for (size_t p : s.indices(Split::Probe)) {
    auto set = hgs_sample(s, p, gallery, cfg);
    std::set<size_t> positives;
    for (size_t g : gallery)
      if (s.record(g).identity == s.record(p).identity && s.record(g).camera != s.record(p).camera)
        positives.insert(g);
    size_t hit = 0;
    for (size_t m : set.members) hit += positives.count(m);
    auto r = recall_report(set, s, gallery, true);
    CHECK(r.positives_total == positives.size());
    CHECK(r.positives_sampled == hit);
    REQUIRE(r.recall.has_value());
    CHECK(*r.recall == static_cast<double>(hit) / static_cast<double>(positives.size()));
  }
}

TEST_CASE("hgs mean recall is at least plain on the synthetic benchmark") {
  double hgs_sum = 0, plain_sum = 0;
  size_t count = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig sc;
    sc.seed = seed;
    auto s = synth_generate(sc);
    auto gallery = s.indices(Split::Gallery);
    // Budget scaled to the 300-image benchmark gallery.
    SamplerConfig cfg;
    cfg.k = 30;
    cfg.k1 = 15;
    cfg.k2 = 10;
    for (size_t p : s.indices(Split::Probe)) {
      auto h = recall_report(hgs_sample(s, p, gallery, cfg), s, gallery);
      auto pl = recall_report(plain_sample(s, p, gallery, static_cast<size_t>(cfg.k)), s, gallery);
      hgs_sum += h.recall.value_or(0);
      plain_sum += pl.recall.value_or(0);
      ++count;
    }
  }
  CHECK(hgs_sum >= plain_sum);
}
