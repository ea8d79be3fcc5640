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

#include <nlohmann/json.hpp>

#include "ctxrank/graph.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ctxrank;
using ctxrank::testing::random_store;

TEST_CASE("node of an exact match is a zero row") {
  Matrix f(3, 3);
  f << 1, 0, 0, 1, 0, 0, 0, 1, 0;
  EmbeddingStore s({{1, 0, 0, Split::Probe}, {2, 0, 1, Split::Gallery}, {3, 1, 0, Split::Gallery}},
                   f);
  std::vector<size_t> members{1, 2};
  Matrix x = build_nodes(s, 0, members);
  CHECK(x.row(0).isZero(0));
  CHECK(x(1, 0) == 1.0);
  CHECK(x(1, 1) == -1.0);
  CHECK(x(1, 2) == 0.0);
}

TEST_CASE("nodes match elementwise subtraction and reconstruct the probe") {
  // Raw float features: the double difference is exact, so adding the
  // gallery row back reproduces the probe bit for bit.
  auto normed = random_store(31, 40, 9);
  Matrix raw = normed.features() * 3.0;
  EmbeddingStore s(normed.records(), raw, false);
  std::vector<size_t> members{5, 1, 39, 12, 7};
  Matrix x = build_nodes(s, 0, members);
  for (size_t i = 0; i < members.size(); ++i) {
    for (int c = 0; c < s.dim(); ++c) {
      auto r = static_cast<Eigen::Index>(i);
      CHECK(x(r, c) == s.features()(0, c) - s.features()(static_cast<Eigen::Index>(members[i]), c));
      CHECK(x(r, c) + s.features()(static_cast<Eigen::Index>(members[i]), c) == s.features()(0, c));
    }
  }
  // Normalized features are full doubles; reconstruction holds to rounding.
  Matrix xn = build_nodes(normed, 0, members);
  for (size_t i = 0; i < members.size(); ++i) {
    auto r = static_cast<Eigen::Index>(i);
    CHECK((xn.row(r) + normed.feature(members[i]) - normed.feature(0)).cwiseAbs().maxCoeff() <= 1e-16);
  }
}

TEST_CASE("two nodes with k'=1 link to each other") {
  auto s = random_store(2, 3, 4);
  std::vector<size_t> members{1, 2};
  Matrix m = build_support(s, members, 1);
  Matrix expect(2, 2);
  expect << 0, 1, 1, 0;
  CHECK(m == expect);
}

TEST_CASE("large k' is fully connected minus the diagonal") {
  auto s = random_store(2, 12, 4);
  std::vector<size_t> members{1, 2, 3, 4, 5, 6};
  for (int kp : {5, 8, 100}) {
    Matrix m = build_support(s, members, kp);
    Matrix expect = Matrix::Ones(6, 6) - Matrix::Identity(6, 6);
    CHECK(m == expect);
  }
}

TEST_CASE("support rows equal brute-force top-8 within the candidate set") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    auto s = random_store(seed, 60, 6);
    std::vector<size_t> members;
    for (size_t i = 1; i <= 30; ++i) members.push_back((i * 7) % 60);
    Matrix m = build_support(s, members, 8);
    for (size_t i = 0; i < members.size(); ++i) {
      auto near = oracle::nearest(s, members[i], members, 8);
      std::vector<int> expect;
      for (size_t g : near)
        expect.push_back(static_cast<int>(std::find(members.begin(), members.end(), g) - members.begin()));
      std::sort(expect.begin(), expect.end());
      std::vector<int> got;
      for (int j = 0; j < m.cols(); ++j)
        if (m(static_cast<Eigen::Index>(i), j) != 0) got.push_back(j);
      CHECK(got == expect);
      CHECK(m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) == 0);
    }
  }
}

TEST_CASE("support row sums are within [1, min(k', n-1)]") {
  for (size_t n : {2u, 3u, 9u, 25u}) {
    auto s = random_store(n, 40, 5);
    std::vector<size_t> members;
    for (size_t i = 0; i < n; ++i) members.push_back(i + 1);
    Matrix m = build_support(s, members, 8);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      double sum = m.row(i).sum();
      CHECK(sum >= 1);
      CHECK(sum <= static_cast<double>(std::min<size_t>(8, n - 1)));
    }
  }
}

TEST_CASE("permuting candidates permutes nodes and support consistently") {
  auto s = random_store(41, 50, 6);
  std::vector<size_t> members{3, 9, 14, 20, 22, 31, 35, 40, 44, 48, 49};
  std::vector<size_t> perm{4, 0, 10, 2, 7, 1, 9, 3, 8, 6, 5};
  std::vector<size_t> shuffled;
  for (size_t p : perm) shuffled.push_back(members[p]);
  Matrix x = build_nodes(s, 0, members), xs = build_nodes(s, 0, shuffled);
  Matrix m = build_support(s, members, 4), ms = build_support(s, shuffled, 4);
  for (size_t i = 0; i < perm.size(); ++i) {
    auto a = static_cast<Eigen::Index>(i), pa = static_cast<Eigen::Index>(perm[i]);
    CHECK(xs.row(a) == x.row(pa));
    for (size_t j = 0; j < perm.size(); ++j)
      CHECK(ms(a, static_cast<Eigen::Index>(j)) == m(pa, static_cast<Eigen::Index>(perm[j])));
  }
}

TEST_CASE("build_graph wires labels, ids and edge input") {
  auto s = random_store(12, 30, 5, 3);
  CandidateSet set;
  set.probe = 0;
  set.probe_id = 0;
  set.members = {3, 4, 5, 6};
  attach_labels(set, s);
  GraphConfig gc;
  gc.kprime = 2;
  auto g = build_graph(s, set, gc);
  CHECK(g.size() == 4);
  CHECK(g.candidate_ids == std::vector<int64_t>{3, 4, 5, 6});
  CHECK(*g.labels == std::vector<uint8_t>{1, 0, 0, 1});
  CHECK(g.edge_input == g.nodes);
  gc.edge_input = EdgeInput::Gallery;
  auto gg = build_graph(s, set, gc);
  CHECK(gg.edge_input.row(2) == s.feature(5));
  CHECK(gg.support == g.support);

  auto j = graph_to_json(g);
  CHECK(j["candidate_ids"].size() == 4);
  CHECK(j["support"].size() == 4);
  CHECK(j["support"][0].size() == 2);
}

TEST_CASE("support rejects duplicates and k'<1") {
  auto s = random_store(1, 10, 3);
  std::vector<size_t> dup{1, 2, 1};
  CHECK_THROWS_AS(build_support(s, dup, 2), DataError);
  std::vector<size_t> ok{1, 2};
  CHECK_THROWS_AS(build_support(s, ok, 0), ConfigError);
}
