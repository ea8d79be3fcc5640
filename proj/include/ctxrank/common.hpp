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
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace ctxrank {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Error categories map one-to-one onto CLI exit codes and C API status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int code() const noexcept { return 1; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int code() const noexcept override { return 2; }
};

class DataError : public Error {
 public:
  using Error::Error;
  int code() const noexcept override { return 3; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  int code() const noexcept override { return 4; }
};

// splitmix64 finalizer; used to derive named sub-seeds.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
inline uint64_t fnv1a(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t sub_seed(uint64_t seed, std::string_view name, uint64_t index = 0) {
  return mix64(mix64(seed ^ fnv1a(name)) + index);
}

}  // namespace ctxrank
