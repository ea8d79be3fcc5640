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

#include "ctxrank/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace ctxrank {
namespace {

template <typename T>
void put(std::vector<unsigned char>& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& data, const std::filesystem::path& path)
      : data_(data), path_(path) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > data_.size()) {
      throw DataError("truncated checkpoint " + path_.string() + " at byte " +
                      std::to_string(pos_));
    }
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }

  void read_tensors(ModelParams& p) {
    p.visit([&](const std::string& name, Matrix& t, bool) {
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        const double v = get<double>();
        if (!std::isfinite(v)) {
          throw DataError("corrupt checkpoint " + path_.string() + ": non-finite value in " + name);
        }
        t.data()[i] = v;
      }
    });
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  const std::vector<unsigned char>& data_;
  const std::filesystem::path& path_;
  size_t pos_ = 0;
};

void put_tensors(std::vector<unsigned char>& out, const ModelParams& p) {
  p.visit([&](const std::string&, const Matrix& t, bool) {
    for (Eigen::Index i = 0; i < t.size(); ++i) put<double>(out, t.data()[i]);
  });
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                      const ModelParams* velocity) {
  const ModelConfig& c = params.config;
  std::vector<unsigned char> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put<uint32_t>(out, kCheckpointVersion);
  put<uint32_t>(out, static_cast<uint32_t>(c.dim));
  put<uint32_t>(out, static_cast<uint32_t>(c.resolved_edge_dim()));
  put<uint32_t>(out, static_cast<uint32_t>(c.layers));
  put<uint32_t>(out, static_cast<uint32_t>(c.resolved_hidden()));
  put<uint32_t>(out, velocity ? 2u : 1u);
  put<double>(out, c.bn_eps);
  put<double>(out, c.bn_momentum);
  put_tensors(out, params);
  if (velocity) put_tensors(out, *velocity);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<unsigned char> data((std::istreambuf_iterator<char>(f)),
                                        std::istreambuf_iterator<char>());
  if (data.size() < sizeof kCheckpointMagic ||
      std::memcmp(data.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw DataError("not a checkpoint (bad magic): " + path.string());
  }
  Reader in(data, path);
  for (size_t i = 0; i < sizeof kCheckpointMagic; ++i) in.get<unsigned char>();
  const auto version = in.get<uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig c;
  c.dim = static_cast<int>(in.get<uint32_t>());
  c.edge_dim = static_cast<int>(in.get<uint32_t>());
  c.layers = static_cast<int>(in.get<uint32_t>());
  c.hidden = static_cast<int>(in.get<uint32_t>());
  const auto sections = in.get<uint32_t>();
  c.bn_eps = in.get<double>();
  c.bn_momentum = in.get<double>();
  constexpr int kMaxWidth = 1 << 16;
  if (c.dim < 1 || c.edge_dim < 1 || c.hidden < 1 || c.layers < 0 || c.layers > 4096 ||
      c.dim > kMaxWidth || c.edge_dim > kMaxWidth || c.hidden > kMaxWidth ||
      (sections != 1 && sections != 2)) {
    throw DataError("corrupt checkpoint header: " + path.string());
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }

  Checkpoint out{ModelParams::zeros_like(ModelParams::init(c)), std::nullopt};
  in.read_tensors(out.params);
  if (sections == 2) {
    out.velocity = ModelParams::zeros_like(out.params);
    in.read_tensors(*out.velocity);
  }
  if (!in.done()) throw DataError("trailing bytes in checkpoint " + path.string());
  return out;
}

}  // namespace ctxrank
