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

#include "ctxrank/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ctxrank/rng.hpp"

namespace ctxrank {
namespace {

using nlohmann::json;

uint32_t byteswap32(uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

void to_little_endian(std::vector<float>& values) {
  if constexpr (std::endian::native == std::endian::big) {
    for (float& f : values) {
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      bits = byteswap32(bits);
      std::memcpy(&f, &bits, 4);
    }
  }
}

std::string at_record(size_t index) { return " (record " + std::to_string(index) + ")"; }

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::Probe: return "probe";
    case Split::Gallery: return "gallery";
    case Split::Train: return "train";
  }
  return "gallery";
}

Split split_from_string(const std::string& s) {
  if (s == "probe") return Split::Probe;
  if (s == "gallery") return Split::Gallery;
  if (s == "train") return Split::Train;
  throw DataError("unknown split tag \"" + s + "\"");
}

EmbeddingStore::EmbeddingStore(std::vector<EmbeddingRecord> records, const Matrix& features,
                               bool normalized)
    : records_(std::move(records)), normalized_(normalized) {
  if (static_cast<size_t>(features.rows()) != records_.size()) {
    throw DataError("feature rows (" + std::to_string(features.rows()) +
                    ") do not match record count (" + std::to_string(records_.size()) + ")");
  }
  if (features.cols() < 1) throw DataError("feature dimension must be positive");
  dim_ = static_cast<int>(features.cols());
  index_.reserve(records_.size());
  for (size_t i = 0; i < records_.size(); ++i) {
    if (!index_.emplace(records_[i].id, i).second) {
      throw DataError("duplicate id " + std::to_string(records_[i].id) + at_record(i));
    }
  }
  storage_.resize(records_.size() * static_cast<size_t>(dim_));
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      const double v = features(r, c);
      if (!std::isfinite(v)) {
        throw DataError("non-finite feature value" + at_record(static_cast<size_t>(r)));
      }
      storage_[static_cast<size_t>(r) * dim_ + c] = static_cast<float>(v);
    }
  }
  rebuild_features();
}

void EmbeddingStore::rebuild_features() {
  features_.resize(static_cast<Eigen::Index>(records_.size()), dim_);
  for (size_t r = 0; r < records_.size(); ++r) {
    for (int c = 0; c < dim_; ++c) {
      features_(static_cast<Eigen::Index>(r), c) = storage_[r * dim_ + c];
    }
  }
  if (!normalized_) return;
  for (Eigen::Index r = 0; r < features_.rows(); ++r) {
    const double norm = features_.row(r).norm();
    if (norm == 0.0) {
      throw DataError("cannot normalize zero-norm feature of id " +
                      std::to_string(records_[static_cast<size_t>(r)].id));
    }
    features_.row(r) /= norm;
  }
}

std::optional<size_t> EmbeddingStore::index_of(int64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

size_t EmbeddingStore::require_index(int64_t id) const {
  auto idx = index_of(id);
  if (!idx) throw DataError("id " + std::to_string(id) + " not present in store");
  return *idx;
}

std::vector<size_t> EmbeddingStore::indices(Split split) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].split == split) out.push_back(i);
  }
  return out;
}

std::vector<size_t> EmbeddingStore::unmatched_probes(bool cross_camera) const {
  const auto gallery = indices(Split::Gallery);
  std::vector<size_t> out;
  for (size_t p : indices(Split::Probe)) {
    const auto& probe = records_[p];
    const bool matched = std::any_of(gallery.begin(), gallery.end(), [&](size_t g) {
      return records_[g].identity == probe.identity &&
             (!cross_camera || records_[g].camera != probe.camera);
    });
    if (!matched) out.push_back(p);
  }
  return out;
}

bool EmbeddingStore::operator==(const EmbeddingStore& other) const {
  return dim_ == other.dim_ && normalized_ == other.normalized_ && records_ == other.records_ &&
         storage_.size() == other.storage_.size() &&
         std::memcmp(storage_.data(), other.storage_.data(), storage_.size() * sizeof(float)) == 0;
}

EmbeddingStore normalize(const EmbeddingStore& store) {
  EmbeddingStore out = store;
  if (out.normalized_) return out;
  out.normalized_ = true;
  out.rebuild_features();
  return out;
}

EmbeddingStore load(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest " + manifest_path.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw DataError("manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
  }

  std::vector<EmbeddingRecord> records;
  std::filesystem::path feature_path;
  size_t count = 0;
  int dim = 0;
  bool normalized = false;
  try {
    count = m.at("count").get<size_t>();
    dim = m.at("dim").get<int>();
    normalized = m.at("normalized").get<bool>();
    const auto ids = m.at("ids").get<std::vector<int64_t>>();
    const auto identities = m.at("identities").get<std::vector<int64_t>>();
    const auto cameras = m.at("cameras").get<std::vector<int64_t>>();
    const auto splits = m.at("splits").get<std::vector<std::string>>();
    feature_path = m.at("feature_file").get<std::string>();
    if (dim < 1) throw DataError("manifest dim must be positive");
    const std::pair<const char*, size_t> arrays[] = {{"ids", ids.size()},
                                                     {"identities", identities.size()},
                                                     {"cameras", cameras.size()},
                                                     {"splits", splits.size()}};
    for (const auto& [name, n] : arrays) {
      if (n != count) {
        throw DataError(std::string("manifest array \"") + name + "\" has " + std::to_string(n) +
                        " entries but count is " + std::to_string(count) +
                        at_record(std::min(n, count)));
      }
    }
    records.resize(count);
    for (size_t i = 0; i < count; ++i) {
      records[i] = {ids[i], identities[i], cameras[i], split_from_string(splits[i])};
    }
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  if (feature_path.is_relative()) feature_path = manifest_path.parent_path() / feature_path;

  std::ifstream bin(feature_path, std::ios::binary);
  if (!bin) throw DataError("cannot open feature file " + feature_path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  const size_t row_bytes = static_cast<size_t>(dim) * sizeof(float);
  const size_t expected = count * row_bytes;
  if (bytes.size() < expected) {
    throw DataError("truncated feature payload: " + std::to_string(bytes.size()) + " bytes, " +
                    std::to_string(expected) + " expected" + at_record(bytes.size() / row_bytes));
  }
  if (bytes.size() > expected) {
    throw DataError("feature payload has " + std::to_string(bytes.size() - expected) +
                    " trailing bytes; manifest dim or count disagrees" + at_record(count));
  }
  std::vector<float> values(count * static_cast<size_t>(dim));
  if (!values.empty()) std::memcpy(values.data(), bytes.data(), expected);
  to_little_endian(values);  // symmetric: swaps back on big-endian hosts

  Matrix features(static_cast<Eigen::Index>(count), dim);
  for (size_t r = 0; r < count; ++r) {
    for (int c = 0; c < dim; ++c) features(static_cast<Eigen::Index>(r), c) = values[r * dim + c];
  }
  return EmbeddingStore(std::move(records), features, normalized);
}

void write(const EmbeddingStore& store, const std::filesystem::path& manifest_path) {
  auto feature_name = manifest_path.stem().string() + ".f32";
  auto feature_path = manifest_path.parent_path() / feature_name;

  std::vector<float> values(store.storage().begin(), store.storage().end());
  to_little_endian(values);
  {
    std::ofstream bin(feature_path, std::ios::binary | std::ios::trunc);
    if (!bin) throw DataError("cannot write feature file " + feature_path.string());
    bin.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  }

  json m;
  m["count"] = store.size();
  m["dim"] = store.dim();
  std::vector<int64_t> ids, identities, cameras;
  std::vector<std::string> splits;
  for (const auto& r : store.records()) {
    ids.push_back(r.id);
    identities.push_back(r.identity);
    cameras.push_back(r.camera);
    splits.push_back(to_string(r.split));
  }
  m["ids"] = ids;
  m["identities"] = identities;
  m["cameras"] = cameras;
  m["splits"] = splits;
  m["normalized"] = store.normalized();
  m["feature_file"] = feature_name;
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + manifest_path.string());
  out << m.dump(1) << '\n';
}

EmbeddingStore synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const int d = cfg.dim;
  Rng centroid_rng(sub_seed(cfg.seed, "centroids"));
  Rng camera_rng(sub_seed(cfg.seed, "cameras"));
  Rng noise_rng(sub_seed(cfg.seed, "noise"));

  auto random_unit = [d](Rng& rng) {
    Vector v(d);
    do {
      for (int i = 0; i < d; ++i) v[i] = rng.normal();
    } while (v.norm() == 0.0);
    return Vector(v / v.norm());
  };

  std::vector<Vector> centroids;
  for (int i = 0; i < cfg.identities; ++i) centroids.push_back(random_unit(centroid_rng));
  std::vector<Vector> directions{random_unit(camera_rng)};
  while (static_cast<int>(directions.size()) < cfg.cameras) {
    const Vector& prev = directions.back();
    Vector turn;
    do {
      turn = random_unit(camera_rng);
      turn -= turn.dot(prev) * prev;
    } while (turn.norm() < 1e-6);
    turn.normalize();
    directions.push_back(std::cos(cfg.camera_angle) * prev + std::sin(cfg.camera_angle) * turn);
  }

  const int train_ids = static_cast<int>(std::floor(cfg.train_fraction * cfg.identities));
  const size_t total = static_cast<size_t>(cfg.identities) * cfg.cameras * cfg.per_camera;
  std::vector<EmbeddingRecord> records;
  records.reserve(total);
  Matrix features(static_cast<Eigen::Index>(total), d);
  int64_t next_id = 0;
  for (int ident = 0; ident < cfg.identities; ++ident) {
    const Vector& centroid = centroids[ident];
    for (int cam = 0; cam < cfg.cameras; ++cam) {
      Vector offset = directions[cam] - directions[cam].dot(centroid) * centroid;
      const double len = offset.norm();
      offset = len > 1e-12 ? Vector(offset * (cfg.camera_offset / len)) : Vector::Zero(d);
      for (int s = 0; s < cfg.per_camera; ++s) {
        Vector v = centroid + offset;
        for (int i = 0; i < d; ++i) v[i] += cfg.sigma * noise_rng.normal();
        const double n = v.norm();
        if (n == 0.0) throw NumericError("synthetic sample collapsed to zero");
        features.row(next_id) = (v / n).transpose();

        Split split = Split::Gallery;
        if (ident < train_ids) {
          split = Split::Train;
        } else if (s == 0 && (cfg.per_camera > 1 || cam == ident % cfg.cameras)) {
          split = Split::Probe;
        }
        records.push_back({next_id, ident, cam, split});
        ++next_id;
      }
    }
  }
  return EmbeddingStore(std::move(records), features, true);
}

}  // namespace ctxrank
