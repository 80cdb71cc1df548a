// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include "polyshot/vectorstore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "polyshot/error.hpp"
#include "polyshot/util.hpp"

namespace polyshot {
namespace {

double clamp_unit(double c) { return std::clamp(c, -1.0, 1.0); }

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// dot / sqrt(|u|^2 |v|^2): for u == v this is exactly 1, since
// sqrt(fl(d * d)) == d in IEEE arithmetic.
double cosine_from_parts(double uv, double uu, double vv) { return clamp_unit(uv / std::sqrt(uu * vv)); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

static_assert(std::endian::native == std::endian::little, "vector file reader assumes a little-endian host");

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T read(const char* what) {
    if (pos_ + sizeof(T) > bytes_.size()) truncated(what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) truncated(what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  [[noreturn]] void truncated(const char* what) const {
    throw FormatError("truncated vector file: need " + std::string(what) + " at byte offset " + std::to_string(pos_) +
                      ", file has " + std::to_string(bytes_.size()) + " bytes");
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ValidationError("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()) + ")");
  }
  const double uu = squared_norm(u);
  const double vv = squared_norm(v);
  if (uu == 0.0 || vv == 0.0) throw ValidationError("cosine: zero-norm input");
  return cosine_from_parts(dot(u, v), uu, vv);
}

void EmbeddingMatrix::add(std::string key, std::vector<double> row) {
  if (dim_ == 0) throw ValidationError("embedding matrix dimension must be positive");
  if (row.size() != dim_) {
    throw ValidationError("vector \"" + key + "\" has length " + std::to_string(row.size()) + ", expected " +
                          std::to_string(dim_));
  }
  const double n = squared_norm(row);
  if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("vector \"" + key + "\" has zero or non-finite norm");
  if (index_.contains(key)) throw ValidationError("duplicate vector key \"" + key + "\"");
  index_.emplace(key, keys_.size());
  keys_.push_back(std::move(key));
  data_.insert(data_.end(), row.begin(), row.end());
  sq_norms_.push_back(n);
}

bool EmbeddingMatrix::contains(std::string_view key) const { return index_.contains(std::string(key)); }

std::size_t EmbeddingMatrix::index_of(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) throw LookupError("no embedding for ref \"" + std::string(key) + "\"");
  return it->second;
}

std::span<const double> EmbeddingMatrix::row(std::size_t i) const {
  if (i >= keys_.size()) throw LookupError("embedding row out of range");
  return {data_.data() + i * dim_, dim_};
}

double EmbeddingMatrix::cosine_rows(std::size_t a, std::size_t b) const {
  return cosine_from_parts(dot(row(a), row(b)), sq_norms_[a], sq_norms_[b]);
}

double EmbeddingMatrix::cosine_keys(std::string_view a, std::string_view b) const {
  return cosine_rows(index_of(a), index_of(b));
}

std::vector<std::pair<std::string, double>> EmbeddingMatrix::nearest(std::string_view query_ref,
                                                                     std::span<const std::string> candidate_refs,
                                                                     std::size_t n) const {
  const std::size_t q = index_of(query_ref);
  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(candidate_refs.size());
  for (const auto& c : candidate_refs) scored.emplace_back(c, cosine_rows(q, index_of(c)));
  auto better = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  const std::size_t take = std::min(n, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
  scored.resize(take);
  return scored;
}

EmbeddingMatrix parse_vectors(std::string_view bytes) {
  Reader in(bytes);
  auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kVectorMagic, 4) != 0) throw FormatError("not a vector file (bad magic)");
  const auto version = in.read<std::uint32_t>("version");
  if (version != kVectorVersion) {
    throw FormatError("unsupported vector file version " + std::to_string(version) + " (expected " +
                      std::to_string(kVectorVersion) + ")");
  }
  const auto dim = in.read<std::uint32_t>("dim");
  const auto count = in.read<std::uint64_t>("count");
  if (dim == 0) throw FormatError("vector file declares dim=0");
  EmbeddingMatrix m(dim);
  std::vector<double> row(dim);
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto key_len = in.read<std::uint16_t>("key length");
    std::string key(in.take(key_len, "key bytes"));
    auto payload = in.take(static_cast<std::size_t>(dim) * sizeof(float), "row payload");
    for (std::uint32_t i = 0; i < dim; ++i) {
      float f;
      std::memcpy(&f, payload.data() + i * sizeof(float), sizeof(float));
      row[i] = static_cast<double>(f);
    }
    try {
      m.add(std::move(key), row);
    } catch (const ValidationError& e) {
      throw FormatError(std::string(e.what()) + " (row " + std::to_string(r) + ")");
    }
  }
  if (in.remaining() != 0) {
    throw FormatError("trailing bytes after " + std::to_string(count) + " rows at byte offset " +
                      std::to_string(in.offset()));
  }
  return m;
}

EmbeddingMatrix load_vectors(const std::filesystem::path& path) { return parse_vectors(read_file(path)); }

EmbeddingMatrix load_vectors(std::span<const std::filesystem::path> paths) {
  if (paths.empty()) throw ValidationError("no vector files given");
  if (paths.size() == 1) return load_vectors(paths.front());
  std::vector<EmbeddingMatrix> parts;
  for (const auto& p : paths) parts.push_back(load_vectors(p));
  EmbeddingMatrix merged(parts.front().dim());
  for (const auto& part : parts) {
    if (part.dim() != merged.dim()) throw FormatError("vector files disagree on dimension");
    for (std::size_t i = 0; i < part.rows(); ++i) {
      auto r = part.row(i);
      merged.add(part.key(i), std::vector<double>(r.begin(), r.end()));
    }
  }
  return merged;
}

std::string serialize_vectors(std::size_t dim, std::span<const std::pair<std::string, std::vector<float>>> rows) {
  std::string out(kVectorMagic, 4);
  put<std::uint32_t>(out, kVectorVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  put<std::uint64_t>(out, rows.size());
  for (const auto& [key, v] : rows) {
    if (key.size() > 0xffff) throw ValidationError("vector key too long");
    if (v.size() != dim) throw ValidationError("vector \"" + key + "\" has wrong dimension");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(key.size()));
    out += key;
    for (float f : v) put<float>(out, f);
  }
  return out;
}

void save_vectors(const std::filesystem::path& path, std::size_t dim,
                  std::span<const std::pair<std::string, std::vector<float>>> rows) {
  atomic_write(path, serialize_vectors(dim, rows));
}

}  // namespace polyshot
