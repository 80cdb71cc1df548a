// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace polyshot {

/// Cosine similarity in double precision, clamped to [-1, 1].
/// Throws ValidationError on dimension mismatch or a zero-norm input.
double cosine(std::span<const double> u, std::span<const double> v);

/// Dense sentence embeddings keyed by embedding ref.
///
/// Rows are kept in double precision regardless of the on-disk f32 storage,
/// together with their precomputed squared norms.
class EmbeddingMatrix {
 public:
  explicit EmbeddingMatrix(std::size_t dim = 0) : dim_(dim) {}

  /// Throws ValidationError on wrong length, zero norm or duplicate key.
  void add(std::string key, std::vector<double> row);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return keys_.size(); }
  bool contains(std::string_view key) const;

  /// Row index of key; throws LookupError when absent.
  std::size_t index_of(std::string_view key) const;
  std::span<const double> row(std::size_t i) const;
  std::span<const double> row(std::string_view key) const { return row(index_of(key)); }
  const std::string& key(std::size_t i) const { return keys_.at(i); }
  const std::vector<std::string>& keys() const noexcept { return keys_; }

  /// Cosine between two stored rows, using cached norms.
  double cosine_rows(std::size_t a, std::size_t b) const;
  double cosine_keys(std::string_view a, std::string_view b) const;

  /// The n candidates most similar to query_ref, by cosine descending and
  /// ref ascending on ties. n larger than the candidate list returns all.
  std::vector<std::pair<std::string, double>> nearest(std::string_view query_ref,
                                                      std::span<const std::string> candidate_refs,
                                                      std::size_t n) const;

 private:
  std::size_t dim_;
  std::vector<std::string> keys_;
  std::vector<double> data_;
  std::vector<double> sq_norms_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Binary vector file, little-endian:
///   "BMFV" | u32 version=1 | u32 dim | u64 count |
///   count x ( u16 key_len | key bytes | dim x f32 )
inline constexpr char kVectorMagic[4] = {'B', 'M', 'F', 'V'};
inline constexpr std::uint32_t kVectorVersion = 1;

EmbeddingMatrix load_vectors(const std::filesystem::path& path);
EmbeddingMatrix parse_vectors(std::string_view bytes);

/// Merges several vector files; keys must be unique across all of them.
EmbeddingMatrix load_vectors(std::span<const std::filesystem::path> paths);

/// Encodes rows as f32. Used by tests and fixtures; the production writer is
/// the offline extraction toolkit.
std::string serialize_vectors(std::size_t dim, std::span<const std::pair<std::string, std::vector<float>>> rows);
void save_vectors(const std::filesystem::path& path, std::size_t dim,
                  std::span<const std::pair<std::string, std::vector<float>>> rows);

}  // namespace polyshot
