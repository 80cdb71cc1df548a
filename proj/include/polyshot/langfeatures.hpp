// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace polyshot {

/// Typological feature vector of one language with a missing-value mask.
struct LanguageVector {
  std::string language;
  std::vector<double> features;
  std::vector<bool> missing;  // same length as features

  std::size_t present_count() const noexcept;
};

struct FeatureSet {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Cosine over the dimensions present in both vectors, clamped to [-1, 1].
/// Throws ValidationError when no dimension is shared or either masked
/// vector has zero norm.
double masked_cosine(const LanguageVector& a, const LanguageVector& b);

/// Language code -> typological vector, with all pairwise alignment scores
/// precomputed at construction. Immutable afterwards.
class LanguageRegistry {
 public:
  LanguageRegistry() = default;
  LanguageRegistry(std::vector<FeatureSet> feature_sets, std::vector<LanguageVector> vectors);

  /// Registry file: {"feature_sets": [{name, offset, size}], "dimension": N,
  ///                 "languages": {code: {"features": [...], "missing": [idx...]}}}
  static LanguageRegistry load(const std::filesystem::path& path);
  static LanguageRegistry parse(std::string_view json_text);

  bool contains(std::string_view code) const;
  const LanguageVector& vector(std::string_view code) const;
  std::set<std::string> codes() const;
  std::size_t dimension() const noexcept { return dimension_; }
  const std::vector<FeatureSet>& feature_sets() const noexcept { return feature_sets_; }

  /// Alignment score between two registered languages. Throws LookupError
  /// for unknown codes and ValidationError when no dimension is shared.
  double score(std::string_view a, std::string_view b) const;

 private:
  std::size_t slot(std::string_view code) const;

  std::vector<FeatureSet> feature_sets_;
  std::size_t dimension_ = 0;
  std::vector<LanguageVector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::optional<double>> pair_scores_;  // row-major, n x n
};

double linguistic_score(std::string_view l1, std::string_view l2, const LanguageRegistry& registry);

struct Detection {
  std::string code;
  double confidence = 0.0;  // in [0, 1]
};

/// Pluggable language identifier.
class LanguageDetector {
 public:
  virtual ~LanguageDetector() = default;
  virtual std::string name() const = 0;
  virtual Detection classify(std::string_view text) const = 0;
};

/// Character-trigram centroid classifier. Each language's centroid is the
/// L2-normalized trigram count vector of its training sentences; a text is
/// assigned to the centroid with highest cosine.
class TrigramDetector final : public LanguageDetector {
 public:
  explicit TrigramDetector(const std::map<std::string, std::vector<std::string>>& training);

  /// Training table: {"<code>": ["sentence", ...], ...}
  static TrigramDetector load(const std::filesystem::path& path);
  static TrigramDetector parse(std::string_view json_text);

  std::string name() const override { return "trigram-centroid"; }
  Detection classify(std::string_view text) const override;
  std::set<std::string> languages() const;

 private:
  using Profile = std::unordered_map<std::u32string, double>;
  static Profile profile_of(std::string_view text);

  std::vector<std::pair<std::string, Profile>> centroids_;  // sorted by code
};

/// Dataset label wins when present; otherwise the detector decides.
/// Throws ValidationError on empty text, LookupError when the result is not
/// a registered language.
std::string detect_language(std::string_view text, const LanguageDetector& detector,
                            const std::optional<std::string>& fallback_label, const LanguageRegistry& registry);

}  // namespace polyshot
