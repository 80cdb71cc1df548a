// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include "polyshot/langfeatures.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <nlohmann/json.hpp>

#include "polyshot/error.hpp"
#include "polyshot/text.hpp"
#include "polyshot/util.hpp"

namespace polyshot {

using json = nlohmann::json;

std::size_t LanguageVector::present_count() const noexcept {
  return static_cast<std::size_t>(std::count(missing.begin(), missing.end(), false));
}

double masked_cosine(const LanguageVector& a, const LanguageVector& b) {
  if (a.features.size() != b.features.size()) {
    throw ValidationError("language vectors " + a.language + " and " + b.language + " differ in dimension");
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  std::size_t shared = 0;
  for (std::size_t i = 0; i < a.features.size(); ++i) {
    if (a.missing[i] || b.missing[i]) continue;
    ++shared;
    ab += a.features[i] * b.features[i];
    aa += a.features[i] * a.features[i];
    bb += b.features[i] * b.features[i];
  }
  if (shared == 0) {
    throw ValidationError("languages " + a.language + " and " + b.language + " share no non-missing feature");
  }
  if (aa == 0.0 || bb == 0.0) {
    throw ValidationError("languages " + a.language + " and " + b.language + ": zero norm after masking");
  }
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

LanguageRegistry::LanguageRegistry(std::vector<FeatureSet> feature_sets, std::vector<LanguageVector> vectors)
    : feature_sets_(std::move(feature_sets)), vectors_(std::move(vectors)) {
  std::sort(vectors_.begin(), vectors_.end(),
            [](const LanguageVector& x, const LanguageVector& y) { return x.language < y.language; });
  dimension_ = vectors_.empty() ? 0 : vectors_.front().features.size();
  for (std::size_t i = 0; i < vectors_.size(); ++i) {
    const auto& v = vectors_[i];
    if (v.features.size() != dimension_ || v.missing.size() != dimension_) {
      throw ValidationError("language vector \"" + v.language + "\" has inconsistent dimension");
    }
    if (v.present_count() == 0) throw ValidationError("language vector \"" + v.language + "\" is entirely missing");
    if (!index_.emplace(v.language, i).second) throw ValidationError("duplicate language \"" + v.language + "\"");
  }
  const std::size_t n = vectors_.size();
  pair_scores_.assign(n * n, std::nullopt);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      std::optional<double> s;
      if (i == j) {
        s = 1.0;
      } else {
        try {
          s = masked_cosine(vectors_[i], vectors_[j]);
        } catch (const ValidationError&) {
          // left empty; score() reports it on use
        }
      }
      pair_scores_[i * n + j] = s;
      pair_scores_[j * n + i] = s;
    }
  }
}

LanguageRegistry LanguageRegistry::parse(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("language registry is not valid JSON: ") + e.what());
  }
  std::vector<FeatureSet> sets;
  if (j.contains("feature_sets")) {
    for (const auto& fs : j["feature_sets"]) {
      sets.push_back({fs.value("name", ""), fs.value("offset", std::size_t{0}), fs.value("size", std::size_t{0})});
    }
  }
  const std::size_t declared = j.value("dimension", std::size_t{0});
  if (!j.contains("languages") || !j["languages"].is_object()) throw FormatError("language registry lacks \"languages\"");
  std::vector<LanguageVector> vectors;
  for (auto it = j["languages"].begin(); it != j["languages"].end(); ++it) {
    LanguageVector v;
    v.language = it.key();
    v.features = it.value().at("features").get<std::vector<double>>();
    v.missing.assign(v.features.size(), false);
    if (it.value().contains("missing")) {
      for (std::size_t idx : it.value()["missing"].get<std::vector<std::size_t>>()) {
        if (idx >= v.features.size()) throw FormatError("language \"" + v.language + "\": missing index out of range");
        v.missing[idx] = true;
      }
    }
    if (declared != 0 && v.features.size() != declared) {
      throw FormatError("language \"" + v.language + "\" has " + std::to_string(v.features.size()) +
                        " features, header declares " + std::to_string(declared));
    }
    vectors.push_back(std::move(v));
  }
  return LanguageRegistry(std::move(sets), std::move(vectors));
}

LanguageRegistry LanguageRegistry::load(const std::filesystem::path& path) { return parse(read_file(path)); }

bool LanguageRegistry::contains(std::string_view code) const { return index_.contains(std::string(code)); }

std::size_t LanguageRegistry::slot(std::string_view code) const {
  auto it = index_.find(std::string(code));
  if (it == index_.end()) throw LookupError("unknown language \"" + std::string(code) + "\"");
  return it->second;
}

const LanguageVector& LanguageRegistry::vector(std::string_view code) const { return vectors_[slot(code)]; }

std::set<std::string> LanguageRegistry::codes() const {
  std::set<std::string> out;
  for (const auto& v : vectors_) out.insert(v.language);
  return out;
}

double LanguageRegistry::score(std::string_view a, std::string_view b) const {
  const std::size_t i = slot(a), j = slot(b);
  const auto& s = pair_scores_[i * vectors_.size() + j];
  if (!s) return masked_cosine(vectors_[i], vectors_[j]);  // rethrows the precise reason
  return *s;
}

double linguistic_score(std::string_view l1, std::string_view l2, const LanguageRegistry& registry) {
  return registry.score(l1, l2);
}

TrigramDetector::Profile TrigramDetector::profile_of(std::string_view text) {
  Profile p;
  std::u32string padded = U" ";
  for (char32_t c : text::to_u32(text::collapse_whitespace(text::casefold(text::nfc(text))))) {
    // digits and punctuation carry no language signal
    if (c < 0x80 && !std::isalpha(static_cast<int>(c)) && c != U' ') c = U' ';
    if (c == U' ' && padded.back() == U' ') continue;
    padded.push_back(c);
  }
  if (padded.back() != U' ') padded.push_back(U' ');
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) p[padded.substr(i, 3)] += 1.0;
  return p;
}

TrigramDetector::TrigramDetector(const std::map<std::string, std::vector<std::string>>& training) {
  for (const auto& [code, sentences] : training) {
    Profile centroid;
    for (const auto& s : sentences) {
      for (const auto& [g, c] : profile_of(s)) centroid[g] += c;
    }
    double n = 0.0;
    for (const auto& [g, c] : centroid) n += c * c;
    n = std::sqrt(n);
    if (n == 0.0) throw ValidationError("language \"" + code + "\" has no usable training text");
    for (auto& [g, c] : centroid) c /= n;
    centroids_.emplace_back(code, std::move(centroid));
  }
  if (centroids_.empty()) throw ValidationError("trigram detector needs at least one language");
}

TrigramDetector TrigramDetector::parse(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("detector training table is not valid JSON: ") + e.what());
  }
  return TrigramDetector(j.get<std::map<std::string, std::vector<std::string>>>());
}

TrigramDetector TrigramDetector::load(const std::filesystem::path& path) { return parse(read_file(path)); }

Detection TrigramDetector::classify(std::string_view text) const {
  const Profile p = profile_of(text);
  double pn = 0.0;
  for (const auto& [g, c] : p) pn += c * c;
  pn = std::sqrt(pn);
  Detection best{centroids_.front().first, 0.0};
  if (pn == 0.0) return best;
  for (const auto& [code, centroid] : centroids_) {
    double d = 0.0;
    for (const auto& [g, c] : p) {
      auto it = centroid.find(g);
      if (it != centroid.end()) d += c * it->second;
    }
    const double conf = std::clamp(d / pn, 0.0, 1.0);
    if (conf > best.confidence) best = {code, conf};
  }
  return best;
}

std::set<std::string> TrigramDetector::languages() const {
  std::set<std::string> out;
  for (const auto& [code, _] : centroids_) out.insert(code);
  return out;
}

std::string detect_language(std::string_view text, const LanguageDetector& detector,
                            const std::optional<std::string>& fallback_label, const LanguageRegistry& registry) {
  if (text::trim(text).empty()) throw ValidationError("cannot detect the language of empty text");
  if (fallback_label && !fallback_label->empty()) return *fallback_label;
  const Detection d = detector.classify(text);
  if (!registry.contains(d.code)) {
    throw LookupError("detector \"" + detector.name() + "\" returned unregistered language \"" + d.code + "\"");
  }
  return d.code;
}

}  // namespace polyshot
