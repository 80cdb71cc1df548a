// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "polyshot/error.hpp"
#include "polyshot/langfeatures.hpp"

using namespace polyshot;

namespace {

const LanguageRegistry& shipped() {
  static const LanguageRegistry r = LanguageRegistry::load(std::string(POLYSHOT_DATA_DIR) + "/lang_registry.json");
  return r;
}

const TrigramDetector& detector() {
  static const TrigramDetector d = TrigramDetector::load(std::string(POLYSHOT_DATA_DIR) + "/langid_training.json");
  return d;
}

LanguageVector lv(std::string code, std::vector<double> f, std::vector<bool> missing = {}) {
  if (missing.empty()) missing.assign(f.size(), false);
  return {std::move(code), std::move(f), std::move(missing)};
}

}  // namespace

TEST(Registry, ShipsSixteenLanguages) {
  const auto codes = shipped().codes();
  EXPECT_EQ(codes.size(), 16u);
  for (const char* c : {"en", "zh", "fr", "de", "ja", "nl", "pt", "ru", "ar", "bn", "fi", "id", "sw", "ko", "te", "th"}) {
    EXPECT_TRUE(codes.contains(c)) << c;
  }
}

TEST(Registry, SelfAndSymmetry) {
  const auto codes = shipped().codes();
  for (const auto& a : codes) {
    EXPECT_EQ(linguistic_score(a, a, shipped()), 1.0) << a;
    for (const auto& b : codes) {
      EXPECT_EQ(shipped().score(a, b), shipped().score(b, a));
      EXPECT_LE(std::abs(shipped().score(a, b)), 1.0);
    }
  }
}

TEST(Registry, RelatedLanguagesCloser) {
  EXPECT_GT(linguistic_score("en", "de", shipped()), linguistic_score("en", "ja", shipped()));
  EXPECT_GT(linguistic_score("en", "nl", shipped()), linguistic_score("en", "ja", shipped()));
}

TEST(Registry, UnknownLanguage) { EXPECT_THROW(linguistic_score("en", "xx", shipped()), LookupError); }

TEST(MaskedCosine, IgnoresDimensionsMissingInEither) {
  const auto a = lv("a", {1, 2, 100, 3}, {false, false, true, false});
  const auto b = lv("b", {2, 1, -50, 2}, {false, false, false, false});
  const auto a2 = lv("a", {1, 2, 0, 3}, {false, false, true, false});
  // oracle over dims {0,1,3}: dot = 2+2+6 = 10, |a| = sqrt(14), |b| = 3
  EXPECT_NEAR(masked_cosine(a, b), 10.0 / (std::sqrt(14.0) * 3.0), 1e-15);
  EXPECT_EQ(masked_cosine(a, b), masked_cosine(a2, b));
  EXPECT_EQ(masked_cosine(a, b), masked_cosine(b, a));
}

TEST(MaskedCosine, NoSharedDimension) {
  const auto a = lv("a", {1, 0}, {false, true});
  const auto b = lv("b", {0, 1}, {true, false});
  EXPECT_THROW(masked_cosine(a, b), ValidationError);
}

TEST(Registry, ParseSmall) {
  const auto r = LanguageRegistry::parse(R"({
    "feature_sets": [{"name": "toy", "offset": 0, "size": 3}],
    "dimension": 3,
    "languages": {"aa": {"features": [1, 0, 1], "missing": []},
                  "bb": {"features": [1, 1, 0], "missing": [2]}}})");
  EXPECT_EQ(r.dimension(), 3u);
  EXPECT_NEAR(r.score("aa", "bb"), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Detector, LabelWins) {
  EXPECT_EQ(detect_language("The quick brown fox jumps", detector(), std::string("ja"), shipped()), "ja");
}

TEST(Detector, BundledEnglish) {
  EXPECT_EQ(detect_language("The quick brown fox jumps", detector(), std::nullopt, shipped()), "en");
  const auto d = detector().classify("The quick brown fox jumps");
  EXPECT_GE(d.confidence, 0.0);
  EXPECT_LE(d.confidence, 1.0);
}

TEST(Detector, ScriptsSeparate) {
  EXPECT_EQ(detector().classify("これは日本語の文章です").code, "ja");
  EXPECT_EQ(detector().classify("Это предложение на русском языке").code, "ru");
  EXPECT_EQ(detector().classify("이것은 한국어 문장입니다").code, "ko");
}

TEST(Detector, EmptyRejected) { EXPECT_THROW(detect_language("", detector(), std::nullopt, shipped()), ValidationError); }

TEST(Detector, UnregisteredResult) {
  const TrigramDetector only_xx(std::map<std::string, std::vector<std::string>>{{"xx", {"some text in a made up language"}}});
  EXPECT_THROW(detect_language("some text", only_xx, std::nullopt, shipped()), LookupError);
}
