// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "polyshot/error.hpp"
#include "polyshot/vectorstore.hpp"

using namespace polyshot;

namespace {

using Rows = std::vector<std::pair<std::string, std::vector<float>>>;

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Cosine, SpecExamples) {
  const std::vector<double> a{0.3, 0.4};
  EXPECT_EQ(cosine(a, a), 1.0);
  EXPECT_EQ(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  // oracle: dot = 2 + 2 + 4 = 8, |u| = |v| = 3
  EXPECT_NEAR(cosine(std::vector<double>{1, 2, 2}, std::vector<double>{2, 1, 2}), 8.0 / 9.0, 1e-15);
}

TEST(Cosine, Errors) {
  EXPECT_THROW(cosine(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), ValidationError);
  EXPECT_THROW(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 2}), ValidationError);
}

TEST(Matrix, RejectsBadRows) {
  EmbeddingMatrix m(2);
  m.add("a", {1, 0});
  EXPECT_THROW(m.add("b", {1, 0, 0}), ValidationError);
  EXPECT_THROW(m.add("c", {0, 0}), ValidationError);
  EXPECT_THROW(m.add("a", {0, 1}), ValidationError);
  EXPECT_THROW(m.index_of("zz"), LookupError);
}

TEST(VectorFile, HeaderEcho) {
  const Rows rows = {{"a", {1, 2, 3, 4}}, {"b", {0, 1, 0, 1}}};
  const auto m = parse_vectors(serialize_vectors(4, rows));
  EXPECT_EQ(m.dim(), 4u);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.row("b")[3], 1.0);
}

TEST(VectorFile, LayoutIsLittleEndianBmfv) {
  const Rows rows = {{"k", {1.0f}}};
  const auto bytes = serialize_vectors(1, rows);
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 8 + 2 + 1 + 4);
  EXPECT_EQ(bytes.substr(0, 4), "BMFV");
  EXPECT_EQ(bytes[4], 1);   // version
  EXPECT_EQ(bytes[8], 1);   // dim
  EXPECT_EQ(bytes[12], 1);  // count
  EXPECT_EQ(bytes[20], 1);  // key length
  EXPECT_EQ(bytes[22], 'k');
  // 1.0f = 0x3f800000
  EXPECT_EQ(static_cast<unsigned char>(bytes[26]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[25]), 0x80);
}

TEST(VectorFile, TruncationNamesOffset) {
  const Rows rows = {{"a", {1, 2, 3, 4}}, {"b", {0, 1, 0, 1}}};
  auto bytes = serialize_vectors(4, rows);
  bytes.resize(bytes.size() - 3);
  const auto msg = error_of([&] { parse_vectors(bytes); });
  EXPECT_NE(msg.find("offset"), std::string::npos) << msg;
  EXPECT_THROW(parse_vectors(bytes), FormatError);
}

TEST(VectorFile, DuplicateKey) {
  const Rows rows = {{"q-7", {1, 2}}, {"q-7", {2, 1}}};
  const auto msg = error_of([&] { parse_vectors(serialize_vectors(2, rows)); });
  EXPECT_NE(msg.find("q-7"), std::string::npos);
}

TEST(VectorFile, BadMagicAndVersion) {
  const Rows rows = {{"a", {1}}};
  auto bytes = serialize_vectors(1, rows);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(parse_vectors(bad), FormatError);
  bad = bytes;
  bad[4] = 2;
  EXPECT_THROW(parse_vectors(bad), FormatError);
  EXPECT_THROW(parse_vectors(bytes + "x"), FormatError);
}

TEST(Nearest, SelfFirstAndPermutation) {
  EmbeddingMatrix m(3);
  m.add("q", {1, 1, 0});
  m.add("a", {1, 1, 0});
  m.add("b", {1, 0, 0});
  m.add("c", {0, 0, 1});
  m.add("d", {0, 1, 1});
  m.add("e", {-1, 0, 0});
  const std::vector<std::string> cands{"e", "d", "c", "b", "a"};
  const auto top = m.nearest("q", cands, 5);
  ASSERT_EQ(top.size(), 5u);
  EXPECT_EQ(top[0].first, "a");
  EXPECT_EQ(top[0].second, 1.0);
  EXPECT_THROW(m.nearest("zz", cands, 1), LookupError);
}

TEST(Nearest, MatchesExhaustiveScan) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  EmbeddingMatrix m(16);
  std::vector<std::string> keys;
  for (int i = 0; i < 51; ++i) {
    std::vector<double> v(16);
    for (auto& x : v) x = g(rng);
    const std::string key = "v" + std::to_string(i);
    m.add(key, std::move(v));
    if (i > 0) keys.push_back(key);
  }
  // oracle: score every candidate with the free function and fully sort
  std::vector<std::pair<std::string, double>> oracle;
  for (const auto& k : keys) oracle.emplace_back(k, cosine(m.row("v0"), m.row(k)));
  std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  oracle.resize(10);
  const auto got = m.nearest("v0", keys, 10);
  ASSERT_EQ(got.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(got[i].first, oracle[i].first);
    EXPECT_NEAR(got[i].second, oracle[i].second, 1e-15);
  }
}

TEST(CosineProperties, SymmetryScaleBound) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> lam(1e-3, 1e3);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> u(8), v(8);
    for (auto& x : u) x = g(rng);
    for (auto& x : v) x = g(rng);
    const double c = cosine(u, v);
    EXPECT_EQ(c, cosine(v, u));
    EXPECT_LE(std::abs(c), 1.0);
    EXPECT_EQ(cosine(u, u), 1.0);
    auto su = u;
    const double l = lam(rng);
    for (auto& x : su) x *= l;
    EXPECT_NEAR(cosine(su, v), c, 1e-9);
  }
}
