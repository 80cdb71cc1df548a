// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace polyshot {

std::string sha256_hex(std::string_view data);

/// 64-bit FNV-1a. Stable across platforms; used to derive per-item seeds.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Incremental arithmetic mean; a constant input reproduces the constant exactly.
double running_mean(std::span<const double> xs);

/// Mixes a run seed with a string key, so per-query randomness does not
/// depend on processing order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key) noexcept;

/// Uniform integer in [0, bound) from a mt19937_64 stream using rejection
/// sampling. std::uniform_int_distribution is implementation-defined, so it
/// is avoided where results must match across standard libraries.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

/// Draws min(n, population) distinct indices of [0, population) with a
/// partial Fisher–Yates shuffle. Output is in draw order.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n, std::uint64_t seed);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions from any
/// worker are rethrown on the calling thread (first one wins).
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

std::size_t default_jobs() noexcept;

/// Writes `data` to a sibling temp file and renames over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view data);

std::string read_file(const std::filesystem::path& path);

}  // namespace polyshot
