// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace polyshot::text {

/// Unicode NFC normalization of a UTF-8 string. Throws ValidationError on
/// malformed UTF-8.
std::string nfc(std::string_view utf8);

/// Full Unicode case folding (locale independent).
std::string casefold(std::string_view utf8);

/// Strips leading and trailing Unicode whitespace.
std::string trim(std::string_view utf8);

/// Replaces every run of Unicode whitespace with a single ASCII space.
std::string collapse_whitespace(std::string_view utf8);

/// nfc -> trim -> casefold -> collapse_whitespace. The grading normal form.
std::string normalize_for_match(std::string_view utf8);

/// Splits on ASCII/Unicode whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view utf8);

/// Decodes UTF-8 into code points. Malformed sequences map to U+FFFD.
std::u32string to_u32(std::string_view utf8);
std::string to_utf8(std::u32string_view cps);

bool starts_with(std::string_view s, std::string_view prefix);

}  // namespace polyshot::text
