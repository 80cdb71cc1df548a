// Copyright 2026 The Polyshot Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace polyshot {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a schema or a domain invariant (bad record, bad weights).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// On-disk payload is corrupt or does not follow the expected layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A lookup key (record id, embedding ref, language code) is unknown.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Run configuration is invalid. Raised before any model call.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Backend cannot do what was asked (e.g. no logprob support).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Prompt exceeds the model's context window. Never retried.
class ContextLengthError : public Error {
 public:
  using Error::Error;
};

/// Network failure or non-2xx response that survived all retries.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int status = 0) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace polyshot
