# Copyright 2026 The Polyshot Authors
# SPDX-License-Identifier: Apache-2.0

"""Multilingual in-context example selection."""

from ._core import (
    CapabilityError,
    ConfigError,
    ContextLengthError,
    Error,
    FormatError,
    LookupError,
    TransportError,
    ValidationError,
    build_prompt,
    compare_results,
    cosine,
    enumerate_simplex,
    exact_match,
    language_score,
    load_pool,
    load_queries,
    mcnemar,
    normalize_weights,
    read_vectors,
    run,
    select,
    validate,
    vector_cosine,
)

__version__ = "0.1.0"

__all__ = [
    "CapabilityError",
    "ConfigError",
    "ContextLengthError",
    "Error",
    "FormatError",
    "LookupError",
    "TransportError",
    "ValidationError",
    "build_prompt",
    "compare_results",
    "cosine",
    "enumerate_simplex",
    "exact_match",
    "language_score",
    "load_pool",
    "load_queries",
    "mcnemar",
    "normalize_weights",
    "read_vectors",
    "run",
    "select",
    "validate",
    "vector_cosine",
]
