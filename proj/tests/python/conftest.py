# Copyright 2026 The Polyshot Authors
# SPDX-License-Identifier: Apache-2.0

import os
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return Path(os.environ.get("POLYSHOT_DATA_DIR", ROOT / "data"))


@pytest.fixture(scope="session")
def fixture_dir() -> Path:
    return ROOT / "tests" / "fixtures"


@pytest.fixture(scope="session")
def registry(data_dir) -> Path:
    return data_dir / "lang_registry.json"
