from __future__ import annotations

from pathlib import Path

import pytest

from crossdoc.config import RuntimeConfig, build_providers
from crossdoc.ingest import parse_document

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = FIXTURES / "golden"

GOLDEN_PAPER = GOLDEN / "paper01.html"
GOLDEN_CONFIG = GOLDEN / "config.json"
GOLDEN_BUNDLE = GOLDEN / "paper01.bundle.json"
GOLDEN_AUG = GOLDEN / "paper01.aug.html"
GOLDEN_BASE = GOLDEN / "paper01.base.html"
DISTANCE_MAP = FIXTURES / "distance_map.json"


@pytest.fixture(scope="session")
def golden_doc():
    return parse_document(GOLDEN_PAPER.read_bytes())


@pytest.fixture(scope="session")
def golden_config():
    return RuntimeConfig.from_file(GOLDEN_CONFIG)


@pytest.fixture()
def golden_providers(golden_config):
    return build_providers(golden_config)


@pytest.fixture(scope="session")
def golden_bundle_bytes():
    return GOLDEN_BUNDLE.read_bytes()
