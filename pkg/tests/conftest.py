from __future__ import annotations

import json
from pathlib import Path

import pytest

import support
from mcpcare.document.model import McpDocument
from mcpcare.gateway.runtime import build_runtime
from mcpcare.modules.guidelines import load_rules

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "mcpcare" / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def rules_tree() -> dict:
    return json.loads((FIXTURES / "rules" / "guidelines.rules.json").read_text("utf-8"))


@pytest.fixture(scope="session")
def rules(rules_tree):
    return load_rules(rules_tree)


def _scenario(name: str) -> dict:
    return json.loads((FIXTURES / "scenarios" / f"{name}.scenario.json").read_text("utf-8"))


@pytest.fixture(scope="session")
def fxs_scenario() -> dict:
    return _scenario("fxs-013")


@pytest.fixture(scope="session")
def chronic_scenario() -> dict:
    return _scenario("chronic-225")


@pytest.fixture()
def fxs_document(fxs_scenario) -> McpDocument:
    return McpDocument.from_tree(fxs_scenario["document"])


@pytest.fixture()
def chronic_document(chronic_scenario) -> McpDocument:
    return McpDocument.from_tree(chronic_scenario["document"])


@pytest.fixture()
def clock():
    return support.fixed_clock()


@pytest.fixture()
def runtime(clock):
    return build_runtime(clock=clock)
