"""Packaged runtime fixtures: templates, rules, scenarios, users, config.

Every loader accepts an optional base directory so deployments can override
the packaged defaults with MCP_HOME-local files of the same relative layout.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any

TEMPLATES_FILE = "templates/clinical.tmpl.json"
RULES_FILE = "rules/guidelines.rules.json"
USERS_FILE = "users.json"
POLICY_FILE = "engine.toml"
SCENARIOS_DIR = "scenarios"
SCENARIO_SUFFIX = ".scenario.json"


def read_text(relative: str, base: Path | None = None) -> str:
    if base is not None:
        return (base / relative).read_text(encoding="utf-8")
    node = resources.files(__name__)
    for part in relative.split("/"):
        node = node.joinpath(part)
    return node.read_text(encoding="utf-8")


def load_json(relative: str, base: Path | None = None) -> Any:
    return json.loads(read_text(relative, base))


def scenario_ids(base: Path | None = None) -> list[str]:
    if base is not None:
        root = base / SCENARIOS_DIR
        names = [p.name for p in root.glob(f"*{SCENARIO_SUFFIX}")] if root.is_dir() else []
    else:
        root = resources.files(__name__).joinpath(SCENARIOS_DIR)
        names = [entry.name for entry in root.iterdir() if entry.name.endswith(SCENARIO_SUFFIX)]
    return sorted(name[: -len(SCENARIO_SUFFIX)] for name in names)


def load_scenario(scenario_id: str, base: Path | None = None) -> Any:
    return load_json(f"{SCENARIOS_DIR}/{scenario_id}{SCENARIO_SUFFIX}", base)
