"""Reasoning modules: pluggable generative and descriptive analyzers.

Generative modules propose hypotheses and tasks; descriptive modules render
verdicts over proposals. Both are registered under stable ids so every
reasoning entry in a document names its author.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from mcpcare.errors import DuplicateModuleId

MODULE_KINDS = ("generative", "descriptive")


@dataclass(frozen=True)
class ModuleDescriptor:
    module_id: str
    kind: str
    version: str

    def __post_init__(self) -> None:
        if self.kind not in MODULE_KINDS:
            raise ValueError(f"unknown module kind {self.kind!r}")


class ReasoningModule(Protocol):
    descriptor: ModuleDescriptor


class ModuleRegistry:
    def __init__(self) -> None:
        self._modules: dict[str, ReasoningModule] = {}

    def register(self, module: ReasoningModule) -> None:
        module_id = module.descriptor.module_id
        if module_id in self._modules:
            raise DuplicateModuleId(module_id)
        self._modules[module_id] = module

    def get(self, module_id: str) -> ReasoningModule:
        if module_id not in self._modules:
            raise KeyError(module_id)
        return self._modules[module_id]

    def descriptors(self) -> list[ModuleDescriptor]:
        return sorted((m.descriptor for m in self._modules.values()), key=lambda d: d.module_id)

    def generative(self) -> list[ReasoningModule]:
        return self._of_kind("generative")

    def descriptive(self) -> list[ReasoningModule]:
        return self._of_kind("descriptive")

    def _of_kind(self, kind: str) -> list[ReasoningModule]:
        chosen = [m for m in self._modules.values() if m.descriptor.kind == kind]
        return sorted(chosen, key=lambda m: m.descriptor.module_id)
