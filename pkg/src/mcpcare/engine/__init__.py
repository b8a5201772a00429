"""Task lifecycle engine: planning, gating, dispatch, and verification."""
from mcpcare.engine.core import AdvanceResult, TaskEngine
from mcpcare.engine.graph import TaskGraph, plan
from mcpcare.engine.policy import DEFAULT_HARD_GATE_KINDS, GatePolicy, load_policy
from mcpcare.engine.pipeline import Orchestrator

__all__ = [
    "AdvanceResult",
    "DEFAULT_HARD_GATE_KINDS",
    "GatePolicy",
    "Orchestrator",
    "TaskEngine",
    "TaskGraph",
    "load_policy",
    "plan",
]
