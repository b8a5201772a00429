"""Dependency planning over the live portion of a task plan."""
from __future__ import annotations

import heapq
from dataclasses import dataclass

from mcpcare.document.model import McpDocument, TERMINAL_STATES
from mcpcare.errors import CyclicDependency


@dataclass(frozen=True)
class TaskGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]  # (dependency, dependant)
    order: tuple[str, ...]


def plan(doc: McpDocument) -> TaskGraph:
    """Topologically order every non-terminal task; ids break ties.

    Terminal dependencies never appear as nodes: a completed dependency is
    simply satisfied, while failed/rejected/fallback_activated ones leave the
    dependant permanently unready (the engine checks readiness separately).
    """
    live = [t for t in doc.task_plan if t.state not in TERMINAL_STATES]
    node_ids = {t.id for t in live}
    edges: list[tuple[str, str]] = []
    dependants: dict[str, list[str]] = {tid: [] for tid in node_ids}
    indegree: dict[str, int] = {tid: 0 for tid in node_ids}
    for task in live:
        for dep in task.depends_on:
            if dep in node_ids:
                edges.append((dep, task.id))
                dependants[dep].append(task.id)
                indegree[task.id] += 1

    heap = [tid for tid, deg in indegree.items() if deg == 0]
    heapq.heapify(heap)
    order: list[str] = []
    while heap:
        tid = heapq.heappop(heap)
        order.append(tid)
        for child in dependants[tid]:
            indegree[child] -= 1
            if indegree[child] == 0:
                heapq.heappush(heap, child)
    if len(order) != len(node_ids):
        stuck = sorted(tid for tid, deg in indegree.items() if deg > 0)
        raise CyclicDependency(f"cycle among {', '.join(stuck)}")
    return TaskGraph(
        nodes=tuple(sorted(node_ids)),
        edges=tuple(sorted(edges)),
        order=tuple(order),
    )
