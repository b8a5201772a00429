"""Numeric scoring: engagement-based adherence and trend projection."""
from __future__ import annotations

import statistics
from dataclasses import dataclass

from mcpcare.document.model import McpDocument
from mcpcare.errors import InsufficientData

TRAJECTORY_METHOD = "ols-linear/1"
SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class EngagementHistory:
    adherent_events: int
    total_events: int

    def __post_init__(self) -> None:
        if self.total_events < 0 or not 0 <= self.adherent_events <= self.total_events:
            raise ValueError("adherent_events must lie in [0, total_events]")


def adherence_score(history: EngagementHistory) -> float:
    """Laplace-smoothed adherence probability: (a + 1) / (n + 2).

    The add-one prior keeps empty histories at 0.5 instead of undefined.
    """
    return (history.adherent_events + 1) / (history.total_events + 2)


@dataclass(frozen=True)
class TrajectoryProjection:
    code: str
    horizon_days: float
    slope_per_day: float
    intercept: float
    projected_value: float
    points_used: int
    method_id: str = TRAJECTORY_METHOD


def project_trajectory(doc: McpDocument, code: str, horizon_days: float) -> TrajectoryProjection:
    """Ordinary-least-squares line over numeric observations of one code.

    Time axis is days since the earliest matching observation; the projected
    value sits horizon_days after the latest one.
    """
    points = [
        (o.timestamp, float(o.value))
        for o in doc.observations
        if o.code == code and isinstance(o.value, (int, float)) and not isinstance(o.value, bool)
    ]
    if len(points) < 2:
        raise InsufficientData(f"{code}: {len(points)} numeric observation(s), need 2")
    points.sort(key=lambda p: p[0])
    origin = points[0][0]
    xs = [(ts - origin).total_seconds() / SECONDS_PER_DAY for ts, _ in points]
    ys = [v for _, v in points]
    try:
        slope, intercept = statistics.linear_regression(xs, ys)
    except statistics.StatisticsError as exc:
        raise InsufficientData(f"{code}: {exc}") from None
    target_x = xs[-1] + horizon_days
    return TrajectoryProjection(
        code=code,
        horizon_days=horizon_days,
        slope_per_day=slope,
        intercept=intercept,
        projected_value=slope * target_x + intercept,
        points_used=len(points),
    )
