"""Adherence smoothing and trend projection."""
from __future__ import annotations

import random
from fractions import Fraction

import pytest

import support
from mcpcare.errors import InsufficientData
from mcpcare.modules.scoring import EngagementHistory, adherence_score, project_trajectory


def _obs(code: str, value, day: int, hour: int = 0) -> dict:
    return {
        "code": code,
        "value": value,
        "unit": "",
        "source": "ehr",
        "timestamp": f"2025-01-{day:02d}T{hour:02d}:00:00Z",
    }


def _doc(observations: list[dict]):
    return support.make_document("MCP-SC-1", [], observations=observations)


def test_empty_history_scores_one_half():
    assert adherence_score(EngagementHistory(0, 0)) == 0.5


def test_smoothing_matches_exact_fraction():
    for a, n in [(0, 1), (1, 1), (3, 7), (9, 10), (10, 10), (250, 1000)]:
        expected = Fraction(a + 1, n + 2)
        assert adherence_score(EngagementHistory(a, n)) == pytest.approx(float(expected), abs=1e-15)


def test_score_stays_inside_open_unit_interval():
    rng = random.Random(6)
    for _ in range(200):
        n = rng.randrange(0, 500)
        a = rng.randrange(0, n + 1)
        score = adherence_score(EngagementHistory(a, n))
        assert 0.0 < score < 1.0


def test_score_monotone_in_adherent_events():
    scores = [adherence_score(EngagementHistory(a, 20)) for a in range(21)]
    assert scores == sorted(scores)


def test_history_bounds_enforced():
    with pytest.raises(ValueError):
        EngagementHistory(5, 4)
    with pytest.raises(ValueError):
        EngagementHistory(-1, 4)
    with pytest.raises(ValueError):
        EngagementHistory(0, -1)


def test_projection_on_exact_line_recovers_it():
    # y = 0.5 * days + 7 sampled at days 0, 2, 5, 9
    doc = _doc([_obs("A1C", 7.0 + 0.5 * d, d + 1) for d in (0, 2, 5, 9)])
    out = project_trajectory(doc, "A1C", 21.0)
    assert out.slope_per_day == pytest.approx(0.5, rel=1e-12)
    assert out.intercept == pytest.approx(7.0, rel=1e-12)
    assert out.projected_value == pytest.approx(7.0 + 0.5 * (9 + 21), rel=1e-12)
    assert out.points_used == 4
    assert out.method_id == "ols-linear/1"


def test_projection_matches_normal_equations_on_noisy_data():
    rng = random.Random(13)
    days = sorted(rng.sample(range(0, 28), 8))
    values = [3.0 + 0.25 * d + rng.uniform(-0.5, 0.5) for d in days]
    doc = _doc([_obs("EGFR", v, d + 1) for d, v in zip(days, values)])
    out = project_trajectory(doc, "EGFR", 14.0)

    xs = [float(d - days[0]) for d in days]
    n = len(xs)
    sx, sy = sum(xs), sum(values)
    sxx = sum(x * x for x in xs)
    sxy = sum(x * y for x, y in zip(xs, values))
    slope = (n * sxy - sx * sy) / (n * sxx - sx * sx)
    intercept = (sy - slope * sx) / n
    assert out.slope_per_day == pytest.approx(slope, rel=1e-9)
    assert out.intercept == pytest.approx(intercept, rel=1e-9)
    assert out.projected_value == pytest.approx(slope * (xs[-1] + 14.0) + intercept, rel=1e-9)


def test_projection_ignores_non_numeric_and_other_codes():
    doc = _doc([
        _obs("A1C", "high", 1),
        _obs("EGFR", 55, 3),
        _obs("A1C", 7.0, 4),
        _obs("A1C", 7.5, 10),
    ])
    out = project_trajectory(doc, "A1C", 7.0)
    assert out.points_used == 2


def test_boolean_observation_values_never_reach_scoring():
    from mcpcare.errors import SchemaViolation

    with pytest.raises(SchemaViolation):
        _doc([_obs("A1C", True, 2)])


def test_projection_needs_two_numeric_points():
    with pytest.raises(InsufficientData):
        project_trajectory(_doc([_obs("A1C", 7.0, 1)]), "A1C", 7.0)
    with pytest.raises(InsufficientData):
        project_trajectory(_doc([]), "A1C", 7.0)


def test_projection_rejects_vertical_line():
    # two observations at the same instant give no x spread
    doc = _doc([_obs("A1C", 7.0, 1), _obs("A1C", 8.0, 1)])
    with pytest.raises(InsufficientData):
        project_trajectory(doc, "A1C", 7.0)


def test_projection_time_axis_uses_observation_order_not_list_order():
    doc = _doc([_obs("A1C", 8.0, 9), _obs("A1C", 7.0, 1)])
    out = project_trajectory(doc, "A1C", 0.0)
    assert out.projected_value == pytest.approx(8.0, rel=1e-12)
