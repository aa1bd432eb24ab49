"""
Quality indicators of normalized two-objective Pareto fronts
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from pymoo.indicators.hv import HV

from .config import REFERENCE_POINT
from .errors import DataError, InfeasibleError
from .simulation import ScenarioSimulator
from .upper import (
    Schedule,
    latest_feasible_schedule,
    repair,
    risk,
    scenarios_of,
    ttd,
)

logger = logging.getLogger(__name__)

Point = tuple[float, float]


@dataclass(frozen=True)
class NormalizationBounds:
    """Objective ranges mapped onto [0, 1]; fixed once per instance."""

    ttd_lo: float
    ttd_hi: float
    r_lo: float
    r_hi: float

    def __post_init__(self) -> None:
        if not (self.ttd_hi > self.ttd_lo and self.r_hi > self.r_lo):
            msg = f"degenerate normalization bounds {self}"
            raise DataError(msg)

    def to_dict(self) -> dict[str, float]:
        return {
            "ttd_lo": self.ttd_lo,
            "ttd_hi": self.ttd_hi,
            "r_lo": self.r_lo,
            "r_hi": self.r_hi,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "NormalizationBounds":
        try:
            return cls(
                float(data["ttd_lo"]),
                float(data["ttd_hi"]),
                float(data["r_lo"]),
                float(data["r_hi"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            msg = f"invalid normalization bounds: {e}"
            raise DataError(msg) from e


@dataclass(frozen=True)
class NormalizedFront:
    points: list[Point]
    clamped: list[bool]


@dataclass(frozen=True)
class FrontSnapshot:
    """Indicator values of one normalized front."""

    hypervolume: float
    min_dist: float
    max_spread: float
    pf_size: int

    def to_dict(self) -> dict[str, float | int]:
        return {
            "hypervolume": self.hypervolume,
            "min_dist": self.min_dist,
            "max_spread": self.max_spread,
            "pf_size": self.pf_size,
        }


def normalize(points: Sequence[Point], bounds: NormalizationBounds) -> NormalizedFront:
    """Scale into [0, 1] per objective; out-of-range values are clamped and flagged."""
    scaled: list[Point] = []
    clamped: list[bool] = []
    for ttd_value, r_value in points:
        x = (ttd_value - bounds.ttd_lo) / (bounds.ttd_hi - bounds.ttd_lo)
        y = (r_value - bounds.r_lo) / (bounds.r_hi - bounds.r_lo)
        cx, cy = min(max(x, 0.0), 1.0), min(max(y, 0.0), 1.0)
        scaled.append((cx, cy))
        clamped.append(cx != x or cy != y)
    if any(clamped):
        logger.debug("Clamped %d points into the normalization box", sum(clamped))
    return NormalizedFront(scaled, clamped)


def pareto_filter(points: Sequence[Point]) -> list[Point]:
    """Distinct non-dominated points sorted by the first objective."""
    front: list[Point] = []
    for point in sorted(set(points)):
        if not front or point[1] < front[-1][1]:
            front.append(point)
    return front


def hypervolume2d(front: Sequence[Point], ref: Point = REFERENCE_POINT) -> float:
    """Area dominated by the front and bounded by the reference point."""
    inside = [p for p in front if p[0] < ref[0] and p[1] < ref[1]]
    if not inside:
        return 0.0
    indicator = HV(ref_point=np.asarray(ref, dtype=np.float64))
    return float(indicator(np.asarray(inside, dtype=np.float64)))


def max_spread(front: Sequence[Point]) -> float:
    """Distance between the best point of each objective."""
    if len(front) < 2:  # noqa: PLR2004
        return 0.0
    best_first = min(front, key=lambda p: (p[0], p[1]))
    best_second = min(front, key=lambda p: (p[1], p[0]))
    return math.dist(best_first, best_second)


def min_dist_to_origin(front: Sequence[Point]) -> float:
    return min((math.hypot(*p) for p in front), default=math.inf)


def compute_metrics(
    points: Sequence[Point], bounds: NormalizationBounds
) -> FrontSnapshot:
    """Indicators of the non-dominated part of raw (TTD, R) points."""
    normalized = pareto_filter(normalize(points, bounds).points)
    return FrontSnapshot(
        hypervolume=hypervolume2d(normalized),
        min_dist=min_dist_to_origin(normalized),
        max_spread=max_spread(normalized),
        pf_size=len(pareto_filter(points)),
    )


def pilot_bounds(simulator: ScenarioSimulator) -> NormalizationBounds:
    """Bounds from the latest-start schedule: TTD in [0, its TTD], R in [0, max]."""
    instance = simulator.instance
    rng = np.random.default_rng(0)
    try:
        schedule = latest_feasible_schedule(instance, rng)
    except InfeasibleError as e:
        logger.warning(
            "⚠️  Warning: latest starts cannot be repaired (%s), pilot starts "
            "every project at period 0",
            e,
        )
        schedule = repair(instance, Schedule((0,) * instance.n_projects), rng)
    simulator.ensure_base()
    simulator.simulate_many(s for s, _ in scenarios_of(instance, schedule))
    pilot_ttd = ttd(instance, schedule, simulator.cache)
    bounds = NormalizationBounds(
        ttd_lo=0.0,
        ttd_hi=pilot_ttd if pilot_ttd > 0 else 1.0,
        r_lo=0.0,
        r_hi=instance.max_risk if instance.max_risk > 0 else 1.0,
    )
    logger.info(
        "📏 Pilot schedule: TTD=%.1f R=%.2f",
        pilot_ttd,
        risk(instance, schedule),
    )
    return bounds
