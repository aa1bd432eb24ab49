import math

import numpy as np
import pytest
from scipy.stats import qmc

from renosched.cache import ScenarioCache
from renosched.errors import DataError
from renosched.metrics import (
    NormalizationBounds,
    compute_metrics,
    hypervolume2d,
    max_spread,
    min_dist_to_origin,
    normalize,
    pareto_filter,
    pilot_bounds,
)
from renosched.simulation import ScenarioSimulator
from tests.factories import make_crowded_instance, make_roadwork_instance

UNIT_REF = (1.0, 1.0)


def random_front(
    rng: np.random.Generator, size: int, high: float = 1.0
) -> list[tuple[float, float]]:
    xs = np.sort(rng.uniform(0.0, high, size=size))
    ys = np.sort(rng.uniform(0.0, high, size=size))[::-1]
    return [(float(x), float(y)) for x, y in zip(xs, ys, strict=True)]


def monte_carlo_area(
    front: list[tuple[float, float]], rng: np.random.Generator, log2_samples: int
) -> float:
    """Scrambled Sobol estimate of the dominated share of the unit square."""
    sampler = qmc.Sobol(d=2, scramble=True, seed=int(rng.integers(2**31)))
    points = sampler.random_base2(m=log2_samples)
    dominated = np.zeros(len(points), dtype=bool)
    for x, y in front:
        dominated |= (points[:, 0] >= x) & (points[:, 1] >= y)
    return float(dominated.mean())


def test_hypervolume_single_point() -> None:
    assert hypervolume2d([(0.0, 0.0)], UNIT_REF) == pytest.approx(1.0)


def test_hypervolume_three_points() -> None:
    front = [(0.2, 0.8), (0.5, 0.5), (0.8, 0.2)]

    assert hypervolume2d(front, UNIT_REF) == pytest.approx(0.37)


def test_hypervolume_ignores_points_outside_reference() -> None:
    assert hypervolume2d([(1.0, 0.5)], UNIT_REF) == 0.0
    assert hypervolume2d([], UNIT_REF) == 0.0
    assert hypervolume2d([(0.5, 0.5), (1.2, 0.0)], UNIT_REF) == pytest.approx(0.25)


def test_hypervolume_default_reference() -> None:
    assert hypervolume2d([(0.0, 0.0)]) == pytest.approx(1.21)


def test_hypervolume_is_order_invariant_and_monotone() -> None:
    front = [(0.1, 0.9), (0.4, 0.4), (0.9, 0.1)]
    base = hypervolume2d(front, UNIT_REF)

    assert hypervolume2d(front[::-1], UNIT_REF) == pytest.approx(base)
    assert hypervolume2d([*front, (0.3, 0.6)], UNIT_REF) >= base


def test_hypervolume_matches_monte_carlo() -> None:
    rng = np.random.default_rng(21)
    for _ in range(50):
        front = random_front(rng, int(rng.integers(1, 8)), high=0.7)
        estimate = monte_carlo_area(front, rng, 20)
        assert hypervolume2d(front, UNIT_REF) == pytest.approx(estimate, rel=5e-3)


@pytest.mark.parametrize(
    ("front", "expected"),
    [
        ([(0.3, 0.3)], 0.0),
        ([(0.0, 1.0), (1.0, 0.0)], math.sqrt(2)),
        ([(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)], math.sqrt(2)),
    ],
)
def test_max_spread(front: list[tuple[float, float]], expected: float) -> None:
    assert max_spread(front) == pytest.approx(expected)


@pytest.mark.parametrize(
    ("front", "expected"),
    [
        ([(0.0, 0.0), (0.5, 0.5)], 0.0),
        ([(0.6, 0.8)], 1.0),
        ([(0.6, 0.8), (0.3, 0.4)], 0.5),
        ([], math.inf),
    ],
)
def test_min_dist_to_origin(front: list[tuple[float, float]], expected: float) -> None:
    assert min_dist_to_origin(front) == pytest.approx(expected)


def test_normalize_maps_bounds_and_flags_clamps() -> None:
    bounds = NormalizationBounds(100.0, 300.0, 10.0, 20.0)

    normalized = normalize(
        [(100.0, 10.0), (300.0, 20.0), (200.0, 15.0), (400.0, 5.0)], bounds
    )

    assert normalized.points == [(0.0, 0.0), (1.0, 1.0), (0.5, 0.5), (1.0, 0.0)]
    assert normalized.clamped == [False, False, False, True]


def test_bounds_must_not_be_degenerate() -> None:
    with pytest.raises(DataError, match="degenerate"):
        NormalizationBounds(1.0, 1.0, 0.0, 1.0)


def test_bounds_from_dict() -> None:
    bounds = NormalizationBounds(0.0, 10.0, 0.0, 2.0)

    assert NormalizationBounds.from_dict(bounds.to_dict()) == bounds
    with pytest.raises(DataError, match="invalid normalization bounds"):
        NormalizationBounds.from_dict({"ttd_lo": 0.0})


def test_pareto_filter() -> None:
    points = [(3.0, 1.0), (1.0, 3.0), (2.0, 2.0), (2.0, 2.0), (3.0, 3.0), (1.0, 4.0)]

    assert pareto_filter(points) == [(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]


def test_compute_metrics() -> None:
    bounds = NormalizationBounds(0.0, 10.0, 0.0, 10.0)

    snapshot = compute_metrics([(2.0, 8.0), (5.0, 5.0), (8.0, 2.0), (9.0, 9.0)], bounds)

    assert snapshot.pf_size == 3
    assert snapshot.hypervolume == pytest.approx(
        hypervolume2d([(0.2, 0.8), (0.5, 0.5), (0.8, 0.2)])
    )
    assert snapshot.max_spread == pytest.approx(math.dist((0.2, 0.8), (0.8, 0.2)))
    assert snapshot.min_dist == pytest.approx(math.hypot(0.5, 0.5))


def test_compute_metrics_of_empty_front() -> None:
    snapshot = compute_metrics([], NormalizationBounds(0.0, 1.0, 0.0, 1.0))

    assert snapshot.to_dict() == {
        "hypervolume": 0.0,
        "min_dist": math.inf,
        "max_spread": 0.0,
        "pf_size": 0,
    }


def test_pilot_bounds_use_latest_schedule() -> None:
    instance = make_roadwork_instance(n_projects=2)
    simulator = ScenarioSimulator(instance, ScenarioCache(instance.n_projects))

    bounds = pilot_bounds(simulator)

    assert bounds.ttd_lo == 0.0
    assert bounds.ttd_hi > 0.0
    assert bounds.r_hi == instance.max_risk
    assert simulator.simulations >= 2


def test_pilot_bounds_when_latest_starts_collide() -> None:
    instance = make_crowded_instance()
    simulator = ScenarioSimulator(instance, ScenarioCache(instance.n_projects))

    bounds = pilot_bounds(simulator)

    assert math.isfinite(bounds.ttd_hi)
    assert bounds.ttd_hi > 0.0
    assert bounds.r_hi == instance.max_risk
