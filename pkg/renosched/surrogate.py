"""
Scenario cost estimators: costliest cached subset and quantile tree ensembles
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum
from typing import Protocol, assert_never

import numpy as np
from numpy.typing import NDArray
from sklearn.ensemble import GradientBoostingRegressor

from .cache import ScenarioCache
from .config import (
    DEFAULT_LEARNING_RATE,
    DEFAULT_MIN_SAMPLES_LEAF,
    DEFAULT_N_TREES,
    DEFAULT_TREE_DEPTH,
    MIN_TRAINING_SAMPLES,
    RETRAIN_THRESHOLD,
)
from .errors import SurrogateError
from .upper import Scenario

logger = logging.getLogger(__name__)

# Binary indicator per project: 1 when the project is active in the scenario
FeatureVector = NDArray[np.float64]


class SurrogateKind(StrEnum):
    """Surrogate choices; quantile kinds are named after their quantile level."""

    HEURISTIC = "heuristic"
    Q05 = "q05"
    Q10 = "q10"
    Q20 = "q20"
    Q50 = "q50"

    @property
    def quantile(self) -> float | None:
        match self:
            case SurrogateKind.HEURISTIC:
                return None
            case SurrogateKind.Q05:
                return 0.05
            case SurrogateKind.Q10:
                return 0.1
            case SurrogateKind.Q20:
                return 0.2
            case SurrogateKind.Q50:
                return 0.5
            case _:
                assert_never(self)

    @property
    def label(self) -> str:
        """Regressor and quantile parts of an algorithm label, e.g. `X|0.05`."""
        q = self.quantile
        return "H|-" if q is None else f"X|{q}"


def scenario_features(scenario: Scenario, n_projects: int) -> FeatureVector:
    features = np.zeros(n_projects, dtype=np.float64)
    features[list(scenario.active)] = 1.0
    return features


def feature_matrix(
    scenarios: Sequence[Scenario], n_projects: int
) -> NDArray[np.float64]:
    matrix = np.zeros((len(scenarios), n_projects), dtype=np.float64)
    for row, scenario in enumerate(scenarios):
        matrix[row, list(scenario.active)] = 1.0
    return matrix


def heuristic_estimate(scenario: Scenario, cache: ScenarioCache) -> float:
    """Largest cached travel time among subsets of the scenario (itself included)."""
    return max(cache.subset_values(scenario), default=cache.base_stt)


def pinball_loss(predicted: float, actual: float, q: float) -> float:
    """Quantile loss; its minimizer over a sample is the q-quantile."""
    if actual >= predicted:
        return q * (actual - predicted)
    return (1.0 - q) * (predicted - actual)


@dataclass(frozen=True)
class TreeHyperparams:
    n_trees: int = DEFAULT_N_TREES
    max_depth: int = DEFAULT_TREE_DEPTH
    learning_rate: float = DEFAULT_LEARNING_RATE
    min_samples_leaf: int = DEFAULT_MIN_SAMPLES_LEAF
    random_state: int = 0


@dataclass(frozen=True, eq=False)
class QuantileModel:
    """Fitted gradient-boosted quantile regressor over scenario indicators."""

    estimator: GradientBoostingRegressor
    quantile: float
    training_size: int
    n_projects: int
    floor: float | None

    def predict_many(self, scenarios: Sequence[Scenario]) -> list[float]:
        if not scenarios:
            return []
        raw = self.estimator.predict(feature_matrix(scenarios, self.n_projects))
        floor = self.floor
        if floor is None:
            return [float(value) for value in raw]
        # the undisturbed network is the floor of every estimate
        return [
            floor if not scenario.active else max(float(value), floor)
            for scenario, value in zip(scenarios, raw, strict=True)
        ]


def fit_quantile_model(
    samples: Sequence[tuple[FeatureVector, float]],
    q: float,
    hyperparams: TreeHyperparams | None = None,
    floor: float | None = None,
) -> QuantileModel:
    """Boosted trees minimizing pinball loss at quantile q."""
    if len(samples) < MIN_TRAINING_SAMPLES:
        msg = f"need at least {MIN_TRAINING_SAMPLES} samples, got {len(samples)}"
        raise SurrogateError(msg)
    targets = np.array([target for _, target in samples], dtype=np.float64)
    if not np.all(np.isfinite(targets)):
        msg = "training targets must be finite"
        raise SurrogateError(msg)

    params = hyperparams or TreeHyperparams()
    estimator = GradientBoostingRegressor(
        loss="quantile",
        alpha=q,
        n_estimators=params.n_trees,
        max_depth=params.max_depth,
        learning_rate=params.learning_rate,
        min_samples_leaf=params.min_samples_leaf,
        random_state=params.random_state,
    )
    estimator.fit(np.vstack([features for features, _ in samples]), targets)
    return QuantileModel(
        estimator=estimator,
        quantile=q,
        training_size=len(samples),
        n_projects=len(samples[0][0]),
        floor=floor,
    )


def predict(model: QuantileModel, scenario: Scenario) -> float:
    """Estimated travel time of one scenario, floored at the undisturbed network."""
    return model.predict_many([scenario])[0]


def training_samples(cache: ScenarioCache) -> list[tuple[FeatureVector, float]]:
    return [
        (scenario_features(scenario, cache.n_projects), stt)
        for scenario, stt in cache.items()
    ]


class Surrogate(Protocol):
    label: str

    def estimate(self, scenarios: Sequence[Scenario]) -> list[float]: ...

    def refresh(self) -> None: ...


class HeuristicSurrogate:
    """Costliest cached subset of each scenario."""

    label = "H|-"

    def __init__(self, cache: ScenarioCache) -> None:
        self.cache = cache

    def estimate(self, scenarios: Sequence[Scenario]) -> list[float]:
        return [heuristic_estimate(s, self.cache) for s in scenarios]

    def refresh(self) -> None:
        pass


class QuantileSurrogate:
    """Quantile model refitted from the cache; the heuristic stands in until then."""

    def __init__(
        self,
        cache: ScenarioCache,
        quantile: float,
        hyperparams: TreeHyperparams | None = None,
        retrain_threshold: int = RETRAIN_THRESHOLD,
    ) -> None:
        self.cache = cache
        self.quantile = quantile
        self.hyperparams = hyperparams or TreeHyperparams()
        self.retrain_threshold = retrain_threshold
        self.model: QuantileModel | None = None
        self.fits = 0
        self._memo: dict[Scenario, float] = {}
        self.label = f"X|{quantile}"

    def refresh(self) -> None:
        size = len(self.cache)
        model = self.model
        if model is not None and size - model.training_size < self.retrain_threshold:
            return
        try:
            model = fit_quantile_model(
                training_samples(self.cache),
                self.quantile,
                self.hyperparams,
                floor=self.cache.base_stt,
            )
        except SurrogateError as e:
            logger.debug("Quantile model not fitted yet: %s", e)
            return
        self.model = model
        self.fits += 1
        self._memo.clear()
        logger.info(
            "🌲 Refitted q=%.2f surrogate on %d scenarios", self.quantile, size
        )

    def estimate(self, scenarios: Sequence[Scenario]) -> list[float]:
        if self.model is None:
            return [heuristic_estimate(s, self.cache) for s in scenarios]
        missing = [s for s in dict.fromkeys(scenarios) if s not in self._memo]
        for scenario, value in zip(
            missing, self.model.predict_many(missing), strict=True
        ):
            self._memo[scenario] = value
        return [self._memo[s] for s in scenarios]


def build_surrogate(
    kind: SurrogateKind,
    cache: ScenarioCache,
    hyperparams: TreeHyperparams | None = None,
) -> Surrogate:
    quantile = kind.quantile
    if quantile is None:
        return HeuristicSurrogate(cache)
    return QuantileSurrogate(cache, quantile, hyperparams)
