"""
Traffic simulation of scenarios, cached per distinct set of active projects
"""

import logging
import threading
import time
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .cache import ScenarioCache
from .config import DEFAULT_TAP_MAX_ITERS, DEFAULT_TAP_TOLERANCE
from .network import apply_scenario
from .tap import TapResult, solve_ue
from .upper import EMPTY_SCENARIO, Instance, Scenario, scenario_edits

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TapSettings:
    tol: float = DEFAULT_TAP_TOLERANCE
    max_iters: int = DEFAULT_TAP_MAX_ITERS


class ScenarioSimulator:
    """Solves the traffic assignment of scenarios and records them in a cache."""

    def __init__(
        self,
        instance: Instance,
        cache: ScenarioCache,
        settings: TapSettings | None = None,
        workers: int = 1,
    ) -> None:
        self.instance = instance
        self.cache = cache
        self.settings = settings or TapSettings()
        self.workers = max(1, workers)
        self.simulations = 0
        self.seconds = 0.0
        self._lock = threading.Lock()

    def solve(self, scenario: Scenario) -> TapResult:
        edits = scenario_edits(self.instance, scenario)
        view = apply_scenario(self.instance.graph, edits)
        return solve_ue(
            view, self.instance.demand, self.settings.tol, self.settings.max_iters
        )

    def _timed_stt(self, scenario: Scenario) -> float:
        started = time.perf_counter()
        result = self.solve(scenario)
        elapsed = time.perf_counter() - started
        with self._lock:
            self.seconds += elapsed
        logger.debug(
            "🚦 Simulated %s: stt=%.1f gap=%.2e iterations=%d",
            scenario.bits(self.instance.n_projects),
            result.system_travel_time,
            result.relative_gap,
            result.iterations,
        )
        return result.system_travel_time

    def _record(self, scenario: Scenario, stt: float) -> bool:
        inserted = self.cache.insert(scenario, stt)
        if inserted:
            with self._lock:
                self.simulations += 1
        return inserted

    def simulate(self, scenario: Scenario) -> tuple[float, bool]:
        """System travel time of the scenario and whether it was newly simulated."""
        cached = self.cache.get(scenario)
        if cached is not None:
            return cached, False
        stt = self._timed_stt(scenario)
        return stt, self._record(scenario, stt)

    def ensure_base(self) -> float:
        stt, _ = self.simulate(EMPTY_SCENARIO)
        return stt

    def simulate_many(self, scenarios: Iterable[Scenario]) -> list[Scenario]:
        """Simulate all uncached scenarios; returns those newly inserted, in order."""
        n_projects = self.instance.n_projects
        pending = sorted(
            {s for s in scenarios if s not in self.cache},
            key=lambda s: (len(s), s.bits(n_projects)),
        )
        if not pending:
            return []
        if self.workers == 1 or len(pending) == 1:
            values = [self._timed_stt(s) for s in pending]
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                values = list(pool.map(self._timed_stt, pending))
        return [
            s for s, stt in zip(pending, values, strict=True) if self._record(s, stt)
        ]
