"""
Scenario cache: simulated system travel times with insert-once semantics
"""

import csv
import logging
import threading
from collections.abc import Iterator
from pathlib import Path

from .errors import DataError
from .upper import EMPTY_SCENARIO, Scenario

logger = logging.getLogger(__name__)

CACHE_FIELDS = ("bitstring", "stt")


class ScenarioCache:
    """Map from scenario to simulated system travel time (vehicle-minutes)."""

    def __init__(self, n_projects: int) -> None:
        self.n_projects = n_projects
        self._entries: dict[Scenario, float] = {}
        self._masks: list[tuple[int, float]] = []
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, scenario: object) -> bool:
        return scenario in self._entries

    def get(self, scenario: Scenario) -> float | None:
        return self._entries.get(scenario)

    def insert(self, scenario: Scenario, stt: float) -> bool:
        """Store a simulated value; returns False if the scenario was already known."""
        with self._lock:
            if scenario in self._entries:
                return False
            self._entries[scenario] = stt
            self._masks.append((scenario.mask, stt))
            return True

    @property
    def base_stt(self) -> float:
        stt = self._entries.get(EMPTY_SCENARIO)
        if stt is None:
            msg = "scenario cache has no entry for the undisturbed network"
            raise DataError(msg)
        return stt

    def items(self) -> list[tuple[Scenario, float]]:
        """Snapshot of all entries in insertion order."""
        with self._lock:
            return list(self._entries.items())

    def subset_values(self, scenario: Scenario) -> Iterator[float]:
        """Values of every cached scenario contained in the given one."""
        query = scenario.mask
        with self._lock:
            masks = list(self._masks)
        return (stt for mask, stt in masks if mask & ~query == 0)


def load_cache(cache_file: Path, n_projects: int) -> ScenarioCache:
    """Load a cache from `bitstring,stt` CSV rows; missing file gives an empty cache."""
    cache = ScenarioCache(n_projects)
    if not cache_file.exists():
        return cache

    try:
        with cache_file.open("r", encoding="utf-8", newline="") as f:
            for row in csv.DictReader(f):
                bits = row["bitstring"]
                if len(bits) != n_projects:
                    msg = f"bitstring of length {len(bits)} for {n_projects} projects"
                    raise ValueError(msg)
                cache.insert(Scenario.from_bits(bits), float(row["stt"]))
    except (OSError, KeyError, ValueError) as e:
        logger.warning("⚠️  Warning: Could not load cache %s: %s", cache_file, e)
        return ScenarioCache(n_projects)

    logger.info("📥 Loaded %d cached scenarios from %s", len(cache), cache_file)
    return cache


def save_cache(cache: ScenarioCache, cache_file: Path) -> bool:
    """Write the cache as CSV, ordered by cardinality then bitstring."""
    rows = sorted(
        ((s.bits(cache.n_projects), stt) for s, stt in cache.items()),
        key=lambda row: (row[0].count("1"), row[0]),
    )
    try:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        with cache_file.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CACHE_FIELDS)
            writer.writerows((bits, repr(stt)) for bits, stt in rows)
    except OSError as e:
        logger.warning("⚠️  Warning: Could not save cache to %s: %s", cache_file, e)
        return False
    else:
        return True
