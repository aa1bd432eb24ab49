"""
Run archives: config, instance, history, front, cache and trace of one optimization run
"""

import csv
import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .cache import ScenarioCache, save_cache
from .config import DEFAULT_CROSSOVER_RATE, DEFAULT_POPULATION_SIZE
from .errors import DataError
from .evolve import HISTORY_FIELDS, GenerationRecord, Individual
from .instgen import save_instance
from .metrics import NormalizationBounds
from .output import csv_text, write_to_file
from .plbe import TRACE_FIELDS, EvaluatorKind, PruningVariant, TraceRow, algorithm_label
from .simulation import TapSettings
from .surrogate import SurrogateKind
from .upper import Instance

logger = logging.getLogger(__name__)

FRONT_FIELDS = ("genotype_hash", "ttd", "risk", "start")


@dataclass
class RunConfig:
    """Everything needed to rerun or re-score an optimization run."""

    instance: str
    evaluator: EvaluatorKind = EvaluatorKind.STANDARD
    variant: PruningVariant = PruningVariant.ELIMINATION
    surrogate: SurrogateKind = SurrogateKind.HEURISTIC
    seed: int = 0
    budget: str = "iters=50"
    population_size: int = DEFAULT_POPULATION_SIZE
    crossover_rate: float = DEFAULT_CROSSOVER_RATE
    mutation_rate: float | None = None
    workers: int = 1
    tap_tol: float = TapSettings.tol
    tap_max_iters: int = TapSettings.max_iters
    trace: bool = False
    bounds: NormalizationBounds | None = None

    @property
    def label(self) -> str:
        return algorithm_label(self.evaluator, self.variant, self.surrogate)

    def to_dict(self) -> dict[str, Any]:
        """Flat key/value form; bounds are inlined as ttd_lo, ttd_hi, r_lo, r_hi."""
        data: dict[str, Any] = {
            f.name: getattr(self, f.name) for f in fields(self) if f.name != "bounds"
        }
        for key in ("evaluator", "variant", "surrogate"):
            data[key] = str(data[key])
        data["label"] = self.label
        if self.bounds is not None:
            data.update(self.bounds.to_dict())
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        try:
            bounds = (
                NormalizationBounds.from_dict(data) if "ttd_hi" in data else None
            )
            mutation_rate = data.get("mutation_rate")
            return cls(
                instance=str(data["instance"]),
                evaluator=EvaluatorKind(data["evaluator"]),
                variant=PruningVariant(data["variant"]),
                surrogate=SurrogateKind(data["surrogate"]),
                seed=int(data["seed"]),
                budget=str(data["budget"]),
                population_size=int(data["population_size"]),
                crossover_rate=float(data["crossover_rate"]),
                mutation_rate=None if mutation_rate is None else float(mutation_rate),
                workers=int(data.get("workers", 1)),
                tap_tol=float(data.get("tap_tol", TapSettings.tol)),
                tap_max_iters=int(data.get("tap_max_iters", TapSettings.max_iters)),
                trace=bool(data.get("trace", False)),
                bounds=bounds,
            )
        except (KeyError, TypeError, ValueError) as e:
            msg = f"invalid run config: {e}"
            raise DataError(msg) from e


def _read_rows(path: Path) -> list[dict[str, str]]:
    try:
        with path.open("r", encoding="utf-8", newline="") as f:
            return list(csv.DictReader(f))
    except OSError as e:
        msg = f"Could not read {path}: {e}"
        raise DataError(msg) from e


@dataclass(frozen=True)
class RunArchive:
    """Directory layout of one run."""

    directory: Path

    @property
    def config_path(self) -> Path:
        return self.directory / "config.json"

    @property
    def instance_path(self) -> Path:
        return self.directory / "instance.json"

    @property
    def history_path(self) -> Path:
        return self.directory / "history.csv"

    @property
    def front_path(self) -> Path:
        return self.directory / "front.csv"

    @property
    def cache_path(self) -> Path:
        return self.directory / "cache.csv"

    @property
    def trace_path(self) -> Path:
        return self.directory / "trace.csv"

    @property
    def plots_dir(self) -> Path:
        return self.directory / "plots"

    def write_config(self, config: RunConfig) -> bool:
        return write_to_file(
            json.dumps(config.to_dict(), indent=2) + "\n", self.config_path
        )

    def read_config(self) -> RunConfig:
        try:
            data = json.loads(self.config_path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            msg = f"Could not read run config {self.config_path}: {e}"
            raise DataError(msg) from e
        return RunConfig.from_dict(data)

    def write_instance(self, instance: Instance) -> bool:
        return save_instance(instance, self.instance_path)

    def write_history(self, records: Sequence[GenerationRecord]) -> bool:
        rows = (
            [getattr(record, name) for name in HISTORY_FIELDS] for record in records
        )
        return write_to_file(csv_text(HISTORY_FIELDS, rows), self.history_path)

    def read_history(self) -> list[GenerationRecord]:
        try:
            return [
                GenerationRecord(
                    generation=int(row["generation"]),
                    hypervolume=float(row["hypervolume"]),
                    min_dist=float(row["min_dist"]),
                    max_spread=float(row["max_spread"]),
                    pf_size=int(row["pf_size"]),
                    unique_sims=int(row["unique_sims"]),
                    wall_seconds=float(row["wall_seconds"]),
                    evaluations=int(row.get("evaluations") or 0),
                    pruned=int(row.get("pruned") or 0),
                )
                for row in _read_rows(self.history_path)
            ]
        except (KeyError, ValueError) as e:
            msg = f"malformed history file {self.history_path}: {e}"
            raise DataError(msg) from e

    def write_front(self, members: Sequence[Individual]) -> bool:
        rows = []
        for member in members:
            if member.objectives is None:
                continue
            ttd_value, risk_value = member.objectives
            genes = " ".join(map(str, member.schedule.start))
            rows.append(
                [member.schedule.genotype_hash, ttd_value, risk_value, genes]
            )
        return write_to_file(csv_text(FRONT_FIELDS, rows), self.front_path)

    def read_front(self) -> list[tuple[float, float]]:
        try:
            return [
                (float(row["ttd"]), float(row["risk"]))
                for row in _read_rows(self.front_path)
            ]
        except (KeyError, ValueError) as e:
            msg = f"malformed front file {self.front_path}: {e}"
            raise DataError(msg) from e

    def write_cache(self, cache: ScenarioCache) -> bool:
        return save_cache(cache, self.cache_path)

    def write_trace(self, rows: Sequence[TraceRow]) -> bool:
        return write_to_file(
            csv_text(TRACE_FIELDS, (row.as_row() for row in rows)), self.trace_path
        )
