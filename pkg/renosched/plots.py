"""
SVG line charts of run histories
"""

import logging
import math
from collections.abc import Sequence
from pathlib import Path

import matplotlib as mpl

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evolve import HISTORY_FIELDS, GenerationRecord  # noqa: E402

logger = logging.getLogger(__name__)

PLOTTED_FIELDS = tuple(f for f in HISTORY_FIELDS if f != "generation")


def plot_history(
    histories: dict[str, Sequence[GenerationRecord]], plots_dir: Path
) -> list[Path]:
    """One SVG per history column against generation, one line per run label."""
    written: list[Path] = []
    for column in PLOTTED_FIELDS:
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        try:
            for label, records in histories.items():
                xs = [r.generation for r in records]
                ys = [float(getattr(r, column)) for r in records]
                finite = [y if math.isfinite(y) else math.nan for y in ys]
                ax.plot(xs, finite, label=label)
            ax.set_xlabel("generation")
            ax.set_ylabel(column)
            ax.grid(visible=True, alpha=0.3)
            if len(histories) > 1:
                ax.legend()
            target = plots_dir / f"{column}.svg"
            plots_dir.mkdir(parents=True, exist_ok=True)
            fig.savefig(target, format="svg")
        except OSError as e:
            logger.warning("⚠️  Warning: Could not write plot %s: %s", column, e)
            continue
        finally:
            plt.close(fig)
        written.append(target)
    logger.info("📈 Wrote %d plots to %s", len(written), plots_dir)
    return written
