import csv
import json
from dataclasses import replace
from pathlib import Path

import pytest

from renosched.__main__ import run_command
from renosched.archive import RunArchive
from renosched.errors import ExitCode
from renosched.instgen import save_instance
from renosched.upper import Instance
from tests.factories import (
    TWO_ROUTE_NET,
    TWO_ROUTE_TRIPS,
    make_crowded_instance,
    make_roadwork_instance,
)


def write_instance(instance: Instance, directory: Path) -> Path:
    net_file = directory / "net.tntp"
    trips_file = directory / "trips.tntp"
    net_file.write_text(TWO_ROUTE_NET, encoding="utf-8")
    trips_file.write_text(TWO_ROUTE_TRIPS, encoding="utf-8")
    target = directory / "instance.json"
    assert save_instance(
        replace(instance, source={"net": str(net_file), "trips": str(trips_file)}),
        target,
    )
    return target


@pytest.fixture
def instance_file(tmp_path: Path) -> Path:
    return write_instance(make_roadwork_instance(n_projects=3), tmp_path)


def optimize(instance_file: Path, archive: Path, *extra: str) -> int:
    return run_command(
        [
            "optimize",
            "--instance",
            str(instance_file),
            "--archive",
            str(archive),
            "--population",
            "6",
            *extra,
        ]
    )


def test_optimize_writes_a_complete_archive(
    instance_file: Path, tmp_path: Path
) -> None:
    archive = RunArchive(tmp_path / "runs" / "le")

    code = optimize(
        instance_file,
        archive.directory,
        "--evaluator",
        "plbe",
        "--variant",
        "le",
        "--budget",
        "iters=3",
        "--trace",
    )

    assert code == ExitCode.OK
    for path in [
        archive.config_path,
        archive.instance_path,
        archive.history_path,
        archive.front_path,
        archive.cache_path,
        archive.trace_path,
        archive.plots_dir / "hypervolume.svg",
    ]:
        assert path.exists(), path
    history = archive.read_history()
    assert [r.generation for r in history] == [0, 1, 2, 3]
    assert history[-1].pf_size == len(set(archive.read_front()))
    config = archive.read_config()
    assert config.label == "LE|H|-"
    assert config.bounds is not None


def test_optimize_when_latest_starts_collide(tmp_path: Path) -> None:
    instance_file = write_instance(make_crowded_instance(), tmp_path)
    archive = RunArchive(tmp_path / "crowded")

    code = optimize(instance_file, archive.directory, "--budget", "iters=2")

    assert code == ExitCode.OK
    assert archive.read_config().bounds is not None
    assert len(archive.read_history()) == 3


def test_zero_iterations_record_the_initial_population(
    instance_file: Path, tmp_path: Path
) -> None:
    archive = RunArchive(tmp_path / "run")

    assert optimize(instance_file, archive.directory, "--budget", "iters=0") == 0

    assert [r.generation for r in archive.read_history()] == [0]


def test_fixed_seed_reproduces_the_front(instance_file: Path, tmp_path: Path) -> None:
    first = RunArchive(tmp_path / "first")
    second = RunArchive(tmp_path / "second")
    args = ["--evaluator", "plbe", "--variant", "ep", "--seed", "4"]
    args += ["--budget", "iters=4"]

    assert optimize(instance_file, first.directory, *args) == 0
    assert optimize(instance_file, second.directory, *args) == 0

    assert first.front_path.read_bytes() == second.front_path.read_bytes()
    assert first.cache_path.read_bytes() == second.cache_path.read_bytes()


def test_metrics_and_plot_read_archives(
    instance_file: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]
) -> None:
    standard = tmp_path / "standard"
    plbe = tmp_path / "plbe"
    assert optimize(instance_file, standard, "--budget", "iters=2") == 0
    assert (
        optimize(instance_file, plbe, "--evaluator", "plbe", "--budget", "iters=2")
        == 0
    )
    capsys.readouterr()

    code = run_command(
        ["metrics", "--archive", str(standard), str(plbe), "--format", "json"]
    )
    rows = json.loads(capsys.readouterr().out)
    plot_code = run_command(
        ["plot", "--archive", str(standard), str(plbe), "-o", str(tmp_path / "cmp")]
    )

    assert code == ExitCode.OK
    assert [row["algorithm"] for row in rows] == ["S|-|-", "EP|H|-"]
    assert all(row["generations"] == 2 for row in rows)
    assert plot_code == ExitCode.OK
    assert (tmp_path / "cmp" / "unique_sims.svg").exists()


def test_metrics_of_missing_archive(tmp_path: Path) -> None:
    assert run_command(["metrics", "--archive", str(tmp_path)]) == ExitCode.DATA


def test_experiment_summarizes_every_run(instance_file: Path, tmp_path: Path) -> None:
    output = tmp_path / "experiment"

    code = run_command(
        [
            "experiment",
            "--instance",
            str(instance_file),
            "--algorithms",
            "S|-|-,LE|H|-",
            "--seeds",
            "2",
            "--population",
            "4",
            "--budget",
            "iters=1",
            "--output",
            str(output),
        ]
    )

    assert code == ExitCode.OK
    with (output / "summary.csv").open(encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    assert [(r["algorithm"], r["seed"]) for r in rows] == [
        ("S|-|-", "0"),
        ("S|-|-", "1"),
        ("LE|H|-", "0"),
        ("LE|H|-", "1"),
    ]
    bounds = [
        RunArchive(output / slug / "seed-0").read_config().bounds
        for slug in ("S_x_x", "LE_H_x")
    ]
    assert bounds[0] is not None
    assert bounds[0] == bounds[1]
