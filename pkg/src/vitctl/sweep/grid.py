"""Train every (heads, encoders) grid point and slice the results.

Each grid point gets its own seed derived from (grid seed, h, t), so adding points
never changes existing runs and parallel execution reproduces the serial output.
"""

from __future__ import annotations

import logging
import platform
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np
import scipy

from vitctl import __version__
from vitctl.capacity.ratio import q_ratio
from vitctl.data.loader import load_dataset
from vitctl.exceptions import SweepError
from vitctl.models import (
    CrossSection,
    ImageDataset,
    SectionAxis,
    SweepGrid,
    SweepRecord,
    TrendCheck,
)
from vitctl.sweep.datafile import (
    emit_data_file,
    write_failures,
    write_manifest,
    write_records,
)
from vitctl.train.loop import evaluate, train
from vitctl.vit.counting import count_params
from vitctl.vit.model import build

logger = logging.getLogger(__name__)

SECTION_AT = 4

_SECTION_TAG = {SectionAxis.HEADS: "h", SectionAxis.ENCODERS: "t"}


def config_seed(grid_seed: int, heads: int, encoders: int) -> int:
    return int(np.random.SeedSequence([grid_seed, heads, encoders]).generate_state(1)[0])


def metrics_path(directory: Path, heads: int, encoders: int) -> Path:
    return directory / f"h{heads}_t{encoders}.log"


def _run_config(
    grid: SweepGrid,
    heads: int,
    encoders: int,
    train_set: ImageDataset,
    test_set: ImageDataset,
    metrics_dir: Path | None,
) -> SweepRecord:
    config = grid.base.with_grid_point(heads, encoders)
    params = count_params(config).total
    m, k = config.classes, len(train_set)
    seed = config_seed(grid.seed, heads, encoders)
    record = SweepRecord(
        heads=heads,
        encoders=encoders,
        params=params,
        m=m,
        k=k,
        q=float(q_ratio(m, k, params)),
        seed=seed,
    )

    log_path = None
    if metrics_dir is not None:
        log_path = metrics_path(metrics_dir, heads, encoders)
        log_path.unlink(missing_ok=True)
    try:
        model = build(config, seed=seed, precision=grid.train.precision)
        cfg = grid.train.model_copy(update={"seed": seed})
        history = train(model, train_set, test_set, cfg, metrics_log=log_path)
        if history:
            first, last = history[0].train_loss, history[-1]
            train_loss, test_loss = last.train_loss, last.test_loss
        else:
            first = None
            train_loss = evaluate(model, train_set, cfg.batch_size)
            test_loss = evaluate(model, test_set, cfg.batch_size)
    except Exception as e:
        logger.warning("Config h=%d t=%d failed: %s: %s", heads, encoders, type(e).__name__, e)
        return record.model_copy(update={"error": str(e) or type(e).__name__})

    logger.info(
        "h=%d t=%d P=%d Q=%.4g: loss %.4f val_loss %.4f",
        heads,
        encoders,
        params,
        record.q,
        train_loss,
        test_loss,
    )
    return record.model_copy(
        update={"train_loss": train_loss, "test_loss": test_loss, "first_train_loss": first}
    )


def _run_task(task: tuple[Any, ...]) -> SweepRecord:
    return _run_config(*task)


def run_sweep(
    grid: SweepGrid,
    datasets: tuple[ImageDataset, ImageDataset] | None = None,
    metrics_dir: str | Path | None = None,
) -> list[SweepRecord]:
    """One record per grid point, ordered by (encoders, heads)."""
    train_set, test_set = datasets if datasets is not None else load_dataset(grid.dataset)
    base = grid.base
    if (train_set.image_size, train_set.channels) != (base.image_size, base.channels):
        raise SweepError(
            f"dataset images are {train_set.channels}x{train_set.image_size}x"
            f"{train_set.image_size}, "
            f"grid base expects {base.channels}x{base.image_size}x{base.image_size}"
        )
    if base.classes != train_set.class_count:
        logger.info("Setting output count to the dataset's %d classes", train_set.class_count)
        grid = grid.model_copy(
            update={"base": base.model_copy(update={"classes": train_set.class_count})}
        )

    out_dir = Path(metrics_dir) if metrics_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (grid, h, t, train_set, test_set, out_dir) for t in grid.encoders for h in grid.heads
    ]
    logger.info("Sweeping %d configurations with %d worker(s)", len(tasks), grid.workers)
    if grid.workers > 1:
        with ProcessPoolExecutor(max_workers=grid.workers) as pool:
            records = list(pool.map(_run_task, tasks))
    else:
        records = [_run_task(task) for task in tasks]
    return sorted(records, key=lambda r: (r.encoders, r.heads))


def cross_section(
    records: list[SweepRecord], axis: SectionAxis, fixed: int = SECTION_AT
) -> CrossSection:
    """Records whose ``axis`` coordinate equals ``fixed``, Q-ascending."""
    attr = "heads" if axis == SectionAxis.HEADS else "encoders"
    picked = [r for r in records if getattr(r, attr) == fixed]
    if not picked:
        raise SweepError(f"no records with {attr}={fixed}")
    return CrossSection(axis=axis, fixed=fixed, records=sorted(picked, key=lambda r: r.q_exact))


def section_value(
    records: list[SweepRecord], axis: SectionAxis, preferred: int = SECTION_AT
) -> int:
    """``preferred`` when the grid has it, else the largest value on that axis."""
    attr = "heads" if axis == SectionAxis.HEADS else "encoders"
    values = sorted({getattr(r, attr) for r in records})
    if not values:
        raise SweepError("no records to take a cross-section of")
    return preferred if preferred in values else values[-1]


def _find(records: list[SweepRecord], heads: int, encoders: int) -> SweepRecord | None:
    for r in records:
        if r.heads == heads and r.encoders == encoders and r.ok:
            return r
    return None


def trend_report(records: list[SweepRecord]) -> list[TrendCheck]:
    """Expected-trend checks; violations are logged, never raised."""
    checks = []
    deep, shallow = _find(records, 4, 4), _find(records, 4, 1)
    if deep is None or shallow is None:
        checks.append(
            TrendCheck(name="h4_t4_beats_h4_t1", passed=None, detail="grid lacks (4,4) or (4,1)")
        )
    else:
        checks.append(
            TrendCheck(
                name="h4_t4_beats_h4_t1",
                passed=deep.train_loss < shallow.train_loss,  # type: ignore[operator]
                detail=f"loss {deep.train_loss:.4f} vs {shallow.train_loss:.4f}",
            )
        )

    for r in records:
        name = f"loss_decreases_h{r.heads}_t{r.encoders}"
        if not r.ok or r.first_train_loss is None:
            checks.append(TrendCheck(name=name, passed=None, detail=r.error or "no epochs trained"))
            continue
        checks.append(
            TrendCheck(
                name=name,
                passed=r.train_loss < r.first_train_loss,  # type: ignore[operator]
                detail=f"epoch 1 {r.first_train_loss:.4f} -> final {r.train_loss:.4f}",
            )
        )

    for check in checks:
        if check.passed is False:
            logger.warning("Trend check %s not met: %s", check.name, check.detail)
    return checks


def data_file_name(name: str, axis: SectionAxis, fixed: int) -> str:
    """``<name>_t4.data`` holds encoders at 4, ``<name>_h4.data`` holds heads at 4."""
    return f"{name}_{_SECTION_TAG[axis]}{fixed}.data"


def emit_sections(records: list[SweepRecord], out_dir: str | Path, name: str) -> list[Path]:
    """Write both cross-section data files; sections without successful runs are skipped."""
    written = []
    for axis in (SectionAxis.ENCODERS, SectionAxis.HEADS):
        fixed = section_value(records, axis)
        section = cross_section(records, axis, fixed)
        if not any(r.ok for r in section.records):
            logger.warning("Cross-section %s=%d has no successful runs; skipped", axis.value, fixed)
            continue
        written.append(emit_data_file(section, Path(out_dir) / data_file_name(name, axis, fixed)))
    return written


def build_manifest(grid: SweepGrid, records: list[SweepRecord]) -> dict[str, Any]:
    return {
        "grid": grid.model_dump(mode="json"),
        "seeds": {f"h{r.heads}_t{r.encoders}": r.seed for r in records},
        "versions": {
            "vitctl": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


def write_sweep_outputs(
    grid: SweepGrid, records: list[SweepRecord], out_dir: str | Path
) -> list[Path]:
    """records.json, manifest.yaml, failures.log and the cross-section data files."""
    out = Path(out_dir)
    written = [
        write_records(records, out / "records.json"),
        write_manifest(build_manifest(grid, records), out / "manifest.yaml"),
    ]
    failures = write_failures(records, out / "failures.log")
    if failures is not None:
        written.append(failures)
    written.extend(emit_sections(records, out, grid.name))
    return written
