"""Whitespace-separated plot tables (``determination loss val_loss``).

One header line of column keys, then one row per point with floats written in
shortest round-trip form (``repr``), which never uses an exponent for values in
[1e-4, 1e16).

Also the sweep side files: ``records.json``, ``manifest.yaml`` and ``failures.log``.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from vitctl.exceptions import SweepError
from vitctl.models import CrossSection, SweepRecord

DATA_COLUMNS = ("determination", "loss", "val_loss")


def format_value(value: float | None) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return repr(float(value))


def format_table(columns: Sequence[str], rows: Sequence[Sequence[float | None]]) -> str:
    lines = [" ".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise SweepError(f"row has {len(row)} values for {len(columns)} columns")
        lines.append(" ".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> tuple[list[str], list[list[float]]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SweepError("empty data table")
    columns = lines[0].split()
    rows = []
    for number, line in enumerate(lines[1:], start=2):
        fields = line.split()
        if len(fields) != len(columns):
            raise SweepError(f"line {number}: expected {len(columns)} values, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError as e:
            raise SweepError(f"line {number}: {e}") from e
    return columns, rows


def section_rows(section: CrossSection) -> list[tuple[float, float, float]]:
    rows = []
    for rec in section.records:
        if not rec.ok:
            continue
        rows.append((rec.q, rec.train_loss, rec.test_loss))
    return sorted(rows, key=lambda r: r[0])  # type: ignore[arg-type,return-value]


def emit_data_file(section: CrossSection, path: str | Path) -> Path:
    """Write a cross-section as a Q-ascending ``determination loss val_loss`` table."""
    rows = section_rows(section)
    if not rows:
        raise SweepError(f"cross-section {section.axis.value}={section.fixed} has no records")
    return _write_text(Path(path), format_table(DATA_COLUMNS, rows))


def read_data_file(path: str | Path) -> list[tuple[float, float, float]]:
    src = Path(path)
    if not src.exists():
        raise SweepError(f"Data file not found: {path}")
    columns, rows = parse_table(src.read_text(encoding="utf-8"))
    if tuple(columns) != DATA_COLUMNS:
        raise SweepError(f"{path}: header {columns} is not {list(DATA_COLUMNS)}")
    return [(r[0], r[1], r[2]) for r in rows]


def _write_text(dest: Path, text: str) -> Path:
    try:
        dest.parent.mkdir(parents=True, exist_ok=True)
        with open(dest, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise SweepError(f"Could not write {dest}: {e}") from e
    return dest


def write_records(records: list[SweepRecord], path: str | Path) -> Path:
    """Full grid, failed configs included, as a JSON array."""
    payload = [r.model_dump(mode="json") for r in records]
    return _write_text(Path(path), json.dumps(payload, indent=2) + "\n")


def read_records(path: str | Path) -> list[SweepRecord]:
    src = Path(path)
    if not src.exists():
        raise SweepError(f"Records file not found: {path}")
    try:
        payload = json.loads(src.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SweepError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(payload, list):
        raise SweepError(f"{path} must hold a JSON array of records")
    try:
        return [SweepRecord.model_validate(item) for item in payload]
    except ValidationError as e:
        raise SweepError(f"{path}: malformed record: {e.errors()[0]['msg']}") from e


def write_manifest(manifest: dict[str, Any], path: str | Path) -> Path:
    text = yaml.safe_dump(manifest, default_flow_style=False, sort_keys=True)
    return _write_text(Path(path), text)


def write_failures(records: list[SweepRecord], path: str | Path) -> Path | None:
    """Sidecar explaining configs left out of the data files; removed when nothing failed."""
    dest = Path(path)
    failed = [r for r in records if not r.ok]
    if not failed:
        dest.unlink(missing_ok=True)
        return None
    lines = [f"h={r.heads} t={r.encoders}: {r.error or 'no losses recorded'}" for r in failed]
    return _write_text(dest, "\n".join(lines) + "\n")
