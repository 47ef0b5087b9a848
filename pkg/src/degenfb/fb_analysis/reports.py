"""CSV rows plus JSON summary for analysis reports."""
from __future__ import annotations

from pathlib import Path

from ..io import write_csv, write_json


def write_report(name: str, rows: list[dict], summary: dict, out_dir) -> list[Path]:
    """Write ``<name>.csv`` (one row per scale or level) and ``<name>.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if rows:
        paths.append(write_csv(rows, out / f"{name}.csv"))
    paths.append(write_json(dict(sorted(summary.items())), out / f"{name}.json"))
    return paths
