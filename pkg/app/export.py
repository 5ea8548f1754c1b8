"""JSON, CSV and Excel writers used by the reports and the CLI."""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from app.errors import BvpError

logger = logging.getLogger(__name__)


def encode_complex(value: Any) -> Any:
    """Complex scalars become [re, im]; arrays become nested row-major lists."""
    arr = np.asarray(value)
    if arr.ndim == 0:
        z = complex(arr)
        return [float(z.real), float(z.imag)]
    return [encode_complex(v) for v in arr]


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def decode_complex(data: Any, ndim: int) -> np.ndarray:
    """Inverse of encode_complex for an array of known rank.

    Leaves at depth ``ndim`` are plain numbers or [re, im] pairs; knowing the
    rank keeps a real 2-vector apart from a single complex number.
    """

    def walk(node: Any, depth: int) -> Any:
        if depth == ndim:
            if _is_number(node):
                return complex(node)
            if isinstance(node, (list, tuple)) and len(node) == 2 and all(_is_number(v) for v in node):
                return complex(node[0], node[1])
            raise ValueError(f"Expected a number or an [re, im] pair, got {node!r}")
        if not isinstance(node, (list, tuple)):
            raise ValueError(f"Expected a nested list of rank {ndim}, got {node!r}")
        return [walk(v, depth + 1) for v in node]

    out = np.array(walk(data, 0), dtype=complex)
    if out.ndim != ndim:
        raise ValueError(f"Ragged array: expected rank {ndim}, got shape {out.shape}")
    return out


def dumps_json(payload: Any) -> str:
    """Stable JSON text: sorted keys, repr-precision floats, trailing newline."""
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(payload: Any, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(payload), encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    logger.info("Wrote %s", path)
    return path


def trajectory_rows(trajectories: Sequence[Any], grid: np.ndarray) -> tuple[list[str], list[list[Any]]]:
    """Header and rows t, Re y_1, Im y_1, ... for vector trajectories on a grid."""
    header = ["t"]
    columns: list[np.ndarray] = []
    for s, traj in enumerate(trajectories):
        values = np.asarray(traj.derivative(grid, 0)).reshape(grid.size, -1)
        prefix = f"y{s}_" if len(trajectories) > 1 else "y_"
        for i in range(values.shape[1]):
            header += [f"Re {prefix}{i + 1}", f"Im {prefix}{i + 1}"]
            columns += [values[:, i].real, values[:, i].imag]
    rows = [[float(t)] + [float(col[idx]) for col in columns] for idx, t in enumerate(grid)]
    return header, rows


def write_xlsx(sheets: dict[str, tuple[Sequence[str], Iterable[Sequence[Any]]]], path: Path) -> Path:
    """One worksheet per entry: {title: (header, rows)}. Needs the ``export`` extra."""
    try:
        from openpyxl import Workbook
    except ImportError as e:
        raise BvpError("Excel export needs openpyxl: pip install 'bvp-fredholm[export]'") from e

    wb = Workbook()
    wb.remove(wb.active)
    for title, (header, rows) in sheets.items():
        ws = wb.create_sheet(title=title[:31])
        ws.append(list(header))
        for row in rows:
            ws.append(list(row))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wb.save(path)
    logger.info("Wrote %s", path)
    return path
