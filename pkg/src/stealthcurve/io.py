"""CSV/JSON readers and writers shared by the command-line tool.

CSV files carry a header row, use ',' as delimiter and 17 significant digits,
so values round-trip exactly through the loaders below.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .spectra import FrequencyGrid, SpectrumSamples


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, columns) -> None:
    """Write equal-length ``columns`` under ``header``."""
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_json(path, payload) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_csv_columns(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty CSV file") from None
        rows = [r for r in reader if r]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: rows have {data.shape[1]} columns, header has {len(header)}")
    return {name: data[:, i] for i, name in enumerate(header)}


def write_spectrum_csv(path, S: SpectrumSamples, name: str = "value") -> None:
    write_csv(path, ["omega", name], [S.omega, S.values])


def read_spectrum_csv(path, column: str = "value", grid_n: int | None = None) -> SpectrumSamples:
    """Load a tabulated spectrum (an ``omega`` column plus ``column``) written on a uniform grid."""
    cols = read_csv_columns(path)
    if "omega" not in cols or column not in cols:
        raise ValueError(f"{path}: needs columns 'omega' and '{column}', found {sorted(cols)}")
    values = cols[column]
    grid = FrequencyGrid(values.size)
    if grid_n is not None and grid.n != grid_n:
        raise ValueError(f"{path}: spectrum has {grid.n} samples but the grid has {grid_n}")
    if not np.allclose(cols["omega"], grid.omega, rtol=0.0, atol=1e-9):
        raise ValueError(f"{path}: omega column is not the uniform grid 2*pi*j/{grid.n}")
    return SpectrumSamples(grid, values)


def write_series_csv(path, series) -> None:
    series = np.asarray(series, dtype=float)
    write_csv(path, ["k", "n_k"], [np.arange(series.size), series])


def read_series_csv(path) -> np.ndarray:
    cols = read_csv_columns(path)
    if "n_k" not in cols:
        raise ValueError(f"{path}: needs a 'n_k' column")
    return cols["n_k"]
