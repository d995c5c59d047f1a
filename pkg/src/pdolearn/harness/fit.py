"""Log-log slope fits on sweep CSVs."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    points: int


def fit_loglog(x, y):
    """OLS of log2 y on log2 x, after taking the median of y at each x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise FitError("need at least 3 rows")
    if (x <= 0).any() or (y <= 0).any():
        raise FitError("log-log fit needs positive values")
    groups = defaultdict(list)
    for xi, yi in zip(x, y):
        groups[xi].append(yi)
    xs = np.array(sorted(groups))
    if xs.size < 2:
        raise FitError("degenerate x: a single distinct value")
    ys = np.array([np.median(groups[v]) for v in xs])
    lx, ly = np.log2(xs), np.log2(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    spread = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 if spread == 0 else 1.0 - np.sum(resid**2) / spread
    return SlopeFit(float(slope), float(intercept), float(r2), int(xs.size))


def read_columns(path, x_column, y_column, where=None):
    """Numeric (x, y) pairs from a CSV; ``where`` filters rows by exact string match."""
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in (x_column, y_column) if c not in (reader.fieldnames or [])]
        if missing:
            raise FitError(f"missing column(s): {', '.join(missing)}")
        xs, ys = [], []
        for row in reader:
            if where and any(row.get(k) != v for k, v in where.items()):
                continue
            if row[x_column] == "" or row[y_column] == "":
                continue
            xs.append(float(row[x_column]))
            ys.append(float(row[y_column]))
    return np.array(xs), np.array(ys)


def fit_slope(path, x_column, y_column, where=None):
    return fit_loglog(*read_columns(path, x_column, y_column, where))
