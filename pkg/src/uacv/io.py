"""CSV datasets and reports, YAML run/design configuration."""

from __future__ import annotations

import csv
import io
import math
import re
import sys
from pathlib import Path

import numpy as np
import yaml

from .estimation import Dataset


class DatasetError(ValueError):
    pass


def fmt(x) -> str:
    """Six significant digits; integers and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{float(x):.6g}"
    return str(x)


def _where(row_no):
    return f"data row {row_no} (0-based, file line {row_no + 2})"


def read_dataset(path, levels=None, ordinal="auto") -> Dataset:
    """Load a CSV with a ``y`` column and covariates ``x1..xk``.

    With ``ordinal="auto"`` integer responses are treated as ordinal levels
    ``0..L`` with ``L = levels`` or the largest observed level.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if "y" not in header:
            raise DatasetError(f"{path}: header has no 'y' column")
        xcols = sorted((h for h in header if re.fullmatch(r"x\d+", h)), key=lambda h: int(h[1:]))
        expected = [f"x{j + 1}" for j in range(len(xcols))]
        if xcols != expected:
            raise DatasetError(f"{path}: covariate columns must be x1..xk, got {xcols}")
        iy = header.index("y")
        ix = [header.index(c) for c in xcols]
        ys, xs = [], []
        for row_no, row in enumerate(reader):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"{path}: {_where(row_no)} has {len(row)} fields, expected {len(header)}")
            try:
                ys.append(float(row[iy]))
            except ValueError:
                raise DatasetError(f"{path}: {_where(row_no)}, column 'y': cannot parse {row[iy]!r}") from None
            vals = []
            for c, j in zip(xcols, ix):
                cell = row[j].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"{path}: {_where(row_no)}, column {c!r}: missing or malformed value {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DatasetError(f"{path}: {_where(row_no)}, column {c!r}: non-finite value")
                vals.append(v)
            xs.append(vals)
    y = np.array(ys)
    X = np.array(xs, dtype=float).reshape(len(ys), len(xcols))
    is_int = y.size > 0 and np.all(y == np.round(y)) and np.all(y >= 0)
    if ordinal is True or (ordinal == "auto" and is_int):
        L = int(levels) if levels is not None else int(y.max())
        return Dataset(y.astype(np.int64), X, ordinal_levels=max(L, 1))
    return Dataset(y, X)


def write_dataset(path, data: Dataset):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y"] + [f"x{j + 1}" for j in range(data.covariate_dimension)])
        for yi, xi in zip(data.y, data.X):
            w.writerow([repr(yi.item())] + [repr(float(v)) for v in xi])


def write_report(path, rows, header=("section", "key", "value"), comments=()):
    """Write a CSV report; numeric cells use six significant digits."""
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(c) for c in row])
    text = buf.getvalue()
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return text
    Path(path).write_text(text, encoding="utf-8")
    return text


def read_report(path) -> dict:
    """Parse a ``section,key,value`` report into ``{(section, key): value}``."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [l for l in fh if not l.startswith("#")]
    for rec in csv.DictReader(lines):
        v = rec["value"]
        try:
            v = float(v)
        except ValueError:
            pass
        out[(rec["section"], rec["key"])] = v
    return out


def load_yaml(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a key-value mapping at top level")
    return data
