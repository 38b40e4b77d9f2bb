"""File formats: matrix CSV, labelled dataset CSV and deterministic JSON."""

import csv
import io
import json
import math
import re

import numpy as np

from .errors import InvalidDataset, InvalidInput

_DIM_RE = re.compile(r"^#\s*dim\s*=\s*(\d+)\s*x\s*(\d+)\s*$")


def read_matrix_csv(path):
    """Read a matrix written as ``# dim=<r>x<c>`` followed by ``r`` CSV rows."""
    with open(path, newline="") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise InvalidInput(f"{path}: empty matrix file")
    m = _DIM_RE.match(lines[0])
    if m is None:
        raise InvalidInput(f"{path}: first line must be '# dim=<r>x<c>'")
    r, c = int(m.group(1)), int(m.group(2))
    rows = [ln for ln in lines[1:] if not ln.startswith("#")]
    try:
        data = [[float(v) for v in row] for row in csv.reader(rows)]
    except ValueError as exc:
        raise InvalidInput(f"{path}: {exc}") from None
    A = np.array(data, dtype=float)
    if A.shape != (r, c):
        raise InvalidInput(f"{path}: header says {r}x{c}, found {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{path}: non-finite entries")
    return A


def format_matrix_csv(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    out = io.StringIO()
    out.write(f"# dim={A.shape[0]}x{A.shape[1]}\n")
    for row in A:
        out.write(",".join(repr(float(v)) for v in row) + "\n")
    return out.getvalue()


def write_matrix_csv(path, A):
    with open(path, "w", newline="") as fh:
        fh.write(format_matrix_csv(A))


def write_dataset_csv(path, V, labels, start=0):
    """Samples ``V`` (N x n) with integer labels as ``k, v1..vn, label`` rows."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    labels = np.asarray(labels, dtype=int)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k"] + [f"v{i + 1}" for i in range(V.shape[1])] + ["label"])
        for k, (row, lab) in enumerate(zip(V, labels)):
            w.writerow([start + k] + [repr(float(v)) for v in row] + [int(lab)])


def read_dataset_csv(path):
    """Return ``(k, V, labels)``; ``labels`` is ``None`` if the column is absent."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise InvalidDataset(f"{path}: no samples")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise InvalidDataset(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise InvalidDataset(f"{path}: ragged rows")
    cols = {h: i for i, h in enumerate(header)}
    vcols = [i for h, i in cols.items() if h not in ("k", "label")]
    k = data[:, cols["k"]].astype(int) if "k" in cols else np.arange(data.shape[0])
    labels = data[:, cols["label"]].astype(int) if "label" in cols else None
    return k, data[:, vcols], labels


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and hasattr(obj, "name") and not isinstance(obj, (str, int)):
        return obj.value  # enums
    return obj


def dumps(obj):
    """Deterministic JSON (sorted keys, fixed indentation)."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def read_json(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"{path}: invalid JSON ({exc})") from None
