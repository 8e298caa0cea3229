"""CSV/JSON artifact helpers.

Every file written here starts with a ``#`` comment line naming the tool
version and a hash of the configuration that produced it.  Floats are
written with ``repr`` so output is byte-stable across runs.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__


def config_hash(config: Mapping | None) -> str:
    blob = json.dumps(config or {}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def header_line(config: Mapping | None = None) -> str:
    return f"# specinv {__version__} config={config_hash(config)}"


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], config: Mapping | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(header_line(config) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path


def write_columns(path, data: Mapping[str, Sequence], config: Mapping | None = None) -> Path:
    names = list(data)
    return write_csv(path, names, zip(*(data[k] for k in names)), config)


def read_csv(path) -> dict[str, np.ndarray]:
    """Read a numeric CSV written by :func:`write_csv` (comment lines skipped)."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    reader = csv.reader(lines)
    names = [n.strip() for n in next(reader)]
    rows = [[float(x) for x in row] for row in reader]
    arr = np.array(rows, dtype=float).reshape(-1, len(names))
    return {name: arr[:, i] for i, name in enumerate(names)}


def write_json(path, record: Mapping) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
