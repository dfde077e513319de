"""CSV / JSON writers.  Floats go out with 17 significant digits so that
re-reading a file reproduces the in-memory values exactly."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np

PathLike = Union[str, Path]


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    if value is None:
        return ""
    return str(value)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def json_text(obj) -> str:
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(_plain(obj), indent=2, allow_nan=True) + "\n"


def emit(text: str, out: Optional[PathLike]) -> None:
    if out is None or str(out) == "-":
        import sys

        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def read_csv(path: PathLike) -> List[dict]:
    """Rows as dicts; numeric-looking fields become int or float."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))

    def conv(s: str):
        if s == "":
            return s
        try:
            return int(s)
        except ValueError:
            pass
        try:
            return float(s)
        except ValueError:
            return s

    return [{k: conv(v) for k, v in row.items()} for row in rows]


def read_json(path: PathLike):
    return json.loads(Path(path).read_text())
