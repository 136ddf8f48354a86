"""CSV tables with a schema line and a JSON sidecar.

Numbers are written with ``%.17g`` so a value read back is bit-identical,
and the sidecar is dumped with sorted keys.  Two runs with the same
configuration therefore produce byte-identical files.
"""
from __future__ import annotations

import csv
import json
import math
import sys
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool,)):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    x = float(v)
    if math.isnan(x):
        return "nan"
    return "%.17g" % x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "item"):  # numpy scalars
        return _jsonable(obj.item())
    return obj


def write_table(path: str | Path, schema: str, header: Sequence[str], rows: Iterable[Sequence],
                config: dict | None = None) -> Path:
    """Write ``path`` and ``path.json``; returns the CSV path.

    ``schema`` is a short name such as ``"costs"``; the first line of the
    file reads ``# schema=costs.v1``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema={schema}.v1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
            w.writerow([fmt(v) for v in row])
    meta = {"schema": f"{schema}.v1", "columns": list(header), "artifact_version": __version__,
            "config": _jsonable(config or {})}
    sidecar = path.with_suffix(path.suffix + ".json")
    sidecar.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return path


def read_table(path: str | Path) -> tuple[str, list[str], list[list[float]]]:
    """Inverse of :func:`write_table` for numeric tables: (schema, header, rows)."""
    with Path(path).open() as fh:
        first = fh.readline().strip()
        if not first.startswith("# schema="):
            raise ValueError(f"{path} has no schema line")
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in r] for r in reader]
    return first.split("=", 1)[1], header, rows


def load_config(path: str | Path) -> dict:
    """Flat TOML or JSON file into a dict; nested tables are rejected."""
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        data = json.loads(text)
    else:
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        data = tomllib.loads(text.decode())
    if not isinstance(data, dict):
        raise ValueError("config must be a table of key = value pairs")
    for k, v in data.items():
        if isinstance(v, dict):
            raise ValueError(f"config must be flat; key {k!r} holds a table")
    return data
