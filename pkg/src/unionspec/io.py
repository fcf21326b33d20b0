"""Deterministic, atomic output helpers."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path


def fmt(x: float) -> str:
    """Float with 17 significant digits (round-trips exactly)."""
    return format(float(x), ".17g")


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory + rename."""
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


def dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


def write_json(path, obj) -> None:
    atomic_write(path, dump_json(obj))


def complex_pair(z) -> list[float]:
    z = complex(z)
    return [float(fmt(z.real)), float(fmt(z.imag))]
