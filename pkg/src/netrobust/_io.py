"""Deterministic text output: 17-significant-digit floats and atomic writes."""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """Format a number for CSV output; non-finite values become ``inf``/``-inf``/``nan``."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def to_json(obj, indent: int = 2) -> str:
    """JSON with every float at 17 significant digits; ``inf`` and ``nan`` map to null."""
    return _encode(obj, indent, 0) + "\n"


def _encode(o, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if o is None:
        return "null"
    if isinstance(o, (bool, np.bool_)):
        return "true" if o else "false"
    if isinstance(o, (int, np.integer)):
        return str(int(o))
    if isinstance(o, (float, np.floating)):
        x = float(o)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(o, str):
        return json.dumps(o)
    if isinstance(o, dict):
        if not o:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in o.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(o, (list, tuple, np.ndarray)):
        seq = list(o)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(o).__name__}")


def compact_json(obj) -> str:
    return to_json(obj, indent=0).replace("\n", " ").strip()


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
