"""Small CSV helpers shared by the serializers."""

from __future__ import annotations

import io
import math
import os
import tempfile
from pathlib import Path


def fmt(value) -> str:
    """Format a CSV field; floats get 12 significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.12g}"
    if value is None:
        return ""
    return str(value)


def csv_line(fields) -> str:
    return ",".join(fmt(f) for f in fields) + "\n"


def write_text(target, text: str) -> None:
    """Write to a path atomically, or to an open text stream."""
    if isinstance(target, io.TextIOBase) or hasattr(target, "write"):
        target.write(text)
        return
    path = Path(target)
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
