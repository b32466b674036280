"""Schema-tagged CSV and JSON writers.

Floats are written with ``repr`` (shortest round-trip form), so identical
results give byte-identical files.  Every file starts with a header line that
names its schema.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def schema_id(name: str) -> str:
    return f"oamcirc.{name}/{SCHEMA_VERSION}"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_csv(name: str, header, rows) -> str:
    lines = [f"# schema: {schema_id(name)}", ",".join(header)]
    lines += [",".join(_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def format_json(name: str, payload: dict) -> str:
    """One key per line, schema first so the opening line identifies the file."""
    items = [("schema", schema_id(name))] + [(k, payload[k]) for k in payload]
    body = ",\n".join(f"  {json.dumps(k)}: {json.dumps(_plain(v), allow_nan=False)}" for k, v in items[1:])
    head = f"{{{json.dumps('schema')}: {json.dumps(items[0][1])}"
    return head + (",\n" + body if body else "") + "\n}\n"


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def write_csv(directory: Path, filename: str, name: str, header, rows) -> Path:
    return write_text(Path(directory) / filename, format_csv(name, header, rows))


def write_json(directory: Path, filename: str, name: str, payload: dict) -> Path:
    return write_text(Path(directory) / filename, format_json(name, payload))
