"""File formats: shape specs (JSON), GWRS grid binaries, result rows.

Result rows are written with every float at 17 significant digits and
keys sorted, so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .grid import GridFunction, GridSpec, ShapeSpec, shape_from_dict

GWRS_MAGIC = b"GWRS"
GWRS_VERSION = 1


class FormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# shapes


def read_shape(path) -> tuple[ShapeSpec, dict]:
    """Parse a shape file.

    The file holds either a bare shape tree or ``{"shape": ..., "grid": ...}``
    where the optional grid block may carry ``d``, ``n`` and ``extent``.
    """
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise FormatError(f"{path}: expected an object")
    grid = {}
    if "shape" in data:
        grid = data.get("grid", {}) or {}
        data = data["shape"]
    try:
        return shape_from_dict(data), grid
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed shape ({exc!r})") from exc


def write_shape(path, shape: ShapeSpec, grid: dict | None = None) -> None:
    doc: dict = {"shape": shape.to_dict()}
    if grid:
        doc["grid"] = grid
    Path(path).write_text(dumps(doc, indent=2) + "\n")


def shape_hash(shape: ShapeSpec) -> str:
    return hashlib.sha256(dumps(shape.to_dict()).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# GWRS grid binaries


def write_grid(path, g: GridFunction) -> None:
    s = g.spec
    header = GWRS_MAGIC + struct.pack(f"<II{s.d}Id", GWRS_VERSION, s.d, *([s.n] * s.d), s.extent)
    Path(path).write_bytes(header + np.ascontiguousarray(g.values, dtype="<f8").tobytes())


def read_grid(path) -> GridFunction:
    raw = Path(path).read_bytes()
    if raw[:4] != GWRS_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header")
    version, d = struct.unpack_from("<II", raw, 4)
    if version != GWRS_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if d not in (1, 2, 3):
        raise FormatError(f"{path}: unsupported dimension {d}")
    off = 12
    ns = struct.unpack_from(f"<{d}I", raw, off)
    off += 4 * d
    (extent,) = struct.unpack_from("<d", raw, off)
    off += 8
    if len(set(ns)) != 1:
        raise FormatError(f"{path}: anisotropic grids are not supported (n = {ns})")
    count = math.prod(ns)
    if len(raw) - off != 8 * count:
        raise FormatError(f"{path}: expected {count} values, found {(len(raw) - off) / 8:g}")
    vals = np.frombuffer(raw, dtype="<f8", offset=off).astype(float).reshape(ns)
    return GridFunction(GridSpec(d, extent, ns[0]), vals)


# ---------------------------------------------------------------------------
# canonical JSON


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        # not JSON, but Python's reader accepts these tokens
        return "NaN" if math.isnan(x) else ("Infinity" if x > 0 else "-Infinity")
    text = format(x, ".17g")
    # keep floats distinguishable from integers on reading back
    return text if any(c in text for c in ".en") else text + ".0"


def _encode(obj: Any, indent: int | None, level: int) -> str:
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = ":" if indent is None else ": "
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(k) + sep + _encode(obj[k], indent, level + 1) for k in sorted(obj)]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if not obj:
        return "[]"
    return "[" + pad + ("," + pad).join(_encode(v, indent, level + 1) for v in obj) + end + "]"


def dumps(obj: Any, indent: int | None = None) -> str:
    """Sorted-key JSON with floats at 17 significant digits."""
    return _encode(_plain(obj), indent, 0)


def write_rows(path, rows: Iterable[dict]) -> None:
    Path(path).write_text("".join(dumps(r) + "\n" for r in rows))


def read_rows(path) -> list[dict]:
    return [json.loads(ln) for ln in Path(path).read_text().splitlines() if ln.strip()]
