"""JSON serialization of operators and reports, with atomic file writes.

Operators are stored as::

    {"format": "dnchar-operator", "version": 1,
     "grid": {"modes": N, "length": L}, "orientation": 1, "real_flag": true,
     "meta": {...}, "matrix": [[re, im], ...]}

with the matrix flattened row-major.  Beyond ``N = 64`` the matrix is moved
to a sidecar file of little-endian float64 pairs (``re, im``) named in
``"matrix_file"`` relative to the JSON file.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .boundary import GridSpec
from .errors import DNCharError
from .operators import BoundaryOperator

FORMAT = "dnchar-operator"
VERSION = 1
SIDECAR_MODES = 64


class FormatError(DNCharError, ValueError):
    """Malformed or inconsistent input file."""


def plain(obj):
    """Recursively convert numpy scalars and arrays to JSON-compatible values.

    Non-finite floats become the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
    """
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, (complex, np.complexfloating)):
        return [plain(obj.real), plain(obj.imag)]
    return obj


def dumps(obj, indent: int | None = 2) -> str:
    return json.dumps(plain(obj), indent=indent, allow_nan=False) + "\n"


def write_atomic(path, data: str | bytes) -> None:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def operator_to_dict(op: BoundaryOperator, matrix_file: str | None = None) -> dict:
    d = {"format": FORMAT, "version": VERSION, "grid": op.grid.to_dict(),
         "orientation": int(op.orientation), "real_flag": bool(op.real_flag),
         "meta": plain(op.meta)}
    if matrix_file is None:
        flat = op.matrix.ravel()
        d["matrix"] = [[float(c.real), float(c.imag)] for c in flat]
    else:
        d["matrix_file"] = matrix_file
    return d


def matrix_bytes(op: BoundaryOperator) -> bytes:
    return np.ascontiguousarray(op.matrix, dtype="<c16").tobytes()


def save_operator(op: BoundaryOperator, path, indent: int | None = 2) -> None:
    path = Path(path)
    if op.grid.modes > SIDECAR_MODES:
        side = path.name + ".bin"
        write_atomic(path.parent / side, matrix_bytes(op))
        write_atomic(path, dumps(operator_to_dict(op, side), indent))
    else:
        write_atomic(path, dumps(operator_to_dict(op), indent))


def operator_from_dict(d: dict, base: Path | None = None) -> BoundaryOperator:
    if not isinstance(d, dict) or d.get("format") != FORMAT:
        raise FormatError("not an operator file (missing format tag)")
    if d.get("version") != VERSION:
        raise FormatError(f"unsupported operator format version {d.get('version')!r}")
    try:
        grid = GridSpec(int(d["grid"]["modes"]), float(d["grid"]["length"]))
        orientation = int(d.get("orientation", 1))
        meta = dict(d.get("meta", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad grid or header: {exc}") from exc
    if orientation not in (1, -1):
        raise FormatError("orientation must be +1 or -1")
    k = grid.size
    if "matrix" in d:
        try:
            pairs = np.asarray(d["matrix"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"matrix entries must be [re, im] pairs: {exc}") from exc
        if pairs.shape != (k * k, 2):
            raise FormatError(f"matrix must hold {k * k} [re, im] pairs, got shape {pairs.shape}")
        mat = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(k, k)
    elif "matrix_file" in d:
        side = Path(d["matrix_file"])
        if base is not None and not side.is_absolute():
            side = base / side
        try:
            raw = side.read_bytes()
        except OSError as exc:
            raise FormatError(f"cannot read matrix sidecar {side}: {exc}") from exc
        if len(raw) != 16 * k * k:
            raise FormatError(f"sidecar {side} has {len(raw)} bytes, expected {16 * k * k}")
        mat = np.frombuffer(raw, dtype="<c16").reshape(k, k).astype(complex)
    else:
        raise FormatError("operator file has neither matrix nor matrix_file")
    if not np.all(np.isfinite(mat)):
        raise FormatError("matrix contains non-finite entries")
    return BoundaryOperator(grid, mat, orientation, meta)


def load_operator(path) -> BoundaryOperator:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from exc
    return operator_from_dict(data, path.parent)
