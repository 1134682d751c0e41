"""Artifact writers: JSON, CSV, OBJ polylines and the binary field format.

Every artifact carries the library version and the hash of the run
configuration, and contains nothing time- or host-dependent, so equal
configurations give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ValidationError

FIELD_MAGIC = "PINNED-GL-FIELD 1"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]


def stamp(payload: dict, config: dict) -> dict:
    out = dict(payload)
    out["version"] = __version__
    out["config_hash"] = config_hash(config)
    return out


def dumps_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj))


def write_csv(path, header, rows, config: dict | None = None) -> None:
    buf = io.StringIO()
    if config is not None:
        buf.write(f"# version={__version__} config_hash={config_hash(config)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    Path(path).write_text(buf.getvalue())


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    header_seen = False
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append([float(x) for x in line.split(",")])
        except ValueError:
            if not rows and not header_seen:
                header_seen = True  # one optional column header
                continue
            raise ValidationError("distance matrix CSV must hold numbers only", line=line) from None
    if len({len(r) for r in rows}) > 1:
        raise ValidationError("distance matrix CSV rows differ in length")
    return np.array(rows, dtype=float) if rows else np.zeros((0, 0))


def obj_text(polylines, config: dict | None = None, tags=None) -> str:
    lines = [f"# pinned-gl {__version__}"]
    if config is not None:
        lines.append(f"# config_hash {config_hash(config)}")
    idx = 1
    for n, P in enumerate(polylines):
        P = np.asarray(P, float)
        lines.append(f"o curve{n + 1}")
        if tags is not None:
            lines.append("# phases " + " ".join(tags[n]))
        for v in P:
            lines.append("v " + " ".join(repr(float(c)) for c in v))
        lines.append("l " + " ".join(str(i) for i in range(idx, idx + len(P))))
        idx += len(P)
    return "\n".join(lines) + "\n"


def write_obj(path, polylines, config: dict | None = None, tags=None) -> None:
    Path(path).write_text(obj_text(polylines, config, tags))


def field_bytes(origin, h: float, dims, values: np.ndarray, config: dict | None = None) -> bytes:
    """ASCII header lines, then nx*ny*nz little-endian float64 values with x varying fastest."""
    nx, ny, nz = (int(d) for d in dims)
    vals = np.asarray(values, dtype="<f8").reshape(nz, ny, nx)
    head = [FIELD_MAGIC,
            "origin " + " ".join(repr(float(c)) for c in origin),
            f"h {float(h)!r}",
            f"dims {nx} {ny} {nz}",
            f"version {__version__}"]
    if config is not None:
        head.append(f"config_hash {config_hash(config)}")
    head.append("payload float64-le x-fastest")
    head.append("end")
    return ("\n".join(head) + "\n").encode("ascii") + vals.tobytes(order="C")


def write_field(path, fld, config: dict | None = None) -> None:
    Path(path).write_bytes(field_bytes(fld.origin, fld.h, fld.dims, fld.values, config))


def read_field(path):
    """Returns (origin, h, dims, values[nz, ny, nx], header dict)."""
    data = Path(path).read_bytes()
    header = {}
    pos = 0
    while True:
        nl = data.index(b"\n", pos)
        line = data[pos:nl].decode("ascii")
        pos = nl + 1
        if line == "end":
            break
        key, _, rest = line.partition(" ")
        header[key] = rest
    if FIELD_MAGIC.split()[0] not in header:
        raise ValidationError("not a field file")
    origin = np.array([float(x) for x in header["origin"].split()])
    h = float(header["h"])
    dims = tuple(int(x) for x in header["dims"].split())
    n = dims[0] * dims[1] * dims[2]
    vals = np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(dims[2], dims[1], dims[0])
    return origin, h, dims, vals.copy(), header
