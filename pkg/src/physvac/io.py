"""CSV traces, raw binary field dumps with JSON sidecars, and run manifests.

A field dump ``<base>.bin`` holds little-endian float64 values, one block per
scalar component, each block in x1-fastest order. ``<base>.json`` describes
it::

    {"dims": [n1, n2, n3], "spacing": [h1, h2, h3], "fields": ["disp", ...],
     "components": {"disp": 3, ...}, "offsets": {"disp": 0, ...},
     "endianness": "little", "dtype": "<f8", "order": "x1-fastest"}

Offsets are in bytes from the start of the payload.
"""
import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError

__all__ = [
    "TRACE_COLUMNS",
    "write_trace",
    "read_trace",
    "write_fields",
    "read_fields",
    "write_manifest",
    "FieldDump",
]

TRACE_COLUMNS = ("t", "E", "EN", "BN", "CN", "DN", "TEN", "Jmin", "Jmax", "Adev")


def write_trace(path, reports):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(TRACE_COLUMNS)
        for rep in reports:
            out.writerow([repr(float(x)) for x in rep.row()])


def read_trace(path):
    """Return the trace as a dict of column name to float array."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise SchemaError(f"{path}: header must be {','.join(TRACE_COLUMNS)}")
    data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(TRACE_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(TRACE_COLUMNS)}


def _sidecar(base):
    return base + ".json", base + ".bin"


def write_fields(base, fields, grid):
    """Write named scalar/vector/tensor fields; returns the two file paths."""
    meta_path, bin_path = _sidecar(base)
    names, comps, offsets = [], {}, {}
    offset = 0
    with open(bin_path, "wb") as fh:
        for name, arr in fields.items():
            arr = grid.check(np.asarray(arr, dtype=float), name)
            blocks = arr.reshape((-1,) + grid.shape)
            names.append(name)
            comps[name] = int(blocks.shape[0])
            offsets[name] = offset
            for b in blocks:
                payload = b.ravel(order="F").astype("<f8").tobytes()
                fh.write(payload)
                offset += len(payload)
    meta = {
        "dims": list(grid.shape),
        "spacing": list(grid.spacing),
        "fields": names,
        "components": comps,
        "offsets": offsets,
        "endianness": "little",
        "dtype": "<f8",
        "order": "x1-fastest",
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2)
    return meta_path, bin_path


@dataclass
class FieldDump:
    dims: tuple
    spacing: tuple
    fields: dict


def _shape_for(ncomp, dims):
    if ncomp == 1:
        return tuple(dims)
    if ncomp == 3:
        return (3,) + tuple(dims)
    if ncomp == 9:
        return (3, 3) + tuple(dims)
    return (ncomp,) + tuple(dims)


def read_fields(base):
    """Read a dump written by :func:`write_fields` (``base`` may end in .json/.bin)."""
    for ext in (".json", ".bin"):
        if base.endswith(ext):
            base = base[: -len(ext)]
    meta_path, bin_path = _sidecar(base)
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{meta_path}: invalid JSON ({exc})") from None
    for key in ("dims", "spacing", "fields", "offsets", "endianness"):
        if key not in meta:
            raise SchemaError(f"{meta_path}: missing key {key!r}")
    if meta["endianness"] != "little":
        raise SchemaError(f"{meta_path}: unsupported endianness {meta['endianness']!r}")
    dims = tuple(int(n) for n in meta["dims"])
    if len(dims) != 3 or min(dims) < 1:
        raise SchemaError(f"{meta_path}: dims must be three positive integers")
    npts = dims[0] * dims[1] * dims[2]
    comps = meta.get("components", {name: 1 for name in meta["fields"]})
    raw = np.fromfile(bin_path, dtype="<f8")
    expected = sum(int(comps[name]) for name in meta["fields"]) * npts
    if raw.size != expected or os.path.getsize(bin_path) != expected * 8:
        raise SchemaError(
            f"{bin_path}: payload holds {os.path.getsize(bin_path)} bytes, sidecar implies {expected * 8}"
        )
    out = {}
    for name in meta["fields"]:
        nc = int(comps[name])
        start = int(meta["offsets"][name])
        if start % 8 or start // 8 + nc * npts > raw.size:
            raise SchemaError(f"{meta_path}: offset of {name!r} is out of range")
        chunk = raw[start // 8: start // 8 + nc * npts]
        blocks = [chunk[c * npts:(c + 1) * npts].reshape(dims, order="F") for c in range(nc)]
        arr = blocks[0] if nc == 1 else np.stack(blocks)
        out[name] = arr.reshape(_shape_for(nc, dims)).astype(float)
    return FieldDump(dims, tuple(meta["spacing"]), out)


def write_manifest(path, manifest):
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
