"""File formats for fields, masks and measures.

Fields are raw little-endian float64 in row-major order with a JSON sidecar
holding the grid; masks are binary PGM images (0/255) with the same kind of
sidecar. A 3D mask is stored as its slices along the first axis stacked
vertically.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Union

import numpy as np

from .grid import GridSpec, Mask, Measure, ScalarField

PathLike = Union[str, Path]


def _sidecar(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".json")


def write_json(path: PathLike, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_field(path: PathLike, field: ScalarField) -> list[Path]:
    """Write ``path`` (raw values) and ``path.json`` (grid and layout)."""
    path = Path(path)
    vals = np.ascontiguousarray(np.asarray(field.values), dtype="<f8")
    path.write_bytes(vals.tobytes(order="C"))
    meta = {
        "grid": field.spec.to_dict(),
        "dtype": "float64",
        "byte_order": "little",
        "order": "row-major",
        "singular_cells": np.argwhere(np.asarray(field.singular)).tolist(),
    }
    write_json(_sidecar(path), meta)
    return [path, _sidecar(path)]


def read_field(path: PathLike) -> ScalarField:
    path = Path(path)
    meta = json.loads(_sidecar(path).read_text())
    spec = GridSpec.from_dict(meta["grid"])
    vals = np.frombuffer(path.read_bytes(), dtype="<f8")
    if vals.size != spec.size:
        raise ValueError(f"{path}: expected {spec.size} values, found {vals.size}")
    singular = np.zeros(spec.shape, dtype=bool)
    for idx in meta.get("singular_cells", []):
        singular[tuple(idx)] = True
    return ScalarField(spec, vals.reshape(spec.shape).astype(float), singular)


def write_field_csv(path: PathLike, field: ScalarField) -> Path:
    """One row per cell: integer indices, centre coordinates, value."""
    path = Path(path)
    spec = field.spec
    names = "ijk"[: spec.ndim]
    coords = "xyz"[: spec.ndim]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + list(coords) + ["value"])
        vals = np.asarray(field.values)
        for idx in np.ndindex(*spec.shape):
            x = [spec.origin[a] + (idx[a] + 0.5) * spec.h for a in range(spec.ndim)]
            w.writerow(list(idx) + [repr(float(v)) for v in x] + [repr(float(vals[idx]))])
    return path


def write_mask_pgm(path: PathLike, mask: Mask) -> list[Path]:
    """Binary PGM (P5, maxval 255) plus a JSON sidecar."""
    path = Path(path)
    flags = np.asarray(mask.flags)
    img = flags.reshape(-1, flags.shape[-1]).astype(np.uint8) * 255
    height, width = img.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    path.write_bytes(header + img.tobytes())
    meta = {
        "grid": mask.spec.to_dict(),
        "layout": "slices along axis 0 stacked vertically" if flags.ndim == 3 else "rows along axis 0",
        "cells": int(flags.sum()),
    }
    write_json(_sidecar(path), meta)
    return [path, _sidecar(path)]


def read_mask_pgm(path: PathLike) -> Mask:
    path = Path(path)
    meta = json.loads(_sidecar(path).read_text())
    spec = GridSpec.from_dict(meta["grid"])
    data = path.read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while data[pos : pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM file")
    width, height = int(tokens[1]), int(tokens[2])
    pix = np.frombuffer(data[pos + 1 : pos + 1 + width * height], dtype=np.uint8)
    if pix.size != spec.size:
        raise ValueError(f"{path}: image size does not match the grid")
    return Mask(spec, pix.reshape(spec.shape) > 127)


def measure_from_dict(d: dict, base_dir: PathLike = ".", spec: GridSpec | None = None) -> Measure:
    """Build a measure from its JSON description.

    Keys: ``atoms`` (``point``, ``mass``), ``balls`` (``center``, ``radius``,
    ``density``), ``shells`` (``center``, ``radius``, ``surface_density``)
    and ``density_file`` (a field written by :func:`write_field`).
    """
    atoms = [(a["point"], a["mass"]) for a in d.get("atoms", [])]
    balls = [(b["center"], b["radius"], b.get("density", 1.0)) for b in d.get("balls", [])]
    shells = [(s["center"], s["radius"], s["surface_density"]) for s in d.get("shells", [])]
    density = None
    if d.get("density_file"):
        density = read_field(Path(base_dir) / d["density_file"])
    return Measure(atoms=atoms, balls=balls, shells=shells, density=density)


def measure_to_dict(m: Measure) -> dict:
    out = {
        "atoms": [{"point": p.tolist(), "mass": w} for p, w in m.atoms],
        "balls": [{"center": c.tolist(), "radius": r, "density": d} for c, r, d in m.balls],
        "shells": [{"center": c.tolist(), "radius": r, "surface_density": s} for c, r, s in m.shells],
    }
    return out
