"""Command-line front end.

Each command reads a JSON scenario, runs one computation and writes its
artifacts plus a ``manifest.json`` into the output directory. Exit status is
0 on success, 2 when the run is valid but infeasible (or the verification
fails), and 1 on errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .balayage import SweepConfig, lambda1_estimate, resolve_box, sweep
from .dirichlet import SpectralInfeasibilityError
from .grid import GridSpec, GridTooLargeError, Mask, Measure
from .heleshaw import evolve, verify_law
from .io import (
    measure_from_dict,
    read_field,
    read_mask_pgm,
    write_field,
    write_json,
    write_mask_pgm,
)
from .quadrature import verify_quadrature
from .radial import Medium, c_k, d_k, point_mass_radius, r_k

COMMANDS = ("sweep", "heleshaw", "radial-table", "verify", "lambda1")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 3}

MEASURE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "atoms": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["point", "mass"],
                "additionalProperties": False,
                "properties": {"point": _VEC, "mass": _POS},
            },
        },
        "balls": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["center", "radius"],
                "additionalProperties": False,
                "properties": {"center": _VEC, "radius": _POS, "density": _POS},
            },
        },
        "shells": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["center", "radius", "surface_density"],
                "additionalProperties": False,
                "properties": {"center": _VEC, "radius": _POS, "surface_density": _POS},
            },
        },
        "density_file": {"type": "string"},
    },
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "kbalayage scenario",
    "type": "object",
    "additionalProperties": False,
    "required": ["medium"],
    "properties": {
        "medium": {
            "type": "object",
            "required": ["N", "k"],
            "additionalProperties": False,
            "properties": {"N": {"enum": [2, 3]}, "k": {"type": "number", "minimum": 0}},
        },
        "measure": MEASURE_SCHEMA,
        "rho": {
            "oneOf": [
                _POS,
                {
                    "type": "object",
                    "required": ["density_file"],
                    "additionalProperties": False,
                    "properties": {"density_file": {"type": "string"}},
                },
            ]
        },
        "box": {
            "oneOf": [
                {"const": "auto"},
                {
                    "type": "object",
                    "required": ["origin", "h", "shape"],
                    "additionalProperties": False,
                    "properties": {
                        "origin": _VEC,
                        "h": _POS,
                        "shape": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                    },
                },
                {
                    "type": "object",
                    "required": ["center", "half_width"],
                    "additionalProperties": False,
                    "properties": {"center": _VEC, "half_width": _POS, "h": _POS},
                },
            ]
        },
        "grid_h": _POS,
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "inner_tol": _POS,
                "outer_tol": _POS,
                "max_outer": {"type": "integer", "minimum": 1},
                "omega_threshold": _POS,
                "divergence_bound": _POS,
                "margin_cells": {"type": "integer", "minimum": 0},
                "compute_lambda1": {"type": "boolean"},
            },
        },
        "heleshaw": {
            "type": "object",
            "required": ["initial_domain", "source", "times"],
            "additionalProperties": False,
            "properties": {
                "initial_domain": MEASURE_SCHEMA,
                "source": _VEC,
                "times": {"type": "array", "items": _POS, "minItems": 1},
                "bracket_resolution": _POS,
                "t_max": _POS,
                "law": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["t", "eps"],
                        "additionalProperties": False,
                        "properties": {"t": _POS, "eps": _POS},
                    },
                },
            },
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "omega_mask": {"type": "string"},
                "exterior_samples": {"type": "integer", "minimum": 1},
                "interior_samples": {"type": "integer", "minimum": 0},
                "tolerance": _POS,
            },
        },
        "radial_table": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "media": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["N", "k"],
                        "additionalProperties": False,
                        "properties": {"N": {"enum": [2, 3]}, "k": {"type": "number", "minimum": 0}},
                    },
                },
                "radii": {"type": "array", "items": _POS},
                "masses": {"type": "array", "items": _POS},
            },
        },
        "lambda1": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mask": {"type": "string"},
                "balls": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["center", "radius"],
                        "additionalProperties": False,
                        "properties": {"center": _VEC, "radius": _POS},
                    },
                },
                "boxes": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["lower", "upper"],
                        "additionalProperties": False,
                        "properties": {"lower": _VEC, "upper": _VEC},
                    },
                },
            },
        },
    },
}


class ScenarioError(ValueError):
    """Invalid scenario; the message carries the line number when known."""


def _locate(text: str, path) -> int:
    """Line number (1-based) of the JSON value at ``path``, best effort."""
    dec = json.JSONDecoder()
    ws = " \t\r\n"

    def skip(i):
        while i < len(text) and text[i] in ws:
            i += 1
        return i

    pos = skip(0)
    for key in path:
        if pos >= len(text):
            break
        if text[pos] == "{" and isinstance(key, str):
            i = skip(pos + 1)
            found = None
            while i < len(text) and text[i] != "}":
                name, i = json.decoder.scanstring(text, i + 1)
                i = skip(i)
                i = skip(i + 1)  # colon
                if name == key:
                    found = i
                    break
                _, i = dec.raw_decode(text, i)
                i = skip(i)
                if i < len(text) and text[i] == ",":
                    i = skip(i + 1)
            if found is None:
                break
            pos = found
        elif text[pos] == "[" and isinstance(key, int):
            i = skip(pos + 1)
            for _ in range(key):
                _, i = dec.raw_decode(text, i)
                i = skip(i)
                i = skip(i + 1)
            pos = i
        else:
            break
    return text.count("\n", 0, pos) + 1


def load_scenario(path) -> tuple[dict, str]:
    """Parse and validate a scenario, returning it with its SHA-256."""
    path = Path(path)
    raw = path.read_bytes()
    text = raw.decode("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: _locate(text, e.absolute_path))
    if errors:
        lines = []
        for e in errors:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{path}:{_locate(text, e.absolute_path)}: {where}: {e.message}")
        raise ScenarioError("\n".join(lines))
    rho = data.get("rho", 1.0)
    if isinstance(rho, dict) and data.get("box", "auto") == "auto":
        raise ScenarioError(f"{path}:{_locate(text, ['rho'])}: rho: a density file needs an explicit box")
    N = data["medium"]["N"]
    for m in [data.get("measure", {}), data.get("heleshaw", {}).get("initial_domain", {})]:
        for kind, key in (("atoms", "point"), ("balls", "center"), ("shells", "center")):
            for i, item in enumerate(m.get(kind, [])):
                if len(item[key]) != N:
                    raise ScenarioError(f"{path}: {kind}[{i}].{key} must have {N} coordinates")
    return data, hashlib.sha256(raw).hexdigest()


def _medium(sc) -> Medium:
    return Medium(sc["medium"]["N"], float(sc["medium"]["k"]))


def _config(sc, h) -> SweepConfig:
    opts = dict(sc.get("solver", {}))
    return SweepConfig(h=h, **opts)


def _box(sc, h, base_dir) -> GridSpec | None:
    box = sc.get("box", "auto")
    if box == "auto":
        return None
    if "origin" in box:
        return GridSpec(tuple(box["origin"]), box["h"], tuple(box["shape"]))
    return GridSpec.centered(box["center"], box["half_width"], box.get("h", h))


def _rho(sc, base_dir):
    rho = sc.get("rho", 1.0)
    if isinstance(rho, dict):
        return read_field(base_dir / rho["density_file"])
    return float(rho)


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _finite(obj):
    """Replace non-finite floats with None so that summaries stay valid JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite(obj.item())
    return obj


def _write_manifest(out: Path, command, digest, grid, files, extra=None):
    files = sorted(set(files), key=lambda p: p.name)
    manifest = {
        "command": command,
        "scenario_sha256": digest,
        "version": __version__,
        "grid": grid.to_dict() if grid is not None else None,
        "files": {p.name: _sha(p) for p in files},
    }
    if extra:
        manifest.update(extra)
    write_json(out / "manifest.json", _finite(manifest))


def _write_result(out: Path, res, prefix="") -> list:
    files = []
    files += write_field(out / f"{prefix}V.bin", res.V)
    files += write_field(out / f"{prefix}u.bin", res.u)
    if res.feasible:
        files += write_field(out / f"{prefix}B.bin", res.B.density)
        files += write_mask_pgm(out / f"{prefix}omega.pgm", res.omega)
        files += write_mask_pgm(out / f"{prefix}Omega.pgm", res.Omega)
    summary = _finite(res.summary())
    path = out / f"{prefix}summary.json"
    write_json(path, summary)
    return files + [path]


def cmd_sweep(sc, digest, out, h, seed, base_dir) -> int:
    medium = _medium(sc)
    if "measure" not in sc:
        raise ScenarioError("sweep needs a 'measure' block")
    mu = measure_from_dict(sc["measure"], base_dir)
    rho = _rho(sc, base_dir)
    config = replace(_config(sc, h), box=_box(sc, h, base_dir))
    res = sweep(mu, rho, medium, config)
    files = _write_result(out, res)
    _write_manifest(out, "sweep", digest, res.spec, files, {"feasible": res.feasible, "status": res.status})
    return 0 if res.feasible else 2


def cmd_heleshaw(sc, digest, out, h, seed, base_dir) -> int:
    medium = _medium(sc)
    hs = sc.get("heleshaw")
    if hs is None:
        raise ScenarioError("heleshaw needs a 'heleshaw' block")
    dom = measure_from_dict(hs["initial_domain"], base_dir)
    z = np.asarray(hs["source"], dtype=float)
    config = replace(_config(sc, h), box=_box(sc, h, base_dir))
    run = evolve(
        dom,
        Measure.atom(z, 1.0),
        medium,
        hs["times"],
        config,
        bracket_resolution=hs.get("bracket_resolution"),
        t_max=hs.get("t_max"),
    )
    files = []
    for i, res in enumerate(run.results):
        if res.feasible:
            files += write_mask_pgm(out / f"omega_{i:03d}.pgm", res.omega)
    laws = []
    for item in hs.get("law", []):
        rep = verify_law(dom, z, medium, item["t"], item["eps"], run.config)
        laws.append(rep.as_dict())
    series = {
        "series": run.series(),
        "T_bracket": list(run.T_bracket),
        "violations": [list(v) for v in run.violations],
        "law": laws,
    }
    path = out / "evolution.json"
    write_json(path, _finite(series))
    files.append(path)
    _write_manifest(out, "heleshaw", digest, run.config.box, files)
    return 0 if run.results[0].feasible and not run.violations else 2


def radial_rows(media, radii, masses) -> list:
    """Rows ``(quantity, medium, parameters, value)`` of the radial table."""
    rows = []
    for med in media:
        tag = f"N={med.N};k={med.k!r}"
        Rk = r_k(med)
        rows.append(("R_k", tag, "", Rk))
        if math.isfinite(Rk):
            rows.append(("c_k(R_k)", tag, f"r={Rk!r}", float(c_k(med, Rk))))
        for r in radii:
            r = float(r)
            rows.append(("c_k", tag, f"r={r!r}", float(c_k(med, r))))
            rows.append(("d_k", tag, f"r={r!r}", float(d_k(med, r))))
        for c in masses:
            c = float(c)
            sw = point_mass_radius(med, c)
            rows.append(("point_mass_radius", tag, f"c={c!r}", sw.outer if sw.feasible else "infeasible"))
    return rows


def cmd_radial_table(sc, digest, out, h, seed, base_dir) -> int:
    block = sc.get("radial_table", {})
    media = [Medium(m["N"], float(m["k"])) for m in block.get("media", [sc["medium"]])]
    rows = radial_rows(media, block.get("radii", [1.0, 2.0]), block.get("masses", []))
    path = out / "radial_table.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity", "medium", "parameters", "value"])
        for q, tag, par, val in rows:
            w.writerow([q, tag, par, val if isinstance(val, str) else repr(float(val))])
    _write_manifest(out, "radial-table", digest, None, [path])
    return 0


def cmd_verify(sc, digest, out, h, seed, base_dir) -> int:
    medium = _medium(sc)
    if "measure" not in sc:
        raise ScenarioError("verify needs a 'measure' block")
    mu = measure_from_dict(sc["measure"], base_dir)
    block = sc.get("verify", {})
    rho = _rho(sc, base_dir)
    files = []
    if "omega_mask" in block:
        omega = read_mask_pgm(base_dir / block["omega_mask"])
    else:
        config = replace(_config(sc, h), box=_box(sc, h, base_dir), compute_lambda1=False)
        res = sweep(mu, rho, medium, config)
        if not res.feasible:
            _write_manifest(out, "verify", digest, res.spec, [], {"feasible": False})
            return 2
        omega = res.omega
        files += write_mask_pgm(out / "omega.pgm", omega)
    rep = verify_quadrature(
        omega,
        mu,
        rho,
        medium,
        exterior_samples=block.get("exterior_samples", 200),
        interior_samples=block.get("interior_samples", 200),
        seed=seed,
        tolerance=block.get("tolerance"),
    )
    path = out / "quadrature_report.json"
    write_json(path, _finite(rep.as_dict()))
    files.append(path)
    _write_manifest(out, "verify", digest, omega.spec, files, {"passed": rep.passed})
    return 0 if rep.passed else 2


def _lambda1_mask(sc, h, base_dir) -> Mask:
    block = sc.get("lambda1", {})
    if "mask" in block:
        return read_mask_pgm(base_dir / block["mask"])
    N = sc["medium"]["N"]
    balls = block.get("balls", [])
    boxes = block.get("boxes", [])
    if not balls and not boxes:
        raise ScenarioError("lambda1 needs a mask, balls or boxes")
    lo = np.full(N, np.inf)
    hi = np.full(N, -np.inf)
    for b in balls:
        lo = np.minimum(lo, np.asarray(b["center"]) - b["radius"])
        hi = np.maximum(hi, np.asarray(b["center"]) + b["radius"])
    for b in boxes:
        lo = np.minimum(lo, b["lower"])
        hi = np.maximum(hi, b["upper"])
    shape = tuple(int(math.ceil((hi[a] - lo[a]) / h - 1e-9)) + 2 for a in range(N))
    spec = GridSpec(tuple(lo - h), h, shape)
    X = spec.points().reshape(shape + (N,))
    flags = np.zeros(shape, dtype=bool)
    for b in balls:
        flags |= np.linalg.norm(X - np.asarray(b["center"]), axis=-1) < b["radius"]
    for b in boxes:
        flags |= np.all((X > np.asarray(b["lower"])) & (X < np.asarray(b["upper"])), axis=-1)
    return Mask(spec, flags)


def cmd_lambda1(sc, digest, out, h, seed, base_dir) -> int:
    mask = _lambda1_mask(sc, h, base_dir)
    lam = lambda1_estimate(mask)
    k = sc["medium"]["k"]
    path = out / "lambda1.json"
    write_json(path, _finite({"lambda1": lam, "cells": mask.count, "k_squared": k * k, "at_least_k2": lam >= k * k}))
    _write_manifest(out, "lambda1", digest, mask.spec, [path])
    return 0


HANDLERS = {
    "sweep": cmd_sweep,
    "heleshaw": cmd_heleshaw,
    "radial-table": cmd_radial_table,
    "verify": cmd_verify,
    "lambda1": cmd_lambda1,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kbalayage", description="Partial balayage for the Helmholtz operator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--grid-h", type=float, default=None, help="override the grid spacing")
    p.add_argument("--seed", type=int, default=0, help="seed for sample points")
    p.add_argument("--threads", type=int, default=1, help="threads for the linear algebra backends")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc, digest = load_scenario(args.scenario)
        h = args.grid_h if args.grid_h is not None else sc.get("grid_h", 0.05)
        if not h > 0:
            raise ScenarioError("--grid-h must be positive")
        if args.grid_h is not None and isinstance(sc.get("box"), dict):
            if "origin" in sc["box"]:
                raise ScenarioError("--grid-h cannot override a box given by origin and shape")
            sc["box"] = dict(sc["box"], h=args.grid_h)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        base_dir = Path(args.scenario).resolve().parent
        with threadpool_limits(limits=max(1, args.threads)):
            return HANDLERS[args.command](sc, digest, out, h, args.seed, base_dir)
    except (ScenarioError, GridTooLargeError, SpectralInfeasibilityError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
