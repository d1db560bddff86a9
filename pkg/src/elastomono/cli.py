"""Batch driver: ``elastomono {forward,recon,validate,localize} --config PATH --out DIR``.

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 validation failure.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import math
import platform
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import specfun
from .errors import ConfigError, ElastomonoError, SolverError
from .farfield import (
    DirectionGrid,
    FarFieldOperator,
    HerglotzDensity,
    assemble,
    calibrate_sigma,
    unitarity_defect,
)
from .localized import RegionSamples, localization_curve, write_curve_csv
from .medium import Inclusion, MaterialField, shape_from_dict
from .monotonicity import (
    TAU_DEFECT_FACTOR,
    TAU_FLOOR,
    ClassificationRule,
    TestBall,
    center_grid,
    check_energy_identity,
    check_main_identity,
    check_spectra,
    reconstruct,
)

log = logging.getLogger("elastomono")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION = 0, 2, 3, 4

_num = {"type": "number"}
_point = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "scene"],
    "$defs": {
        "shape": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["type", "center", "radius"],
                 "properties": {"type": {"const": "disk"}, "center": _point, "radius": _num}},
                {"type": "object", "additionalProperties": False, "required": ["type", "lo", "hi"],
                 "properties": {"type": {"const": "rect"}, "lo": _point, "hi": _point}},
                {"type": "object", "additionalProperties": False, "required": ["type", "members"],
                 "properties": {"type": {"const": "union"},
                                "members": {"type": "array", "minItems": 1,
                                            "items": {"$ref": "#/$defs/shape"}}}},
            ]
        },
    },
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "scene": {
            "type": "object", "additionalProperties": False, "required": ["background"],
            "properties": {
                "background": {
                    "type": "object", "additionalProperties": False,
                    "required": ["lambda0", "mu0", "rho0", "omega"],
                    "properties": {k: _num for k in ("lambda0", "mu0", "rho0", "omega")},
                },
                "inclusions": {
                    "type": "array",
                    "items": {
                        "type": "object", "additionalProperties": False, "required": ["shape"],
                        "properties": {"shape": {"$ref": "#/$defs/shape"}, "psi_lambda": _num,
                                       "psi_mu": _num, "psi_rho": _num},
                    },
                },
            },
        },
        "ladder": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "backend": {"enum": ["auto", "series", "grid"]},
        "cell_size": {"type": ["number", "null"]},
        "sigma": _num,
        "seed": {"type": "integer"},
        "data": {
            "type": "object", "additionalProperties": False,
            "properties": {"mode": {"enum": ["synthetic", "file"]},
                           "files": {"type": "object", "additionalProperties": {"type": "string"}}},
        },
        "sweep": {
            "type": "object", "additionalProperties": False,
            "properties": {"lo": _point, "hi": _point, "n": {"type": "integer"}, "radius": _num,
                           "alpha": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}},
        },
        "thresholds": {
            "type": "object", "additionalProperties": False,
            "properties": {"C_in": {"type": "integer"}, "C_out": {"type": "integer"},
                           "G": {"type": "integer"}},
        },
        "validate": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "N": {"type": "integer"}, "R": {"type": ["number", "null"]},
                "nodes": {"type": "integer"}, "cells": {"type": "integer"},
                "densities": {"type": "integer"}, "partner_scale": _num,
                "tolerances": {
                    "type": "object", "additionalProperties": False,
                    "properties": {k: _num for k in ("energy", "main", "unitarity", "spectra")},
                },
            },
        },
        "localize": {
            "type": "object", "additionalProperties": False, "required": ["B", "D"],
            "properties": {
                "B": {"$ref": "#/$defs/shape"}, "D": {"$ref": "#/$defs/shape"},
                "deltas": {"type": "array", "items": _num, "minItems": 1},
                "variant": {"enum": [0, 1, 2, 3]}, "N": {"type": "integer"},
                "cells": {"type": "integer"},
            },
        },
    },
}

DEFAULTS = {
    "ladder": [32, 64],
    "backend": "auto",
    "cell_size": None,
    "sigma": 1.0,
    "seed": 0,
    "data": {"mode": "synthetic", "files": {}},
    "sweep": {"lo": [-2.0, -2.0], "hi": [2.0, 2.0], "n": 21, "radius": 0.2, "alpha": [0.5, 0.0, 0.0]},
    "thresholds": {"C_in": 3, "C_out": 8, "G": 4},
    "validate": {"N": 64, "R": None, "nodes": 512, "cells": 200, "densities": 5,
                 "partner_scale": 0.5,
                 "tolerances": {"energy": 1e-6, "main": 1e-3, "unitarity": 1e-3, "spectra": 1e-8}},
    "localize": {"deltas": [1e-2, 1e-4, 1e-6], "variant": 1, "N": 64, "cells": 40},
}


class ValidationFailure(ElastomonoError):
    """A validation check exceeded its tolerance."""


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "scene":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    raw: dict  # defaults merged, overrides applied
    scene: MaterialField
    ladder: tuple
    rule: ClassificationRule

    @property
    def hash(self):
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def section(self, name):
        return self.raw[name]


def parse_ladder(text):
    try:
        Ns = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"bad --n-ladder value {text!r}") from exc
    if not Ns:
        raise ConfigError("--n-ladder is empty")
    return Ns


def load_config(source, ladder=None) -> ExperimentConfig:
    """Parse, schema-check and semantically validate a configuration.

    ``source`` is a path or an already-decoded mapping; every numeric field is
    checked against the preconditions of the module that will use it, so a bad
    value fails here rather than mid-run.
    """
    if isinstance(source, dict):
        doc = source
    else:
        try:
            doc = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from exc
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(map(str, exc.absolute_path)) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc
    raw = _merge(DEFAULTS, doc)
    if "localize" not in doc:
        raw.pop("localize")
    if ladder is not None:
        raw["ladder"] = list(ladder)
    try:
        scene = MaterialField.from_dict(raw["scene"])
        Ns = tuple(sorted(set(int(n) for n in raw["ladder"])))
        for N in Ns:
            DirectionGrid(N)
        sw = raw["sweep"]
        TestBall((0.0, 0.0), sw["radius"], tuple(sw["alpha"]))
        if sw["n"] < 1:
            raise ConfigError("sweep.n must be positive")
        th = raw["thresholds"]
        rule = ClassificationRule(th["C_in"], th["C_out"], th["G"])
        if not (math.isfinite(raw["sigma"]) and raw["sigma"] > 0):
            raise ConfigError("sigma must be positive")
        if raw["cell_size"] is not None and not raw["cell_size"] > 0:
            raise ConfigError("cell_size must be positive")
        v = raw["validate"]
        DirectionGrid(v["N"])
        if v["nodes"] < 8 or v["cells"] < 4 or v["densities"] < 1:
            raise ConfigError("validate.nodes >= 8, validate.cells >= 4, validate.densities >= 1")
        if "localize" in raw:
            loc = raw["localize"]
            shape_from_dict(loc["B"])
            shape_from_dict(loc["D"])
            DirectionGrid(loc["N"])
            if any(not d > 0 for d in loc["deltas"]):
                raise ConfigError("localize.deltas must be positive")
        if raw["data"]["mode"] == "file":
            files = raw["data"]["files"]
            missing = [N for N in Ns if str(N) not in files]
            if missing:
                raise ConfigError(f"data.files lacks entries for N = {missing}")
    except ConfigError:
        raise
    except (ElastomonoError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(raw, scene, Ns, rule)


# -- manifest


def _versions():
    try:
        own = metadata.version("elastomono")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"elastomono": own, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "bessel_backend": specfun.BACKEND}


class RunManifest:
    """``manifest.json`` in the output directory: written at start, finalized at exit."""

    def __init__(self, out: Path, command: str, cfg: ExperimentConfig | None):
        self.path = out / "manifest.json"
        self.data = {
            "command": command,
            "status": "running",
            "config_hash": cfg.hash if cfg else None,
            "config": cfg.raw if cfg else None,
            "versions": _versions(),
            "timings": {},
            "sigma": None,
            "unitarity_defects": {},
            "tolerances": {},
            "thresholds": {},
            "outputs": [],
        }
        self.write()

    def write(self):
        self.path.write_text(json.dumps(self.data, indent=2, sort_keys=True) + "\n")

    @contextmanager
    def phase(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.data["timings"][name] = round(time.perf_counter() - t0, 6)

    def output(self, path):
        self.data["outputs"].append(Path(path).name)

    def finalize(self, code, message=None):
        self.data["status"] = "ok" if code == EXIT_OK else "failed"
        self.data["exit_code"] = code
        if message:
            self.data["message"] = message
        self.write()


# -- commands


def _data_ladder(cfg: ExperimentConfig, threads, man: RunManifest):
    """Far-field data for every ``N`` of the ladder, synthesized or read from files."""
    out = {}
    data = cfg.section("data")
    for N in cfg.ladder:
        grid = DirectionGrid(N)
        if data["mode"] == "file":
            F = FarFieldOperator.from_csv(data["files"][str(N)])
            if F.grid != grid or F.background != cfg.scene.background:
                raise ConfigError(f"data file for N={N} does not match the scene")
        else:
            F = assemble(cfg.scene, grid, backend=cfg.raw["backend"], h=cfg.raw["cell_size"],
                         threads=threads)
        out[N] = F
        man.data["unitarity_defects"][str(N)] = unitarity_defect(F, cfg.raw["sigma"])
    if out:
        sigma, _ = calibrate_sigma(out[max(out)])
        man.data["sigma"] = {"used": cfg.raw["sigma"], "calibrated": sigma}
    return out


def cmd_forward(cfg: ExperimentConfig, out: Path, threads: int, man: RunManifest):
    """Far-field operator CSV for every N of the ladder."""
    with man.phase("assemble"):
        ops = _data_ladder(cfg, threads, man)
    with man.phase("write"):
        for N, F in ops.items():
            path = out / f"farfield_N{N}.csv"
            F.to_csv(path)
            man.output(path)
    return EXIT_OK


def _alpha_warning(cfg: ExperimentConfig, alpha):
    if cfg.section("data")["mode"] != "synthetic" or cfg.scene.is_background:
        return
    m = cfg.scene.bounds()[:3]
    for j, (a, mj) in enumerate(zip(alpha, m)):
        if a > 0 and (mj == 0 or a > mj):
            log.warning("test contrast alpha_%d = %g exceeds the scene bound %g; "
                        "inside balls may not be recognized", j + 1, a, mj)


def cmd_recon(cfg: ExperimentConfig, out: Path, threads: int, man: RunManifest):
    """Test-ball sweep: indicator CSV and PGM."""
    sw = cfg.section("sweep")
    alpha = tuple(float(a) for a in sw["alpha"])
    if not any(alpha):
        raise ConfigError("sweep.alpha must be nonzero")
    _alpha_warning(cfg, alpha)
    man.data["thresholds"] = {"C_in": cfg.rule.C_in, "C_out": cfg.rule.C_out, "G": cfg.rule.G,
                              "tau_floor": TAU_FLOOR, "tau_defect_factor": TAU_DEFECT_FACTOR}
    man.write()
    with man.phase("data"):
        ops = _data_ladder(cfg, threads, man)
    centers, shape = center_grid(sw["lo"], sw["hi"], sw["n"])
    with man.phase("sweep"):
        imap = reconstruct(ops, centers, sw["radius"], alpha, rule=cfg.rule, threads=threads,
                           sigma=cfg.raw["sigma"], shape=shape)
    with man.phase("write"):
        imap.to_csv(out / "indicator.csv")
        imap.to_pgm(out / "indicator.pgm")
        man.output(out / "indicator.csv")
        man.output(out / "indicator.pgm")
    counts = {c: imap.classes.count(c) for c in ("INSIDE", "OUTSIDE", "UNDECIDED")}
    man.data["classes"] = counts
    return EXIT_OK


def _series_scene(cfg):
    scene = cfg.scene
    if not scene.is_background and scene.single_disk() is None:
        raise ConfigError("validate needs a background scene or a single active disk")
    return scene


def _partner(scene: MaterialField, scale):
    if scene.is_background:
        return scene
    d = scene.single_disk()
    inc = Inclusion(d.shape, *(scale * c for c in d.contrast))
    return MaterialField(scene.background, (inc,))


def _random_density(rng, N):
    return HerglotzDensity(rng.normal(size=N) + 1j * rng.normal(size=N),
                           rng.normal(size=N) + 1j * rng.normal(size=N))


def cmd_validate(cfg: ExperimentConfig, out: Path, threads: int, man: RunManifest):
    """Identity and unitarity checks against tolerances."""
    scene = _series_scene(cfg)
    v = cfg.section("validate")
    tol = v["tolerances"]
    man.data["tolerances"] = dict(tol)
    man.write()
    sigma = cfg.raw["sigma"]
    grid = DirectionGrid(v["N"])
    R = v["R"]
    if R is None:
        R = 1.0 if scene.is_background else scene.single_disk().shape.max_radius() + 0.5
    rng = np.random.default_rng(cfg.raw["seed"])
    partner = _partner(scene, v["partner_scale"])
    rows = []

    with man.phase("energy"):
        res = max(check_energy_identity(scene, _random_density(rng, grid.N), grid, R,
                                        v["nodes"]).residual for _ in range(v["densities"]))
        rows.append(("energy_identity", res, tol["energy"]))
    with man.phase("main"):
        res = check_main_identity(scene, partner, _random_density(rng, grid.N), grid, R,
                                  cells=v["cells"], nodes=v["nodes"]).residual
        rows.append(("main_identity", res, tol["main"]))
    with man.phase("unitarity"):
        defects = []
        for N in cfg.ladder:
            F = assemble(scene, DirectionGrid(N), backend="series")
            d = unitarity_defect(F, sigma)
            defects.append(d)
            man.data["unitarity_defects"][str(N)] = d
        # non-increasing along the ladder, above a roundoff floor
        mono = all(b <= max(a, 1e-12) for a, b in zip(defects, defects[1:]))
        res = defects[-1] if mono else math.inf
        rows.append(("unitarity", res, tol["unitarity"]))
        cal, _ = calibrate_sigma(F)
        man.data["sigma"] = {"used": sigma, "calibrated": cal}
    with man.phase("spectra"):
        F1 = assemble(scene, grid, backend="series")
        F2 = assemble(partner, grid, backend="series")
        res = check_spectra(F1, F2, sigma).residual
        rows.append(("spectra", res, tol["spectra"]))

    lines = ["check,residual,tolerance,status"]
    failed = []
    for name, res, t in rows:
        ok = res <= t
        if not ok:
            failed.append(name)
        lines.append(f"{name},{res!r},{t!r},{'PASS' if ok else 'FAIL'}")
        print(f"{name:18s} {res:12.3e}  tol {t:8.1e}  {'PASS' if ok else 'FAIL'}")
    (out / "validate.csv").write_text("\n".join(lines) + "\n")
    man.output(out / "validate.csv")
    man.data["checks"] = {name: {"residual": res, "tolerance": t} for name, res, t in rows}
    if failed:
        raise ValidationFailure(f"failed checks: {', '.join(failed)}")
    return EXIT_OK


def _disjoint(B: RegionSamples, D: RegionSamples):
    return not (D.shape.contains(B.points).any() or B.shape.contains(D.points).any())


def cmd_localize(cfg: ExperimentConfig, out: Path, threads: int, man: RunManifest):
    """Localized-potential curve CSV."""
    if "localize" not in cfg.raw:
        raise ConfigError("config has no localize section with regions B and D")
    loc = cfg.section("localize")
    scene = _series_scene(cfg)
    B = RegionSamples.build(shape_from_dict(loc["B"]), cells=loc["cells"], variant=loc["variant"])
    D = RegionSamples.build(shape_from_dict(loc["D"]), cells=loc["cells"], variant=loc["variant"])
    deltas = sorted(loc["deltas"], reverse=True)
    with man.phase("curve"):
        curve = localization_curve(B, D, scene, DirectionGrid(loc["N"]), deltas)
    write_curve_csv(curve, out / "curve.csv")
    man.output(out / "curve.csv")
    for p in curve:
        print(f"delta {p.delta:9.2e}  ratio {p.ratio:12.5e}  |L_B g| {p.norm_B:10.4e}  "
              f"|L_D g| {p.norm_D:10.4e}")
    if _disjoint(B, D):
        ratios = [p.ratio for p in curve]
        nD = [p.norm_D for p in curve]
        ok = all(b > a for a, b in zip(ratios, ratios[1:])) and all(
            b < a for a, b in zip(nD, nD[1:]))
        man.data["monotone_ratio"] = ok
        if not ok:
            raise ValidationFailure("localization ratio is not increasing along the curve")
    return EXIT_OK


COMMANDS = {"forward": cmd_forward, "recon": cmd_recon, "validate": cmd_validate,
            "localize": cmd_localize}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="JSON experiment config")
    common.add_argument("--out", default=".", metavar="DIR", help="output directory")
    common.add_argument("--threads", type=int, default=1, metavar="K", help="worker threads")
    common.add_argument("--n-ladder", metavar="LIST", help='direction counts, e.g. "32,64,128"')
    p = argparse.ArgumentParser(prog="elastomono", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).splitlines()[0])
    return p


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        ladder = parse_ladder(args.n_ladder) if args.n_ladder else None
        cfg = load_config(args.config, ladder)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    man = RunManifest(out, args.command, cfg)
    try:
        code = COMMANDS[args.command](cfg, out, args.threads, man)
        man.finalize(code)
        return code
    except ConfigError as exc:
        code, msg = EXIT_CONFIG, f"config error: {exc}"
    except ValidationFailure as exc:
        code, msg = EXIT_VALIDATION, f"validation failed: {exc}"
    except (SolverError, ElastomonoError, np.linalg.LinAlgError) as exc:
        code, msg = EXIT_SOLVER, f"solver error: {exc}"
    print(msg, file=sys.stderr)
    man.finalize(code, msg)
    return code


if __name__ == "__main__":
    sys.exit(main())
