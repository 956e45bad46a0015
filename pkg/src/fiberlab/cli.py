"""Configuration-driven runner: every experiment as a subcommand.

JSON config in, deterministic CSV/JSON artifacts out.  One run per process
invocation; outputs are rendered in memory first and written serially at the
end, so a failed run leaves nothing behind.  Every successful run writes a
manifest.json echoing the fully resolved configuration (defaults filled in)
plus size/sha256 for each artifact; reruns with the same config are
byte-identical (floats printed at 17 significant digits).

Exit codes: 0 success -- including "bound violated" findings, which are data
and live in the JSON verdicts; 1 invalid configuration or unreadable input
(nothing is written); 2 numerical failure (non-finite field, guard breach,
singular coefficients).

Flags on every subcommand: --config <path> (required), --out <dir>
(overrides the config's "out"), --threads <n> (0 = auto; falls back to the
FIBERLAB_THREADS environment variable, then auto), --quiet.

The `transform` subcommand reads an envelope CSV (header t,re,im).  Its "z"
is always the decaying-frame coordinate: direction "push" takes the input
at Z = q(z) in the rescaled frame and emits the z-frame field, "pull" does
the reverse.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .closeness import run_closeness
from .cwnoise import CWNoiseParams, IntegrationError, closed_form, singular_frequencies
from .grid import Envelope, TimeGrid, read_envelope_csv
from .orbital import stability_series
from .painleve import CoefficientFamily, SingularCoefficientError, is_integrable
from .propagator import EquationSpec, PropagationError, StepperConfig, propagate
from .serialize import dumps_stable
from .solutions import SolitonSpec, mi_dispersion, soliton, vparam_single_mode
from .transform import TransformMap, norm_ledger, pull_field, push_field

__all__ = ["ConfigError", "main"]


class ConfigError(ValueError):
    """Configuration rejected before any computation or output."""


_NUMERICAL = (PropagationError, IntegrationError, SingularCoefficientError)
_NUM = (int, float)


# ------------------------------------------------------------------ schema
#
# Hand-rolled validation: every key checked, unknown keys rejected with the
# offending path.  A rule is {"type", "required"?, "default"?, "choices"?,
# "nullable"?, "child"? (dict), "length"? (numlist)}.

def _validate(cfg, schema, where="config"):
    if not isinstance(cfg, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = sorted(set(cfg) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}")
    out = {}
    for key, rule in schema.items():
        path = f"{where}.{key}"
        if key not in cfg:
            if rule.get("required"):
                raise ConfigError(f"missing required key {path}")
            if "default" in rule:
                out[key] = rule["default"]
            continue
        val = cfg[key]
        if val is None:
            if rule.get("nullable"):
                out[key] = None
                continue
            raise ConfigError(f"{path} must not be null")
        kind = rule["type"]
        if kind == "num":
            if isinstance(val, bool) or not isinstance(val, _NUM):
                raise ConfigError(f"{path} must be a number")
            val = float(val)
            if not np.isfinite(val):  # json.load admits Infinity/NaN literals
                raise ConfigError(f"{path} must be finite")
        elif kind == "int":
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{path} must be an integer")
        elif kind == "str":
            if not isinstance(val, str):
                raise ConfigError(f"{path} must be a string")
        elif kind == "bool":
            if not isinstance(val, bool):
                raise ConfigError(f"{path} must be a boolean")
        elif kind == "numlist":
            if (not isinstance(val, list) or not val
                    or any(isinstance(x, bool) or not isinstance(x, _NUM) for x in val)):
                raise ConfigError(f"{path} must be a non-empty list of numbers")
            if "length" in rule and len(val) != rule["length"]:
                raise ConfigError(f"{path} must have exactly {rule['length']} entries")
            val = [float(x) for x in val]
        elif kind == "dict":
            val = _validate(val, rule["child"], path)
        else:  # pragma: no cover - schema author error
            raise RuntimeError(f"bad schema type {kind!r}")
        if "choices" in rule and val not in rule["choices"]:
            raise ConfigError(f"{path} must be one of {sorted(rule['choices'])}")
        out[key] = val
    return out


def _validate_variant(cfg, tag, variants, where):
    """Dispatch on cfg[tag] and validate against that variant's schema."""
    if not isinstance(cfg, dict):
        raise ConfigError(f"{where} must be a JSON object")
    kind = cfg.get(tag)
    if kind not in variants:
        raise ConfigError(f"{where}.{tag} must be one of {sorted(variants)}")
    return _validate(cfg, variants[kind], where)


_GRID = {"child": {
    "n": {"type": "int", "required": True},
    "t_min": {"type": "num", "required": True},
    "t_max": {"type": "num", "required": True},
}, "type": "dict", "required": True}

_STEPPER = {"child": {
    "dz": {"type": "num", "required": True},
    "scheme": {"type": "str", "default": "STRANG", "choices": ("STRANG", "LIE")},
    "store_every": {"type": "int", "default": 1},
    "guard_tol": {"type": "num", "default": 1e-8, "nullable": True},
}, "type": "dict", "required": True}

_EQUATION_VARIANTS = {
    "nlse": {"model": {"type": "str", "required": True},
             "c1": {"type": "int", "default": 1, "choices": (-1, 1)},
             "c2": {"type": "num", "required": True}},
    "tnlse": {"model": {"type": "str", "required": True},
              "c1": {"type": "int", "default": 1, "choices": (-1, 1)},
              "c2": {"type": "num", "required": True}},
    "snlse": {"model": {"type": "str", "required": True},
              "rho": {"type": "int", "default": 1, "choices": (-1, 1)}},
}

_INITIAL_VARIANTS = {
    "soliton": {"kind": {"type": "str", "required": True},
                "theta": {"type": "num", "default": 1.0},
                "convention": {"type": "str", "default": "corrected",
                               "choices": ("corrected", "original")}},
    "cw": {"kind": {"type": "str", "required": True},
           "p0": {"type": "num", "required": True}},
    "gaussian": {"kind": {"type": "str", "required": True},
                 "amplitude": {"type": "num", "required": True},
                 "width": {"type": "num", "default": 1.0}},
    "perturbed_soliton": {"kind": {"type": "str", "required": True},
                          "theta": {"type": "num", "default": 1.0},
                          "amplitude": {"type": "num", "required": True},
                          "width": {"type": "num", "default": 1.0}},
    "random_smooth": {"kind": {"type": "str", "required": True},
                      "scale": {"type": "num", "default": 1.0},
                      "modes": {"type": "int", "default": 6},
                      "seed": {"type": "int", "default": 0}},
}

_MAP_VARIANTS = {
    "dimensionless": {"kind": {"type": "str", "required": True},
                      "c2": {"type": "num", "required": True},
                      "c1": {"type": "int", "default": 1, "choices": (-1, 1)},
                      "rho": {"type": "int", "default": 1, "choices": (-1, 1)}},
    "dimensional": {"kind": {"type": "str", "required": True},
                    "alpha": {"type": "num", "required": True},
                    "beta2": {"type": "num", "required": True},
                    "gamma": {"type": "num", "required": True},
                    "kappa": {"type": "num", "required": True},
                    "chi": {"type": "num", "required": True}},
}

_FAMILY_VARIANTS = {
    "tnlse": {"kind": {"type": "str", "required": True},
              "c1": {"type": "int", "default": 1, "choices": (-1, 1)},
              "c2": {"type": "num", "required": True}},
    "lossy_nlse": {"kind": {"type": "str", "required": True},
                   "c1": {"type": "int", "default": 1, "choices": (-1, 1)},
                   "c2": {"type": "num", "required": True}},
    "dimensional": {"kind": {"type": "str", "required": True},
                    "alpha": {"type": "num", "required": True},
                    "beta2": {"type": "num", "required": True},
                    "gamma": {"type": "num", "required": True}},
}

_SCAN = {"child": {
    "min": {"type": "num", "required": True},
    "max": {"type": "num", "required": True},
    "count": {"type": "int", "required": True},
}, "type": "dict"}


# ---------------------------------------------------------------- builders

def _domain(fn, *args, **kwargs):
    """Constructor call with domain errors downgraded to config errors."""
    try:
        return fn(*args, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _build_grid(c) -> TimeGrid:
    return _domain(TimeGrid, c["n"], c["t_min"], c["t_max"])


def _build_stepper(c) -> StepperConfig:
    return _domain(StepperConfig, dz=c["dz"], scheme=c["scheme"],
                   store_every=c["store_every"], guard_tol=c["guard_tol"])


def _build_equation(c) -> EquationSpec:
    if c["model"] == "nlse":
        return _domain(EquationSpec.nlse, c1=c["c1"], c2=c["c2"])
    if c["model"] == "tnlse":
        return _domain(EquationSpec.tnlse, c1=c["c1"], c2=c["c2"])
    return _domain(EquationSpec.snlse, rho=c["rho"])


def _build_initial(c, grid: TimeGrid) -> Envelope:
    kind = c["kind"]
    if kind == "soliton":
        spec = _domain(SolitonSpec, theta=c["theta"], convention=c["convention"])
        return soliton(spec, grid)
    if kind == "cw":
        if c["p0"] <= 0:
            raise ConfigError("initial.p0 must be positive")
        vals = np.sqrt(c["p0"]) * np.ones(grid.n, dtype=complex)
        return Envelope(grid, vals)
    if kind == "gaussian":
        if c["width"] <= 0:
            raise ConfigError("initial.width must be positive")
        vals = c["amplitude"] * np.exp(-((grid.t / c["width"]) ** 2))
        return Envelope(grid, vals.astype(complex))
    if kind == "perturbed_soliton":
        spec = _domain(SolitonSpec, theta=c["theta"])
        if c["width"] <= 0:
            raise ConfigError("initial.width must be positive")
        bump = c["amplitude"] * np.exp(-((grid.t / c["width"]) ** 2))
        return Envelope(grid, soliton(spec, grid).values + bump)
    # random_smooth: band-limited trig polynomial with seeded coefficients
    if c["modes"] < 1:
        raise ConfigError("initial.modes must be >= 1")
    rng = np.random.default_rng(c["seed"])
    coef = rng.normal(size=(2, c["modes"])) + 1j * rng.normal(size=(2, c["modes"]))
    k0 = 2.0 * np.pi / grid.width
    vals = np.zeros(grid.n, dtype=complex)
    for m in range(c["modes"]):
        vals += coef[0, m] * np.exp(1j * (m + 1) * k0 * grid.t)
        vals += coef[1, m] * np.exp(-1j * (m + 1) * k0 * grid.t)
    return Envelope(grid, c["scale"] * vals / c["modes"])


def _build_map(c) -> TransformMap:
    if c["kind"] == "dimensionless":
        return _domain(TransformMap.dimensionless, c["c2"], c1=c["c1"], rho=c["rho"])
    return _domain(TransformMap.dimensional, alpha=c["alpha"], beta2=c["beta2"],
                   gamma=c["gamma"], kappa=c["kappa"], chi=c["chi"])


def _samples(resolved, list_key, scan_key, where) -> np.ndarray:
    """Exactly one of an explicit list or a {min,max,count} scan."""
    vals, scan = resolved.get(list_key), resolved.get(scan_key)
    if (vals is None) == (scan is None):
        raise ConfigError(f"{where} needs exactly one of '{list_key}' or '{scan_key}'")
    if vals is not None:
        return np.asarray(vals, dtype=float)
    if scan["count"] < 2 or not scan["max"] > scan["min"]:
        raise ConfigError(f"{where}.{scan_key} needs max > min and count >= 2")
    return np.linspace(scan["min"], scan["max"], scan["count"])


# ------------------------------------------------------------- rendering

def _fmt(x) -> str:
    return format(float(x), ".17g")


def _render_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(x) for x in row) for row in rows)
    return "\n".join(lines) + "\n"


def _render_envelope(env: Envelope) -> str:
    rows = zip(env.grid.t, env.values.real, env.values.imag)
    return _render_csv(("t", "re", "im"), rows)


def _render_json(obj) -> str:
    try:
        return dumps_stable(obj)
    except ValueError as exc:  # non-finite float: a numerical failure
        raise PropagationError(str(exc), None) from exc


# ------------------------------------------------------------ run plumbing

def _resolve_threads(flag) -> int:
    if flag is None:
        env = os.environ.get("FIBERLAB_THREADS", "").strip()
        if env:
            try:
                flag = int(env)
            except ValueError:
                raise ConfigError(f"FIBERLAB_THREADS must be an integer, got {env!r}")
        else:
            flag = 0
    if flag < 0:
        raise ConfigError("threads must be >= 0 (0 = auto)")
    return flag if flag > 0 else (os.cpu_count() or 1)


def _run(name, prepare, execute, config_path, out, threads, quiet):
    """Shared driver: validate -> compute (no writes) -> emit -> manifest."""
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: cannot read config: {exc}", err=True)
        sys.exit(1)

    try:
        resolved = prepare(raw)
        nthreads = _resolve_threads(threads)
        artifacts = execute(resolved, nthreads)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except _NUMERICAL as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(2)

    out_dir = Path(out) if out else Path(resolved.get("out") or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for fname, text in artifacts:
        data = text.encode("utf-8")
        (out_dir / fname).write_bytes(data)
        entries.append({"file": fname, "bytes": len(data),
                        "sha256": hashlib.sha256(data).hexdigest()})
        if not quiet:
            click.echo(f"wrote {out_dir / fname}")
    manifest = {
        "subcommand": name,
        "config": resolved,
        "threads": nthreads,
        "version": __version__,
        "artifacts": entries,
    }
    (out_dir / "manifest.json").write_bytes(_render_json(manifest).encode("utf-8"))
    if not quiet:
        click.echo(f"wrote {out_dir / 'manifest.json'}")
    sys.exit(0)


def _common(fn):
    for opt in (
        click.option("--quiet", is_flag=True, default=False,
                     help="Suppress per-artifact progress lines."),
        click.option("--threads", default=None, type=int,
                     help="Worker threads; 0 = auto (FIBERLAB_THREADS fallback)."),
        click.option("--out", default=None, type=click.Path(),
                     help="Output directory (overrides the config's 'out')."),
        click.option("--config", "config_path", required=True,
                     type=click.Path(), help="JSON run configuration."),
    ):
        fn = opt(fn)
    return fn


_OUT = {"type": "str"}


@click.group()
@click.version_option(__version__)
def main():
    """Split-step workbench: propagation, frame maps, and verdict reports."""


# ------------------------------------------------------------- propagate

def _prepare_propagate(raw):
    shallow = {
        "out": _OUT,
        "grid": _GRID,
        "stepper": _STEPPER,
        "z_end": {"type": "num", "required": True},
    }
    resolved = _validate({k: v for k, v in raw.items()
                          if k not in ("equation", "initial")}, shallow)
    if "equation" not in raw:
        raise ConfigError("missing required key config.equation")
    if "initial" not in raw:
        raise ConfigError("missing required key config.initial")
    resolved["equation"] = _validate_variant(raw["equation"], "model",
                                             _EQUATION_VARIANTS, "config.equation")
    resolved["initial"] = _validate_variant(raw["initial"], "kind",
                                            _INITIAL_VARIANTS, "config.initial")
    if resolved["z_end"] <= 0:
        raise ConfigError("config.z_end must be positive")
    return resolved


def _exec_propagate(resolved, nthreads):
    grid = _build_grid(resolved["grid"])
    eq = _build_equation(resolved["equation"])
    cfg = _build_stepper(resolved["stepper"])
    u0 = _build_initial(resolved["initial"], grid)
    traj = propagate(eq, u0, resolved["z_end"], cfg)

    artifacts = []
    files, norm_rows, z_values = [], [], []
    for i, snap in enumerate(traj.snapshots):
        fname = f"snap_{i:05d}.csv"
        artifacts.append((fname, _render_envelope(snap.envelope)))
        files.append(fname)
        z_values.append(snap.z)
        norm_rows.append(snap.norms.as_dict())
    index = {"z": z_values, "files": files, "norms": norm_rows,
             "equation": eq.describe(), "stepper": cfg.describe()}
    artifacts.append(("trajectory.json", _render_json(index)))
    return artifacts


@main.command("propagate")
@_common
def cmd_propagate(config_path, out, threads, quiet):
    """March an initial envelope and export snapshots plus norms."""
    _run("propagate", _prepare_propagate, _exec_propagate,
         config_path, out, threads, quiet)


# ------------------------------------------------------------- transform

def _prepare_transform(raw):
    schema = {
        "out": _OUT,
        "direction": {"type": "str", "required": True, "choices": ("push", "pull")},
        "z": {"type": "num", "required": True},
        "input": {"type": "str", "required": True},
    }
    resolved = _validate({k: v for k, v in raw.items() if k != "map"}, schema)
    if "map" not in raw:
        raise ConfigError("missing required key config.map")
    resolved["map"] = _validate_variant(raw["map"], "kind", _MAP_VARIANTS, "config.map")
    if resolved["z"] < 0:
        raise ConfigError("config.z must be nonnegative")
    return resolved


def _exec_transform(resolved, nthreads):
    tmap = _build_map(resolved["map"])
    z = resolved["z"]
    try:
        Z = tmap.q(z)
        if resolved["direction"] == "push":
            src = read_envelope_csv(resolved["input"], z=Z)
            result = push_field(tmap, src, z)
            v_env, q_env = result, src
        else:
            src = read_envelope_csv(resolved["input"], z=z)
            result = pull_field(tmap, src, Z)
            v_env, q_env = src, result
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot transform input: {exc}") from exc
    ledger = norm_ledger(tmap, v_env, q_env)
    report = {"direction": resolved["direction"], "z": z, "Z": float(Z),
              "map": tmap.describe(), "ledger": ledger}
    return [("envelope.csv", _render_envelope(result)),
            ("ledger.json", _render_json(report))]


@main.command("transform")
@_common
def cmd_transform(config_path, out, threads, quiet):
    """Carry an envelope CSV across the frame map and report the ledger."""
    _run("transform", _prepare_transform, _exec_transform,
         config_path, out, threads, quiet)


# --------------------------------------------------------- painleve-check

def _prepare_painleve(raw):
    schema = {
        "out": _OUT,
        "z_span": {"type": "numlist", "length": 2, "default": [0.0, 1.0]},
        "samples": {"type": "int", "default": 41},
        "tol": {"type": "num", "nullable": True, "default": None},
    }
    resolved = _validate({k: v for k, v in raw.items() if k != "family"}, schema)
    if "family" not in raw:
        raise ConfigError("missing required key config.family")
    resolved["family"] = _validate_variant(raw["family"], "kind",
                                           _FAMILY_VARIANTS, "config.family")
    if resolved["samples"] < 2:
        raise ConfigError("config.samples must be >= 2")
    if not resolved["z_span"][1] > resolved["z_span"][0]:
        raise ConfigError("config.z_span must be increasing")
    return resolved


def _exec_painleve(resolved, nthreads):
    fam_cfg = resolved["family"]
    family = None
    if fam_cfg["kind"] == "tnlse":
        eq = _domain(EquationSpec.tnlse, c1=fam_cfg["c1"], c2=fam_cfg["c2"])
    elif fam_cfg["kind"] == "lossy_nlse":
        eq = _domain(EquationSpec.nlse, c1=fam_cfg["c1"], c2=fam_cfg["c2"])
    else:  # dimensional envelope model: f = beta2/2, g = -gamma e^{-alpha z}
        al, b2, ga = fam_cfg["alpha"], fam_cfg["beta2"], fam_cfg["gamma"]
        if b2 == 0 or ga <= 0 or al <= 0:
            raise ConfigError("dimensional family needs beta2 != 0, gamma > 0, alpha > 0")
        eq = EquationSpec.general(
            f=lambda z: b2 / 2.0,
            g=lambda z: -ga * np.exp(-al * z),
            v2=lambda z: al * al / (2.0 * b2))
        family = CoefficientFamily(
            f=lambda z: b2 / 2.0,
            g=lambda z: -ga * np.exp(-al * z),
            df=lambda z: 0.0, d2f=lambda z: 0.0,
            dg=lambda z: ga * al * np.exp(-al * z),
            d2g=lambda z: -ga * al * al * np.exp(-al * z))
    span = tuple(resolved["z_span"])
    ok, dev = is_integrable(eq, tol=resolved["tol"], z_span=span,
                            samples=resolved["samples"], family=family)
    tol_used = resolved["tol"] if resolved["tol"] is not None else 1e-8
    report = {"family": fam_cfg, "z_span": list(span),
              "samples": resolved["samples"], "tol": tol_used,
              "integrable": bool(ok), "deviation": float(dev)}
    return [("painleve.json", _render_json(report))]


@main.command("painleve-check")
@_common
def cmd_painleve(config_path, out, threads, quiet):
    """Integrability verdict for a coefficient family."""
    _run("painleve-check", _prepare_painleve, _exec_painleve,
         config_path, out, threads, quiet)


# -------------------------------------------------------------------- mi

def _prepare_mi(raw):
    schema = {
        "out": _OUT,
        "beta2": {"type": "num", "required": True},
        "gamma": {"type": "num", "required": True},
        "p0": {"type": "num", "required": True},
        "omega": {"type": "numlist"},
        "omega_scan": _SCAN,
    }
    return _validate(raw, schema)


def _exec_mi(resolved, nthreads):
    w = _samples(resolved, "omega", "omega_scan", "config")
    res = _domain(mi_dispersion, resolved["beta2"], resolved["gamma"],
                  resolved["p0"], w)
    rows = zip(res.omega, res.kappa.real, res.kappa.imag, res.gain)
    report = {"band_edge": res.band_edge,
              "beta2": resolved["beta2"], "gamma": resolved["gamma"],
              "p0": resolved["p0"]}
    return [("mi.csv", _render_csv(("omega", "re_kappa", "im_kappa", "gain"), rows)),
            ("mi.json", _render_json(report))]


@main.command("mi")
@_common
def cmd_mi(config_path, out, threads, quiet):
    """Linearized sideband dispersion and gain of the CW state."""
    _run("mi", _prepare_mi, _exec_mi, config_path, out, threads, quiet)


# ------------------------------------------------------------- closeness

def _prepare_closeness(raw):
    schema = {
        "out": _OUT,
        "grid": _GRID,
        "stepper": _STEPPER,
        "c1": {"type": "int", "default": 1, "choices": (-1, 1)},
        "c2": {"type": "num", "required": True},
        "L": {"type": "num", "required": True},
        "delta": {"type": "num", "nullable": True, "default": None},
        "eps": {"type": "num", "default": 1e-2},
        "c_strichartz": {"type": "num", "default": 1.0},
    }
    resolved = _validate({k: v for k, v in raw.items() if k != "initial"}, schema)
    if "initial" not in raw:
        raise ConfigError("missing required key config.initial")
    resolved["initial"] = _validate_variant(raw["initial"], "kind",
                                            _INITIAL_VARIANTS, "config.initial")
    if resolved["L"] <= 0:
        raise ConfigError("config.L must be positive")
    if resolved["c2"] <= 0:
        raise ConfigError("config.c2 must be positive")
    return resolved


def _exec_closeness(resolved, nthreads):
    grid = _build_grid(resolved["grid"])
    cfg = _build_stepper(resolved["stepper"])
    v0 = _build_initial(resolved["initial"], grid)
    report = run_closeness(
        v0, resolved["c1"], resolved["c2"], resolved["L"], cfg,
        delta=resolved["delta"], eps=resolved["eps"],
        c_strichartz=resolved["c_strichartz"], concurrent=nthreads > 1)
    return [("closeness.json", _render_json(report))]


@main.command("closeness")
@_common
def cmd_closeness(config_path, out, threads, quiet):
    """Two-model distance run with differential-inequality and envelope checks."""
    _run("closeness", _prepare_closeness, _exec_closeness,
         config_path, out, threads, quiet)


# -------------------------------------------------------------- cw-noise

def _prepare_cwnoise(raw):
    schema = {
        "out": _OUT,
        "params": {"type": "dict", "required": True, "child": {
            "alpha": {"type": "num", "required": True},
            "beta2": {"type": "num", "required": True},
            "gamma": {"type": "num", "required": True},
            "p0": {"type": "num", "required": True},
        }},
        "convention": {"type": "str", "default": "corrected",
                       "choices": ("corrected", "original")},
        "constants": {"type": "numlist", "length": 3, "nullable": True,
                      "default": None},
        "z_scan": _SCAN | {"required": True},
        "omega": {"type": "numlist"},
        "omega_scan": _SCAN,
        "exclusion_radius": {"type": "num", "default": 1e-3},
    }
    resolved = _validate(raw, schema)
    if resolved["z_scan"]["min"] != 0.0:
        raise ConfigError("config.z_scan.min must be 0 (noise grows from launch)")
    return resolved


def _exec_cwnoise(resolved, nthreads):
    p = resolved["params"]
    params = _domain(CWNoiseParams, alpha=p["alpha"], beta2=p["beta2"],
                     gamma=p["gamma"], p0=p["p0"])
    zs = _samples({"z": None, "z_scan": resolved["z_scan"]}, "z", "z_scan", "config")
    omegas = _samples(resolved, "omega", "omega_scan", "config")
    conv = resolved["convention"]
    radius = resolved["exclusion_radius"]
    constants = tuple(resolved["constants"]) if resolved["constants"] else None

    roots = singular_frequencies(params)
    positive = [r for r in roots if r > 0]
    kept, excluded = [], []
    for w in omegas:
        near = min(abs(abs(w) - r) for r in positive)
        (excluded if conv == "original" and near < radius else kept).append(float(w))

    rows = []
    for w in kept:
        A, B, Phi = closed_form(params, zs, w, convention=conv,
                                constants=constants, exclusion_radius=radius)
        rows.extend((w, z, a, b, ph) for z, a, b, ph in zip(zs, A, B, Phi))
    report = {"convention": conv,
              "singular_omegas": [float(r) for r in roots],
              "excluded_omegas": excluded,
              "exclusion_radius": radius,
              "evaluated_omegas": kept}
    return [("cw_noise.csv", _render_csv(("omega", "z", "A", "B", "Phi"), rows)),
            ("singularities.json", _render_json(report))]


@main.command("cw-noise")
@_common
def cmd_cwnoise(config_path, out, threads, quiet):
    """Closed-form CW noise response over a frequency/distance table."""
    _run("cw-noise", _prepare_cwnoise, _exec_cwnoise,
         config_path, out, threads, quiet)


# --------------------------------------------------------------- orbital

def _prepare_orbital(raw):
    schema = {
        "out": _OUT,
        "grid": _GRID,
        "stepper": _STEPPER,
        "z_end": {"type": "num", "required": True},
        "theta": {"type": "num", "default": 1.0},
        "reference": {"type": "dict", "default": {"theta": 1.0},
                      "child": {"theta": {"type": "num", "default": 1.0}}},
    }
    resolved = _validate({k: v for k, v in raw.items() if k != "initial"}, schema)
    if "initial" not in raw:
        raise ConfigError("missing required key config.initial")
    resolved["initial"] = _validate_variant(raw["initial"], "kind",
                                            _INITIAL_VARIANTS, "config.initial")
    if resolved["z_end"] <= 0:
        raise ConfigError("config.z_end must be positive")
    if resolved["theta"] <= 0:
        raise ConfigError("config.theta must be positive")
    return resolved


def _exec_orbital(resolved, nthreads):
    grid = _build_grid(resolved["grid"])
    cfg = _build_stepper(resolved["stepper"])
    u0 = _build_initial(resolved["initial"], grid)
    ref = soliton(_domain(SolitonSpec, theta=resolved["reference"]["theta"]), grid)
    # orbit tracking is defined against the focusing rescaled model
    traj = propagate(EquationSpec.snlse(1), u0, resolved["z_end"], cfg)
    rows = stability_series(traj, ref, theta=resolved["theta"])
    report = {"theta": resolved["theta"],
              "reference_theta": resolved["reference"]["theta"],
              "series": rows}
    return [("orbital.json", _render_json(report))]


@main.command("orbital")
@_common
def cmd_orbital(config_path, out, threads, quiet):
    """Orbit-distance and energy time series for a propagated pulse."""
    _run("orbital", _prepare_orbital, _exec_orbital,
         config_path, out, threads, quiet)


# ---------------------------------------------------------------- vparam

def _prepare_vparam(raw):
    schema = {
        "out": _OUT,
        "core_radius": {"type": "num", "required": True},
        "wavelength": {"type": "num", "required": True},
        "n1": {"type": "num", "required": True},
        "n2": {"type": "num", "required": True},
    }
    return _validate(raw, schema)


def _exec_vparam(resolved, nthreads):
    v, single = _domain(vparam_single_mode, resolved["core_radius"],
                        resolved["wavelength"], resolved["n1"], resolved["n2"])
    report = {"v": v, "single_mode": single, "threshold": 2.405}
    return [("vparam.json", _render_json(report))]


@main.command("vparam")
@_common
def cmd_vparam(config_path, out, threads, quiet):
    """Normalized frequency of a step-index core and the single-mode verdict."""
    _run("vparam", _prepare_vparam, _exec_vparam,
         config_path, out, threads, quiet)
