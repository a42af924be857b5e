"""Batch front end: one subcommand per simulation or check, JSON configs in,
CSV/JSON artifacts out.

Exit status: 0 when every check passes, 1 when a check fails or a
computation raises, 2 when the configuration is invalid (nothing written).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dgff, io
from .domains import DomainKind, Dirichlet, Neumann, RiemannHilbert, annulus, disc, half_plane, strip
from .errors import ConfigInvalid, SleGffError
from .fields import FieldModel
from .kernels import KernelHandle, greens_eval, poisson_eval, schwarz_eval
from .loewner import trace_from_driving
from .sle import DrivingModel, Variant, sample_path, simulate
from .verify import (
    _initial_state,
    capacity_check,
    chordal_probe,
    commutation_delta,
    drift_residual,
    hadamard_fd_check,
    martingale_mc,
    qv_check,
    strip_probe,
    two_ordering_limit,
)

THREADS_ENV = "SLE_GFF_THREADS"

COMMANDS = ("kernel", "simulate", "trace", "verify-drift", "verify-hadamard", "verify-martingale",
            "verify-qv", "verify-commutation", "verify-capacity", "dgff-sample", "dgff-couple",
            "dgff-kappa")

# ------------------------------------------------------------------ schemas

_DRIVING = {
    "variant": ("str", "chordal"),
    "kappa": ("float", 4.0),
    "theta": ("float", 0.0),
    "rho": ("floats", []),
    "marked": ("complexes", []),
    "mu_inner": ("float", 0.0),
    "winding_branch": ("float?", None),
    "top_levels": ("floats", []),
    "neumann_top": ("bool", False),
    "modulus": ("float?", None),
    "base": ("str?", None),
}
_PATHS = {"dt": ("float", 1e-4), "T": ("float", 0.5), "n": ("int", 10_000)}
_DOMAIN = {
    "domain": ("str", "half-plane"),
    "modulus": ("float?", None),
    "secondary": ("str", "dirichlet"),
    "theta": ("float", 0.0),
    "inner_value": ("float", 0.0),
}

SCHEMAS = {
    "kernel": dict(_DOMAIN, kind=("str", "schwarz"), x=("complex?", None),
                   points=("complexes?", None), source=("complex?", None)),
    "simulate": dict(_DRIVING, **_PATHS, points=("complexes", []), stop_radius=("float", 0.2)),
    "trace": dict(_DRIVING, dt=_PATHS["dt"], T=_PATHS["T"]),
    "verify-drift": dict(_DRIVING, n_grid=("int", 20), points=("complexes?", None),
                         with_correction=("bool?", None), tolerance=("float?", None)),
    "verify-hadamard": dict(_DOMAIN, x=("float", 0.0), pairs=("pairs?", None),
                            n_pairs=("int", 10), t=("float", 1e-4),
                            lattice_resolution=("int?", None), tolerance=("float?", None)),
    "verify-martingale": dict(_DRIVING, **_PATHS, points=("complexes?", None),
                              pairs=("index_pairs", [[0, 1]]), field_kappa=("float?", None),
                              stop_radius=("float", 0.2)),
    "verify-qv": dict(_DRIVING, **_PATHS, z1=("complex?", None), z2=("complex?", None),
                      stop_radius=("float", 0.2), tolerance=("float", 0.05)),
    "verify-commutation": {"probe": ("str", "chordal"), "n_probes": ("int", 100),
                           "c": ("float", 1.0), "xi_plus": ("float", 1.0),
                           "xi_minus": ("float", -1.0), "z": ("complex", complex(0, np.pi / 2)),
                           "theta": ("float", 0.0), "tolerance": ("float", 1e-10),
                           "min_delta": ("float", 1e-3), "oracle_tolerance": ("float", 0.05)},
    "verify-capacity": dict(_DOMAIN, x=("complex?", None), radii=("floats", [0.04, 0.01]),
                            hull_ratio=("float", 0.1), n_steps=("int", 200),
                            tolerance=("float", 0.02)),
    "dgff-sample": {"resolution": ("int", 128), "half_width": ("float", 4.0),
                    "n_samples": ("int", 1), "interface": ("bool", True)},
    "dgff-couple": {"resolution": ("int", 128), "half_width": ("float", 4.0),
                    "n_samples": ("int", 2000), "probes": ("complexes", [1j, 2j, 1 + 1j]),
                    "pairs": ("index_pairs", [[0, 1], [0, 2], [1, 2], [0, 0], [2, 2]]),
                    "T": ("float", 1.0), "dt": ("float", 2e-3), "jump_factor": ("float", 1.0)},
    "dgff-kappa": {"resolution": ("int", 256), "half_width": ("float", 2.0),
                   "n_curves": ("int", 500), "radius": ("float?", None),
                   "dt_sample": ("float", 0.03), "tolerance": ("float", 0.5)},
}


@dataclass
class RunConfig:
    command: str
    params: dict
    seed: int = 0
    output: str = "out"
    threads: int = 1

    def provenance(self) -> dict:
        return {"command": self.command, "params": self.params, "seed": self.seed}


def _complex(v, key):
    if isinstance(v, bool):
        raise ConfigInvalid(f"{key}: expected a number or [re, im]")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(a, (int, float)) for a in v):
        return complex(v[0], v[1])
    raise ConfigInvalid(f"{key}: expected a number or [re, im], got {v!r}")


def _coerce(kind: str, v, key):
    if kind.endswith("?"):
        if v is None:
            return None
        kind = kind[:-1]
    if kind == "str":
        if not isinstance(v, str):
            raise ConfigInvalid(f"{key}: expected a string")
        return v
    if kind == "bool":
        if not isinstance(v, bool):
            raise ConfigInvalid(f"{key}: expected true or false")
        return v
    if kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigInvalid(f"{key}: expected an integer")
        return v
    if kind == "float":
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
            raise ConfigInvalid(f"{key}: expected a finite number")
        return float(v)
    if not isinstance(v, list):
        raise ConfigInvalid(f"{key}: expected a list")
    if kind == "floats":
        return [_coerce("float", a, f"{key}[{i}]") for i, a in enumerate(v)]
    if kind == "complexes":
        return [_complex(a, f"{key}[{i}]") for i, a in enumerate(v)]
    if kind == "pairs":
        if not all(isinstance(a, list) and len(a) == 2 for a in v):
            raise ConfigInvalid(f"{key}: expected a list of [z1, z2]")
        return [[_complex(a, f"{key}[{i}][0]"), _complex(b, f"{key}[{i}][1]")]
                for i, (a, b) in enumerate(v)]
    if kind == "index_pairs":
        if not all(isinstance(a, list) and len(a) == 2 for a in v):
            raise ConfigInvalid(f"{key}: expected a list of [i, j]")
        return [[_coerce("int", a, key), _coerce("int", b, key)] for a, b in v]
    raise AssertionError(kind)


def _json_safe(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, list):
        return [_json_safe(a) for a in v]
    return v


def validate_config(text: str, command: str, seed: int | None = None, output: str = "out",
                    threads: int | None = None) -> RunConfig:
    """Parse, default and check a JSON config for ``command``.

    The file holds one object whose keys are the command's parameters; it may
    also carry ``command`` (must match) and ``seed`` (overridden by --seed).
    """
    if command not in SCHEMAS:
        raise ConfigInvalid(f"unknown command {command!r}")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(raw, dict):
        raise ConfigInvalid("config must be a JSON object")
    raw = dict(raw)
    if raw.pop("command", command) != command:
        raise ConfigInvalid("config 'command' does not match the subcommand")
    file_seed = raw.pop("seed", 0)
    schema = SCHEMAS[command]
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigInvalid(f"unknown keys for {command}: {', '.join(unknown)}")
    params = {k: _coerce(kind, raw[k], k) if k in raw else default
              for k, (kind, default) in schema.items()}
    seed = file_seed if seed is None else seed
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigInvalid("seed: expected an integer in [0, 2^64)")
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        try:
            threads = int(env) if env else 1
        except ValueError:
            raise ConfigInvalid(f"{THREADS_ENV} must be an integer")
    if threads < 1:
        raise ConfigInvalid("threads must be positive")
    cfg = RunConfig(command, params, seed, output, threads)
    _check_semantics(cfg)
    cfg.params = {k: _json_safe(v) for k, v in params.items()}
    return cfg


def _positive(params, *keys):
    for k in keys:
        if k in params and params[k] is not None and not params[k] > 0:
            raise ConfigInvalid(f"{k} must be positive")


def _check_semantics(cfg: RunConfig):
    p, cmd = cfg.params, cfg.command
    _positive(p, "dt", "T", "n", "n_grid", "n_pairs", "t", "n_probes", "resolution", "half_width",
              "n_samples", "n_curves", "dt_sample", "stop_radius", "hull_ratio", "n_steps",
              "tolerance", "c", "lattice_resolution", "radius")
    if "variant" in p:
        model = build_driving(p)
        if model.domain.kind is DomainKind.ANNULUS and "T" in p and p["T"] >= model.modulus:
            raise ConfigInvalid(f"ModulusExhausted at parse time: T={p['T']} must be below "
                                f"the modulus {model.modulus}")
        if p.get("field_kappa") is not None and not p["field_kappa"] > 0:
            raise ConfigInvalid("field_kappa must be positive")
    if "domain" in p:
        build_domain(p)
    if cmd == "kernel" and p["kind"] not in ("schwarz", "poisson", "green"):
        raise ConfigInvalid("kind must be schwarz, poisson or green")
    if cmd == "verify-hadamard" and p["domain"] not in ("half-plane", "strip"):
        raise ConfigInvalid("verify-hadamard supports the half-plane and the strip")
    if cmd == "verify-commutation" and p["probe"] not in ("chordal", "strip"):
        raise ConfigInvalid("probe must be chordal or strip")
    if cmd == "verify-capacity" and any(b >= a for a, b in zip(p["radii"], p["radii"][1:])):
        raise ConfigInvalid("radii must decrease")


def build_driving(p: dict, kappa: float | None = None) -> DrivingModel:
    try:
        return DrivingModel(
            p["variant"], kappa=p["kappa"] if kappa is None else kappa, theta=p["theta"],
            rho=tuple(p["rho"]), marked=tuple(_as_complex(p["marked"])), mu_inner=p["mu_inner"],
            winding_branch=p["winding_branch"], top_levels=tuple(p["top_levels"]),
            neumann_top=p["neumann_top"], modulus=p["modulus"],
            base=None if p["base"] is None else Variant(p["base"]))
    except ConfigInvalid:
        raise
    except (SleGffError, ValueError) as exc:
        raise ConfigInvalid(f"driving: {exc}") from exc


def build_domain(p: dict):
    sec = {"dirichlet": Dirichlet(p["inner_value"]), "neumann": Neumann()}
    try:
        if p["secondary"] == "rh":
            sec["rh"] = RiemannHilbert(p["theta"])
        bc = sec[p["secondary"]]
        kind = DomainKind(p["domain"])
        if kind is DomainKind.HALF_PLANE:
            return half_plane()
        if kind is DomainKind.DISC:
            return disc()
        if kind is DomainKind.STRIP:
            return strip(bc)
        if p["modulus"] is None:
            raise ConfigInvalid("annulus needs a modulus")
        return annulus(p["modulus"], bc)
    except ConfigInvalid:
        raise
    except KeyError:
        raise ConfigInvalid("secondary must be dirichlet, neumann or rh")
    except (SleGffError, ValueError) as exc:
        raise ConfigInvalid(f"domain: {exc}") from exc


def _as_complex(v):
    return [complex(a[0], a[1]) if isinstance(a, list) else complex(a) for a in v]


# ----------------------------------------------------------------- helpers


def _report(check, estimate, target, tolerance, params, passed=None, std_error=None) -> dict:
    """A deterministic check in the report schema: the tolerance plays the standard error."""
    se = tolerance if std_error is None else std_error
    ok = abs(estimate - target) <= tolerance if passed is None else passed
    return {"check": check, "params": params, "estimate": float(estimate), "target": float(target),
            "std_error": float(se), "z_score": float((estimate - target) / se), "pass": bool(ok)}


def _default_points(kind: DomainKind, modulus=None):
    if kind is DomainKind.HALF_PLANE:
        return np.array([0.5 + 1j, -1 + 0.7j])
    if kind is DomainKind.STRIP:
        return np.array([0.5 + 1.5j, -1 + 1j])
    if kind is DomainKind.DISC:
        return np.array([0.3 + 0.2j, -0.4j])
    r = np.exp(-modulus * np.array([0.5, 0.35]))
    return r * np.exp(1j * np.array([2.0, -2.2]))


def _grid(kind: DomainKind, n: int, modulus=None):
    """n x n interior grid kept away from the boundary."""
    if kind is DomainKind.HALF_PLANE:
        xs, ys = np.linspace(-2, 2, n), np.linspace(0.1, 2, n)
        return (xs[:, None] + 1j * ys[None, :]).ravel()
    if kind is DomainKind.STRIP:
        xs, ys = np.linspace(-2, 2, n), np.linspace(0.1, np.pi - 0.1, n)
        return (xs[:, None] + 1j * ys[None, :]).ravel()
    r_in = 0.0 if kind is DomainKind.DISC else np.exp(-modulus)
    rs = np.linspace(r_in + 0.1 * (1 - r_in), 0.9, n)
    phis = np.linspace(0.2, 2 * np.pi - 0.2, n)
    return (rs[:, None] * np.exp(1j * phis[None, :])).ravel()


def _zcols(z, prefix="z"):
    z = np.asarray(z, dtype=complex)
    return {f"{prefix}_re": z.real, f"{prefix}_im": z.imag}


def _mc_dicts(reports):
    return [r.to_json() for r in reports]


# ---------------------------------------------------------------- commands


def cmd_kernel(cfg):
    p = cfg.params
    dom = build_domain(p)
    h = KernelHandle(dom)
    x = complex(*p["x"]) if p["x"] is not None else (1 + 0j if dom.kind in (
        DomainKind.DISC, DomainKind.ANNULUS) else 0j)
    z = np.array(_as_complex(p["points"])) if p["points"] is not None else _grid(
        dom.kind, 20, dom.modulus)
    if p["kind"] == "green":
        src = complex(*p["source"]) if p["source"] is not None else z[len(z) // 2 + 3]
        keep = np.abs(z - src) > 1e-12
        z = z[keep]
        val = np.asarray(greens_eval(h, src, z), dtype=complex)
    elif p["kind"] == "poisson":
        val = np.asarray(poisson_eval(h, x.real if dom.kind in (
            DomainKind.HALF_PLANE, DomainKind.STRIP) else x, z), dtype=complex)
    else:
        val = np.asarray(schwarz_eval(h, x.real if dom.kind in (
            DomainKind.HALF_PLANE, DomainKind.STRIP) else x, z), dtype=complex)
    cols = dict(_zcols(z), value_re=val.real, value_im=val.imag)
    return {"csv": cols}, True


def cmd_simulate(cfg):
    p = cfg.params
    model = build_driving(p)
    z0 = np.array(_as_complex(p["points"]), dtype=complex)
    ens = simulate(model, z0, p["T"], p["dt"], p["n"], cfg.seed, p["stop_radius"],
                   threads=cfg.threads)
    cols = {"X": ens.X, "t": ens.t, "stopped": ens.stopped.astype(float), "qv": ens.qv}
    for k in range(len(z0)):
        cols[f"g{k}_re"] = ens.g[:, k].real
        cols[f"g{k}_im"] = ens.g[:, k].imag
    return {"csv": cols}, True


def cmd_trace(cfg):
    p = cfg.params
    model = build_driving(p)
    path = sample_path(model, p["dt"], p["T"], cfg.seed)
    curve = trace_from_driving(model.domain, path)
    return {"csv": dict(t=path.times, **_zcols(curve))}, True


def cmd_verify_drift(cfg):
    p = cfg.params
    d = build_driving(p)
    f = FieldModel(d)
    z = np.array(_as_complex(p["points"])) if p["points"] is not None else _grid(
        d.domain.kind, p["n_grid"], d.modulus)
    corr = (d.kappa != 4.0) if p["with_correction"] is None else p["with_correction"]
    X0, mk = _initial_state(f, d)
    r = np.asarray(drift_residual(f, d, z, X0, mk, 0.0, with_correction=corr), dtype=float)
    tol = p["tolerance"]
    if tol is None:
        # annulus residuals carry finite differences in t and the marked point
        tol = 1e-7 if d.domain.kind is DomainKind.ANNULUS else 1e-9
    rep = _report("drift", float(np.max(np.abs(r))), 0.0, tol,
                  {"variant": p["variant"], "kappa": p["kappa"], "n_points": len(z),
                   "with_correction": corr})
    return {"csv": dict(_zcols(z), residual=r), "json": rep}, rep["pass"]


def cmd_verify_hadamard(cfg):
    p = cfg.params
    dom = build_domain(p)
    if dom.kind is DomainKind.STRIP and not isinstance(dom.secondary, Neumann):
        raise ConfigInvalid("the strip Hadamard check needs secondary = neumann")
    if p["pairs"] is not None:
        pairs = [(complex(*a), complex(*b)) for a, b in p["pairs"]]
    else:
        rng = np.random.default_rng(cfg.seed)
        top = np.pi - 0.6 if dom.kind is DomainKind.STRIP else 2.0
        pairs = []
        while len(pairs) < p["n_pairs"]:
            a = complex(rng.uniform(-2, 2), rng.uniform(0.6, top))
            b = complex(rng.uniform(-2, 2), rng.uniform(0.6, top))
            if abs(a - b) > 0.2:
                pairs.append((a, b))
    out = np.array([hadamard_fd_check(dom, p["x"], a, b, p["t"], p["lattice_resolution"])
                    for a, b in pairs])
    rel = np.abs(out[:, 0] - out[:, 1]) / np.abs(out[:, 1])
    tol = p["tolerance"]
    if tol is None:
        tol = 0.05 if p["lattice_resolution"] else 1e-3
    z1, z2 = np.array([a for a, _ in pairs]), np.array([b for _, b in pairs])
    cols = dict(_zcols(z1, "z1"), **_zcols(z2, "z2"), fd=out[:, 0], reference=out[:, 1],
                rel_error=rel)
    rep = _report("hadamard", float(rel.max()), 0.0, tol,
                  {"domain": p["domain"], "t": p["t"], "n_pairs": len(pairs),
                   "lattice_resolution": p["lattice_resolution"]})
    return {"csv": cols, "json": rep}, rep["pass"]


def _field_for(p, d):
    if p.get("field_kappa") is None:
        return FieldModel(d)
    return FieldModel(build_driving(p, kappa=p["field_kappa"]))


def cmd_verify_martingale(cfg):
    p = cfg.params
    d = build_driving(p)
    z = np.array(_as_complex(p["points"])) if p["points"] is not None else _default_points(
        d.domain.kind, d.modulus)
    reports = martingale_mc(_field_for(p, d), d, z, [tuple(q) for q in p["pairs"]], p["n"],
                            cfg.seed, p["T"], p["dt"], p["stop_radius"], cfg.threads)
    reps = _mc_dicts(reports)
    cols = {"estimate": [r["estimate"] for r in reps], "target": [r["target"] for r in reps],
            "std_error": [r["std_error"] for r in reps], "z_score": [r["z_score"] for r in reps]}
    return {"csv": cols, "json": reps}, all(r["pass"] for r in reps)


def cmd_verify_qv(cfg):
    p = cfg.params
    d = build_driving(p)
    pts = _default_points(d.domain.kind, d.modulus)
    z1 = complex(*p["z1"]) if p["z1"] is not None else pts[0]
    z2 = complex(*p["z2"]) if p["z2"] is not None else pts[1]
    r = qv_check(FieldModel(d), d, z1, z2, p["n"], cfg.seed, p["T"], p["dt"], p["stop_radius"])
    r.tolerance = p["tolerance"]
    rep = r.to_json()
    cols = {"estimate": [rep["estimate"]], "std_error": [rep["std_error"]]}
    return {"csv": cols, "json": rep}, rep["pass"]


def cmd_verify_commutation(cfg):
    p = cfg.params
    if p["probe"] == "chordal":
        rng = np.random.default_rng(cfg.seed)
        deltas, zs = [], []
        for _ in range(p["n_probes"]):
            a, b = np.sort(rng.uniform(-3, 3, 2))
            b = max(b, a + 0.2)
            z = complex(rng.uniform(-3, 3), rng.uniform(0.3, 3))
            deltas.append(commutation_delta(chordal_probe(p["c"], b, a, z)))
            zs.append(z)
        deltas = np.array(deltas)
        rep = _report("commutation", float(np.abs(deltas).max()), 0.0, p["tolerance"],
                      {"probe": "chordal", "n_probes": p["n_probes"]})
        cols = dict(_zcols(zs), delta_re=deltas.real, delta_im=deltas.imag)
        return {"csv": cols, "json": rep}, rep["pass"]
    z = complex(*p["z"])
    probe = strip_probe(p["c"], p["xi_plus"], p["xi_minus"], z, p["theta"])
    delta = complex(commutation_delta(probe))
    two = complex(two_ordering_limit(probe))
    rel = abs(two - delta) / abs(delta)
    params = {"probe": "strip", "theta": p["theta"], "delta": [delta.real, delta.imag],
              "two_ordering": [two.real, two.imag]}
    reps = [
        _report("commutation:nonzero", abs(delta), 0.0, p["min_delta"], params,
                passed=abs(delta) > p["min_delta"]),
        _report("commutation:two-ordering", rel, 0.0, p["oracle_tolerance"], params),
    ]
    cols = {"delta_re": [delta.real], "delta_im": [delta.imag], "two_re": [two.real],
            "two_im": [two.imag]}
    return {"csv": cols, "json": reps}, all(r["pass"] for r in reps)


def cmd_verify_capacity(cfg):
    p = cfg.params
    dom = build_domain(p)
    x = complex(*p["x"]) if p["x"] is not None else (
        1 + 0j if dom.kind in (DomainKind.DISC, DomainKind.ANNULUS) else 0j)
    if dom.kind in (DomainKind.HALF_PLANE, DomainKind.STRIP):
        x = x.real
    rates = np.asarray(capacity_check(dom, x, p["radii"], p["hull_ratio"], p["n_steps"]))
    rep = _report("capacity", float(rates[-1]), 2.0, 2.0 * p["tolerance"],
                  {"domain": p["domain"], "r": p["radii"][-1]})
    return {"csv": {"r": p["radii"], "rate": rates}, "json": rep}, rep["pass"]


def cmd_dgff_sample(cfg):
    p = cfg.params
    lat = dgff.chordal_box(p["resolution"], p["half_width"])
    u = dgff.sample_dgff(lat, cfg.seed, p["n_samples"])
    pts = lat.points.ravel()
    cols = dict(x=pts.real, y=pts.imag)
    for k in range(len(u)):
        cols[f"u{k}"] = u[k].ravel()
    out = {"csv": cols}
    if p["interface"]:
        idx, cs = [], []
        for k in range(len(u)):
            c = dgff.level_line(u[k], lat.h, lat.origin, start=0j)
            idx.append(np.full(len(c), k))
            cs.append(c)
        c = np.concatenate(cs)
        out["csv_interface"] = dict(sample=np.concatenate(idx), **_zcols(c))
    return out, True


def cmd_dgff_couple(cfg):
    p = cfg.params
    reports = dgff.coupling_test("chordal", p["resolution"], p["n_samples"], cfg.seed,
                                 tuple(_as_complex(p["probes"])), tuple(map(tuple, p["pairs"])),
                                 p["T"], p["dt"], p["half_width"], p["jump_factor"], cfg.threads)
    reps = _mc_dicts(reports)
    cols = {"estimate": [r["estimate"] for r in reps], "std_error": [r["std_error"] for r in reps],
            "z_score": [r["z_score"] for r in reps]}
    return {"csv": cols, "json": reps}, all(r["pass"] for r in reps)


def cmd_dgff_kappa(cfg):
    p = cfg.params
    curves = dgff.level_line_curves(p["n_curves"], p["resolution"], p["half_width"], cfg.seed,
                                    p["radius"])
    kappa, drift = dgff.estimate_kappa(curves, dt_sample=p["dt_sample"])
    kappa.tolerance = p["tolerance"]
    reps = _mc_dicts([kappa, drift])
    cols = {"estimate": [r["estimate"] for r in reps], "std_error": [r["std_error"] for r in reps]}
    return {"csv": cols, "json": reps}, all(r["pass"] for r in reps)


DISPATCH = {
    "kernel": cmd_kernel, "simulate": cmd_simulate, "trace": cmd_trace,
    "verify-drift": cmd_verify_drift, "verify-hadamard": cmd_verify_hadamard,
    "verify-martingale": cmd_verify_martingale, "verify-qv": cmd_verify_qv,
    "verify-commutation": cmd_verify_commutation, "verify-capacity": cmd_verify_capacity,
    "dgff-sample": cmd_dgff_sample, "dgff-couple": cmd_dgff_couple, "dgff-kappa": cmd_dgff_kappa,
}


def run(cfg: RunConfig) -> int:
    """Dispatch, write artifacts, return the exit status."""
    out = Path(cfg.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    prov = cfg.provenance()
    try:
        arts, passed = DISPATCH[cfg.command](cfg)
    except ConfigInvalid:
        raise
    except (SleGffError, ValueError, FloatingPointError) as exc:
        io.write_json(f"{out}.error.json", {"error": type(exc).__name__, "message": str(exc),
                                           "config": prov})
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    io.write_csv(f"{out}.csv", arts["csv"], prov, cfg.seed)
    if "csv_interface" in arts:
        io.write_csv(f"{out}.interface.csv", arts["csv_interface"], prov, cfg.seed)
    if "json" in arts:
        io.write_json(f"{out}.json", arts["json"])
    return 0 if passed else 1


_EPILOG = """\
config defaults: dt=1e-4, T=0.5, n=10000 for path-sampling commands
(simulate, trace, verify-martingale, verify-qv); every omitted key takes
its documented default and unknown keys are rejected.  Outputs:
PREFIX.csv (with '#' config/seed headers), PREFIX.json for checks,
PREFIX.error.json when a computation fails.  The thread count comes from
--threads, else the SLE_GFF_THREADS environment variable, else 1.
exit status: 0 pass, 1 check failure, 2 invalid configuration.
"""


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sle-gff", epilog=_EPILOG,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON config file")
    ap.add_argument("--out", required=True, help="output path prefix")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        text = Path(args.config).read_text()
        cfg = validate_config(text, args.command, args.seed, args.out, args.threads)
        return run(cfg)
    except OSError as exc:
        print(json.dumps({"error": "ConfigInvalid", "message": str(exc)}), file=sys.stderr)
        return 2
    except ConfigInvalid as exc:
        print(json.dumps({"error": "ConfigInvalid", "message": str(exc)}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
