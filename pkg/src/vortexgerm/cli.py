"""Command-line driver: ``vortexgerm <command> --config FILE --out DIR``.

Every run writes ``manifest.json`` (resolved configuration, package version,
emitted files) next to its CSV/text artifacts.  Failures print one line
``<CODE>: <message>`` on stderr and exit with 2 (configuration), 3 (numerical
failure) or 4 (I/O).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .curve import circle_state, write_curve_csv
from .errors import ConfigError, NumericalError, TimeMismatchError, VortexGermError
from .hes import HesConfig, integrate, write_monitors
from .moments import init_moments_from_ansatz, integrate_moments, write_moments_csv
from .nlse import SolverConfig, evolve, write_nlse_monitors
from .steady import (build_linearized, evolve_deformation, solve_steady, steady_residuals,
                     write_deformation_csv)
from .symbols import ModelParams, gpe_symbols
from .wavefield import (build_initial_psi, count_defects, density_and_phase, net_charge_inside,
                        write_grid_csv)

__all__ = ["main", "run", "RunConfig", "emit_curve_overlay", "COMMANDS", "load_config"]

COMMANDS = ("steady", "evolve-hes", "evolve-nlse", "compare", "linearize", "build-initial", "moments")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

# numerics may default, physics may not
SECTION_DEFAULTS = {
    "hes": {"Ns": 256, "dt": 1e-3, "t_end": 3.0, "save_every": 500, "monitor_every": 10},
    "nlse": {"nx": 128, "ny": 128, "Lx": 8.0, "Ly": 8.0, "dt": 5e-4, "t_end": 3.0,
             "save_every": 2000, "monitor_every": 100, "defect_floor": 1e-6},
    "linearize": {"t0": 0.75, "t_end": 1.75, "dt": 1e-3, "Ns": 128, "save_every": 250},
    "moments": {"Ns": 32, "dt": 1e-3, "t_end": 0.5, "save_every": 100},
    "build_initial": {"nx": 256, "ny": 256, "Lx": 8.0, "Ly": 8.0, "defect_floor": 1e-6},
    "compare": {"sample_dt": 0.05, "t_min": 0.5, "overlay_times": [3.0], "tolerance": 0.15},
}
_INT_KEYS = {"Ns", "save_every", "monitor_every", "nx", "ny"}


@dataclass
class RunConfig:
    command: str
    params: ModelParams
    sections: dict
    out: str
    threads: int = 1
    files: list = field(default_factory=list)

    def resolved(self) -> dict:
        return {"command": self.command, "params": self.params.to_dict(), **self.sections}


def _section(raw: dict, name: str) -> dict:
    given = raw.get(name, {})
    if not isinstance(given, dict):
        raise ConfigError(f"section {name!r} must be an object")
    defaults = SECTION_DEFAULTS[name]
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(sorted(unknown))}")
    out = dict(defaults)
    for key, value in given.items():
        if isinstance(defaults[key], list):
            if not isinstance(value, list):
                raise ConfigError(f"{name}.{key} must be a list")
            try:
                vals = [float(v) for v in value]
            except (TypeError, ValueError):
                raise ConfigError(f"{name}.{key} must hold numbers") from None
            if not all(math.isfinite(v) for v in vals):
                raise ConfigError(f"{name}.{key} must be finite")
            out[key] = vals
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}.{key} must be a number")
        if not math.isfinite(value):
            raise ConfigError(f"{name}.{key} must be finite")
        if key in _INT_KEYS:
            if int(value) != value or value < 1:
                raise ConfigError(f"{name}.{key} must be a positive integer")
            value = int(value)
        out[key] = value
    return out


def load_config(raw: dict, command: str, out: str, threads: int = 1) -> RunConfig:
    """Validate a parsed JSON configuration."""
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(raw) - set(SECTION_DEFAULTS) - {"params", "command"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    if "command" in raw and raw["command"] != command:
        raise ConfigError(f"config names command {raw['command']!r}, CLI asked for {command!r}")
    if "params" not in raw or not isinstance(raw["params"], dict):
        raise ConfigError("missing 'params' object")
    params = ModelParams.from_dict(raw["params"])
    sections = {name: _section(raw, name) for name in SECTION_DEFAULTS}
    return RunConfig(command=command, params=params, sections=sections, out=out, threads=threads)


def _fmt_t(t: float) -> str:
    return "%.4f" % t


def _write_json(cfg: RunConfig, name: str, obj) -> None:
    path = os.path.join(cfg.out, name)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    cfg.files.append(name)


def _add(cfg: RunConfig, name: str) -> str:
    cfg.files.append(name)
    return os.path.join(cfg.out, name)


def _steady_payload(params, circle):
    return {"Rbar": circle.Rbar, "Prbar": circle.Prbar, "omegabar": circle.omegabar,
            "mubar0": circle.mubar0, "s0": circle.s0, "period": circle.period,
            "iterations": circle.iterations,
            "residuals_scaled": [float(v) for v in circle.residuals],
            "residuals_raw": [float(v) for v in steady_residuals(
                (circle.Rbar, circle.Prbar, circle.omegabar, circle.mubar0), params)],
            "steady_mass": 2 * math.pi * circle.mubar0}


def _run_steady(cfg: RunConfig):
    circle = solve_steady(cfg.params)
    _write_json(cfg, "steady.json", _steady_payload(cfg.params, circle))


def _hes_run(cfg: RunConfig, monitor_every=None, save_every=None):
    h = cfg.sections["hes"]
    p = cfg.params
    hc = HesConfig(dt=h["dt"], t_end=h["t_end"], Ns=h["Ns"],
                   save_every=save_every or h["save_every"],
                   monitor_every=monitor_every or h["monitor_every"])
    c0 = circle_state(p.R, p.Pr, p.mu0, h["Ns"])
    return integrate(c0, gpe_symbols(p), p.Lambda, p.kappa, hc)


def _run_evolve_hes(cfg: RunConfig):
    res = _hes_run(cfg)
    write_monitors(_add(cfg, "monitors.csv"), res.monitors)
    for snap in res.snapshots:
        write_curve_csv(_add(cfg, f"curve_t{_fmt_t(snap.t)}.csv"), snap)


def _nlse_config(cfg: RunConfig, monitor_every=None, save_every=None) -> SolverConfig:
    n = cfg.sections["nlse"]
    return SolverConfig(params=cfg.params, nx=n["nx"], ny=n["ny"], Lx=n["Lx"], Ly=n["Ly"],
                        dt=n["dt"], t_end=n["t_end"],
                        save_every=save_every or n["save_every"],
                        monitor_every=monitor_every or n["monitor_every"],
                        defect_floor=n["defect_floor"])


def _run_evolve_nlse(cfg: RunConfig):
    sc = _nlse_config(cfg)
    f0 = build_initial_psi(cfg.params, sc.nx, sc.ny, sc.Lx, sc.Ly)
    res = evolve(f0, sc, workers=cfg.threads)
    write_nlse_monitors(_add(cfg, "nlse_monitors.csv"), res.monitors)
    for snap in res.snapshots:
        snap.save(_add(cfg, f"field_t{_fmt_t(snap.t)}.txt"))


def _run_build_initial(cfg: RunConfig):
    b = cfg.sections["build_initial"]
    p = cfg.params
    f0 = build_initial_psi(p, b["nx"], b["ny"], b["Lx"], b["Ly"])
    f0.save(_add(cfg, "psi0.txt"))
    rho, phase = density_and_phase(f0)
    write_grid_csv(_add(cfg, "density.csv"), rho)
    write_grid_csv(_add(cfg, "phase.csv"), phase)
    defects = count_defects(f0, b["defect_floor"])
    _write_json(cfg, "initial_summary.json", {
        "norm2": f0.norm2(), "curve_mass": 2 * math.pi * p.mu0, "norm2_closed_form": p.mu0 * math.pi / p.gamma,
        "net_charge_inside_R": net_charge_inside(f0, p.R, 0.0),
        "n_defects_above_floor": len(defects)})


def _run_linearize(cfg: RunConfig):
    lz = cfg.sections["linearize"]
    p = cfg.params
    circle = solve_steady(p)
    _write_json(cfg, "steady.json", _steady_payload(p, circle))
    coeffs = build_linearized(p.with_(deltaK=(0.0, 0.0)), circle)
    _write_json(cfg, "linearized.json", {"a": coeffs.a, "b": coeffs.b,
                                         "a_tilde_0": float(coeffs.a_tilde(0.0)),
                                         "deltaK": list(p.deltaK)})
    traj = evolve_deformation(coeffs, p, t0=lz["t0"], t_end=lz["t_end"], dt=lz["dt"], Ns=lz["Ns"],
                              save_every=lz["save_every"])
    for st in traj:
        write_deformation_csv(_add(cfg, f"deform_t{_fmt_t(st.t)}.csv"), st)


def _run_moments(cfg: RunConfig):
    m = cfg.sections["moments"]
    p = cfg.params
    c0 = circle_state(p.R, p.Pr, p.mu0, m["Ns"])
    st0 = init_moments_from_ansatz(p, c0)
    out = integrate_moments(c0, st0, gpe_symbols(p), p.Lambda, p.kappa, m["dt"], m["t_end"],
                            save_every=m["save_every"])
    for curve, st in out:
        write_moments_csv(_add(cfg, f"moments_t{_fmt_t(st.t)}.csv"), curve.s, st)


def emit_curve_overlay(curve_snapshots, field_snapshots, path, dt: float,
                       density_floor: float = 1e-6) -> int:
    """Write curve points and defect positions per matched time.

    Columns ``t, kind, index, x1, x2, value``: curve rows carry ``s`` in
    ``value``, defect rows the integer charge.  Every curve snapshot must
    have a field snapshot within ``dt / 2``.

    Returns the number of blocks written.
    """
    if len(curve_snapshots) != len(field_snapshots):
        raise TimeMismatchError("curve and field snapshot counts differ")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "kind", "index", "x1", "x2", "value"])
        for curve, fld in zip(curve_snapshots, field_snapshots):
            if abs(curve.t - fld.t) > 0.5 * dt:
                raise TimeMismatchError(f"curve t={curve.t:.6g} vs field t={fld.t:.6g}")
            for i in range(curve.ns):
                w.writerow(["%.17g" % curve.t, "curve", i, "%.17g" % curve.X[i, 0],
                            "%.17g" % curve.X[i, 1], "%.17g" % curve.s[i]])
            for j, (x1, x2, q) in enumerate(count_defects(fld, density_floor)):
                w.writerow(["%.17g" % curve.t, "defect", j, "%.17g" % x1, "%.17g" % x2, "%d" % q])
    return len(curve_snapshots)


def localization_fraction(curve, fld, hbar: float, rel_level: float = 1e-3,
                          width_factor: float = 1.5) -> float:
    """Fraction of curve points with PDE density >= ``rel_level * max`` within
    distance ``width_factor * sqrt(hbar)``."""
    rho = np.abs(fld.values) ** 2
    mask = rho >= rel_level * rho.max()
    X1, X2 = fld.mesh()
    pts = np.stack([X1[mask], X2[mask]], axis=1)
    if len(pts) == 0:
        return 0.0
    from scipy.spatial import cKDTree

    dist, _ = cKDTree(pts).query(curve.X)
    return float(np.mean(dist <= width_factor * math.sqrt(hbar)))


def _aligned_stride(sample_dt, dt, name):
    k = sample_dt / dt
    if abs(k - round(k)) > 1e-9 * k or round(k) < 1:
        raise ConfigError(f"compare.sample_dt must be a multiple of {name}.dt")
    return int(round(k))


def _run_compare(cfg: RunConfig):
    c = cfg.sections["compare"]
    h, n = cfg.sections["hes"], cfg.sections["nlse"]
    p = cfg.params
    if abs(h["t_end"] - n["t_end"]) > 1e-12:
        raise ConfigError("hes.t_end and nlse.t_end must agree for compare")
    kh = _aligned_stride(c["sample_dt"], h["dt"], "hes")
    kn = _aligned_stride(c["sample_dt"], n["dt"], "nlse")
    hes = _hes_run(cfg, monitor_every=kh, save_every=kh)
    sc = _nlse_config(cfg, monitor_every=kn, save_every=kn)
    f0 = build_initial_psi(p, sc.nx, sc.ny, sc.Lx, sc.Ly)
    radius = {round(s.t / c["sample_dt"]): float(np.mean(np.hypot(*s.X.T))) for s in hes.snapshots}

    def curve_radius(t):
        return radius.get(round(t / c["sample_dt"]), p.R)

    nl = evolve(f0, sc, curve_radius=curve_radius, workers=cfg.threads)
    write_monitors(_add(cfg, "monitors.csv"), hes.monitors)
    write_nlse_monitors(_add(cfg, "nlse_monitors.csv"), nl.monitors)
    th, mh = hes.monitors["t"], hes.monitors["total_mass"]
    tn, mn = nl.monitors["t"], nl.monitors["norm2"]
    tol_t = 0.5 * min(h["dt"], n["dt"])
    rows = []
    for t, ms in zip(th, mh):
        j = int(np.argmin(np.abs(tn - t)))
        if abs(tn[j] - t) > tol_t:
            continue
        rows.append((t, ms, mn[j], abs(ms - mn[j]) / abs(mn[j])))
    with open(_add(cfg, "compare.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mass_semiclassical", "mass_nlse", "rel_diff"])
        for r in rows:
            w.writerow(["%.17g" % v for v in r])
    window = [r[3] for r in rows if r[0] >= c["t_min"] - tol_t]
    curves, fields = [], []
    for t_ov in c["overlay_times"]:
        cs = [s for s in hes.snapshots if abs(s.t - t_ov) <= tol_t]
        fs = [f for f in nl.snapshots if abs(f.t - t_ov) <= tol_t]
        if cs and fs:
            curves.append(cs[0])
            fields.append(fs[0])
    emit_curve_overlay(curves, fields, _add(cfg, "overlay.csv"), min(h["dt"], n["dt"]),
                       n["defect_floor"])
    loc = [localization_fraction(cv, fd, p.hbar) for cv, fd in zip(curves, fields)]
    _write_json(cfg, "compare_summary.json", {
        "max_rel_diff": max(window) if window else None, "t_min": c["t_min"],
        "tolerance": c["tolerance"], "within_tolerance": bool(window and max(window) <= c["tolerance"]),
        "localization_fraction": loc})


_RUNNERS = {
    "steady": _run_steady,
    "evolve-hes": _run_evolve_hes,
    "evolve-nlse": _run_evolve_nlse,
    "compare": _run_compare,
    "linearize": _run_linearize,
    "build-initial": _run_build_initial,
    "moments": _run_moments,
}


def run(cfg: RunConfig) -> int:
    """Execute one pipeline and write its manifest."""
    os.makedirs(cfg.out, exist_ok=True)
    if not os.access(cfg.out, os.W_OK):
        raise OSError(f"output directory {cfg.out!r} is not writable")
    _RUNNERS[cfg.command](cfg)
    manifest = {"command": cfg.command, "version": __version__, "config": cfg.resolved(),
                "threads": cfg.threads, "files": sorted(cfg.files)}
    with open(os.path.join(cfg.out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("VORTEXGERM_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            raise ConfigError("VORTEXGERM_THREADS must be an integer") from None
    return 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="vortexgerm", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON configuration file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    args = ap.parse_args(argv)
    try:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        cfg = load_config(raw, args.command, args.out, _threads(args.threads))
        return run(cfg)
    except ConfigError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, VortexGermError) as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"IO_ERROR: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, FloatingPointError, ArithmeticError) as exc:
        print(f"NUMERICAL_FAILURE: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
