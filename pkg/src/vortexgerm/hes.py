"""Zeroth-order Hamilton–Ehrenfest system on a discretized closed curve.

The state is ``(mu, Z, S)`` sampled on the periodic s-grid::

    mu_t = -2 Lambda mu (Vb(Z) + kappa \\oint mu(r) Wb(Z(s), Z(r)) dr)
    Z_t  = J V_z(Z) + kappa \\oint mu(r) J W_z(Z(s), Z(r)) dr
    S_t  = <P, X_t> - V(Z) - kappa \\oint mu(r) W(Z(s), Z(r)) dr

Nonlocal integrals are O(Ns^2) direct sums with the trapezoid weight.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .curve import TWO_PI, CurveState, action_integral, convexity_index, quad_s
from .errors import ConfigError, NumericalError
from .symbols import SymbolSet

__all__ = ["HesConfig", "HesResult", "hes_rhs", "sdot", "integrate", "nonlocal_terms",
           "write_monitors", "MONITOR_COLUMNS"]

MONITOR_COLUMNS = ("t", "total_mass", "action_integral", "convexity_index", "r_min", "r_max")


@dataclass(frozen=True)
class HesConfig:
    """Fixed-step RK4 settings.

    Parameters
    ----------
    dt : float
        Time step, > 0.
    t_end : float
        Final time (integration starts at the curve's own ``t``).
    Ns : int
        Grid size the initial curve must carry.
    save_every : int
        Snapshot stride in steps; the final state is always kept.
    mu_floor : float
        Abort threshold for negative weight.
    monitor_every : int
        Monitor stride in steps.
    """

    dt: float = 1e-3
    t_end: float = 1.0
    Ns: int = 256
    save_every: int = 100
    mu_floor: float = -1e-10
    monitor_every: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError("dt must be finite and > 0")
        if not (np.isfinite(self.t_end) and self.t_end >= 0):
            raise ConfigError("t_end must be finite and >= 0")
        if self.Ns < 8 or self.Ns % 2:
            raise ConfigError("Ns must be even and >= 8")
        if self.save_every < 1 or self.monitor_every < 1:
            raise ConfigError("save_every and monitor_every must be >= 1")


@dataclass
class HesResult:
    snapshots: list
    monitors: dict = field(default_factory=dict)

    @property
    def final(self) -> CurveState:
        return self.snapshots[-1]


def _kernel_pair(symbols: SymbolSet, Z, t, breve: bool):
    deriv = symbols.W_breve_deriv if breve else symbols.W_deriv
    Zs = Z[:, None, :]
    Zr = Z[None, :, :]
    return deriv(Zs, Zr, t, 0, 0), deriv(Zs, Zr, t, 1, 0)


def nonlocal_terms(Z, mu, symbols: SymbolSet, t: float = 0.0):
    """``(\\oint mu W, \\oint mu W_z, \\oint mu Wb)`` evaluated at every s.

    Returns arrays of shape ``(Ns,)``, ``(Ns, 2n)``, ``(Ns,)``.
    """
    ns = len(mu)
    w = mu * (TWO_PI / ns)
    gamma = symbols.extras.get("kernel_gamma")
    if gamma is not None:
        # fast path for the Gaussian position kernel
        n = symbols.n
        X = Z[:, n:]
        d = X[:, None, :] - X[None, :, :]
        g = np.exp(-np.sum(d * d, axis=-1) / gamma**2) / (np.pi * gamma**2)
        gw = g * w[None, :]
        Wint = gw.sum(axis=1)
        Wz = np.zeros_like(Z)
        Wz[:, n:] = (-2.0 / gamma**2) * np.einsum("sr,sri->si", gw, d)
        return Wint, Wz, Wint
    Wm, Wzm = _kernel_pair(symbols, Z, t, breve=False)
    Wint = Wm @ w
    Wz = np.einsum("sra,r->sa", Wzm, w)
    if symbols.W_breve_deriv is symbols.W_deriv:
        Wb = Wint
    else:
        Wb = symbols.W_breve_deriv(Z[:, None, :], Z[None, :, :], t, 0, 0) @ w
    return Wint, Wz, Wb


def _rhs_all(curve_mu, Z, symbols: SymbolSet, Lambda, kappa, t):
    n = symbols.n
    J = symbols.J
    Wint, Wz, Wb = nonlocal_terms(Z, curve_mu, symbols, t)
    Vz = symbols.V_z(Z, t)
    Zdot = (Vz + kappa * Wz) @ J.T
    if Lambda == 0:
        mudot = np.zeros_like(curve_mu)
    else:
        mudot = -2.0 * Lambda * curve_mu * (symbols.V_breve(Z, t) + kappa * Wb)
    Sdot = np.sum(Z[:, :n] * Zdot[:, n:], axis=1) - symbols.V(Z, t) - kappa * Wint
    return mudot, Zdot, Sdot


def hes_rhs(curve: CurveState, symbols: SymbolSet, Lambda: float, kappa: float):
    """Time derivatives ``(mu_t, Z_t)`` of the Hamilton–Ehrenfest system.

    ``Z_t`` has shape ``(Ns, 2n)`` in the ``(P, X)`` ordering.
    """
    mudot, Zdot, _ = _rhs_all(curve.mu, curve.Z, symbols, Lambda, kappa, curve.t)
    return mudot, Zdot


def sdot(curve: CurveState, symbols: SymbolSet, kappa: float, Zdot=None):
    """Action rate ``S_t = <P, X_t> - V - kappa \\oint mu W``."""
    n = symbols.n
    Z = curve.Z
    Wint, Wz, _ = nonlocal_terms(Z, curve.mu, symbols, curve.t)
    if Zdot is None:
        Zdot = (symbols.V_z(Z, curve.t) + kappa * Wz) @ symbols.J.T
    return np.sum(curve.P * Zdot[:, n:], axis=1) - symbols.V(Z, curve.t) - kappa * Wint


def _check_state(mu, Z, S, t, mu_floor):
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(Z)) and np.all(np.isfinite(S))):
        raise NumericalError(f"non-finite field at t={t:.6g}")
    if np.min(mu) < mu_floor:
        raise NumericalError(f"negative weight mu={np.min(mu):.3e} at t={t:.6g}")


def _monitor_row(curve: CurveState):
    r = np.sqrt(np.sum(curve.X**2, axis=1))
    try:
        ci = convexity_index(curve)
    except NumericalError:
        ci = float("nan")
    return (curve.t, float(quad_s(curve.mu)), action_integral(curve), ci,
            float(r.min()), float(r.max()))


def integrate(curve0: CurveState, symbols: SymbolSet, Lambda: float, kappa: float,
              config: HesConfig, callback=None) -> HesResult:
    """Classic RK4 with fixed step applied jointly to ``(mu, Z, S)``.

    Returns snapshots every ``save_every`` steps (plus the first and last) and
    monitor series keyed by :data:`MONITOR_COLUMNS`.
    """
    if curve0.ns != config.Ns:
        raise ConfigError(f"curve has Ns={curve0.ns}, config expects {config.Ns}")
    n = curve0.n
    _check_state(curve0.mu, curve0.Z, curve0.S, curve0.t, config.mu_floor)
    nsteps = max(int(round((config.t_end - curve0.t) / config.dt)), 0)
    dt = config.dt
    mu, Z, S = curve0.mu.copy(), curve0.Z.copy(), curve0.S.copy()
    t0 = curve0.t

    def make(mu_, Z_, S_, t_):
        return CurveState(s=curve0.s, P=Z_[:, :n].copy(), X=Z_[:, n:].copy(), mu=mu_.copy(),
                          S=S_.copy(), t=t_, S_winding=curve0.S_winding)

    snaps = [make(mu, Z, S, t0)]
    rows = [_monitor_row(snaps[0])]
    for k in range(1, nsteps + 1):
        t = t0 + (k - 1) * dt
        m1, z1, s1 = _rhs_all(mu, Z, symbols, Lambda, kappa, t)
        m2, z2, s2 = _rhs_all(mu + 0.5 * dt * m1, Z + 0.5 * dt * z1, symbols, Lambda, kappa, t + 0.5 * dt)
        m3, z3, s3 = _rhs_all(mu + 0.5 * dt * m2, Z + 0.5 * dt * z2, symbols, Lambda, kappa, t + 0.5 * dt)
        m4, z4, s4 = _rhs_all(mu + dt * m3, Z + dt * z3, symbols, Lambda, kappa, t + dt)
        mu = mu + dt / 6.0 * (m1 + 2 * m2 + 2 * m3 + m4)
        Z = Z + dt / 6.0 * (z1 + 2 * z2 + 2 * z3 + z4)
        S = S + dt / 6.0 * (s1 + 2 * s2 + 2 * s3 + s4)
        tk = t0 + k * dt
        _check_state(mu, Z, S, tk, config.mu_floor)
        want_snap = k % config.save_every == 0 or k == nsteps
        want_mon = k % config.monitor_every == 0 or k == nsteps
        if want_snap or want_mon or callback is not None:
            cur = make(mu, Z, S, tk)
            if want_snap:
                snaps.append(cur)
            if want_mon:
                rows.append(_monitor_row(cur))
            if callback is not None:
                callback(cur)
    monitors = {name: np.array([r[i] for r in rows]) for i, name in enumerate(MONITOR_COLUMNS)}
    return HesResult(snapshots=snaps, monitors=monitors)


def write_monitors(path, monitors: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MONITOR_COLUMNS)
        for row in zip(*(monitors[c] for c in MONITOR_COLUMNS)):
            w.writerow(["%.17g" % v for v in row])
