"""Discrete geometry of a closed curve sampled on a uniform periodic grid.

The parameter ``s`` runs over ``[0, 2 pi)`` with ``Ns`` (even) samples.
Derivatives are spectral, integrals use the trapezoid rule, which is
spectrally accurate for smooth periodic integrands.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateCurveError, OutsideTubeError

__all__ = [
    "CurveState",
    "s_grid",
    "d_ds",
    "quad_s",
    "action_integral",
    "tau_solve",
    "tau_field",
    "convexity_index",
    "FourierCurve",
    "circle_state",
    "write_curve_csv",
    "read_curve_csv",
    "signed_curvature",
]

TWO_PI = 2.0 * np.pi


def _check_ns(ns: int) -> None:
    if ns < 8 or ns % 2:
        raise ValueError(f"Ns must be even and >= 8, got {ns}")


def s_grid(ns: int) -> np.ndarray:
    _check_ns(ns)
    return TWO_PI * np.arange(ns) / ns


def _wavenumbers(ns: int) -> np.ndarray:
    k = np.fft.fftfreq(ns, d=1.0 / ns)
    return k


def d_ds(values, order: int = 1) -> np.ndarray:
    """Spectral derivative along axis 0 on the periodic grid.

    The Nyquist mode is dropped for odd orders, which keeps the operator
    real and antisymmetric.
    """
    values = np.asarray(values, dtype=float)
    ns = values.shape[0]
    _check_ns(ns)
    k = _wavenumbers(ns)
    mult = (1j * k) ** order
    if order % 2:
        mult[ns // 2] = 0.0
    shape = (ns,) + (1,) * (values.ndim - 1)
    return np.fft.ifft(np.fft.fft(values, axis=0) * mult.reshape(shape), axis=0).real


def quad_s(values) -> np.ndarray:
    """Trapezoid rule over one period along axis 0."""
    values = np.asarray(values, dtype=float)
    ns = values.shape[0]
    _check_ns(ns)
    return np.sum(values, axis=0) * (TWO_PI / ns)


@dataclass(frozen=True)
class CurveState:
    """Curve data ``(P, X, mu, S)`` at time ``t``.

    ``S`` is stored with its full (non-periodic) values; ``S_winding`` is
    the jump ``S(s + 2 pi) - S(s)`` so that ``S - S_winding s / 2 pi`` is
    periodic.
    """

    s: np.ndarray
    P: np.ndarray
    X: np.ndarray
    mu: np.ndarray
    S: np.ndarray
    t: float = 0.0
    S_winding: float = 0.0

    def __post_init__(self):
        _check_ns(len(self.s))
        for name in ("P", "X"):
            arr = getattr(self, name)
            if arr.shape[0] != len(self.s):
                raise ValueError(f"{name} must have Ns rows")
        if self.P.shape != self.X.shape:
            raise ValueError("P and X must have equal shape")

    @property
    def ns(self) -> int:
        return len(self.s)

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def Z(self) -> np.ndarray:
        return np.hstack([self.P, self.X])

    @property
    def X_s(self) -> np.ndarray:
        return d_ds(self.X)

    @property
    def P_s(self) -> np.ndarray:
        return d_ds(self.P)

    @property
    def S_s(self) -> np.ndarray:
        slope = self.S_winding / TWO_PI
        return d_ds(self.S - slope * self.s) + slope

    def total_mass(self) -> float:
        return float(quad_s(self.mu))

    def with_fields(self, **changes) -> "CurveState":
        return replace(self, **changes)

    def shifted(self, k: int) -> "CurveState":
        """Cyclic shift of every sampled field by ``k`` grid points.

        The non-periodic part of ``S`` is re-based so the jump stays at the seam.
        """
        slope = self.S_winding / TWO_PI
        s_per = np.roll(self.S - slope * self.s, k)
        return replace(self, P=np.roll(self.P, k, axis=0), X=np.roll(self.X, k, axis=0),
                       mu=np.roll(self.mu, k), S=s_per + slope * self.s)


def circle_state(R: float, Pr: float, mu0: float, ns: int, t: float = 0.0,
                 phase: float = 0.0) -> CurveState:
    """Rotating circle ``X = R e_r(s + phase)``, ``P = Pr (sin, -cos)``, ``mu = mu0``.

    ``S = -R Pr s`` so that ``S_s = <P, X_s>``.
    """
    s = s_grid(ns)
    th = s + phase
    X = np.stack([R * np.cos(th), R * np.sin(th)], axis=1)
    P = np.stack([Pr * np.sin(th), -Pr * np.cos(th)], axis=1)
    return CurveState(s=s, P=P, X=X, mu=np.full(ns, float(mu0)), S=-R * Pr * s, t=t,
                      S_winding=-TWO_PI * R * Pr)


def action_integral(curve: CurveState) -> float:
    """Closed-curve action ``integral <P, X_s> ds``."""
    return float(quad_s(np.sum(curve.P * curve.X_s, axis=1)))


class FourierCurve:
    """Trigonometric interpolant of periodic samples, evaluable at any ``s``."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        ns = values.shape[0]
        _check_ns(ns)
        self.ns = ns
        coef = np.fft.fft(values, axis=0) / ns
        k = _wavenumbers(ns)
        # split the Nyquist coefficient symmetrically so the interpolant is real
        nyq = ns // 2
        coef = np.concatenate([coef, coef[nyq:nyq + 1]], axis=0)
        coef[nyq] *= 0.5
        coef[-1] *= 0.5
        k = np.concatenate([k, [float(nyq)]])
        # negligible modes only cost time when evaluating at many points
        mag = np.abs(coef).reshape(len(k), -1).max(axis=1)
        keep = (mag > 1e-15 * mag.max()) | (k == 0)
        self.k = k[keep]
        self.coef = coef[keep]

    def __call__(self, s, deriv: int = 0) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        phase = np.exp(1j * np.multiply.outer(s, self.k))
        mult = (1j * self.k) ** deriv
        return np.real(np.tensordot(phase * mult, self.coef, axes=([-1], [0])))


def _newton_tau(fc: FourierCurve, x, s0, iters: int = 50):
    """Vectorized Newton iteration for ``<X_s(s), x - X(s)> = 0``."""
    s = np.array(s0, dtype=float)
    for _ in range(iters):
        X = fc(s)
        Xs = fc(s, 1)
        Xss = fc(s, 2)
        dx = x - X
        f = np.sum(Xs * dx, axis=-1)
        denom = np.sum(Xs * Xs, axis=-1) - np.sum(Xss * dx, axis=-1)
        safe = np.where(np.abs(denom) > 1e-300, denom, 1.0)
        step = np.where(np.abs(denom) > 1e-300, f / safe, 0.0)
        s = s + step
        if np.all(np.abs(step) < 1e-15 * (1.0 + np.abs(s))):
            break
    X = fc(s)
    Xs = fc(s, 1)
    Xss = fc(s, 2)
    dx = x - X
    f = np.sum(Xs * dx, axis=-1)
    denom = np.sum(Xs * Xs, axis=-1) - np.sum(Xss * dx, axis=-1)
    return s, f, denom, dx, Xs


# focal points (denominator ~ 0, e.g. the centre of a circle) count as outside
_DENOM_REL = 1e-8


def _tau_tol(Xs, dx, x):
    # relative tolerance plus a rounding floor for points on the curve itself
    speed = np.sqrt(np.sum(Xs * Xs, axis=-1))
    return speed * (1e-10 * np.sqrt(np.sum(dx * dx, axis=-1))
                    + 64 * np.finfo(float).eps * (1.0 + np.sqrt(np.sum(x * x, axis=-1))))


def _dense_nearest(fc: FourierCurve, x, upsample: int = 8):
    ns = fc.ns * upsample
    s_dense = TWO_PI * np.arange(ns) / ns
    pts = fc(s_dense)
    tree = cKDTree(pts)
    dist, idx = tree.query(np.atleast_2d(x))
    return s_dense[idx], dist


def tau_solve(x, curve: CurveState, hint: float | None = None,
              fc: FourierCurve | None = None) -> float:
    """Curve parameter of the normal hyperplane through ``x``.

    Solves ``<X_s(tau), x - X(tau)> = 0`` by Newton's method starting from
    ``hint`` (continuation) and falls back to the globally nearest curve point.
    Raises :class:`OutsideTubeError` when no root with
    ``|X_s|^2 - <X_ss, x - X> > 0`` exists.
    """
    x = np.asarray(x, dtype=float)
    fc = fc or FourierCurve(curve.X)
    starts = []
    if hint is not None:
        starts.append(float(hint))
    s_near, _ = _dense_nearest(fc, x)
    starts.append(float(s_near[0]))
    for s0 in starts:
        s, f, denom, dx, Xs = _newton_tau(fc, x, s0)
        if denom > _DENOM_REL * float(Xs @ Xs) and abs(f) <= _tau_tol(Xs, dx, x):
            return float(np.mod(s, TWO_PI))
    raise OutsideTubeError(f"point {x.tolist()} lies outside the tubular neighbourhood")


def tau_field(points, curve: CurveState, max_distance: float | None = None):
    """Vectorized nearest-point ``tau`` for many points.

    Returns ``(tau, valid)``; ``valid`` is False where the point is outside the
    tube (non-positive denominator, no convergence, or farther than
    ``max_distance`` from the curve).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, curve.n)
    fc = FourierCurve(curve.X)
    s0, dist = _dense_nearest(fc, pts)
    valid = np.ones(len(pts), dtype=bool)
    if max_distance is not None:
        valid &= dist <= 2.0 * max_distance
    tau = np.zeros(len(pts))
    idx = np.nonzero(valid)[0]
    chunk = 4096
    for start in range(0, len(idx), chunk):
        sel = idx[start:start + chunk]
        s, f, denom, dx, Xs = _newton_tau(fc, pts[sel], s0[sel], iters=30)
        ok = (denom > _DENOM_REL * np.sum(Xs * Xs, axis=-1)) & (np.abs(f) <= _tau_tol(Xs, dx, pts[sel]))
        if max_distance is not None:
            ok &= np.sqrt(np.sum(dx * dx, axis=-1)) <= max_distance
        tau[sel] = np.mod(s, TWO_PI)
        valid[sel] = ok
    return tau, valid


def signed_curvature(curve: CurveState) -> np.ndarray:
    Xs = d_ds(curve.X)
    Xss = d_ds(curve.X, 2)
    speed = np.sqrt(np.sum(Xs * Xs, axis=1))
    if np.min(speed) < 1e-12:
        raise DegenerateCurveError("|X_s| < 1e-12: degenerate parametrization")
    cross = Xs[:, 0] * Xss[:, 1] - Xs[:, 1] * Xss[:, 0]
    return cross / speed**3


def convexity_index(curve: CurveState) -> float:
    """Minimum planar signed curvature; a value <= 0 marks a non-convex curve."""
    return float(np.min(signed_curvature(curve)))


def curve_columns(n: int = 2):
    return (["s"] + [f"P_{i + 1}" for i in range(n)] + [f"X_{i + 1}" for i in range(n)]
            + ["mu", "S"])


def write_curve_csv(path, curve: CurveState) -> None:
    """Write ``s, P_1..P_n, X_1..X_n, mu, S`` with 17 significant digits."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(curve_columns(curve.n))
        for i in range(curve.ns):
            row = [curve.s[i], *curve.P[i], *curve.X[i], curve.mu[i], curve.S[i]]
            w.writerow(["%.17g" % v for v in row])


def read_curve_csv(path, t: float = 0.0) -> CurveState:
    """Inverse of :func:`write_curve_csv`.

    The seam jump of ``S`` is not stored; it is restored as the closed-curve
    action, which is what it equals on solutions of the curve dynamics.
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = (data.shape[1] - 3) // 2
    s, P, X, mu, S = data[:, 0], data[:, 1:1 + n], data[:, 1 + n:1 + 2 * n], data[:, -2], data[:, -1]
    winding = float(quad_s(np.sum(P * d_ds(X), axis=1)))
    return CurveState(s=s, P=P, X=X, mu=mu, S=S, t=t, S_winding=winding)
