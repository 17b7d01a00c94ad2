"""Steady rotating circle of the 2D model and its linear deformation.

A circle ``X = R e_r(s + wbar t)``, ``P = -Pr e_theta(s + wbar t)`` with
uniform weight ``mubar`` solves the Hamilton–Ehrenfest system exactly when
(with ``a = 2 R^2 / gamma^2``)::

    F1 = R (wbar - omega) + 2 Pr                                     = 0
    F2 = Pr (wbar - omega) + 2 R (k2 + 2 k4 R^2)
         - 4 kappa mubar R e^{-a} (I0(a) - I1(a)) / gamma^4          = 0
    F3 = Pr^2 + k2 R^2 + k4 R^4 - omega R Pr
         + 2 kappa mubar e^{-a} I0(a) / gamma^2                      = 0
    F4 = R Pr - N hbar                                               = 0

F1 and F2 are the tangential and radial force balances, F3 says the weight
is stationary (the local energy vanishes), F4 is the quantization rule.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .curve import TWO_PI, CurveState, s_grid
from .errors import ConfigError, NumericalError, SteadyStateError
from .specialfn import bessel_i0e, bessel_i1e
from .symbols import ModelParams

__all__ = [
    "SteadyCircle",
    "DeformationState",
    "LinearizedCoefficients",
    "steady_residuals",
    "steady_jacobian",
    "solve_steady",
    "reduced_radius_equation",
    "build_linearized",
    "evolve_deformation",
    "circle_curve",
    "write_deformation_csv",
    "DEFAULT_STARTS",
]

DEFAULT_STARTS = (0.5, 1.0, 2.0, 3.0, 5.0, 8.0)


@dataclass(frozen=True)
class SteadyCircle:
    Rbar: float
    Prbar: float
    omegabar: float
    mubar0: float
    s0: float = 0.0
    residuals: tuple = (0.0, 0.0, 0.0, 0.0)
    iterations: int = 0

    @property
    def period(self) -> float:
        return TWO_PI / abs(self.omegabar)

    def to_json(self) -> str:
        d = asdict(self)
        d["residuals"] = list(self.residuals)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SteadyCircle":
        d = json.loads(text)
        d["residuals"] = tuple(d.get("residuals", (0.0,) * 4))
        return cls(**d)


def _terms(u, p: ModelParams):
    R, Pr, wb, mu = u
    g2 = p.gamma**2
    a = 2.0 * R * R / g2
    i0e = bessel_i0e(a)
    i1e = bessel_i1e(a)
    dw = wb - p.omega
    nl2 = 4.0 * p.kappa * mu * R * (i0e - i1e) / g2**2
    nl3 = 2.0 * p.kappa * mu * i0e / g2
    rows = [
        (R * dw, 2.0 * Pr),
        (Pr * dw, 2.0 * p.k2 * R, 4.0 * p.k4 * R**3, -nl2),
        (Pr * Pr, p.k2 * R * R, p.k4 * R**4, -p.omega * R * Pr, nl3),
        (R * Pr, -p.N * p.hbar),
    ]
    return rows


def steady_residuals(u, p: ModelParams, scaled: bool = False) -> np.ndarray:
    """Residual vector ``(F1, F2, F3, F4)`` at ``u = (R, Pr, wbar, mubar)``.

    With ``scaled=True`` every equation is divided by the magnitude of its
    largest term.
    """
    rows = _terms(u, p)
    F = np.array([sum(r) for r in rows])
    if scaled:
        F = F / np.array([max(max(abs(v) for v in r), 1e-300) for r in rows])
    return F


def steady_jacobian(u, p: ModelParams) -> np.ndarray:
    R, Pr, wb, mu = u
    g2 = p.gamma**2
    a = 2.0 * R * R / g2
    da = 4.0 * R / g2
    i0e = bessel_i0e(a)
    i1e = bessel_i1e(a)
    E = i0e - i1e
    dE = 2.0 * i1e - 2.0 * i0e + (i1e / a if a > 0 else 0.5)
    dG = i1e - i0e
    c2 = 4.0 * p.kappa / g2**2
    c3 = 2.0 * p.kappa / g2
    dw = wb - p.omega
    return np.array([
        [dw, 2.0, R, 0.0],
        [2 * p.k2 + 12 * p.k4 * R * R - c2 * mu * (E + R * dE * da), dw, Pr, -c2 * R * E],
        [2 * p.k2 * R + 4 * p.k4 * R**3 - p.omega * Pr + c3 * mu * dG * da,
         2 * Pr - p.omega * R, 0.0, c3 * i0e],
        [Pr, R, 0.0, 0.0],
    ])


def _initial_guess(R, p: ModelParams):
    Pr = p.N * p.hbar / R
    wb = p.omega - 2.0 * Pr / R
    a = 2.0 * R * R / p.gamma**2
    V = Pr * Pr + p.k2 * R * R + p.k4 * R**4 - p.omega * R * Pr
    mu = -V * p.gamma**2 / (2.0 * p.kappa * bessel_i0e(a))
    return np.array([R, Pr, wb, mu])


def _newton(u, p: ModelParams, tol: float, max_iter: int = 200):
    F = steady_residuals(u, p)
    norm = np.linalg.norm(steady_residuals(u, p, scaled=True))
    for it in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(steady_jacobian(u, p), -F)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        for _ in range(31):
            trial = u + lam * step
            if trial[0] > 0 and np.all(np.isfinite(trial)):
                Ft = steady_residuals(trial, p)
                nt = np.linalg.norm(steady_residuals(trial, p, scaled=True))
                if nt < norm or nt <= tol:
                    break
            lam *= 0.5
        else:
            return None
        u, F, norm = trial, Ft, nt
        if norm <= tol and np.max(np.abs(lam * step)) <= 1e-12 * (1 + np.max(np.abs(u))):
            return u, it
    if norm <= tol:
        return u, max_iter
    return None


def solve_steady(params: ModelParams, starts=DEFAULT_STARTS, tol: float = 1e-10) -> SteadyCircle:
    """Steady rotating circle by damped Newton with multiple starting radii.

    ``deltaK`` is ignored.  Among converged roots with ``R > 0`` and
    ``mubar >= 0`` the smallest radius is returned, which makes the choice
    independent of the start order.

    Raises
    ------
    ConfigError
        If ``kappa == 0`` (the weight is then undetermined).
    SteadyStateError
        If no start converges.
    """
    params.validate()
    if params.kappa == 0:
        raise ConfigError("kappa = 0 leaves the steady weight undetermined")
    found = []
    for R0 in starts:
        out = _newton(_initial_guess(float(R0), params), params, tol)
        if out is None:
            continue
        u, it = out
        if u[0] > 0 and u[3] >= 0:
            found.append((u, it))
    if not found:
        raise SteadyStateError("no steady circle found from any starting radius")
    found.sort(key=lambda f: (round(f[0][0], 8), np.linalg.norm(steady_residuals(f[0], params, True))))
    u, it = found[0]
    res = steady_residuals(u, params, scaled=True)
    return SteadyCircle(Rbar=float(u[0]), Prbar=float(u[1]), omegabar=float(u[2]),
                        mubar0=float(u[3]), residuals=tuple(float(r) for r in res), iterations=it)


def reduced_radius_equation(R, params: ModelParams) -> float:
    """Scalar equation in ``R`` obtained by eliminating ``Pr, wbar, mubar``.

    Its roots are the steady radii; used as an independent check.
    """
    p = params
    Pr = p.N * p.hbar / R
    wb = p.omega - 2.0 * Pr / R
    a = 2.0 * R * R / p.gamma**2
    E = bessel_i0e(a) - bessel_i1e(a)
    mu = (Pr * (wb - p.omega) + 2 * R * (p.k2 + 2 * p.k4 * R * R)) * p.gamma**4 / (4 * p.kappa * R * E)
    return Pr * Pr + p.k2 * R * R + p.k4 * R**4 - p.omega * R * Pr + 2 * p.kappa * mu * bessel_i0e(a) / p.gamma**2


def circle_curve(circle: SteadyCircle, ns: int, t: float = 0.0) -> CurveState:
    """Sampled steady circle at time ``t`` (pattern angle ``s + wbar t + s0``)."""
    s = s_grid(ns)
    th = s + circle.omegabar * t + circle.s0
    R, Pr = circle.Rbar, circle.Prbar
    X = np.stack([R * np.cos(th), R * np.sin(th)], axis=1)
    P = np.stack([Pr * np.sin(th), -Pr * np.cos(th)], axis=1)
    return CurveState(s=s, P=P, X=X, mu=np.full(ns, circle.mubar0), S=-R * Pr * s, t=t,
                      S_winding=-TWO_PI * R * Pr)


def _mmat(phi):
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, s], [s, -c]])


@dataclass(frozen=True)
class LinearizedCoefficients:
    """Closed-form coefficients of the deformation equations.

    Unknown ordering is ``(dP1, dP2, dX1, dX2)``.  ``A(theta)`` is the local
    Jacobian, ``B(ts, tr)`` the kernel acting on ``dZ(r)`` (nonzero only in
    the momentum rows / position columns block), ``C(ts, tr)`` the kernel
    acting on ``dmu(r)`` (nonzero only in the momentum rows).
    """

    params: ModelParams
    circle: SteadyCircle
    a: float
    b: float

    @property
    def _alpha(self):
        return 2.0 * self.circle.Rbar**2 / self.params.gamma**2

    def A(self, theta) -> np.ndarray:
        om = self.params.omega
        A = np.zeros((4, 4))
        A[0, 1], A[1, 0] = -om, om
        A[2, 3], A[3, 2] = -om, om
        A[2, 0] = A[3, 1] = 2.0
        A[:2, 2:] = self.a * np.eye(2) + self.b * _mmat(2.0 * theta)
        return A

    def a_tilde(self, phi):
        p, c = self.params, self.circle
        al = self._alpha
        g = np.exp(al * (np.cos(phi) - 1.0))
        return 2.0 * p.kappa * c.mubar0 * g * (1.0 - al * (1.0 - np.cos(phi))) / (np.pi * p.gamma**4)

    def b_tilde(self, phi):
        p, c = self.params, self.circle
        al = self._alpha
        g = np.exp(al * (np.cos(phi) - 1.0))
        return 2.0 * p.kappa * c.mubar0 * g * al * (1.0 - np.cos(phi)) / (np.pi * p.gamma**4)

    def B(self, ts, tr) -> np.ndarray:
        B = np.zeros((4, 4))
        B[:2, 2:] = -(self.a_tilde(ts - tr) * np.eye(2) + self.b_tilde(ts - tr) * _mmat(ts + tr))
        return B

    def C(self, ts, tr) -> np.ndarray:
        p, c = self.params, self.circle
        phi = ts - tr
        sig = 0.5 * (ts + tr)
        amp = (4.0 * p.kappa * c.Rbar / (np.pi * p.gamma**4)
               * np.exp(self._alpha * (np.cos(phi) - 1.0)) * np.sin(0.5 * phi))
        return np.array([-amp * np.sin(sig), amp * np.cos(sig), 0.0, 0.0])


def build_linearized(params: ModelParams, circle: SteadyCircle) -> LinearizedCoefficients:
    """Linearization of the system around the steady circle."""
    R = circle.Rbar
    g4 = params.gamma**4
    al = 2.0 * R * R / params.gamma**2
    i0e = bessel_i0e(al)
    i1e = bessel_i1e(al)
    pref = 4.0 * params.kappa * circle.mubar0 / g4
    a = -2.0 * params.k2 - 8.0 * params.k4 * R * R + pref * (i0e - al * (i0e - i1e))
    b = -4.0 * params.k4 * R * R + pref * (al * (i1e - i0e) + i1e)
    return LinearizedCoefficients(params=params, circle=circle, a=float(a), b=float(b))


@dataclass(frozen=True)
class DeformationState:
    s: np.ndarray
    deltaZ: np.ndarray
    deltaMu: np.ndarray
    t: float


class _DeformRhs:
    def __init__(self, coeffs: LinearizedCoefficients, ns: int):
        self.c = coeffs
        p, circ = coeffs.params, coeffs.circle
        self.s = s_grid(ns)
        self.w = TWO_PI / ns
        phi = self.s[:, None] - self.s[None, :]
        self.at = coeffs.a_tilde(phi) * self.w
        self.bt = coeffs.b_tilde(phi) * self.w
        al = coeffs._alpha
        self.camp = (4.0 * p.kappa * circ.Rbar / (np.pi * p.gamma**4)
                     * np.exp(al * (np.cos(phi) - 1.0)) * np.sin(0.5 * phi)) * self.w
        self.Wmat = np.exp(al * (np.cos(phi) - 1.0)) / (np.pi * p.gamma**2) * self.w
        self.ssum = self.s[:, None] + self.s[None, :]
        self.dK = np.diag(p.deltaK)
        self.Lam = p.Lambda
        self.kappa = p.kappa

    def __call__(self, t, dZ, dmu):
        c = self.c
        circ, p = c.circle, c.params
        wb = circ.omegabar
        th = self.s + wb * t + circ.s0
        R, Pr, mub = circ.Rbar, circ.Prbar, circ.mubar0
        cos2, sin2 = np.cos(2 * th), np.sin(2 * th)
        dP, dX = dZ[:, :2], dZ[:, 2:]
        out = np.zeros_like(dZ)
        om = p.omega
        # local part
        out[:, 0] = -om * dP[:, 1] + (c.a + c.b * cos2) * dX[:, 0] + c.b * sin2 * dX[:, 1]
        out[:, 1] = om * dP[:, 0] + c.b * sin2 * dX[:, 0] + (c.a - c.b * cos2) * dX[:, 1]
        out[:, 2] = 2 * dP[:, 0] - om * dX[:, 1]
        out[:, 3] = 2 * dP[:, 1] + om * dX[:, 0]
        # nonlocal dZ(r) part
        sig2 = self.ssum + 2 * (wb * t + circ.s0)
        cm, sm = self.bt * np.cos(sig2), self.bt * np.sin(sig2)
        out[:, 0] -= self.at @ dX[:, 0] + cm @ dX[:, 0] + sm @ dX[:, 1]
        out[:, 1] -= self.at @ dX[:, 1] + sm @ dX[:, 0] - cm @ dX[:, 1]
        # nonlocal dmu(r) part
        sig = 0.5 * sig2
        out[:, 0] += (-self.camp * np.sin(sig)) @ dmu
        out[:, 1] += (self.camp * np.cos(sig)) @ dmu
        # trap asymmetry forcing
        Xb = np.stack([R * np.cos(th), R * np.sin(th)], axis=1)
        out[:, :2] -= 2.0 * Xb @ self.dK.T
        if self.Lam == 0:
            return out, np.zeros_like(dmu)
        # weight equation
        Zdot_bar = wb * np.stack([Pr * np.cos(th), Pr * np.sin(th), -R * np.sin(th), R * np.cos(th)], axis=1)
        JZd = np.hstack([-Zdot_bar[:, 2:], Zdot_bar[:, :2]])
        cp0 = -self.camp * np.sin(sig)
        cp1 = self.camp * np.cos(sig)
        nonloc = mub * (cp0 @ dX[:, 0] + cp1 @ dX[:, 1]) + self.kappa * (self.Wmat @ dmu)
        xKx = np.sum(Xb * (Xb @ self.dK.T), axis=1)
        dmudot = 2 * self.Lam * mub * (np.sum(dZ * JZd, axis=1) - nonloc - xKx)
        return out, dmudot


def evolve_deformation(coeffs: LinearizedCoefficients, params: ModelParams | None = None,
                       t0: float = 0.75, t_end: float = 1.75, dt: float = 1e-3, Ns: int = 128,
                       save_every: int = 100) -> list:
    """RK4 integration of the deformation equations from zero data at ``t0``.

    ``params`` overrides the coefficients' own parameters for the forcing
    (only ``deltaK`` is read from it).
    """
    if params is not None and params is not coeffs.params:
        coeffs = LinearizedCoefficients(params=coeffs.params.with_(deltaK=params.deltaK),
                                        circle=coeffs.circle, a=coeffs.a, b=coeffs.b)
    if dt <= 0:
        raise ConfigError("dt must be > 0")
    f = _DeformRhs(coeffs, Ns)
    dZ = np.zeros((Ns, 4))
    dmu = np.zeros(Ns)
    nsteps = max(int(round((t_end - t0) / dt)), 0)
    out = [DeformationState(s=f.s, deltaZ=dZ.copy(), deltaMu=dmu.copy(), t=t0)]
    for k in range(1, nsteps + 1):
        t = t0 + (k - 1) * dt
        z1, m1 = f(t, dZ, dmu)
        z2, m2 = f(t + dt / 2, dZ + dt / 2 * z1, dmu + dt / 2 * m1)
        z3, m3 = f(t + dt / 2, dZ + dt / 2 * z2, dmu + dt / 2 * m2)
        z4, m4 = f(t + dt, dZ + dt * z3, dmu + dt * m3)
        dZ = dZ + dt / 6 * (z1 + 2 * z2 + 2 * z3 + z4)
        dmu = dmu + dt / 6 * (m1 + 2 * m2 + 2 * m3 + m4)
        if not (np.all(np.isfinite(dZ)) and np.all(np.isfinite(dmu))):
            raise NumericalError(f"non-finite deformation at t={t0 + k * dt:.6g}")
        if k % save_every == 0 or k == nsteps:
            out.append(DeformationState(s=f.s, deltaZ=dZ.copy(), deltaMu=dmu.copy(), t=t0 + k * dt))
    return out


def write_deformation_csv(path, state: DeformationState) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", "dP1", "dP2", "dX1", "dX2", "dmu"])
        for i in range(len(state.s)):
            w.writerow(["%.17g" % v for v in (state.s[i], *state.deltaZ[i], state.deltaMu[i])])
