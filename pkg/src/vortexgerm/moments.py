"""Second-order moment system carried along the curve.

Per curve parameter ``s`` the state holds the weight ``mu``, first moments
``Delta1`` (``Ns x 2n``), symmetric second moments ``Delta2``
(``Ns x 2n x 2n``) and the s-momentum ``Pi``.  The system is driven by the
zeroth-order curve ``Z(s, t)`` and is integrated alongside it without
feeding back.

Readings adopted where the printed equations are ambiguous:

* ``tau_x mu`` in the first-moment equation is the moment-corrected
  ``<<tau_x>>``; the transport term carrying a free index ``a`` uses
  ``<<tau_x dz_a>>``.
* ``dtilde_{dj}`` embeds position index ``j`` as phase-space index ``n + j``.
* The term ``dtilde_{dj} H_{z_a p_k} tau_{x_k x_j} Pi`` (free index ``a``
  without a partner moment) is dropped; it is ``O(hbar^{3/2})`` for data of
  the curve class.
* Kernel Taylor terms carry ``1/2`` in front of ``Delta2``.
* The s-transport in the second-moment equation and the damping of ``Pi``
  carry the signs that follow from the commutator and anticommutator rules,
  ``-2 H_p <<tau dz>> Z_s`` and ``-2 Lambda Hb Pi``.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .curve import TWO_PI, CurveState, d_ds
from .errors import DegenerateCurveError, NumericalError
from .hes import _rhs_all
from .symbols import ModelParams, SymbolSet

__all__ = [
    "MomentState",
    "MomentCoefficients",
    "moment_coefficients",
    "moments_rhs",
    "init_moments_from_ansatz",
    "integrate_moments",
    "write_moments_csv",
    "tau_second_derivative",
]


@dataclass(frozen=True)
class MomentState:
    mu: np.ndarray
    Delta1: np.ndarray
    Delta2: np.ndarray
    Pi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        ns = len(self.mu)
        if self.Delta1.shape[0] != ns or self.Delta2.shape[0] != ns or len(self.Pi) != ns:
            raise ValueError("moment arrays must share the s-grid")

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.Delta2 - np.swapaxes(self.Delta2, 1, 2))))


@dataclass(frozen=True)
class MomentCoefficients:
    tau0: np.ndarray          # (Ns, n)
    tau0_xx: np.ndarray       # (Ns, n, n)
    tau_avg: np.ndarray       # (Ns, n)      <<tau_x>>
    tau_dz: np.ndarray        # (Ns, n, 2n)  <<tau_x dz_a>>
    H: np.ndarray
    H_z: np.ndarray
    H_zz: np.ndarray
    H_zzz: np.ndarray
    Hb: np.ndarray
    Hb_z: np.ndarray
    Hb_zz: np.ndarray
    Z_s: np.ndarray


def tau_second_derivative(X_s, X_ss) -> np.ndarray:
    """``tau_{x_i x_j}`` on the curve, from differentiating ``<X_s, x - X> = 0`` twice."""
    q = np.sum(X_s * X_s, axis=1)
    c = np.sum(X_s * X_ss, axis=1)
    outer = X_ss[:, :, None] * X_s[:, None, :]
    return (outer + np.swapaxes(outer, 1, 2)
            - 3.0 * (c / q)[:, None, None] * X_s[:, :, None] * X_s[:, None, :]) / (q**2)[:, None, None]


def _corrected(deriv, V_derivs, Z, state: MomentState, Deff, kappa, order, t):
    """V derivative of given order plus the moment-expanded kernel integral."""
    ns = len(state.mu)
    w = TWO_PI / ns
    Zs, Zr = Z[:, None, :], Z[None, :, :]
    letters = "abcdefg"
    zi = letters[:order]
    W0 = deriv(Zs, Zr, t, order, 0)
    W1 = deriv(Zs, Zr, t, order, 1)
    W2 = deriv(Zs, Zr, t, order, 2)
    integral = (np.einsum(f"sr{zi},r->s{zi}", W0, state.mu)
                + np.einsum(f"sr{zi}x,rx->s{zi}", W1, Deff)
                + 0.5 * np.einsum(f"sr{zi}xy,rxy->s{zi}", W2, state.Delta2))
    return V_derivs + kappa * w * integral


def moment_coefficients(curve: CurveState, state: MomentState, symbols: SymbolSet,
                        kappa: float) -> MomentCoefficients:
    """All coefficients of the moment system at every ``s``."""
    n = symbols.n
    t = curve.t
    Z = curve.Z
    X_s = d_ds(curve.X)
    X_ss = d_ds(curve.X, 2)
    q = np.sum(X_s * X_s, axis=1)
    if np.min(np.sqrt(q)) < 1e-12:
        raise DegenerateCurveError("|X_s| < 1e-12: degenerate parametrization")
    tau0 = X_s / q[:, None]
    tau0_xx = tau_second_derivative(X_s, X_ss)
    D1x = state.Delta1[:, n:]
    D2xx = state.Delta2[:, n:, n:]
    corr = (state.mu + np.sum(X_ss * D1x, axis=1) / q
            + np.einsum("sj,sk,sjk->s", X_ss, X_ss, D2xx) / q**2)
    tau_avg = tau0 * corr[:, None]
    tau_dz = tau0[:, :, None] * (state.Delta1 + np.einsum("sj,sja->sa", X_ss, state.Delta2[:, n:, :])
                                 / q[:, None])[:, None, :]
    # the s-momentum acts on the kernel through its momentum slots
    Deff = state.Delta1.copy()
    Deff[:, :n] += tau0 * state.Pi[:, None]
    H = _corrected(symbols.W_deriv, symbols.V(Z, t), Z, state, Deff, kappa, 0, t)
    H_z = _corrected(symbols.W_deriv, symbols.V_z(Z, t), Z, state, Deff, kappa, 1, t)
    H_zz = _corrected(symbols.W_deriv, symbols.V_zz(Z, t), Z, state, Deff, kappa, 2, t)
    H_zzz = _corrected(symbols.W_deriv, symbols.V_zzz(Z, t), Z, state, Deff, kappa, 3, t)
    same = (symbols.W_breve_deriv is symbols.W_deriv and symbols.V_breve is symbols.V
            and symbols.V_breve_zz is symbols.V_zz)
    if same:
        Hb, Hb_z, Hb_zz = H, H_z, H_zz
    else:
        Hb = _corrected(symbols.W_breve_deriv, symbols.V_breve(Z, t), Z, state, Deff, kappa, 0, t)
        Hb_z = _corrected(symbols.W_breve_deriv, symbols.V_breve_z(Z, t), Z, state, Deff, kappa, 1, t)
        Hb_zz = _corrected(symbols.W_breve_deriv, symbols.V_breve_zz(Z, t), Z, state, Deff, kappa, 2, t)
    Z_s = np.hstack([d_ds(curve.P), X_s])
    return MomentCoefficients(tau0=tau0, tau0_xx=tau0_xx, tau_avg=tau_avg, tau_dz=tau_dz,
                              H=H, H_z=H_z, H_zz=H_zz, H_zzz=H_zzz, Hb=Hb, Hb_z=Hb_z,
                              Hb_zz=Hb_zz, Z_s=Z_s)


def _sym(M):
    return 0.5 * (M + np.swapaxes(M, 1, 2))


def moments_rhs(curve: CurveState, state: MomentState, symbols: SymbolSet, Lambda: float,
                kappa: float, Zdot=None, coeffs: MomentCoefficients | None = None):
    """Time derivatives ``(mu_t, Delta1_t, Delta2_t, Pi_t)``.

    ``Zdot`` is the curve velocity; by default the zeroth-order system's.
    """
    n = symbols.n
    J = symbols.J
    c = coeffs or moment_coefficients(curve, state, symbols, kappa)
    if Zdot is None:
        _, Zdot, _ = _rhs_all(curve.mu, curve.Z, symbols, Lambda, kappa, curve.t)
    mu, D1, D2, Pi = state.mu, state.Delta1, state.Delta2, state.Pi
    Zs = c.Z_s
    H_p = c.H_z[:, :n]
    Hb_p = c.Hb_z[:, :n]
    H_zp = c.H_zz[:, :, :n]            # (Ns, 2n, n)
    H_pp = c.H_zz[:, :n, :n]
    H_zzp = c.H_zzz[:, :, :, :n]

    mudot = -Lambda * (2 * c.Hb * mu + 2 * np.sum(c.Hb_z * D1, axis=1)
                       + np.einsum("sab,sab->s", c.Hb_zz, D2)
                       + 2 * np.sum(Hb_p * c.tau0, axis=1) * Pi)

    JHz = c.H_z @ J.T
    d1 = JHz * mu[:, None]
    d1 -= np.sum(H_p * c.tau_avg, axis=1)[:, None] * Zs
    d1[:, n:] -= np.einsum("sjk,sk->sj", c.tau0_xx, H_p) * Pi[:, None]
    d1 += np.einsum("da,sab,sb->sd", J, c.H_zz, D1)
    d1 += np.einsum("da,sak,sk->sd", J, H_zp, c.tau0) * Pi[:, None]
    d1 -= np.einsum("sak,ska->s", H_zp, c.tau_dz)[:, None] * Zs
    d1 -= np.einsum("sjk,sj,sk->s", H_pp, c.tau0, c.tau0)[:, None] * Zs * Pi[:, None]
    d1 += 0.5 * np.einsum("da,sabc,sbc->sd", J, c.H_zzz, D2)
    d1 += 0.5 * np.einsum("sabk,sk,sab->s", H_zzp, c.tau0, D2)[:, None] * Zs
    d1 -= Lambda * (2 * c.Hb[:, None] * D1 + 2 * np.einsum("sa,sad->sd", c.Hb_z, D2))
    d1 -= Zdot * mu[:, None]

    M = 2 * JHz[:, :, None] * D1[:, None, :]
    M -= 2 * Zs[:, :, None] * np.einsum("sk,skd->sd", H_p, c.tau_dz)[:, None, :]
    M += 2 * np.einsum("ca,sab,sbd->scd", J, c.H_zz, D2)
    M -= 2 * Zs[:, :, None] * np.einsum("sak,sk,sad->sd", H_zp, c.tau0, D2)[:, None, :]
    M -= Lambda * 2 * c.Hb[:, None, None] * D2
    M -= 2 * D1[:, :, None] * Zdot[:, None, :]
    d2 = _sym(M)

    pidot = -2.0 * Lambda * c.Hb * Pi
    return mudot, d1, d2, pidot


def init_moments_from_ansatz(params: ModelParams, curve: CurveState) -> MomentState:
    """Moments of the Gaussian transverse profile ``exp(-d^2 / (0.5 hbar))``.

    Position variance ``hbar/8`` and momentum variance ``2 hbar`` along the
    unit normal, no tangential spread, no first moments, no s-momentum; all
    per unit ``s``, i.e. multiplied by ``mu``.
    """
    hb = params.hbar
    X_s = d_ds(curve.X)
    speed = np.sqrt(np.sum(X_s * X_s, axis=1))
    if np.min(speed) < 1e-12:
        raise DegenerateCurveError("|X_s| < 1e-12: degenerate parametrization")
    nrm = np.stack([X_s[:, 1], -X_s[:, 0]], axis=1) / speed[:, None]
    nn = nrm[:, :, None] * nrm[:, None, :]
    ns = curve.ns
    D2 = np.zeros((ns, 4, 4))
    D2[:, 2:, 2:] = (hb / 8.0) * nn * curve.mu[:, None, None]
    D2[:, :2, :2] = (2.0 * hb) * nn * curve.mu[:, None, None]
    return MomentState(mu=curve.mu.copy(), Delta1=np.zeros((ns, 4)), Delta2=D2,
                       Pi=np.zeros(ns), t=curve.t)


def integrate_moments(curve0: CurveState, state0: MomentState, symbols: SymbolSet, Lambda: float,
                      kappa: float, dt: float, t_end: float, save_every: int = 100):
    """RK4 for the curve and the moments together.

    Returns a list of ``(CurveState, MomentState)`` snapshots.
    """
    n = curve0.n
    nsteps = max(int(round((t_end - curve0.t) / dt)), 0)
    cm, Z, S = curve0.mu.copy(), curve0.Z.copy(), curve0.S.copy()
    m, D1, D2, Pi = state0.mu.copy(), state0.Delta1.copy(), state0.Delta2.copy(), state0.Pi.copy()
    t0 = curve0.t

    def mk(cm_, Z_, S_, t):
        return CurveState(s=curve0.s, P=Z_[:, :n], X=Z_[:, n:], mu=cm_, S=S_, t=t,
                          S_winding=curve0.S_winding)

    def rhs(t, y):
        cm_, Z_, S_, m_, D1_, D2_, Pi_ = y
        cmd, Zd, Sd = _rhs_all(cm_, Z_, symbols, Lambda, kappa, t)
        cur = mk(cm_, Z_, S_, t)
        st = MomentState(mu=m_, Delta1=D1_, Delta2=D2_, Pi=Pi_, t=t)
        md, d1, d2, pd = moments_rhs(cur, st, symbols, Lambda, kappa, Zdot=Zd)
        return [cmd, Zd, Sd, md, d1, d2, pd]

    y = [cm, Z, S, m, D1, D2, Pi]
    out = [(mk(*[a.copy() for a in y[:3]], t0), MomentState(*[a.copy() for a in y[3:]], t=t0))]
    for k in range(1, nsteps + 1):
        t = t0 + (k - 1) * dt
        k1 = rhs(t, y)
        k2 = rhs(t + dt / 2, [a + dt / 2 * b for a, b in zip(y, k1)])
        k3 = rhs(t + dt / 2, [a + dt / 2 * b for a, b in zip(y, k2)])
        k4 = rhs(t + dt, [a + dt * b for a, b in zip(y, k3)])
        y = [a + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
        if not all(np.all(np.isfinite(a)) for a in y):
            raise NumericalError(f"non-finite moments at t={t0 + k * dt:.6g}")
        if k % save_every == 0 or k == nsteps:
            tk = t0 + k * dt
            out.append((mk(*[a.copy() for a in y[:3]], tk), MomentState(*[a.copy() for a in y[3:]], t=tk)))
    return out


MOMENT_COLUMNS = (["s", "mu"] + [f"Delta1_{a + 1}" for a in range(4)]
                  + [f"Delta2_{a + 1}{b + 1}" for a in range(4) for b in range(a, 4)] + ["Pi"])


def write_moments_csv(path, s, state: MomentState) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    iu = np.triu_indices(4)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MOMENT_COLUMNS)
        for i in range(len(s)):
            row = [s[i], state.mu[i], *state.Delta1[i], *state.Delta2[i][iu], state.Pi[i]]
            w.writerow(["%.17g" % v for v in row])
