"""Hamiltonian symbols of the nonlocal model and their analytic derivatives.

Phase-space points are stored as ``z = (p_1, ..., p_n, x_1, ..., x_n)``.
Every callable accepts arrays with arbitrary leading (broadcastable) batch
dimensions and a trailing axis of length ``2n``; tensor-valued derivatives
append one axis of length ``2n`` per differentiation, z-indices first.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ConfigError, DerivativeCheckError

__all__ = [
    "ModelParams",
    "PhaseSpacePoint",
    "SymbolSet",
    "symplectic_matrix",
    "gpe_symbols",
    "zero_kernel_symbols",
    "check_derivatives",
    "reference_params",
]


def symplectic_matrix(n: int = 2) -> np.ndarray:
    """Return ``J = [[0, -I], [I, 0]]`` so that ``z_dot = J H_z``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


@dataclass(frozen=True)
class PhaseSpacePoint:
    p: tuple
    x: tuple

    def __post_init__(self):
        if len(self.p) != len(self.x):
            raise ValueError("momentum and position must have equal dimension")

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.p, float), np.asarray(self.x, float)])

    @classmethod
    def from_z(cls, z) -> "PhaseSpacePoint":
        z = np.asarray(z, dtype=float)
        n = z.shape[-1] // 2
        return cls(tuple(z[:n]), tuple(z[n:]))


_PARAM_FIELDS = ("hbar", "Lambda", "kappa", "gamma", "omega", "k2", "k4",
                 "deltaK", "N", "mu0", "R", "Pr")


@dataclass(frozen=True)
class ModelParams:
    """Scalars of the rotating, damped, quartic-trapped 2D model.

    The trap matrix is ``K = k2 * I + diag(deltaK)``.
    """

    hbar: float
    Lambda: float
    kappa: float
    gamma: float
    omega: float
    k2: float
    k4: float
    deltaK: tuple = (0.0, 0.0)
    N: int = 0
    mu0: float = 0.0
    R: float = 1.0
    Pr: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "deltaK", tuple(float(v) for v in self.deltaK))
        self.validate()

    def validate(self) -> None:
        for name in _PARAM_FIELDS:
            value = getattr(self, name)
            values = value if isinstance(value, tuple) else (value,)
            if not all(np.isfinite(v) for v in values):
                raise ConfigError(f"{name} must be finite")
        if len(self.deltaK) != 2:
            raise ConfigError("deltaK must hold exactly two diagonal entries")
        if self.hbar <= 0:
            raise ConfigError("hbar must be > 0")
        if self.gamma <= 0:
            raise ConfigError("gamma must be > 0")
        if self.R <= 0:
            raise ConfigError("R must be > 0")
        if self.Lambda < 0:
            raise ConfigError("Lambda must be >= 0")
        if self.mu0 < 0:
            raise ConfigError("mu0 must be >= 0")
        if int(self.N) != self.N:
            raise ConfigError("N must be an integer")

    @classmethod
    def quantized(cls, *, hbar, Lambda, kappa, gamma, omega, k2, k4, N, mu0, R,
                  deltaK=(0.0, 0.0)) -> "ModelParams":
        """Build parameters with ``Pr`` fixed by ``R * Pr = N * hbar``."""
        return cls(hbar=hbar, Lambda=Lambda, kappa=kappa, gamma=gamma,
                   omega=omega, k2=k2, k4=k4, deltaK=deltaK, N=int(N), mu0=mu0,
                   R=R, Pr=N * hbar / R)

    @classmethod
    def from_K(cls, K_diag, **kwargs) -> "ModelParams":
        """Split a diagonal trap matrix into ``k2 * I + deltaK``.

        ``k2`` is the mean of the diagonal so that ``deltaK`` is traceless.
        """
        K_diag = tuple(float(v) for v in K_diag)
        k2 = 0.5 * (K_diag[0] + K_diag[1])
        return cls.quantized(k2=k2, deltaK=(K_diag[0] - k2, K_diag[1] - k2), **kwargs)

    @property
    def K(self) -> np.ndarray:
        return self.k2 * np.eye(2) + np.diag(self.deltaK)

    @property
    def quantization_defect(self) -> float:
        return self.R * self.Pr - self.N * self.hbar

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["deltaK"] = list(self.deltaK)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        missing = [k for k in _PARAM_FIELDS if k not in d]
        if missing:
            raise ConfigError(f"missing parameter(s): {', '.join(missing)}")
        extra = [k for k in d if k not in _PARAM_FIELDS]
        if extra:
            raise ConfigError(f"unknown parameter(s): {', '.join(extra)}")
        try:
            values = {k: float(d[k]) for k in _PARAM_FIELDS if k not in ("deltaK", "N")}
            values["deltaK"] = tuple(float(v) for v in d["deltaK"])
            n_float = float(d["N"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"non-numeric parameter: {exc}") from None
        if not n_float.is_integer():
            raise ConfigError("N must be an integer")
        return cls(N=int(n_float), **values)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


def reference_params(**overrides) -> ModelParams:
    """Parameter set of the ten-vortex ring used throughout the demos and tests.

    ``K = diag(1.1, 0.9) / 4`` is split into ``k2 = 1/4`` and
    ``deltaK = diag(0.025, -0.025)``.
    """
    base = dict(hbar=1.0, Lambda=0.3, kappa=250.0, gamma=1.0, omega=3.0,
                k4=1.0 / 16.0, N=10, mu0=1.0 / (2.0 * math.pi), R=3.0)
    K_diag = overrides.pop("K_diag", (0.25 * 1.1, 0.25 * 0.9))
    deltaK = overrides.pop("deltaK", None)
    base.update(overrides)
    params = ModelParams.from_K(K_diag, **base)
    return params if deltaK is None else params.with_(deltaK=tuple(deltaK))


@dataclass(frozen=True)
class SymbolSet:
    """Analytic callbacks ``V(z, t)`` and ``W(z, w, t)`` with derivatives.

    ``W_deriv(z, w, t, nz, nw)`` returns the mixed derivative tensor with
    ``nz`` z-indices followed by ``nw`` w-indices.  The breve (anti-Hermitian)
    symbols default to the Hermitian ones.
    """

    n: int
    V: Callable
    V_z: Callable
    V_zz: Callable
    V_zzz: Callable
    W_deriv: Callable
    V_breve: Callable | None = None
    V_breve_z: Callable | None = None
    V_breve_zz: Callable | None = None
    W_breve_deriv: Callable | None = None
    name: str = "custom"
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.V_breve is None:
            object.__setattr__(self, "V_breve", self.V)
            object.__setattr__(self, "V_breve_z", self.V_z)
            object.__setattr__(self, "V_breve_zz", self.V_zz)
        if self.W_breve_deriv is None:
            object.__setattr__(self, "W_breve_deriv", self.W_deriv)

    @property
    def J(self) -> np.ndarray:
        return symplectic_matrix(self.n)

    def W(self, z, w, t=0.0):
        return self.W_deriv(z, w, t, 0, 0)

    def W_z(self, z, w, t=0.0):
        return self.W_deriv(z, w, t, 1, 0)

    def W_zz(self, z, w, t=0.0):
        return self.W_deriv(z, w, t, 2, 0)

    def W_zw(self, z, w, t=0.0):
        return self.W_deriv(z, w, t, 1, 1)

    def W_zzw(self, z, w, t=0.0):
        return self.W_deriv(z, w, t, 2, 1)

    def W_zww(self, z, w, t=0.0):
        return self.W_deriv(z, w, t, 1, 2)

    def W_breve(self, z, w, t=0.0):
        return self.W_breve_deriv(z, w, t, 0, 0)


def _gaussian_kernel_deriv(gamma: float):
    """Derivatives of ``exp(-|x - y|^2 / gamma^2) / (pi gamma^2)`` in (z, w).

    Uses ``d^k/du^k exp(-u^2/g^2) = (-1/g)^k H_k(u/g) exp(-u^2/g^2)`` with
    physicists' Hermite polynomials, one factor per position component.
    Momentum derivatives vanish and every w-derivative flips the sign.
    """
    norm = 1.0 / (math.pi * gamma**2)

    def W_deriv(z, w, t=0.0, nz=0, nw=0):
        z = np.asarray(z, dtype=float)
        w = np.asarray(w, dtype=float)
        n = z.shape[-1] // 2
        d = z[..., n:] - w[..., n:]
        u = d / gamma
        order = nz + nw
        gauss = np.exp(-np.sum(u * u, axis=-1))
        if order == 0:
            return norm * gauss
        # hermite[k][..., j] = H_k(u_j)
        hermite = [np.ones_like(u), 2.0 * u]
        for k in range(1, order):
            hermite.append(2.0 * u * hermite[k] - 2.0 * k * hermite[k - 1])
        batch = gauss.shape
        out = np.zeros(batch + (2 * n,) * order)
        sign = (-1.0) ** nw
        for idx in itertools.product(range(n), repeat=order):
            counts = np.bincount(idx, minlength=n)
            value = norm * sign * gauss
            for j, k in enumerate(counts):
                if k:
                    value = value * (-1.0 / gamma) ** k * hermite[k][..., j]
            out[(Ellipsis,) + tuple(n + i for i in idx)] = value
        return out

    return W_deriv


def _zero_kernel_deriv(z, w, t=0.0, nz=0, nw=0):
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    batch = np.broadcast_shapes(z.shape[:-1], w.shape[:-1])
    return np.zeros(batch + (z.shape[-1],) * (nz + nw))


def gpe_symbols(params: ModelParams) -> SymbolSet:
    """Symbols of the rotating 2D model.

    ``V = |p|^2 + <x, K x> + k4 |x|^4 - omega (p1 x2 - p2 x1)`` and the
    normalized Gaussian interaction kernel of width ``gamma``; the breve
    symbols coincide with these.
    """
    K = params.K
    k4 = params.k4
    om = params.omega

    def V(z, t=0.0):
        z = np.asarray(z, dtype=float)
        p, x = z[..., :2], z[..., 2:]
        r2 = np.sum(x * x, axis=-1)
        xKx = np.einsum("...i,ij,...j->...", x, K, x)
        return np.sum(p * p, axis=-1) + xKx + k4 * r2**2 - om * (p[..., 0] * x[..., 1] - p[..., 1] * x[..., 0])

    def V_z(z, t=0.0):
        z = np.asarray(z, dtype=float)
        p, x = z[..., :2], z[..., 2:]
        r2 = np.sum(x * x, axis=-1)[..., None]
        out = np.empty(z.shape)
        out[..., 0] = 2 * p[..., 0] - om * x[..., 1]
        out[..., 1] = 2 * p[..., 1] + om * x[..., 0]
        out[..., 2:] = 2 * x @ K.T + 4 * k4 * r2 * x
        out[..., 2] += om * p[..., 1]
        out[..., 3] -= om * p[..., 0]
        return out

    def V_zz(z, t=0.0):
        z = np.asarray(z, dtype=float)
        x = z[..., 2:]
        r2 = np.sum(x * x, axis=-1)[..., None, None]
        out = np.zeros(z.shape[:-1] + (4, 4))
        out[..., 0, 0] = out[..., 1, 1] = 2.0
        out[..., 0, 3] = out[..., 3, 0] = -om
        out[..., 1, 2] = out[..., 2, 1] = om
        xx = x[..., :, None] * x[..., None, :]
        out[..., 2:, 2:] = 2 * K + 4 * k4 * (r2 * np.eye(2) + 2 * xx)
        return out

    def V_zzz(z, t=0.0):
        z = np.asarray(z, dtype=float)
        x = z[..., 2:]
        eye = np.eye(2)
        out = np.zeros(z.shape[:-1] + (4, 4, 4))
        out[..., 2:, 2:, 2:] = 8 * k4 * (
            np.einsum("...k,ij->...ijk", x, eye)
            + np.einsum("...j,ik->...ijk", x, eye)
            + np.einsum("...i,jk->...ijk", x, eye)
        )
        return out

    return SymbolSet(n=2, V=V, V_z=V_z, V_zz=V_zz, V_zzz=V_zzz,
                     W_deriv=_gaussian_kernel_deriv(params.gamma), name="gpe",
                     extras={"params": params, "kernel_gamma": params.gamma})


def zero_kernel_symbols(base: SymbolSet) -> SymbolSet:
    """Copy of ``base`` with the interaction kernel replaced by ``W = 0``."""
    extras = {k: v for k, v in base.extras.items() if k != "kernel_gamma"}
    return replace(base, W_deriv=_zero_kernel_deriv, W_breve_deriv=_zero_kernel_deriv,
                   name=base.name + "+W0", extras=extras)


def _rel_err(analytic, numeric) -> float:
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric)) / scale)


def _fd4(f, z, h):
    """Fourth-order central differences of ``f`` along each axis of ``z``."""
    z = np.asarray(z, dtype=float)
    cols = []
    for a in range(z.shape[-1]):
        e = np.zeros_like(z)
        e[..., a] = h
        cols.append((8 * (f(z + e) - f(z - e)) - (f(z + 2 * e) - f(z - 2 * e))) / (12 * h))
    return np.stack(cols, axis=-1)


def check_derivatives(symbols: SymbolSet, sample_points, t: float = 0.0,
                      h: float = 1e-4, tol: float = 1e-6, raise_on_fail: bool = True) -> dict:
    """Compare every analytic derivative with central finite differences.

    ``sample_points`` is a sequence of :class:`PhaseSpacePoint` or an array of
    shape ``(m, 2n)``.  Kernel derivatives are checked on all ordered pairs of
    distinct sample points.  Returns ``{name: max relative error}``.
    """
    pts = sample_points
    if len(pts) == 0:
        raise ValueError("at least one sample point is required")
    if isinstance(pts[0], PhaseSpacePoint):
        pts = np.array([p.z for p in pts])
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]

    report = {}
    report["V_z"] = _rel_err(symbols.V_z(pts, t), _fd4(lambda q: symbols.V(q, t), pts, h))
    report["V_zz"] = _rel_err(symbols.V_zz(pts, t), _fd4(lambda q: symbols.V_z(q, t), pts, h))
    report["V_zzz"] = _rel_err(symbols.V_zzz(pts, t), _fd4(lambda q: symbols.V_zz(q, t), pts, h))
    report["V_zz_symmetry"] = _rel_err(symbols.V_zz(pts, t), np.swapaxes(symbols.V_zz(pts, t), -1, -2))
    vzzz = symbols.V_zzz(pts, t)
    report["V_zzz_symmetry"] = max(
        _rel_err(vzzz, np.transpose(vzzz, (0,) + perm))
        for perm in itertools.permutations((1, 2, 3)))

    m = len(pts)
    if m > 1:
        i, j = np.triu_indices(m, k=1)
        z, w = pts[i], pts[j]
    else:
        z, w = pts, pts + 0.25
    Wd = symbols.W_deriv
    report["W_z"] = _rel_err(Wd(z, w, t, 1, 0), _fd4(lambda q: Wd(q, w, t, 0, 0), z, h))
    report["W_zz"] = _rel_err(Wd(z, w, t, 2, 0), _fd4(lambda q: Wd(q, w, t, 1, 0), z, h))
    report["W_zw"] = _rel_err(Wd(z, w, t, 1, 1), _fd4(lambda q: Wd(z, q, t, 1, 0), w, h))
    report["W_zzw"] = _rel_err(Wd(z, w, t, 2, 1), _fd4(lambda q: Wd(z, q, t, 2, 0), w, h))
    report["W_zww"] = _rel_err(Wd(z, w, t, 1, 2), _fd4(lambda q: Wd(z, q, t, 1, 1), w, h))
    report["W_symmetry"] = _rel_err(Wd(z, w, t, 0, 0), Wd(w, z, t, 0, 0))

    bad = {k: v for k, v in report.items() if v > tol}
    if bad and raise_on_fail:
        raise DerivativeCheckError(f"derivative check failed: {bad}")
    return report
