"""Wavefunctions on a periodic 2D grid, the curve ansatz and defect census.

Grid convention: ``values[i, j]`` sits at ``(x1_i, x2_j)`` with
``x1_i = -Lx + i dx`` and ``x2_j = -Ly + j dy`` (``indexing='ij'``).
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .curve import TWO_PI, CurveState, FourierCurve, d_ds, tau_field
from .errors import ConfigError, DegenerateCurveError
from .symbols import ModelParams

__all__ = [
    "ComplexField2D",
    "transverse_phase_factor",
    "build_initial_psi",
    "density_and_phase",
    "count_defects",
    "net_charge_inside",
    "reconstruct_density",
    "transverse_norm",
    "write_grid_csv",
]


@dataclass(frozen=True)
class ComplexField2D:
    """Complex samples on ``[-Lx, Lx) x [-Ly, Ly)``."""

    values: np.ndarray
    Lx: float
    Ly: float
    t: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 2:
            raise ValueError("values must be a 2D array")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        if self.Lx <= 0 or self.Ly <= 0:
            raise ValueError("extents must be > 0")
        object.__setattr__(self, "values", v)

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    @property
    def dx(self) -> float:
        return 2.0 * self.Lx / self.nx

    @property
    def dy(self) -> float:
        return 2.0 * self.Ly / self.ny

    @property
    def x1(self) -> np.ndarray:
        return -self.Lx + self.dx * np.arange(self.nx)

    @property
    def x2(self) -> np.ndarray:
        return -self.Ly + self.dy * np.arange(self.ny)

    def mesh(self):
        return np.meshgrid(self.x1, self.x2, indexing="ij")

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.dx * self.dy)

    def with_values(self, values, t=None) -> "ComplexField2D":
        return ComplexField2D(values=values, Lx=self.Lx, Ly=self.Ly, t=self.t if t is None else t)

    @classmethod
    def from_function(cls, f, nx, ny, Lx, Ly, t=0.0) -> "ComplexField2D":
        x1 = -Lx + 2.0 * Lx / nx * np.arange(nx)
        x2 = -Ly + 2.0 * Ly / ny * np.arange(ny)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        return cls(values=f(X1, X2), Lx=Lx, Ly=Ly, t=t)

    def to_text(self) -> str:
        lines = ["%d %d %s %s %s" % (self.nx, self.ny, repr(float(self.Lx)), repr(float(self.Ly)),
                                     repr(float(self.t)))]
        flat = self.values.ravel(order="C")
        lines.extend("%.17g %.17g" % (v.real, v.imag) for v in flat)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ComplexField2D":
        rows = text.strip().splitlines()
        head = rows[0].split()
        nx, ny = int(head[0]), int(head[1])
        Lx, Ly, t = float(head[2]), float(head[3]), float(head[4])
        data = np.array([r.split() for r in rows[1:]], dtype=float)
        if data.shape != (nx * ny, 2):
            raise ValueError("field text has the wrong number of samples")
        return cls(values=(data[:, 0] + 1j * data[:, 1]).reshape(nx, ny), Lx=Lx, Ly=Ly, t=t)

    def save(self, path) -> None:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "ComplexField2D":
        with open(path) as fh:
            return cls.from_text(fh.read())


def transverse_phase_factor(curve: CurveState, s, x, form: str = "tangent", hbar: float = 1.0):
    """Phase prefactor of the transverse profile at curve parameter ``s``.

    Both forms solve ``<X_s, grad F> = <P_s, dx>`` for the exponent
    ``F / hbar`` with ``dx = x - X(s)``.  ``"tangent"`` uses the tangential
    coordinate ``<X_s, dx> / |X_s|`` and is exactly 1 on the normal line
    ``s = tau(x)``; ``"coordinate"`` uses the component ``k`` with the largest
    ``|X_{s,k}|``, which removes the singular points of the single-component
    formula.
    """
    fc_x = FourierCurve(curve.X)
    fc_p = FourierCurve(curve.P)
    s = float(s)
    x = np.asarray(x, dtype=float)
    X = fc_x(s)
    Xs = fc_x(s, 1)
    Ps = fc_p(s, 1)
    norm2 = float(Xs @ Xs)
    if norm2 < 1e-24:
        raise DegenerateCurveError("|X_s| < 1e-12 at the requested parameter")
    dx = x - X
    ps_dx = float(Ps @ dx)
    ps_xs = float(Ps @ Xs)
    if form == "tangent":
        y = float(Xs @ dx)
        F = ps_dx * y / norm2 - 0.5 * ps_xs * y * y / norm2**2
    elif form == "coordinate":
        k = int(np.argmax(np.abs(Xs)))
        y = dx[k]
        F = (2.0 * Xs[k] * y * ps_dx - y * y * ps_xs) / (2.0 * Xs[k] ** 2)
    else:
        raise ValueError(f"unknown form {form!r}")
    return complex(np.exp(1j * F / hbar))


def build_initial_psi(params: ModelParams, nx: int, ny: int, Lx: float, Ly: float | None = None,
                      quant_tol: float = 1e-12) -> ComplexField2D:
    """Gaussian ring carrying ``N`` quantized vortices at the origin.

    ``psi = sqrt(mu0 / (gamma R sqrt(pi hbar))) exp(-(|x| - R)^2 / (0.5 hbar))
    exp(-i R Pr arg(x1 + i x2) / hbar)``.

    Raises
    ------
    ConfigError
        If ``R * Pr`` differs from ``N * hbar`` (the phase would jump).
    """
    p = params
    if abs(p.quantization_defect) > quant_tol * max(1.0, abs(p.N * p.hbar)):
        raise ConfigError("R * Pr must equal N * hbar for a single-valued phase")
    Ly = Lx if Ly is None else Ly
    amp = math.sqrt(p.mu0 / (p.gamma * p.R * math.sqrt(math.pi * p.hbar)))
    winding = p.R * p.Pr / p.hbar

    def f(x1, x2):
        r = np.hypot(x1, x2)
        th = np.arctan2(x2, x1)
        return amp * np.exp(-(r - p.R) ** 2 / (0.5 * p.hbar)) * np.exp(-1j * winding * th)

    field = ComplexField2D.from_function(f, nx, ny, Lx, Ly)
    v = field.values
    if not np.all(np.isfinite(v)):
        v = np.where(np.isfinite(v), v, 0.0)
        field = field.with_values(v)
    return field


def density_and_phase(field: ComplexField2D):
    """``(|psi|^2, arg psi)`` with the phase in ``(-pi, pi]``."""
    v = field.values
    phase = np.angle(v)
    phase = np.where(phase == -np.pi, np.pi, phase)
    return np.abs(v) ** 2, phase


def _wrap(d):
    return d - TWO_PI * np.round(d / TWO_PI)


def plaquette_charges(field: ComplexField2D):
    """Winding of every (periodically wrapped) grid plaquette.

    Plaquette ``(i, j)`` has corners ``(i, j), (i+1, j), (i+1, j+1), (i, j+1)``
    traversed counterclockwise.
    """
    ph = np.angle(field.values)
    a = ph
    b = np.roll(ph, -1, axis=0)
    c = np.roll(b, -1, axis=1)
    d = np.roll(ph, -1, axis=1)
    total = _wrap(b - a) + _wrap(c - b) + _wrap(d - c) + _wrap(a - d)
    return np.rint(total / TWO_PI).astype(int)


def _corner_ok(field: ComplexField2D, density_floor: float):
    rho = np.abs(field.values) ** 2
    thr = density_floor * rho.max()
    ok = rho >= thr
    ok = ok & np.roll(ok, -1, axis=0)
    ok = ok & np.roll(ok, -1, axis=1)
    return ok


def count_defects(field: ComplexField2D, density_floor: float = 1e-6):
    """Plaquettes with nonzero winding whose corners all pass the floor.

    Returns a list of ``(x1, x2, charge)`` with the plaquette centre.
    """
    if density_floor < 0:
        raise ValueError("density_floor must be >= 0")
    q = plaquette_charges(field) * _corner_ok(field, density_floor)
    ii, jj = np.nonzero(q)
    cx = field.x1[ii] + 0.5 * field.dx
    cy = field.x2[jj] + 0.5 * field.dy
    return [(float(a), float(b), int(c)) for a, b, c in zip(cx, cy, q[ii, jj])]


def net_charge_inside(field: ComplexField2D, radius: float, density_floor: float = 0.0,
                      center=(0.0, 0.0)) -> int:
    """Sum of plaquette charges with centres strictly inside ``radius``."""
    q = plaquette_charges(field) * _corner_ok(field, density_floor)
    cx = field.x1 + 0.5 * field.dx - center[0]
    cy = field.x2 + 0.5 * field.dy - center[1]
    CX, CY = np.meshgrid(cx, cy, indexing="ij")
    return int(np.sum(q[CX**2 + CY**2 < radius**2]))


def transverse_norm(hbar: float, gamma: float = 1.0) -> float:
    """Normalizer of the transverse Gaussian so the density matches the initial ring."""
    return gamma * math.sqrt(math.pi * hbar)


def reconstruct_density(curve: CurveState, hbar: float, nx: int, ny: int, Lx: float,
                        Ly: float | None = None, gamma: float = 1.0, cutoff: float = 8.0):
    """Leading-order density of the curve ansatz on the grid.

    ``rho(x) = mu(tau) / (|X_s(tau)| gamma sqrt(pi hbar)) exp(-4 d^2 / hbar)``
    with ``d`` the distance to ``X(tau)``.  Its integral is
    ``\\oint mu ds / (2 gamma)``.  Points farther than ``cutoff sqrt(hbar)``
    from the curve, or outside the tube, get 0.
    """
    Ly = Lx if Ly is None else Ly
    x1 = -Lx + 2.0 * Lx / nx * np.arange(nx)
    x2 = -Ly + 2.0 * Ly / ny * np.arange(ny)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    pts = np.stack([X1.ravel(), X2.ravel()], axis=1)
    tau, valid = tau_field(pts, curve, max_distance=cutoff * math.sqrt(hbar))
    fx = FourierCurve(curve.X)
    fmu = FourierCurve(curve.mu)
    out = np.zeros(len(pts))
    idx = np.nonzero(valid)[0]
    if len(idx):
        tv = tau[idx]
        Xv = fx(tv)
        speed = np.sqrt(np.sum(fx(tv, 1) ** 2, axis=1))
        d2 = np.sum((pts[idx] - Xv) ** 2, axis=1)
        out[idx] = fmu(tv) / (speed * transverse_norm(hbar, gamma)) * np.exp(-4.0 * d2 / hbar)
    return out.reshape(nx, ny)


def write_grid_csv(path, grid: np.ndarray) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(grid):
            w.writerow(["%.17g" % v for v in row])
