"""Split-step Fourier solver for the damped rotating nonlocal NLSE in 2D.

The equation is ``i hbar psi_t = (1 - i hbar Lambda) H[psi] psi`` with::

    H = p^2 + <x, K x> + k4 |x|^4 - omega (p1 x2 - p2 x1)
        + kappa \\int W(x - y) |psi(y)|^2 dy,          p = -i hbar grad

so every sub-step is ``psi <- exp(c h dt) psi`` with ``c = -i/hbar - Lambda``.
The rotation term is split as ``(p1^2 - omega p1 x2)`` + ``(p2^2 + omega p2 x1)``,
each diagonal after a 1D FFT along its own axis.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import ConfigError, NumericalError
from .symbols import ModelParams
from .wavefield import ComplexField2D, count_defects, net_charge_inside

__all__ = ["SolverConfig", "NlseResult", "KernelTailWarning", "nonlocal_potential",
           "step", "evolve", "Stepper", "write_nlse_monitors", "NLSE_MONITOR_COLUMNS"]

NLSE_MONITOR_COLUMNS = ("t", "norm2", "n_defects", "net_charge_inside_curve", "peak_density")


class KernelTailWarning(UserWarning):
    """The interaction kernel is not negligible at the domain edge."""


def _is_pow2(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SolverConfig:
    """Grid, step and output settings of the PDE solver.

    ``save_every`` and ``monitor_every`` count steps.  ``midpoint_density``
    re-evaluates the nonlocal potential with the averaged density in the
    potential sub-step, which keeps second order when ``Lambda > 0``.
    """

    params: ModelParams
    nx: int = 128
    ny: int = 128
    Lx: float = 8.0
    Ly: float = 8.0
    dt: float = 5e-4
    t_end: float = 1.0
    save_every: int = 1000
    monitor_every: int = 20
    defect_floor: float = 1e-6
    midpoint_density: bool = True

    def __post_init__(self):
        if not (_is_pow2(self.nx) and _is_pow2(self.ny)):
            raise ConfigError("nx and ny must be powers of two")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError("dt must be finite and > 0")
        if not (np.isfinite(self.t_end) and self.t_end >= 0):
            raise ConfigError("t_end must be finite and >= 0")
        if self.Lx <= 0 or self.Ly <= 0:
            raise ConfigError("extents must be > 0")
        if self.save_every < 1 or self.monitor_every < 1:
            raise ConfigError("strides must be >= 1")
        kmax2 = (math.pi * self.nx / (2 * self.Lx)) ** 2 + (math.pi * self.ny / (2 * self.Ly)) ** 2
        if self.dt * self.params.hbar**2 * kmax2 > math.pi:
            raise ConfigError(f"dt={self.dt} violates the phase-wrap guard dt hbar^2 kmax^2 <= pi")

    @property
    def dx(self) -> float:
        return 2.0 * self.Lx / self.nx

    @property
    def dy(self) -> float:
        return 2.0 * self.Ly / self.ny


def _kernel_hat(nx, ny, Lx, Ly, gamma):
    k1 = 2 * np.pi * np.fft.fftfreq(nx, d=2 * Lx / nx)
    k2 = 2 * np.pi * np.fft.fftfreq(ny, d=2 * Ly / ny)
    K1, K2 = np.meshgrid(k1, k2, indexing="ij")
    return np.exp(-0.25 * gamma**2 * (K1**2 + K2**2))


def _check_tail(Lx, Ly, gamma):
    tail = math.exp(-min(Lx, Ly) ** 2 / gamma**2) / (math.pi * gamma**2)
    if tail > 1e-10:
        warnings.warn(f"kernel tail {tail:.2e} at the domain edge; convolution wraps around",
                      KernelTailWarning, stacklevel=3)


def nonlocal_potential(density, gamma: float, Lx: float, Ly: float | None = None):
    """Periodic convolution of ``density`` with ``exp(-r^2/gamma^2) / (pi gamma^2)``.

    The kernel is used in its analytic Fourier form ``exp(-gamma^2 k^2 / 4)``,
    which equals the periodic sum of all kernel images.
    """
    Ly = Lx if Ly is None else Ly
    density = np.asarray(density, dtype=float)
    _check_tail(Lx, Ly, gamma)
    nx, ny = density.shape
    what = _kernel_hat(nx, ny, Lx, Ly, gamma)
    return np.fft.ifft2(np.fft.fft2(density) * what).real


class Stepper:
    """Precomputed propagators for a fixed configuration."""

    def __init__(self, config: SolverConfig, workers: int = 1):
        cfg = config
        self.workers = max(int(workers), 1)
        p = cfg.params
        self.cfg = cfg
        hb = p.hbar
        c = -1j / hb - p.Lambda
        self.c = c
        x1 = -cfg.Lx + cfg.dx * np.arange(cfg.nx)
        x2 = -cfg.Ly + cfg.dy * np.arange(cfg.ny)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        k1 = 2 * np.pi * np.fft.fftfreq(cfg.nx, d=cfg.dx)
        k2 = 2 * np.pi * np.fft.fftfreq(cfg.ny, d=cfg.dy)
        dt = cfg.dt
        hA = hb**2 * k1[:, None] ** 2 - p.omega * hb * k1[:, None] * x2[None, :]
        hB = hb**2 * k2[None, :] ** 2 + p.omega * hb * k2[None, :] * x1[:, None]
        self.eA = np.exp(c * hA * 0.5 * dt)
        self.eB = np.exp(c * hB * 0.5 * dt)
        K = p.K
        self.U0 = K[0, 0] * X1**2 + 2 * K[0, 1] * X1 * X2 + K[1, 1] * X2**2 + p.k4 * (X1**2 + X2**2) ** 2
        self.eU0 = np.exp(c * self.U0 * dt)
        self.kappa = p.kappa
        self.what = _kernel_hat(cfg.nx, cfg.ny, cfg.Lx, cfg.Ly, p.gamma)
        if p.kappa != 0:
            _check_tail(cfg.Lx, cfg.Ly, p.gamma)
        self.mid = cfg.midpoint_density and p.Lambda != 0 and p.kappa != 0

    def _conv(self, rho):
        w = self.workers
        return sfft.ifft2(sfft.fft2(rho, workers=w) * self.what, workers=w).real

    def potential_step(self, psi):
        if self.kappa == 0:
            return self.eU0 * psi
        dt = self.cfg.dt
        rho0 = np.abs(psi) ** 2
        U1 = self.kappa * self._conv(rho0)
        out = self.eU0 * np.exp(self.c * U1 * dt) * psi
        if self.mid:
            rho1 = np.abs(out) ** 2
            U2 = self.kappa * self._conv(rho1)
            out = self.eU0 * np.exp(self.c * 0.5 * (U1 + U2) * dt) * psi
        return out

    def __call__(self, psi):
        w = self.workers
        psi = sfft.ifft(self.eA * sfft.fft(psi, axis=0, workers=w), axis=0, workers=w)
        psi = sfft.ifft(self.eB * sfft.fft(psi, axis=1, workers=w), axis=1, workers=w)
        psi = self.potential_step(psi)
        psi = sfft.ifft(self.eB * sfft.fft(psi, axis=1, workers=w), axis=1, workers=w)
        psi = sfft.ifft(self.eA * sfft.fft(psi, axis=0, workers=w), axis=0, workers=w)
        return psi


def step(field: ComplexField2D, config: SolverConfig, stepper: Stepper | None = None) -> ComplexField2D:
    """One Strang step ``A(dt/2) B(dt/2) C(dt) B(dt/2) A(dt/2)``."""
    if field.values.shape != (config.nx, config.ny):
        raise ConfigError("field shape does not match the solver grid")
    stepper = stepper or Stepper(config)
    out = stepper(field.values)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"non-finite field after step at t={field.t + config.dt:.6g}")
    return ComplexField2D(values=out, Lx=field.Lx, Ly=field.Ly, t=field.t + config.dt)


@dataclass
class NlseResult:
    snapshots: list
    monitors: dict = field(default_factory=dict)

    @property
    def final(self) -> ComplexField2D:
        return self.snapshots[-1]


def _monitor(f: ComplexField2D, cfg: SolverConfig, radius):
    rho = np.abs(f.values) ** 2
    r = radius(f.t) if callable(radius) else radius
    return (f.t, float(rho.sum() * cfg.dx * cfg.dy), len(count_defects(f, cfg.defect_floor)),
            net_charge_inside(f, r, 0.0), float(rho.max()))


def evolve(field0: ComplexField2D, config: SolverConfig, curve_radius=None,
           monitors: bool = True, callback=None, workers: int = 1) -> NlseResult:
    """Repeated :func:`step` with snapshots and observables.

    ``curve_radius`` (float or function of t, default ``params.R``) sets the
    circle used for the enclosed net charge, counted without a density floor.
    """
    if not np.all(np.isfinite(field0.values)):
        raise NumericalError("initial field is not finite")
    if field0.values.shape != (config.nx, config.ny):
        raise ConfigError("field shape does not match the solver grid")
    radius = config.params.R if curve_radius is None else curve_radius
    stepper = Stepper(config, workers=workers)
    nsteps = max(int(round((config.t_end - field0.t) / config.dt)), 0)
    psi = field0.values.copy()
    t0 = field0.t
    snaps = [field0]
    rows = [_monitor(field0, config, radius)] if monitors else []
    for k in range(1, nsteps + 1):
        psi = stepper(psi)
        if not np.all(np.isfinite(psi)):
            raise NumericalError(f"non-finite field at t={t0 + k * config.dt:.6g}")
        want_snap = k % config.save_every == 0 or k == nsteps
        want_mon = monitors and (k % config.monitor_every == 0 or k == nsteps)
        if want_snap or want_mon or callback is not None:
            cur = ComplexField2D(values=psi, Lx=field0.Lx, Ly=field0.Ly, t=t0 + k * config.dt)
            if want_snap:
                snaps.append(cur)
            if want_mon:
                rows.append(_monitor(cur, config, radius))
            if callback is not None:
                callback(cur)
    mon = {name: np.array([r[i] for r in rows]) for i, name in enumerate(NLSE_MONITOR_COLUMNS)}
    return NlseResult(snapshots=snaps, monitors=mon)


def write_nlse_monitors(path, monitors: dict) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NLSE_MONITOR_COLUMNS)
        for row in zip(*(monitors[c] for c in NLSE_MONITOR_COLUMNS)):
            w.writerow([("%d" % v) if c in ("n_defects", "net_charge_inside_curve") else "%.17g" % v
                        for c, v in zip(NLSE_MONITOR_COLUMNS, row)])
