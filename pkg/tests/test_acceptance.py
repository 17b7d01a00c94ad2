"""Acceptance criteria at their stated tolerances.

Each test records one ``PASS``/``FAIL`` line; the lines are printed together
in the terminal summary.
"""

import math
import warnings

import numpy as np
import pytest

from vortexgerm.curve import circle_state
from vortexgerm.hes import HesConfig, hes_rhs, integrate
from vortexgerm.moments import init_moments_from_ansatz, moments_rhs
from vortexgerm.nlse import KernelTailWarning, SolverConfig, evolve, nonlocal_potential
from vortexgerm.specialfn import bessel_i0, hyp0f1_b1
from vortexgerm.steady import build_linearized, circle_curve, evolve_deformation, solve_steady
from vortexgerm.symbols import check_derivatives, gpe_symbols, reference_params
from vortexgerm.wavefield import ComplexField2D, build_initial_psi, net_charge_inside

from conftest import ACCEPTANCE_LINES
from test_nlse import _direct_periodic_convolution

pytestmark = pytest.mark.slow


def _record(tag, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_1_action_conservation(hes_reference):
    a = hes_reference.monitors["action_integral"]
    drift = float(np.max(np.abs(a - a[0])) / abs(a[0]))
    ok = drift <= 1e-6 and hes_reference.elapsed <= 120.0
    _record("1 action drift", ok, f"{drift:.2e} <= 1e-6, runtime {hes_reference.elapsed:.0f}s <= 120s")
    assert drift <= 1e-6
    assert hes_reference.elapsed <= 120.0


def test_2_closed_system_mass(hes_closed):
    m = hes_closed.monitors["total_mass"]
    drift = float(np.max(np.abs(m - m[0])) / m[0])
    _record("2 closed-system mass drift", drift <= 1e-10, f"{drift:.2e} <= 1e-10")
    assert drift <= 1e-10


def test_3_steady_circle(params):
    circle = solve_steady(params)
    res_max = float(np.max(np.abs(circle.residuals)))
    p0 = params.with_(deltaK=(0.0, 0.0))
    ns, dt = 64, 1e-3
    c0 = circle_curve(circle, ns)
    period = circle.period
    nsteps = int(math.ceil(period / dt))
    res = integrate(c0, gpe_symbols(p0), p0.Lambda, p0.kappa,
                    HesConfig(dt=dt, t_end=nsteps * dt, Ns=ns, save_every=50, monitor_every=10**9))
    dev = max(float(np.max(np.abs(np.hypot(*s.X.T) - circle.Rbar))) for s in res.snapshots)
    rel = dev / circle.Rbar
    ok = res_max <= 1e-10 and rel <= 1e-4
    _record("3 steady circle", ok, f"residual {res_max:.1e} <= 1e-10, radius deviation {rel:.1e} <= 1e-4 "
            f"over one period {period:.3f}")
    assert res_max <= 1e-10
    assert rel <= 1e-4


def _growth_rates(t, m):
    # early mean log-growth on [0, 0.5] and worst late log-slope on [1, 3]
    i = np.argmin(np.abs(t - 0.5))
    early = float(np.log(m[i] / m[0]) / t[i])
    late = t >= 1.0 - 1e-9
    slope = float(np.max(np.abs(np.gradient(np.log(m[late]), t[late]))))
    return early, slope


def test_4_mass_against_wave_equation(params, hes_reference, nlse_reference, nlse_runner):
    # raw masses: the plateau is fixed by the dynamics, not by the initial
    # normalization (curve 1, field mu0 pi / gamma = 0.5)
    th = hes_reference.monitors["t"]
    mh = hes_reference.monitors["total_mass"]
    tn = nlse_reference.monitors["t"]
    mn = nlse_reference.monitors["norm2"]
    window = tn >= 0.5 - 1e-9
    rel = np.abs(np.interp(tn[window], th, mh) - mn[window]) / mn[window]
    worst = float(rel.max())
    early_h, slope_h = _growth_rates(th, mh)
    early_n, slope_n = _growth_rates(tn, mn)
    # the curve mass has an absolute plateau bound; the field norm plateaus
    # when its late rate is an order of magnitude below its early rate
    shape_h = mh[np.argmin(np.abs(th - 0.5))] > 1.3 * mh[0] and slope_h <= 0.05
    shape_n = mn[np.argmin(np.abs(tn - 0.5))] > 1.3 * mn[0] and slope_n <= 0.1 * early_n
    # self-convergence on the onset of the plateau, t = 1
    base = nlse_runner(params, t_end=1.0).monitors["norm2"][-1]
    fine_t = nlse_runner(params, dt=2.5e-4, t_end=1.0).monitors["norm2"][-1]
    fine_x = nlse_runner(params, nx=256, t_end=1.0).monitors["norm2"][-1]
    conv = max(abs(fine_t - base), abs(fine_x - base)) / base
    ok = (worst <= 0.15 and shape_h and shape_n and conv <= 0.01
          and nlse_reference.elapsed <= 900.0)
    _record("4 mass vs NLSE norm", ok,
            f"max rel diff {worst:.3f} <= 0.15 on [0.5, 3]; curve late log-slope {slope_h:.3f} <= 0.05; "
            f"field late log-slope {slope_n:.3f} <= 0.1 x early {early_n:.2f}; "
            f"self-convergence {conv:.1e} <= 1e-2; runtime {nlse_reference.elapsed:.0f}s")
    assert shape_h and shape_n
    assert worst <= 0.15
    assert conv <= 0.01


def test_5_vortex_quantization(params):
    f0 = build_initial_psi(params, 256, 256, 8.0)
    q = net_charge_inside(f0, params.R, 0.0)
    _record("5 net winding inside R", q == -10, f"{q} == -10")
    assert q == -10


def test_6_linearization_order(params):
    p = params.with_(deltaK=(0.0, 0.0))
    circle = solve_steady(p)
    ns, t0, T, dt = 64, 0.75, 1.0, 1e-3
    coeffs = build_linearized(p, circle)
    c0 = circle_curve(circle, ns, t=t0)
    cfg = HesConfig(dt=dt, t_end=t0 + T, Ns=ns, save_every=10**6, monitor_every=10**6)
    base = integrate(c0, gpe_symbols(p), p.Lambda, p.kappa, cfg).final
    errs = []
    for d in (0.025, 0.05):
        pd = p.with_(deltaK=(d, -d))
        full = integrate(c0, gpe_symbols(pd), p.Lambda, p.kappa, cfg).final
        lin = evolve_deformation(coeffs, pd, t0=t0, t_end=t0 + T, dt=dt, Ns=ns)[-1]
        e = np.sum((full.Z - base.Z - lin.deltaZ) ** 2, axis=1) + (full.mu - base.mu - lin.deltaMu) ** 2
        errs.append(math.sqrt(float(np.mean(e))))
    ratio = errs[1] / errs[0]
    ok = 3.4 <= ratio <= 4.6
    _record("6 linearization error ratio", ok, f"{ratio:.4f} in [3.4, 4.6]")
    assert ok


def test_7_oracle_equivalences(params):
    rng = np.random.default_rng(7)
    rho = rng.random((32, 32))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", KernelTailWarning)
        fast = nonlocal_potential(rho, 1.0, 4.0)
    slow = _direct_periodic_convolution(rho, 1.0, 4.0)
    conv = float(np.max(np.abs(fast - slow)) / np.max(np.abs(slow)))

    z = np.r_[0.0, np.logspace(-3, 3, 61)]
    hyp = float(np.max(np.abs(hyp0f1_b1(z) / bessel_i0(2 * np.sqrt(z)) - 1)))

    pts = rng.normal(size=(60, 4)) * np.array([2, 2, 3, 3])
    report = check_derivatives(gpe_symbols(params), pts, raise_on_fail=False)
    deriv = max(report.values())

    free = reference_params(K_diag=(0.0, 0.0), k4=0.0, kappa=0.0, omega=0.0, Lambda=0.0)
    n, L, t = 256, 12.0, 0.5
    f0 = ComplexField2D.from_function(lambda x, y: np.exp(-(x * x + y * y) / 2), n, n, L, L)
    cfg = SolverConfig(params=free, nx=n, ny=n, Lx=L, Ly=L, dt=1e-3, t_end=t, save_every=10**6)
    out = evolve(f0, cfg, monitors=False).final
    s = 1.0 + 2j * free.hbar * t
    X1, X2 = out.mesh()
    gauss = float(np.max(np.abs(out.values - np.exp(-(X1**2 + X2**2) / (2 * s)) / s)))

    ok = conv <= 1e-10 and hyp <= 1e-12 and deriv <= 1e-6 and gauss <= 1e-8
    _record("7 oracles", ok, f"convolution {conv:.1e} <= 1e-10, 0F1/I0 {hyp:.1e} <= 1e-12, "
            f"symbol derivatives {deriv:.1e} <= 1e-6, free Gaussian {gauss:.1e} <= 1e-8")
    assert conv <= 1e-10
    assert hyp <= 1e-12
    assert deriv <= 1e-6
    assert gauss <= 1e-8


def test_8_moment_weight_equation_limit():
    hbars = (1e-2, 1e-3, 1e-4)
    errs = []
    for hb in hbars:
        p = reference_params(hbar=hb, N=int(round(10 / hb)))
        sym = gpe_symbols(p)
        c = circle_state(p.R, p.Pr, p.mu0, 64)
        md, *_ = moments_rhs(c, init_moments_from_ansatz(p, c), sym, p.Lambda, p.kappa)
        mh, _ = hes_rhs(c, sym, p.Lambda, p.kappa)
        errs.append(float(np.max(np.abs(md - mh))))
    slope = float(np.polyfit(np.log(hbars), np.log(errs), 1)[0])
    ok = abs(slope - 1.0) <= 0.2
    _record("8 moment slope in hbar", ok, f"{slope:.3f} in [0.8, 1.2]")
    assert ok


def test_9_integrator_orders(params):
    p = params.with_(Lambda=0.0)
    n, L, t = 64, 8.0, 0.1
    f0 = build_initial_psi(p, n, n, L)

    def nl(dt):
        cfg = SolverConfig(params=p, nx=n, ny=n, Lx=L, Ly=L, dt=dt, t_end=t, save_every=10**6)
        return evolve(f0, cfg, monitors=False).final.values

    ref = nl(2.5e-4)
    strang = float(np.max(np.abs(nl(4e-3) - ref)) / np.max(np.abs(nl(2e-3) - ref)))

    c0 = circle_state(params.R, params.Pr, params.mu0, 32)
    s = c0.s
    c0 = c0.with_fields(X=c0.X * (1 + 0.1 * np.cos(2 * s))[:, None])
    sym = gpe_symbols(params)

    def hs(dt):
        cfg = HesConfig(dt=dt, t_end=0.2, Ns=32, save_every=10**9, monitor_every=10**9)
        f = integrate(c0, sym, params.Lambda, params.kappa, cfg).final
        return f.Z, f.mu

    Zr, mr = hs(2.5e-4)
    e = [max(float(np.max(np.abs(Z - Zr))), float(np.max(np.abs(m - mr)))) for Z, m in (hs(4e-3), hs(2e-3))]
    rk4 = e[0] / e[1]
    ok = 3.4 <= strang <= 4.6 and 12.0 <= rk4 <= 20.0
    _record("9 integrator orders", ok, f"Strang {strang:.3f} in [3.4, 4.6], RK4 {rk4:.2f} in [12, 20]")
    assert 3.4 <= strang <= 4.6
    assert 12.0 <= rk4 <= 20.0


def test_convexity_trend(hes_reference):
    t = hes_reference.monitors["t"]
    c = hes_reference.monitors["convexity_index"]
    w = (t >= 1.0 - 1e-9) & (t <= 3.0 + 1e-9)
    cw = c[w]
    drop = cw[0] - cw[-1]
    rises = np.diff(cw)
    rise = float(rises[rises > 0].sum()) if np.any(rises > 0) else 0.0
    frac = rise / drop if drop > 0 else math.inf
    ok = drop > 0 and frac <= 0.05
    _record("convexity trend on [1, 3]", ok,
            f"{cw[0]:.4f} -> {cw[-1]:.4f}, total local rise {100 * frac:.2f}% of the drop <= 5%")
    assert drop > 0
    assert frac <= 0.05
