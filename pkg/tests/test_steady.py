import math

import numpy as np
import pytest
from scipy.optimize import brentq

from vortexgerm.curve import CurveState, d_ds
from vortexgerm.errors import ConfigError, SteadyStateError
from vortexgerm.hes import hes_rhs
from vortexgerm.specialfn import bessel_i0e, bessel_i1e
from vortexgerm.steady import (DEFAULT_STARTS, SteadyCircle, build_linearized, circle_curve,
                               evolve_deformation, reduced_radius_equation, solve_steady,
                               steady_jacobian, steady_residuals, write_deformation_csv)
from vortexgerm.symbols import gpe_symbols, reference_params

from conftest import GOLDEN_STEADY


@pytest.fixture(scope="module")
def coeffs(params, steady):
    return build_linearized(params.with_(deltaK=(0.0, 0.0)), steady)


def test_golden_values(steady):
    for key, val in GOLDEN_STEADY.items():
        assert getattr(steady, key) == pytest.approx(val, rel=1e-10), key
    assert steady.s0 == 0.0


def test_residuals_and_quantization(params, steady):
    u = (steady.Rbar, steady.Prbar, steady.omegabar, steady.mubar0)
    assert np.max(np.abs(steady_residuals(u, params, scaled=True))) <= 1e-10
    assert np.max(np.abs(steady.residuals)) <= 1e-10
    assert abs(steady.Rbar * steady.Prbar - params.N * params.hbar) <= 1e-12 * params.N
    assert steady.Rbar > 0 and steady.mubar0 >= 0


def test_reduced_scalar_equation_has_the_same_root(params, steady):
    R = brentq(reduced_radius_equation, 2.5, 3.5, args=(params,), xtol=1e-14)
    assert R == pytest.approx(steady.Rbar, rel=1e-11)


def test_only_nhbar_matters(params, steady):
    other = solve_steady(params.with_(hbar=0.5, N=20, Pr=params.Pr))
    for key in ("Rbar", "Prbar", "omegabar", "mubar0"):
        assert getattr(other, key) == pytest.approx(getattr(steady, key), rel=1e-12)


def test_independent_of_start_order(params, steady):
    rev = solve_steady(params, starts=tuple(reversed(DEFAULT_STARTS)))
    assert rev.Rbar == pytest.approx(steady.Rbar, rel=1e-13)
    assert rev.mubar0 == pytest.approx(steady.mubar0, rel=1e-12)


def test_deltaK_is_ignored(params, steady):
    s0 = solve_steady(params.with_(deltaK=(0.0, 0.0)))
    assert s0.Rbar == steady.Rbar


def test_zero_interaction_rejected(params):
    with pytest.raises(ConfigError):
        solve_steady(params.with_(kappa=0.0))


def test_no_convergence_reported(params):
    with pytest.raises(SteadyStateError):
        solve_steady(params, starts=(0.5,))


def test_analytic_jacobian(params):
    u = np.array([2.7, 3.1, 0.9, 0.3])
    J = steady_jacobian(u, params)
    h = 1e-6
    fd = np.empty((4, 4))
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        fd[:, j] = (steady_residuals(u + e, params) - steady_residuals(u - e, params)) / (2 * h)
    np.testing.assert_allclose(J, fd, rtol=1e-7, atol=1e-7)


def test_json_roundtrip(steady):
    back = SteadyCircle.from_json(steady.to_json())
    assert back == steady
    assert steady.period == pytest.approx(2 * math.pi / abs(steady.omegabar))


def test_circle_curve_phase(steady):
    c = circle_curve(steady, 16, t=0.5)
    th = c.s + 0.5 * steady.omegabar
    np.testing.assert_allclose(c.X[:, 0], steady.Rbar * np.cos(th), atol=1e-14)


def test_A_matrix(coeffs):
    A0 = coeffs.A(0.0)
    np.testing.assert_allclose(A0[:2, 2:], np.diag([coeffs.a + coeffs.b, coeffs.a - coeffs.b]),
                               atol=1e-15)
    om = coeffs.params.omega
    for th in np.linspace(0, 2 * np.pi, 7):
        A = coeffs.A(th)
        # the momentum block is the rotation generator [[0, -omega], [omega, 0]]
        assert A[0, 1] == -om and A[1, 0] == om
        np.testing.assert_allclose(A, coeffs.A(th + 2 * np.pi), atol=1e-12)


def test_a_b_closed_form(params, steady, coeffs):
    R, mu, g = steady.Rbar, steady.mubar0, params.gamma
    al = 2 * R * R / g**2
    i0, i1 = bessel_i0e(al), bessel_i1e(al)
    pref = 4 * params.kappa * mu / g**4
    assert coeffs.a == pytest.approx(-2 * params.k2 - 8 * params.k4 * R * R
                                     + pref * (i0 - al * (i0 - i1)), rel=1e-14)
    assert coeffs.b == pytest.approx(-4 * params.k4 * R * R + pref * (al * (i1 - i0) + i1), rel=1e-14)


def test_kernel_coefficients(params, steady, coeffs):
    assert coeffs.a_tilde(0.0) == pytest.approx(2 * params.kappa * steady.mubar0 / (np.pi * params.gamma**4),
                                                rel=1e-15)
    assert coeffs.b_tilde(0.0) == 0.0
    for th in np.linspace(0, 6, 5):
        np.testing.assert_array_equal(coeffs.C(th, th), np.zeros(4))
        for tr in np.linspace(-1, 4, 4):
            B = coeffs.B(th, tr)
            mask = np.ones((4, 4), bool)
            mask[:2, 2:] = False
            assert np.all(B[mask] == 0.0)
            assert np.all(coeffs.C(th, tr)[2:] == 0.0)
            assert coeffs.a_tilde(th - tr) == pytest.approx(coeffs.a_tilde(tr - th), rel=1e-14)
            np.testing.assert_allclose(coeffs.B(th, tr), coeffs.B(th + 2 * np.pi, tr), atol=1e-12)
            np.testing.assert_allclose(coeffs.C(th, tr), coeffs.C(th, tr + 2 * np.pi), atol=1e-12)


def test_linearization_matches_numerical_jacobian_of_curve_dynamics(params, steady, coeffs):
    # derivative oracle: central differences of the full right-hand side
    from vortexgerm.steady import _DeformRhs

    p0 = coeffs.params
    sym = gpe_symbols(p0)
    ns = 64
    cur = circle_curve(steady, ns, t=0.3)
    rng = np.random.default_rng(0)
    dZ = rng.normal(size=(ns, 4))
    dmu = rng.normal(size=ns)
    eps = 1e-6

    def full(e):
        c2 = CurveState(s=cur.s, P=cur.P + e * dZ[:, :2], X=cur.X + e * dZ[:, 2:],
                        mu=cur.mu + e * dmu, S=cur.S, t=cur.t)
        return hes_rhs(c2, sym, p0.Lambda, p0.kappa)

    mp, zp = full(eps)
    mm, zm = full(-eps)
    zl, ml = _DeformRhs(coeffs, ns)(0.3, dZ, dmu)
    assert np.max(np.abs((zp - zm) / (2 * eps) - zl)) <= 1e-6 * np.max(np.abs(zl))
    assert np.max(np.abs((mp - mm) / (2 * eps) - ml)) <= 1e-6 * np.max(np.abs(ml))

    # trap asymmetry forcing is exact: the curve dynamics is affine in deltaK
    p1 = p0.with_(deltaK=(0.01, -0.01))
    z1, m1 = _DeformRhs(build_linearized(p1, steady), ns)(0.3, np.zeros((ns, 4)), np.zeros(ns))
    md0, zd0 = hes_rhs(cur, sym, p0.Lambda, p0.kappa)
    md1, zd1 = hes_rhs(cur, gpe_symbols(p1), p0.Lambda, p0.kappa)
    np.testing.assert_allclose(zd1 - zd0, z1, atol=1e-13)
    np.testing.assert_allclose(md1 - md0, m1, atol=1e-13)


def test_zero_asymmetry_gives_zero_deformation(coeffs):
    traj = evolve_deformation(coeffs, t0=0.75, t_end=1.0, dt=1e-2, Ns=32, save_every=5)
    for st in traj:
        assert np.all(st.deltaZ == 0.0) and np.all(st.deltaMu == 0.0)
    assert [round(st.t, 12) for st in traj] == [0.75, 0.8, 0.85, 0.9, 0.95, 1.0]


def test_no_damping_keeps_weight_deformation_zero(params, steady):
    p = params.with_(Lambda=0.0)
    co = build_linearized(p, steady)
    last = evolve_deformation(co, p, t0=0.0, t_end=0.5, dt=1e-2, Ns=32)[-1]
    assert np.all(last.deltaMu == 0.0)
    assert np.max(np.abs(last.deltaZ)) > 1e-3


def test_deformation_is_linear_in_asymmetry(params, coeffs):
    a = evolve_deformation(coeffs, params.with_(deltaK=(0.01, -0.01)), t_end=1.25, dt=1e-2, Ns=32)[-1]
    b = evolve_deformation(coeffs, params.with_(deltaK=(0.03, -0.03)), t_end=1.25, dt=1e-2, Ns=32)[-1]
    np.testing.assert_allclose(b.deltaZ, 3 * a.deltaZ, rtol=1e-11, atol=1e-14)
    np.testing.assert_allclose(b.deltaMu, 3 * a.deltaMu, rtol=1e-11, atol=1e-14)


def test_deformation_csv(tmp_path, params, coeffs):
    st = evolve_deformation(coeffs, params, t_end=0.8, dt=1e-2, Ns=16)[-1]
    path = tmp_path / "deform_t0.8000.csv"
    write_deformation_csv(path, st)
    rows = path.read_text().splitlines()
    assert rows[0] == "s,dP1,dP2,dX1,dX2,dmu"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 1:5], st.deltaZ)


def test_bad_time_step(coeffs):
    with pytest.raises(ConfigError):
        evolve_deformation(coeffs, dt=0.0)


def test_circle_is_linearly_unstable_near_mode_ten(params, steady):
    # co-rotating Jacobian of the curve dynamics at the steady circle; the leading
    # pair sets the e^{4.46 t} growth of round-off seen in long runs
    p = params.with_(deltaK=(0.0, 0.0))
    sym = gpe_symbols(p)
    ns = 32
    cur = circle_curve(steady, ns)

    def F(y):
        Z, mu = y[:4 * ns].reshape(ns, 4), y[4 * ns:]
        c2 = CurveState(s=cur.s, P=Z[:, :2], X=Z[:, 2:], mu=mu, S=cur.S, t=0.0)
        md, Zd = hes_rhs(c2, sym, p.Lambda, p.kappa)
        return np.r_[(Zd - steady.omegabar * d_ds(Z)).ravel(), md - steady.omegabar * d_ds(mu)]

    y0 = np.r_[cur.Z.ravel(), cur.mu]
    h = 1e-6
    eye = np.eye(len(y0)) * h
    Jm = np.stack([(F(y0 + e) - F(y0 - e)) / (2 * h) for e in eye], axis=1)
    lead = max(np.linalg.eigvals(Jm), key=lambda z: z.real)
    assert lead.real == pytest.approx(4.4582, abs=2e-3)
    assert abs(lead.imag) == pytest.approx(8.4228, abs=2e-3)
