import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from lossylie.eigensolver import coincidence_closed_form
from lossylie.errors import ConfigError, FactorizationSingularity
from lossylie.fock import FockBasis, fock_state, mixture, trace_distance
from lossylie.liouville import Schedule, SystemParams, build_liouvillian, devectorize, vectorize
from lossylie.oracle import integrate_master
from lossylie.weinorman import (
    chart_segments,
    coincidence_weinorman,
    evolve_weinorman,
    f_ode_residuals,
    integrate_radical,
    integrate_sl2,
    propagator_factors,
    riccati_residual,
    split_liouvillian,
    wei_norman_functions,
    wn_generators,
)

from conftest import random_params

RAMP = SystemParams(2, (0.0, 0.0), (1.0, 0.0), (Schedule((0.0, 3.0), (1.0, 1.5)),))


def test_split_example():
    sp = split_liouvillian(SystemParams.from_values([0, 0], [2, 0], [1]))
    assert sp.c_k0 == -1
    assert sp.delta == -1j
    assert sp.c_k0 == -1j * sp.delta
    assert sp.abelian_left == sp.abelian_right == -1
    assert sp.loss == (4, 0)
    assert sp.c_kplus == sp.c_kminus == -1j


def test_symmetric_split_is_pure_coupling():
    sp = split_liouvillian(SystemParams.from_values([0.3, 0.3], [0.4, 0.4], [0.7]))
    assert sp.c_k0 == 0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), t=st.floats(0, 3))
def test_split_reassembles_liouvillian(seed, t):
    rng = np.random.default_rng(seed)
    p = SystemParams(
        2,
        tuple(rng.uniform(-1, 1, 2)),
        (Schedule((0.0, 2.0), tuple(rng.uniform(0, 1, 2))), float(rng.uniform(0, 1))),
        (Schedule((0.0, 1.0, 3.0), tuple(rng.uniform(0.2, 1.5, 3))),),
    )
    b = FockBasis(2, 2)
    L_R, L_S1, L_S2 = split_liouvillian(p, t).superoperators(b)
    np.testing.assert_allclose(L_R + L_S1 + L_S2, build_liouvillian(p, b, t).s, atol=1e-13)
    assert np.abs(L_S1 @ L_S2 - L_S2 @ L_S1).max() < 1e-13


def test_needs_two_modes():
    with pytest.raises(ConfigError):
        split_liouvillian(SystemParams.from_values([0, 0, 0], [0, 0, 0], [1, 1]))


def test_generators_close_as_expected():
    g = wn_generators(FockBasis(2, 2))
    comm = lambda a, b: a @ b - b @ a
    # sl(2): [K0, K+] = 2K+, [K+, K-] = K0 on the left copy
    np.testing.assert_allclose(comm(g["K0_L"], g["Kp_L"]), 2 * g["Kp_L"], atol=1e-14)
    np.testing.assert_allclose(comm(g["Kp_L"], g["Km_L"]), g["K0_L"], atol=1e-14)
    np.testing.assert_allclose(comm(g["Kp_L"], g["Kp_R"]), 0, atol=1e-14)


def test_sl2_closed_form_without_detuning():
    p = SystemParams.from_values([0, 0], [0.5, 0.5], [1.0])
    sol = integrate_sl2(p, 1.3)
    for t in np.linspace(0.05, 1.3, 12):
        fp, f0, fm = sol.f(t)
        assert abs(fp + 1j * math.tan(t)) < 1e-8
        assert abs(fm + 1j * math.tan(t)) < 1e-8
        assert abs(f0 + math.log(math.cos(t))) < 1e-8
        assert abs(riccati_residual(sol, p, t)) < 1e-7


def test_riccati_residual_of_zero_function():
    p = SystemParams.from_values([0, 0], [0, 0], [0.7])
    assert riccati_residual((0.0, 0.0), p, 0.0) == pytest.approx(0.7j)


def test_singularity_reported():
    p = SystemParams.from_values([0, 0], [0, 0], [1.0])
    with pytest.raises(FactorizationSingularity) as info:
        integrate_sl2(p, 2.0)
    assert info.value.t_singular == pytest.approx(math.pi / 2, abs=1e-6)


def test_f0_branch_is_continuous():
    # detuned: M_22 winds around the origin, so log must be unwrapped
    p = SystemParams.from_values([3.0, -3.0], [0.1, 0.0], [0.2])
    sol = integrate_sl2(p, 6.0)
    f0 = np.array([sol.f(t)[1] for t in np.linspace(0, 6, 600)])
    assert np.abs(np.diff(f0)).max() < 0.1
    assert abs(f0[-1].imag) > 2 * math.pi


def test_f_equations_hold_for_ramp():
    sol = integrate_sl2(RAMP, 1.5)
    for t in np.linspace(0.01, 1.5, 30):
        assert np.abs(f_ode_residuals(sol, RAMP, t)).max() < 1e-7


def test_single_particle_similarity(rng):
    p = random_params(rng, 2)
    b = FockBasis(2, 2)
    fns = wei_norman_functions(p, 0.6)
    fp, f0, fm = fns.f(0.6)
    U_S1, U_S2, _ = propagator_factors(b, (fp, f0, fm), np.zeros(6))
    M = np.array(
        [[cmath.exp(f0) + fp * fm * cmath.exp(-f0), fp * cmath.exp(-f0)], [fm * cmath.exp(-f0), cmath.exp(-f0)]]
    )
    np.testing.assert_allclose(M, fns.sl2.matrix(0.6), atol=1e-12)
    # one-excitation block: basis order (0,1), (1,0), so mode-1 index is 2
    sl = [b.index((1, 0)), b.index((0, 1))]
    A = np.zeros((b.dim, b.dim), complex)
    A[np.ix_(sl, sl)] = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    out = devectorize(U_S1 @ U_S2 @ vectorize(A))
    np.testing.assert_allclose(out[np.ix_(sl, sl)], M @ A[np.ix_(sl, sl)] @ M.conj().T, atol=1e-12)


def test_factor_odes_by_finite_differences(rng):
    b = FockBasis(2, 2)
    g = wn_generators(b)
    for name in ("Kp_L", "K0_R", "LR12"):
        X = g[name]
        c = complex(*rng.normal(size=2))
        U = lambda s: expm(s * c * X)
        h = 1e-5
        dU = (U(0.4 + h) - U(0.4 - h)) / (2 * h)
        np.testing.assert_allclose(dU, c * X @ U(0.4), atol=1e-8)


@pytest.mark.parametrize("max_total", [2, 3])
def test_exact_factor_exponentials_match_expm(rng, max_total):
    from lossylie.weinorman import _exp_tables, _factor_exp

    b = FockBasis(2, max_total)
    tab = _exp_tables(b)
    for name, X in wn_generators(b).items():
        c = complex(*rng.normal(size=2))
        np.testing.assert_allclose(_factor_exp(tab[name], c), expm(c * X), atol=1e-12, rtol=1e-12)


def test_coincidence_formula_matches_closed_form():
    for g in (0.0, 0.7, 1.6):
        p = SystemParams.from_values([0, 0], [g, 0], [1.0])
        fns = wei_norman_functions(p, 0.9)
        for t in np.linspace(0.05, 0.9, 9):
            assert coincidence_weinorman(fns.f(t), fns.a(t)) == pytest.approx(
                coincidence_closed_form(1.0, g, t), abs=1e-8
            )


def test_radical_starts_at_zero():
    sl2 = integrate_sl2(RAMP, 1.0)
    dense = integrate_radical(RAMP, sl2, 1.0)
    assert np.abs(dense(0.0)).max() == 0
    a = dense(1.0)
    # mean-loss coefficients are plain integrals of -(g1 + g2) / 2
    assert a[0] == pytest.approx(-0.5)
    assert a[1] == pytest.approx(-0.5)


def test_chart_switching_covers_singular_times():
    p = SystemParams.from_values([0, 0], [0, 0], [1.0])
    segs = chart_segments(p, 4.0)
    assert len(segs) > 1
    assert segs[0].t0 == 0 and segs[-1].t_end == 4.0
    for a, b in zip(segs, segs[1:]):
        assert a.t_end == b.t0


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_matches_oracle_constant(seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng, 2)
    b = FockBasis(2, 2)
    rho0 = mixture(b, [(0.7, (1, 1)), (0.3, (0, 2))])
    t = np.linspace(0, 4, 9)
    w = evolve_weinorman(p, rho0, t)
    o = integrate_master(p, rho0, t)
    assert max(trace_distance(x, y) for x, y in zip(w.states, o.states)) < 1e-7


def test_matches_oracle_at_exceptional_point():
    p = SystemParams.from_values([0, 0], [2.0, 0], [1.0])
    b = FockBasis(2, 2)
    rho0 = fock_state(b, (1, 1))
    t = np.linspace(0, 3, 7)
    w = evolve_weinorman(p, rho0, t)
    o = integrate_master(p, rho0, t)
    assert max(trace_distance(x, y) for x, y in zip(w.states, o.states)) < 1e-7


def test_matches_oracle_time_dependent():
    b = FockBasis(2, 3)
    rho0 = mixture(b, [(0.5, (2, 1)), (0.5, (1, 1))])
    t = np.linspace(0, 3, 13)
    w = evolve_weinorman(RAMP, rho0, t)
    o = integrate_master(RAMP, rho0, t)
    assert max(trace_distance(x, y) for x, y in zip(w.states, o.states)) < 1e-7
