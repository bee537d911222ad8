import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from lossylie import _dopri
from lossylie.errors import ConfigError, IntegrationError, NonFiniteError
from lossylie.fock import FockBasis, fock_state, mixture, trace_distance
from lossylie.liouville import Schedule, SystemParams, build_liouvillian, vectorize
from lossylie.oracle import (
    IntegratorConfig,
    check_time_grid,
    integrate_master,
    propagate_constant,
    propagate_constant_grid,
)

from conftest import random_params


def test_single_mode_decay():
    p = SystemParams.from_values([0.7], [0.5], [])
    b = FockBasis(1, 1)
    tr = integrate_master(p, fock_state(b, (1,)), [0.0, 1.0])
    assert tr.numbers(1)[-1] == pytest.approx(math.exp(-1.0), abs=1e-9)
    assert tr.traces()[-1] == pytest.approx(1.0, abs=1e-12)


def test_vacuum_is_stationary():
    p = SystemParams.from_values([0.2, 0.1], [0.4, 0.9], [1.0])
    b = FockBasis(2, 2)
    rho0 = fock_state(b, (0, 0))
    tr = integrate_master(p, rho0, np.linspace(0, 3, 7))
    for r in tr.states:
        assert trace_distance(r, rho0) < 1e-14


def test_first_state_is_input():
    b = FockBasis(2, 2)
    rho0 = fock_state(b, (1, 1))
    tr = integrate_master(SystemParams.from_values([0, 0], [0.5, 0], [1.0]), rho0, [0.0, 0.5])
    assert tr.states[0] is rho0
    assert tr.metadata["solver"] == "oracle-dopri5"


def test_hermitian_hom_dip():
    p = SystemParams.from_values([0, 0], [0, 0], [1.0])
    b = FockBasis(2, 2)
    t = np.linspace(0, 2, 50)
    tr = integrate_master(p, fock_state(b, (1, 1)), t)
    np.testing.assert_allclose(tr.coincidences(), np.cos(2 * t) ** 2, atol=1e-8)


def test_expm_and_dopri_agree(rng):
    for _ in range(5):
        p = random_params(rng, 2)
        b = FockBasis(2, 2)
        rho0 = mixture(b, [(0.5, (1, 1)), (0.5, (2, 0))])
        t = np.linspace(0, 4, 9)
        a = integrate_master(p, rho0, t)
        e = propagate_constant_grid(p, rho0, t)
        for x, y in zip(a.states, e.states):
            assert trace_distance(x, y) < 1e-8


def test_against_scipy_solve_ivp():
    p = SystemParams(2, (0.2, -0.3), (Schedule((0.0, 2.0), (0.1, 0.8)), 0.2), (Schedule((0.0, 3.0), (1.0, 1.5)),))
    b = FockBasis(2, 2)
    rho0 = fock_state(b, (1, 1))
    t = np.linspace(0, 3, 13)
    ours = integrate_master(p, rho0, t, IntegratorConfig(rtol=1e-11, atol=1e-13))
    ref = solve_ivp(
        lambda s, y: build_liouvillian(p, b, s).s @ y,
        (0, 3),
        vectorize(rho0),
        t_eval=t,
        method="DOP853",
        rtol=1e-12,
        atol=1e-14,
    )
    for k in range(len(t)):
        assert np.abs(vectorize(ours.states[k]) - ref.y[:, k]).max() < 1e-9


def test_population_decay_from_top_layer():
    p = SystemParams.from_values([0.0], [0.3], [])
    b = FockBasis(1, 3)
    tr = integrate_master(p, fock_state(b, (3,)), [0.0, 2.0])
    assert tr.numbers(1)[-1] == pytest.approx(3 * math.exp(-1.2), rel=1e-9)
    assert tr.traces()[-1] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("grid", [[], [0.1, 0.2], [0.0, 0.5, 0.5], [0.0, 1.0, 0.5]])
def test_bad_grids(grid):
    with pytest.raises(ConfigError):
        check_time_grid(grid)


def test_max_steps_reported():
    p = SystemParams.from_values([0, 0], [0.5, 0], [1.0])
    b = FockBasis(2, 2)
    with pytest.raises(IntegrationError) as info:
        integrate_master(p, fock_state(b, (1, 1)), [0.0, 10.0], IntegratorConfig(max_steps=3))
    assert 0 <= info.value.t_reached < 10.0


def test_config_validation():
    with pytest.raises(ConfigError):
        IntegratorConfig(rtol=0)
    with pytest.raises(ConfigError):
        IntegratorConfig(max_steps=0)


def test_propagate_constant_edge_cases():
    p = SystemParams.from_values([0.0], [0.5], [])
    b = FockBasis(1, 1)
    rho0 = fock_state(b, (1,))
    L = build_liouvillian(p, b)
    assert propagate_constant(L, rho0, 0.0) is rho0
    with pytest.raises(ConfigError):
        propagate_constant(L, rho0, -1.0)
    with pytest.raises(NonFiniteError):
        propagate_constant(L.s * 1e300, rho0, 1e300)


def test_dopri_order_on_scalar_problem():
    # y' = i y, exact exp(i t); error should scale with tolerance
    errs = []
    for tol in (1e-6, 1e-9):
        res = _dopri.solve(lambda t, y: 1j * y, np.array([1.0 + 0j]), [0.0, 5.0], rtol=tol, atol=tol * 1e-3)
        errs.append(abs(res.y[-1, 0] - np.exp(5j)))
    assert errs[1] < errs[0] and errs[1] < 1e-7


def test_dopri_dense_output_and_nonfinite():
    res = _dopri.solve(lambda t, y: -y, np.array([1.0 + 0j]), [0.0, 2.0], dense=True)
    for t in np.linspace(0, 2, 11):
        assert abs(res.dense(t)[0] - math.exp(-t)) < 1e-8
        assert abs(res.dense.derivative(t)[0] + math.exp(-t)) < 1e-6
    with pytest.raises(NonFiniteError):
        _dopri.solve(lambda t, y: y * np.nan, np.array([1.0 + 0j]), [0.0, 1.0])
