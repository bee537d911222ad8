import numpy as np
import pytest

from lossylie import kernels
from lossylie.errors import IntegrationError
from lossylie.fock import FockBasis, fock_state, trace_distance
from lossylie.liouville import Schedule, SystemParams, liouvillian_generators, vectorize
from lossylie.oracle import integrate_master

needs_compiled = pytest.mark.skipif(
    "cython" not in kernels.available_backends(), reason="compiled extension not built"
)


def test_backend_reported():
    assert kernels.BACKEND in kernels.available_backends()
    assert "python" in kernels.available_backends()


def test_pack_schedules():
    kt, kv, off = kernels.pack_schedules((Schedule.constant(1.0), Schedule((0.0, 2.0), (1.0, 3.0))))
    np.testing.assert_array_equal(kt, [0.0, 0.0, 2.0])
    np.testing.assert_array_equal(off, [0, 1, 3])


@needs_compiled
@pytest.mark.parametrize(
    "params",
    [
        SystemParams.from_values([0.3, -0.2], [0.7, 0.1], [1.0]),
        SystemParams(2, (0.0, Schedule((0.0, 1.0), (0.0, 0.5))), (1.0, 0.0), (Schedule((0.0, 3.0), (1.0, 1.5)),)),
        SystemParams(3, (0.0, 0.2, -0.1), (Schedule((0.0, 2.0), (0.1, 0.6)), 0.0, 0.3), (1.0, 0.4)),
    ],
)
def test_backends_agree(params):
    b = FockBasis(params.n_modes, 2)
    rho0 = fock_state(b, (1, 1) + (0,) * (params.n_modes - 2))
    t = np.linspace(0, 3, 16)
    a = integrate_master(params, rho0, t, backend="cython")
    p = integrate_master(params, rho0, t, backend="python")
    assert a.metadata["backend"] == "cython" and p.metadata["backend"] == "python"
    for x, y in zip(a.states, p.states):
        assert trace_distance(x, y) < 1e-12
    assert a.metadata["n_accepted"] == p.metadata["n_accepted"]


@pytest.mark.parametrize("backend", kernels.available_backends())
def test_max_steps_error(backend):
    p = SystemParams.from_values([0, 0], [0.5, 0], [1.0])
    b = FockBasis(2, 2)
    gens = liouvillian_generators(2, b)
    with pytest.raises(IntegrationError):
        kernels.integrate_affine(
            gens, p.schedules, vectorize(fock_state(b, (1, 1))), np.array([0.0, 10.0]),
            rtol=1e-9, atol=1e-12, max_steps=2, backend=backend,
        )
