"""Reference propagation of the master equation.

Two independent routes: adaptive Dormand-Prince integration of
``d vec(rho)/dt = L(t) vec(rho)`` (any schedules), and the matrix exponential
``exp(t L)`` for constant parameters. Every other solver is checked against
these.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import kernels
from .errors import ConfigError, NonFiniteError
from .fock import DensityMatrix, coincidence, number_expectation
from .liouville import (
    Superoperator,
    SystemParams,
    build_liouvillian,
    devectorize,
    liouvillian_generators,
    vectorize,
)


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-9
    atol: float = 1e-12
    max_steps: int = 200_000
    initial_step: float | None = None

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ConfigError("integrator tolerances must be positive")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ConfigError("initial_step must be positive")


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def numbers(self, mode_k: int) -> np.ndarray:
        return np.array([number_expectation(r, mode_k) for r in self.states])

    def coincidences(self, mode_i: int = 1, mode_j: int = 2) -> np.ndarray:
        return np.array([coincidence(r, mode_i, mode_j) for r in self.states])

    def traces(self) -> np.ndarray:
        return np.array([r.trace for r in self.states])


def check_time_grid(t_grid: Sequence[float]) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ConfigError("time grid must be a non-empty 1-d sequence")
    if t[0] != 0.0:
        raise ConfigError("time grid must start at t = 0")
    if np.any(np.diff(t) <= 0):
        raise ConfigError("time grid must be strictly increasing")
    if not np.all(np.isfinite(t)):
        raise ConfigError("time grid must be finite")
    return t


def integrate_master(
    params: SystemParams,
    rho0: DensityMatrix,
    t_grid: Sequence[float],
    config: IntegratorConfig | None = None,
    backend: str | None = None,
) -> Trajectory:
    """Integrate the Lindblad equation with DOPRI5 and dense output on ``t_grid``."""
    config = config or IntegratorConfig()
    t = check_time_grid(t_grid)
    basis = rho0.basis
    if params.n_modes != basis.n_modes:
        raise ConfigError("parameters and initial state disagree on the number of modes")
    gens = liouvillian_generators(params.n_modes, basis)
    samples, stats = kernels.integrate_affine(
        gens,
        params.schedules,
        vectorize(rho0),
        t,
        rtol=config.rtol,
        atol=config.atol,
        max_steps=config.max_steps,
        h_init=config.initial_step,
        backend=backend,
    )
    states = [rho0] + [devectorize(v, basis) for v in samples[1:]]
    meta = {
        "solver": "oracle-dopri5",
        "backend": backend or kernels.BACKEND,
        "rtol": config.rtol,
        "atol": config.atol,
        **stats,
    }
    return Trajectory(t, states, meta)


def propagate_constant(L, rho0: DensityMatrix, t: float) -> DensityMatrix:
    """``exp(t L) vec(rho0)`` by scaling and squaring with Pade approximants."""
    if t < 0:
        raise ConfigError("propagation time must be nonnegative")
    if t == 0:
        return rho0
    s = L.s if isinstance(L, Superoperator) else np.asarray(L)
    with np.errstate(over="ignore"):
        norm_t = t * np.abs(s).sum(axis=0).max()
    if not np.isfinite(norm_t):
        raise NonFiniteError("t * ||L||_1 overflows")
    v = expm(t * s) @ vectorize(rho0)
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("matrix exponential produced non-finite entries")
    return devectorize(v, rho0.basis)


def propagate_constant_grid(params: SystemParams, rho0: DensityMatrix, t_grid) -> Trajectory:
    if not params.is_constant:
        raise ConfigError("matrix-exponential propagation needs constant parameters")
    t = check_time_grid(t_grid)
    L = build_liouvillian(params, rho0.basis)
    states = [propagate_constant(L, rho0, ti) for ti in t]
    return Trajectory(t, states, {"solver": "oracle-expm"})
