"""Liouville-space machinery: parameters, vectorization, superoperators.

Vectorization is column stacking, ``v[i + D*j] = rho[i, j]``, so that
``vec(A X B) = (B^T kron A) vec(X)``. Every superoperator in the package is
built from :func:`left_super` and :func:`right_super` and therefore obeys
that identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError
from .fock import DensityMatrix, FockBasis, ModeOperator, annihilation_matrix


@dataclass(frozen=True)
class Schedule:
    """Piecewise-linear function of time, held constant outside its knots."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        if len(times) == 0 or len(times) != len(values):
            raise ConfigError("schedule needs equally many (>= 1) times and values")
        if times[0] != 0.0:
            raise ConfigError("schedule times must start at 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("schedule times must be strictly ascending")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value: float) -> "Schedule":
        return cls((0.0,), (float(value),))

    @property
    def is_constant(self) -> bool:
        return all(v == self.values[0] for v in self.values)

    def __call__(self, t: float) -> float:
        if len(self.times) == 1:
            return self.values[0]
        return float(np.interp(t, self.times, self.values))


ScheduleLike = Union[Schedule, float, int]


def as_schedule(x: ScheduleLike) -> Schedule:
    if isinstance(x, Schedule):
        return x
    return Schedule.constant(float(x))


@dataclass(frozen=True)
class SystemParams:
    """Energies, loss rates and nearest-neighbour couplings of a linear chain."""

    n_modes: int
    sigma: tuple[Schedule, ...]
    gamma: tuple[Schedule, ...]
    kappa: tuple[Schedule, ...]

    def __post_init__(self):
        n = self.n_modes
        if n < 1:
            raise ConfigError("need at least one mode")
        sigma = tuple(as_schedule(s) for s in self.sigma)
        gamma = tuple(as_schedule(s) for s in self.gamma)
        kappa = tuple(as_schedule(s) for s in self.kappa)
        if len(sigma) != n or len(gamma) != n:
            raise ConfigError(f"sigma and gamma need {n} entries")
        if len(kappa) != n - 1:
            raise ConfigError(f"kappa needs {n - 1} entries for a chain of {n} modes")
        # piecewise-linear, so checking the knots covers every t
        if any(v < 0 for g in gamma for v in g.values):
            raise ConfigError("loss rates must be nonnegative")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "kappa", kappa)

    @classmethod
    def from_values(cls, sigma: Sequence, gamma: Sequence, kappa: Sequence) -> "SystemParams":
        return cls(len(sigma), tuple(sigma), tuple(gamma), tuple(kappa))

    @property
    def schedules(self) -> tuple[Schedule, ...]:
        """All schedules in generator order: sigma_k, gamma_k, kappa_k."""
        return self.sigma + self.gamma + self.kappa

    @property
    def is_constant(self) -> bool:
        return all(s.is_constant for s in self.schedules)

    def values_at(self, t: float) -> np.ndarray:
        return np.array([s(t) for s in self.schedules])

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(sigma, gamma, kappa)`` arrays evaluated at ``t``."""
        return (
            np.array([s(t) for s in self.sigma]),
            np.array([s(t) for s in self.gamma]),
            np.array([s(t) for s in self.kappa]),
        )


# -- vectorization -------------------------------------------------------------


def vectorize(rho) -> np.ndarray:
    m = np.asarray(getattr(rho, "m", rho))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {m.shape}")
    return m.reshape(-1, order="F")


def devectorize(v, basis: FockBasis | None = None):
    """Inverse of :func:`vectorize`; wraps in a DensityMatrix if a basis is given."""
    v = np.asarray(v)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size or (basis is not None and d != basis.dim):
        raise ConfigError(f"vector of length {v.size} does not match the basis")
    m = v.reshape(d, d, order="F")
    return DensityMatrix(basis, m) if basis is not None else m


@dataclass(frozen=True, eq=False)
class Superoperator:
    basis: FockBasis | None
    s: np.ndarray

    def __matmul__(self, other):
        if isinstance(other, Superoperator):
            return Superoperator(self.basis, self.s @ other.s)
        return self.s @ other

    def __add__(self, other):
        return Superoperator(self.basis, self.s + other.s)

    def __sub__(self, other):
        return Superoperator(self.basis, self.s - other.s)

    def __rmul__(self, c):
        return Superoperator(self.basis, c * self.s)

    def apply(self, rho) -> DensityMatrix:
        return devectorize(self.s @ vectorize(rho), self.basis or rho.basis)


def _operand(o):
    if isinstance(o, ModeOperator):
        return o.basis, o.m
    m = np.asarray(o)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"expected a square operator, got shape {m.shape}")
    return None, m


def left_super(o) -> Superoperator:
    """Superoperator of ``A -> O A``."""
    basis, m = _operand(o)
    return Superoperator(basis, np.kron(np.eye(m.shape[0]), m))


def right_super(o) -> Superoperator:
    """Superoperator of ``A -> A O``."""
    basis, m = _operand(o)
    return Superoperator(basis, np.kron(m.T, np.eye(m.shape[0])))


@dataclass(frozen=True, eq=False)
class LinearSuperoperators:
    """The 4N linear superoperators L_k^-, L_k^+, R_k^-, R_k^+ on one basis.

    Index ``k`` is 0-based here; these are internal building blocks.
    ``R_k^-`` multiplies by ``a_k^+`` from the right and ``R_k^+`` by ``a_k``.
    """

    basis: FockBasis
    Lm: tuple[np.ndarray, ...]
    Lp: tuple[np.ndarray, ...]
    Rm: tuple[np.ndarray, ...]
    Rp: tuple[np.ndarray, ...]


@lru_cache(maxsize=32)
def linear_superoperators(basis: FockBasis) -> LinearSuperoperators:
    Lm, Lp, Rm, Rp = [], [], [], []
    for k in range(1, basis.n_modes + 1):
        a = annihilation_matrix(basis, k).m
        ad = a.conj().T
        Lm.append(left_super(a).s)
        Lp.append(left_super(ad).s)
        Rm.append(right_super(ad).s)
        Rp.append(right_super(a).s)
    return LinearSuperoperators(basis, tuple(Lm), tuple(Lp), tuple(Rm), tuple(Rp))


# -- Hamiltonians --------------------------------------------------------------


def build_hamiltonian(params: SystemParams, basis: FockBasis, t: float = 0.0) -> ModeOperator:
    _check_consistent(params, basis)
    sigma, _, kappa = params.at(t)
    a = [annihilation_matrix(basis, k).m for k in range(1, basis.n_modes + 1)]
    h = np.zeros((basis.dim, basis.dim), dtype=complex)
    for k, ak in enumerate(a):
        h += sigma[k] * ak.conj().T @ ak
    for k, kap in enumerate(kappa):
        hop = a[k].conj().T @ a[k + 1]
        h += kap * (hop + hop.conj().T)
    return ModeOperator(basis, h)


def build_heff_matrix(params: SystemParams, t: float = 0.0) -> np.ndarray:
    """Single-particle ``N x N`` effective Hamiltonian (complex symmetric)."""
    sigma, gamma, kappa = params.at(t)
    h = np.diag(sigma - 1j * gamma).astype(complex)
    idx = np.arange(params.n_modes - 1)
    h[idx, idx + 1] = kappa
    h[idx + 1, idx] = kappa
    return h


def build_heff_operator(params: SystemParams, basis: FockBasis, t: float = 0.0) -> np.ndarray:
    """Second-quantized effective Hamiltonian ``sum_ij h_ij a_i^+ a_j`` on the Fock space."""
    h1 = build_heff_matrix(params, t)
    a = [annihilation_matrix(basis, k).m for k in range(1, basis.n_modes + 1)]
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    for i in range(basis.n_modes):
        for j in range(basis.n_modes):
            if h1[i, j] != 0:
                out += h1[i, j] * a[i].conj().T @ a[j]
    return out


# -- Liouvillian ---------------------------------------------------------------


def _check_consistent(params: SystemParams, basis: FockBasis) -> None:
    if params.n_modes != basis.n_modes:
        raise ConfigError(
            f"parameters describe {params.n_modes} modes but basis has {basis.n_modes}"
        )


def _assemble_liouvillian(params: SystemParams, basis: FockBasis, t: float) -> np.ndarray:
    ops = linear_superoperators(basis)
    sigma, gamma, kappa = params.at(t)
    Lm, Lp, Rm, Rp = ops.Lm, ops.Lp, ops.Rm, ops.Rp
    n = basis.dim**2
    s = np.zeros((n, n), dtype=complex)
    for k in range(basis.n_modes):
        s += (1j * sigma[k] - gamma[k]) * (Rp[k] @ Rm[k])
        s -= (1j * sigma[k] + gamma[k]) * (Lp[k] @ Lm[k])
        s += 2 * gamma[k] * (Lm[k] @ Rm[k])
    for k, kap in enumerate(kappa):
        s -= 1j * kap * (
            Lp[k] @ Lm[k + 1] + Lp[k + 1] @ Lm[k] - Rp[k + 1] @ Rm[k] - Rp[k] @ Rm[k + 1]
        )
    return s


@lru_cache(maxsize=64)
def _constant_liouvillian(params: SystemParams, basis: FockBasis) -> np.ndarray:
    s = _assemble_liouvillian(params, basis, 0.0)
    s.setflags(write=False)
    return s


def build_liouvillian(params: SystemParams, basis: FockBasis, t: float = 0.0) -> Superoperator:
    """Liouvillian written purely in left/right ladder superoperators.

    Cached when every schedule is constant; rebuilt per call otherwise.
    """
    _check_consistent(params, basis)
    if params.is_constant:
        return Superoperator(basis, _constant_liouvillian(params, basis))
    return Superoperator(basis, _assemble_liouvillian(params, basis, t))


def master_equation_rhs(params: SystemParams, rho, t: float = 0.0) -> np.ndarray:
    """Right-hand side of the Lindblad equation evaluated directly in Hilbert space."""
    m = getattr(rho, "m", rho)
    basis = rho.basis
    h = build_hamiltonian(params, basis, t).m
    _, gamma, _ = params.at(t)
    out = -1j * (h @ m - m @ h)
    for k in range(basis.n_modes):
        a = annihilation_matrix(basis, k + 1).m
        ad = a.conj().T
        n = ad @ a
        out += gamma[k] * (2 * a @ m @ ad - n @ m - m @ n)
    return out


@lru_cache(maxsize=32)
def liouvillian_generators(n_modes: int, basis: FockBasis) -> np.ndarray:
    """Stack ``G`` with ``L(t) = sum_p theta_p(t) G[p]``.

    ``theta`` is ordered as :attr:`SystemParams.schedules`. The Liouvillian
    is linear in every parameter, so there is no constant term.
    """
    ops = linear_superoperators(basis)
    Lm, Lp, Rm, Rp = ops.Lm, ops.Lp, ops.Rm, ops.Rp
    gens = []
    for k in range(n_modes):
        gens.append(1j * (Rp[k] @ Rm[k] - Lp[k] @ Lm[k]))
    for k in range(n_modes):
        gens.append(-(Rp[k] @ Rm[k] + Lp[k] @ Lm[k]) + 2 * (Lm[k] @ Rm[k]))
    for k in range(n_modes - 1):
        gens.append(
            -1j * (Lp[k] @ Lm[k + 1] + Lp[k + 1] @ Lm[k] - Rp[k + 1] @ Rm[k] - Rp[k] @ Rm[k + 1])
        )
    n = basis.dim**2
    out = np.ascontiguousarray(np.array(gens, dtype=complex).reshape(len(gens), n, n))
    out.setflags(write=False)
    return out


def identity_vector(basis: FockBasis) -> np.ndarray:
    return vectorize(np.eye(basis.dim, dtype=complex))


def sub_top_mask(basis: FockBasis) -> np.ndarray:
    """Boolean mask over Liouville indices of ``|n><m|`` with both |n|, |m| below max_total."""
    low = basis.totals < basis.max_total
    return np.kron(low, low).astype(bool)
