"""Truncated multimode Fock space.

States are all occupation vectors with total excitation <= ``max_total``.
Because the dynamics only ever removes excitations, this truncation is exact
for initial states that live inside it.

Mode labels are 1-based throughout (mode 1 .. mode N), matching the physics
notation used in configs and CSV headers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DecayedStateError, NumericalError

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
IMAG_TOL = 1e-9


def _occupations(n_modes: int, max_total: int) -> list[tuple[int, ...]]:
    states = []
    for total in range(max_total + 1):
        layer = [
            occ
            for occ in itertools.product(range(total + 1), repeat=n_modes)
            if sum(occ) == total
        ]
        states.extend(sorted(layer))
    return states


@dataclass(frozen=True)
class FockBasis:
    """Ordered occupation-number basis.

    Ordering is ascending by total excitation, ties broken lexicographically,
    so every excitation layer is a contiguous index range.
    """

    n_modes: int
    max_total: int
    states: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_modes < 1:
            raise ConfigError(f"n_modes must be >= 1, got {self.n_modes}")
        if self.max_total < 0:
            raise ConfigError(f"max_total must be >= 0, got {self.max_total}")
        object.__setattr__(
            self, "states", tuple(_occupations(self.n_modes, self.max_total))
        )

    @property
    def dim(self) -> int:
        return len(self.states)

    @cached_property
    def _lookup(self) -> dict[tuple[int, ...], int]:
        return {occ: i for i, occ in enumerate(self.states)}

    def index(self, occupation: Sequence[int]) -> int:
        try:
            return self._lookup[tuple(int(n) for n in occupation)]
        except KeyError:
            raise ConfigError(
                f"occupation {tuple(occupation)} not in basis "
                f"(n_modes={self.n_modes}, max_total={self.max_total})"
            ) from None

    @cached_property
    def totals(self) -> np.ndarray:
        return np.array([sum(occ) for occ in self.states], dtype=int)

    @cached_property
    def occupation_array(self) -> np.ndarray:
        """``(dim, n_modes)`` integer array of occupation numbers."""
        return np.array(self.states, dtype=int).reshape(self.dim, self.n_modes)

    def layer_slice(self, total: int) -> slice:
        idx = np.flatnonzero(self.totals == total)
        if idx.size == 0:
            return slice(0, 0)
        return slice(int(idx[0]), int(idx[-1]) + 1)

    def _check_mode(self, mode_k: int) -> None:
        if not 1 <= mode_k <= self.n_modes:
            raise ConfigError(f"mode index {mode_k} outside 1..{self.n_modes}")


def build_basis(n_modes: int, max_total: int) -> FockBasis:
    return FockBasis(n_modes, max_total)


@dataclass(frozen=True, eq=False)
class ModeOperator:
    basis: FockBasis
    m: np.ndarray
    kind: str = "composite"

    def __matmul__(self, other: "ModeOperator") -> "ModeOperator":
        return ModeOperator(self.basis, self.m @ other.m)

    @property
    def dag(self) -> "ModeOperator":
        kind = {"annihilation": "creation", "creation": "annihilation"}.get(
            self.kind, self.kind
        )
        return ModeOperator(self.basis, self.m.conj().T, kind)


def annihilation_matrix(basis: FockBasis, mode_k: int) -> ModeOperator:
    """Matrix of ``a_k`` with entries <n - e_k| a_k |n> = sqrt(n_k)."""
    basis._check_mode(mode_k)
    a = np.zeros((basis.dim, basis.dim), dtype=complex)
    k = mode_k - 1
    for col, occ in enumerate(basis.states):
        if occ[k] == 0:
            continue
        lowered = list(occ)
        lowered[k] -= 1
        a[basis.index(lowered), col] = np.sqrt(occ[k])
    return ModeOperator(basis, a, "annihilation")


def creation_matrix(basis: FockBasis, mode_k: int) -> ModeOperator:
    return annihilation_matrix(basis, mode_k).dag


def number_operator(basis: FockBasis, mode_k: int) -> ModeOperator:
    basis._check_mode(mode_k)
    n = basis.occupation_array[:, mode_k - 1].astype(complex)
    return ModeOperator(basis, np.diag(n), "number")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Complex ``D x D`` matrix on a :class:`FockBasis`.

    The plain constructor does not validate; use :meth:`validated` for
    user-supplied states.
    """

    basis: FockBasis
    m: np.ndarray

    @classmethod
    def validated(cls, basis: FockBasis, m, herm_tol=HERMITIAN_TOL, psd_tol=PSD_TOL):
        m = np.asarray(m, dtype=complex)
        if m.shape != (basis.dim, basis.dim):
            raise ConfigError(f"matrix shape {m.shape} does not match basis dim {basis.dim}")
        residual = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if residual > herm_tol:
            raise ConfigError(f"density matrix not Hermitian (residual {residual:.3e})")
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if tr < -herm_tol or tr > 1 + herm_tol:
            raise ConfigError(f"density matrix trace {tr!r} outside [0, 1]")
        lowest = np.linalg.eigvalsh(m)[0]
        if lowest < -psd_tol:
            raise ConfigError(f"density matrix not positive semidefinite (min eig {lowest:.3e})")
        return cls(basis, m)

    @property
    def trace(self) -> float:
        return float(np.trace(self.m).real)

    def hermitized(self) -> "DensityMatrix":
        return DensityMatrix(self.basis, 0.5 * (self.m + self.m.conj().T))

    def purity(self) -> float:
        return float(np.real(np.vdot(self.m.conj().T, self.m)))


def fock_state(basis: FockBasis, occupation: Sequence[int]) -> DensityMatrix:
    m = np.zeros((basis.dim, basis.dim), dtype=complex)
    i = basis.index(occupation)
    m[i, i] = 1.0
    return DensityMatrix(basis, m)


def mixture(basis: FockBasis, terms: Iterable[tuple[float, Sequence[int]]]) -> DensityMatrix:
    """Incoherent mixture ``sum_w w |n><n|`` of Fock states."""
    m = np.zeros((basis.dim, basis.dim), dtype=complex)
    for weight, occ in terms:
        i = basis.index(occ)
        m[i, i] += weight
    return DensityMatrix.validated(basis, m)


def _real_expectation(op: np.ndarray, rho: DensityMatrix) -> float:
    value = np.trace(op @ rho.m)
    if abs(value.imag) > IMAG_TOL:
        raise NumericalError(
            f"expectation value has imaginary part {value.imag:.3e}; state is corrupted"
        )
    return float(value.real)


def number_expectation(rho: DensityMatrix, mode_k: int) -> float:
    return _real_expectation(number_operator(rho.basis, mode_k).m, rho)


def coincidence(rho: DensityMatrix, mode_i: int, mode_j: int) -> float:
    """Two-mode coincidence rate ``Tr(a_i^+ a_j^+ a_i a_j rho)``."""
    if mode_i == mode_j:
        raise ConfigError("coincidence needs two distinct modes")
    b = rho.basis
    ai = annihilation_matrix(b, mode_i).m
    aj = annihilation_matrix(b, mode_j).m
    op = ai.conj().T @ aj.conj().T @ ai @ aj
    return _real_expectation(op, rho)


def postselect_top_layer(rho: DensityMatrix) -> tuple[DensityMatrix, float]:
    """Condition ``rho`` on no excitation having been lost.

    Returns the renormalized top-layer block (embedded in the full basis)
    together with the success probability.
    """
    sl = rho.basis.layer_slice(rho.basis.max_total)
    block = rho.m[sl, sl]
    p = float(np.trace(block).real)
    if p < 1e-14:
        raise DecayedStateError(f"top-layer probability {p:.3e}: state fully decayed")
    out = np.zeros_like(rho.m)
    out[sl, sl] = block / p
    return DensityMatrix(rho.basis, out), p


def trace_distance(rho1, rho2) -> float:
    """``0.5 * Tr|rho1 - rho2|`` for density matrices or raw arrays."""
    a = getattr(rho1, "m", rho1)
    b = getattr(rho2, "m", rho2)
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))
