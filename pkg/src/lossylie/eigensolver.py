"""Eigendecomposition of a constant Liouvillian through Liouville-space ladders.

The spectrum of ``-i H_eff`` (an ``N x N`` problem) fixes the collective
ladder superoperators

    P_i^+ = sum_k c_ik (L_k^+ - R_k^-),   P_i^- = sum_k c_ik L_k^-
    Q_i^+ = sum_k c*_ik (R_k^+ - L_k^-),  Q_i^- = sum_k c*_ik R_k^-

whose monomials acting on ``|0><0|`` are right eigenvectors of ``L`` with
eigenvalues ``alpha . lambda + beta . conj(lambda)``. Left eigenvectors are
built from the identity with the annihilators.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError, ExceptionalPointError
from .fock import DensityMatrix, FockBasis
from .liouville import (
    SystemParams,
    build_heff_matrix,
    build_heff_operator,
    build_liouvillian,
    devectorize,
    identity_vector,
    linear_superoperators,
    vectorize,
)
from .oracle import Trajectory, check_time_grid

EP_CONDITION_MAX = 1e8
# Floating-point eig splits a defective pair by ~sqrt(eps) * scale, so a
# 1e-10 relative gap never triggers at the exceptional point itself.
EP_GAP_REL = 1e-7


@dataclass(frozen=True, eq=False)
class ModeSpectrum:
    lambdas: np.ndarray
    coeffs: np.ndarray
    ep_condition: float


@dataclass(frozen=True, eq=False)
class LadderSet:
    basis: FockBasis
    lambdas: np.ndarray
    P_plus: tuple
    P_minus: tuple
    Q_plus: tuple
    Q_minus: tuple

    @property
    def n_modes(self) -> int:
        return len(self.P_plus)


def _require_constant(params: SystemParams) -> None:
    if not params.is_constant:
        raise ConfigError(
            "eigendecomposition needs constant parameters; use the oracle or Wei-Norman solver"
        )


def heff_spectrum(params: SystemParams, t: float = 0.0) -> ModeSpectrum:
    """Eigenvalues of ``-i H_eff`` with complex-orthogonally normalized eigenvectors.

    Raises
    ------
    ExceptionalPointError
        If the eigenvector system is numerically defective.
    """
    _require_constant(params)
    A = -1j * build_heff_matrix(params, t)
    w, V = np.linalg.eig(A)
    q = np.einsum("ki,ki->i", V, V)
    with np.errstate(divide="ignore"):
        cond = float(np.max(1.0 / np.abs(q)))
    scale = max(1.0, float(np.max(np.abs(A))))
    if not np.isfinite(cond) or cond > EP_CONDITION_MAX:
        raise ExceptionalPointError(
            f"effective Hamiltonian is at (or numerically at) an exceptional point "
            f"(ep_condition={cond:.3e}); use the oracle or Wei-Norman solver",
            ep_condition=cond,
        )
    n = len(w)
    for i, j in itertools.combinations(range(n), 2):
        overlap = abs(np.vdot(V[:, i], V[:, j]))
        if abs(w[i] - w[j]) < EP_GAP_REL * scale and overlap > 0.5:
            raise ExceptionalPointError(
                f"coalescing eigenpair {w[i]:.6g}, {w[j]:.6g} (ep_condition={cond:.3e}); "
                "use the oracle or Wei-Norman solver",
                ep_condition=cond,
            )

    C = (V / np.sqrt(q)).T
    for row in C:
        j = int(np.argmax(np.abs(row)))
        if row[j].real < 0:
            row *= -1
    order = np.lexsort((-w.real, -np.round(w.imag, 10)))
    return ModeSpectrum(w[order], C[order], cond)


def regular_representation(params: SystemParams) -> np.ndarray:
    """Block matrix of ``ad_L`` on the ordered basis {L^+, R^-, R^+, L^-}."""
    _require_constant(params)
    n = params.n_modes
    H = build_heff_matrix(params)
    Gam = 2 * np.diag([g(0.0) for g in params.gamma]).astype(complex)
    Z = np.zeros((n, n), dtype=complex)
    return np.block(
        [
            [-1j * H, Gam, Z, Z],
            [Z, -1j * H.conj().T, Z, Z],
            [Z, Z, 1j * H.conj().T, Gam],
            [Z, Z, Z, 1j * H],
        ]
    )


def regular_representation_from_commutators(params: SystemParams, basis: FockBasis):
    """Expand ``[L, X_i]`` in the linear superoperators numerically.

    Returns ``(R, residual)``; an independent check on :func:`regular_representation`.
    Only columns below the top layer are used, where the truncated ladders are exact.
    """
    ops = linear_superoperators(basis)
    X = list(ops.Lp) + list(ops.Rm) + list(ops.Rp) + list(ops.Lm)
    L = build_liouvillian(params, basis).s
    keep = _exact_region(basis)
    flat = np.array([x[:, keep].ravel() for x in X]).T
    R = np.zeros((len(X), len(X)), dtype=complex)
    residual = 0.0
    for i, x in enumerate(X):
        target = (L @ x - x @ L)[:, keep].ravel()
        coef, *_ = np.linalg.lstsq(flat, target, rcond=None)
        R[i] = coef
        residual = max(residual, float(np.max(np.abs(flat @ coef - target))))
    return R, residual


def _exact_region(basis: FockBasis) -> np.ndarray:
    # rows/cols |n><m| with |n|, |m| <= max_total - 1: one ladder step stays inside
    low = basis.totals < basis.max_total
    return np.flatnonzero(np.kron(low, low))


def build_ladder_operators(spectrum: ModeSpectrum, basis: FockBasis) -> LadderSet:
    ops = linear_superoperators(basis)
    C = spectrum.coeffs
    n = C.shape[0]
    if basis.n_modes != n:
        raise ConfigError("spectrum and basis disagree on the number of modes")
    Pp, Pm, Qp, Qm = [], [], [], []
    for i in range(n):
        Pp.append(sum(C[i, k] * (ops.Lp[k] - ops.Rm[k]) for k in range(n)))
        Pm.append(sum(C[i, k] * ops.Lm[k] for k in range(n)))
        Qp.append(sum(np.conj(C[i, k]) * (ops.Rp[k] - ops.Lm[k]) for k in range(n)))
        Qm.append(sum(np.conj(C[i, k]) * ops.Rm[k] for k in range(n)))
    return LadderSet(basis, spectrum.lambdas, tuple(Pp), tuple(Pm), tuple(Qp), tuple(Qm))


def ground_state(basis: FockBasis) -> tuple[np.ndarray, np.ndarray]:
    """Right ground state ``vec(|0><0|)`` and left ground state ``vec(1)``."""
    right = np.zeros(basis.dim**2, dtype=complex)
    right[0] = 1.0  # |0...0> is index 0 in canonical ordering
    return right, identity_vector(basis)


def _check_indices(alpha, beta, basis):
    alpha, beta = tuple(int(a) for a in alpha), tuple(int(b) for b in beta)
    if len(alpha) != basis.n_modes or len(beta) != basis.n_modes:
        raise ConfigError("multi-index length must equal the number of modes")
    if min(alpha + beta) < 0:
        raise ConfigError("multi-indices must be nonnegative")
    if sum(alpha) > basis.max_total or sum(beta) > basis.max_total:
        raise ConfigError(
            f"multi-index ({alpha}, {beta}) exceeds the truncation max_total={basis.max_total}"
        )
    return alpha, beta


def _norm(alpha, beta) -> float:
    return math.sqrt(math.prod(math.factorial(a) for a in alpha + beta))


def ladder_state(alpha, beta, ladder: LadderSet, side: str = "right") -> np.ndarray:
    """Right eigenvector ``|alpha, beta>>`` or the column ``w`` with ``<<alpha, beta| = w^H``."""
    alpha, beta = _check_indices(alpha, beta, ladder.basis)
    right, left = ground_state(ladder.basis)
    if side == "right":
        v = right
        for i, b in enumerate(beta):
            for _ in range(b):
                v = ladder.Q_plus[i] @ v
        for i, a in enumerate(alpha):
            for _ in range(a):
                v = ladder.P_plus[i] @ v
        return v / _norm(alpha, beta)
    if side == "left":
        row = left.conj()
        for i, a in enumerate(alpha):
            for _ in range(a):
                row = row @ ladder.P_minus[i]
        for i, b in enumerate(beta):
            for _ in range(b):
                row = row @ ladder.Q_minus[i]
        return (row / _norm(alpha, beta)).conj()
    raise ConfigError(f"side must be 'right' or 'left', got {side!r}")


def overlap(alpha, beta, ladder: LadderSet, rho0: DensityMatrix) -> complex:
    """Expansion coefficient ``<<alpha, beta | rho0>>``."""
    w = ladder_state(alpha, beta, ladder, "left")
    return complex(np.vdot(w, vectorize(rho0)))


def multi_indices(n_modes: int, max_total: int) -> list[tuple[int, ...]]:
    out = []
    for total in range(max_total + 1):
        out.extend(
            sorted(o for o in itertools.product(range(total + 1), repeat=n_modes) if sum(o) == total)
        )
    return out


@dataclass(frozen=True, eq=False)
class Eigenbasis:
    """All ladder eigenpairs on a truncated Liouville space."""

    labels: list
    exponents: np.ndarray
    right: np.ndarray  # columns
    left_rows: np.ndarray  # rows, already conjugated: coefficient = left_rows @ vec(rho)


def liouvillian_eigenbasis(ladder: LadderSet) -> Eigenbasis:
    basis = ladder.basis
    idx = multi_indices(basis.n_modes, basis.max_total)
    lam = ladder.lambdas
    right0, left0 = ground_state(basis)

    # build by recursion; all creators (resp. annihilators) commute
    right_q = {(0,) * basis.n_modes: right0}
    for beta in idx[1:]:
        i = next(k for k, b in enumerate(beta) if b)
        prev = beta[:i] + (beta[i] - 1,) + beta[i + 1 :]
        right_q[beta] = ladder.Q_plus[i] @ right_q[prev] / math.sqrt(beta[i])
    left_q = {(0,) * basis.n_modes: left0.conj()}
    for beta in idx[1:]:
        i = next(k for k, b in enumerate(beta) if b)
        prev = beta[:i] + (beta[i] - 1,) + beta[i + 1 :]
        left_q[beta] = left_q[prev] @ ladder.Q_minus[i] / math.sqrt(beta[i])

    labels, exps, rights, lefts = [], [], [], []
    for beta in idx:
        r_cur = {(0,) * basis.n_modes: right_q[beta]}
        l_cur = {(0,) * basis.n_modes: left_q[beta]}
        for alpha in idx[1:]:
            i = next(k for k, a in enumerate(alpha) if a)
            prev = alpha[:i] + (alpha[i] - 1,) + alpha[i + 1 :]
            r_cur[alpha] = ladder.P_plus[i] @ r_cur[prev] / math.sqrt(alpha[i])
            l_cur[alpha] = l_cur[prev] @ ladder.P_minus[i] / math.sqrt(alpha[i])
        for alpha in idx:
            labels.append((alpha, beta))
            exps.append(np.dot(alpha, lam) + np.dot(beta, np.conj(lam)))
            rights.append(r_cur[alpha])
            lefts.append(l_cur[alpha])
    return Eigenbasis(labels, np.array(exps), np.array(rights).T, np.array(lefts))


def evolve_eigendecomposition(params: SystemParams, rho0: DensityMatrix, t_grid) -> Trajectory:
    """Propagate ``rho0`` as a sum over Liouvillian eigenstates."""
    t = check_time_grid(t_grid)
    spectrum = heff_spectrum(params)
    ladder = build_ladder_operators(spectrum, rho0.basis)
    eb = liouvillian_eigenbasis(ladder)
    coef = eb.left_rows @ vectorize(rho0)
    states = [rho0]
    for ti in t[1:]:
        v = eb.right @ (np.exp(ti * eb.exponents) * coef)
        states.append(devectorize(v, rho0.basis))
    meta = {"solver": "eigen", "ep_condition": spectrum.ep_condition}
    return Trajectory(t, states, meta)


def liouvillian_exponents(spectrum: ModeSpectrum, max_total: int):
    """All ``(alpha, beta, alpha.lambda + beta.conj(lambda))`` with |alpha|, |beta| <= max_total.

    Sorted slowest-decaying first (descending real part, then imaginary part).
    """
    lam = spectrum.lambdas
    idx = multi_indices(len(lam), max_total)
    rows = [
        (a, b, complex(np.dot(a, lam) + np.dot(b, np.conj(lam)))) for a in idx for b in idx
    ]
    rows.sort(key=lambda r: (-round(r[2].real, 12), -round(r[2].imag, 12), r[0], r[1]))
    return rows


def liouvillian_eigenvalue_multiset(spectrum: ModeSpectrum) -> np.ndarray:
    lam = spectrum.lambdas
    return np.concatenate([lam, -lam.conj(), lam.conj(), -lam])


# -- passive-PT coupler --------------------------------------------------------


def coincidence_closed_form(kappa: float, gamma: float, t):
    """Coincidence rate of ``|1,1>`` in a coupler with loss ``gamma`` on mode 1 only.

    The removable singularity at ``4 kappa^2 = gamma^2`` is bridged with a
    Taylor expansion of the cosine.
    """
    t = np.asarray(t, dtype=float)
    s = 4 * kappa**2 - gamma**2
    scale = 4 * kappa**2 + gamma**2
    if scale == 0 or abs(s) < 1e-6 * scale:
        ratio = -1 + 2 * kappa**2 * t**2 - kappa**2 * t**4 * s / 6
    elif s > 0:
        ratio = (gamma**2 - 4 * kappa**2 * np.cos(t * np.sqrt(s))) / s
    else:
        ratio = (gamma**2 - 4 * kappa**2 * np.cosh(t * np.sqrt(-s))) / s
    out = np.exp(-2 * gamma * t) * ratio**2
    return float(out) if out.ndim == 0 else out


def _closed_form_ratio(kappa, gamma, t):
    s = 4 * kappa**2 - gamma**2
    scale = 4 * kappa**2 + gamma**2
    if scale == 0 or abs(s) < 1e-6 * scale:
        return -1 + 2 * kappa**2 * t**2 - kappa**2 * t**4 * s / 6
    if s > 0:
        return (gamma**2 - 4 * kappa**2 * math.cos(t * math.sqrt(s))) / s
    return (gamma**2 - 4 * kappa**2 * math.cosh(t * math.sqrt(-s))) / s


def hom_dip(kappa: float, gamma: float, resolution: int = 2000) -> tuple[float, float]:
    """First zero of the closed-form coincidence, by grid bracketing plus bisection.

    Returns ``(t_dip, Gamma(t_dip))``; ``(nan, nan)`` if no zero is found.
    """
    if kappa <= 0:
        return math.nan, math.nan
    t_max = math.pi / (2 * kappa)
    grid = np.linspace(0.0, t_max, max(int(resolution), 2) + 1)
    f = [_closed_form_ratio(kappa, gamma, ti) for ti in grid]
    for k in range(len(grid) - 1):
        if f[k] == 0.0:
            lo = hi = grid[k]
            break
        if f[k] * f[k + 1] <= 0:
            lo, hi = grid[k], grid[k + 1]
            break
    else:
        return math.nan, math.nan
    flo = _closed_form_ratio(kappa, gamma, lo)
    for _ in range(200):
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        fm = _closed_form_ratio(kappa, gamma, mid)
        if flo * fm <= 0:
            hi = mid
        else:
            lo, flo = mid, fm
    t_dip = 0.5 * (lo + hi)
    return t_dip, coincidence_closed_form(kappa, gamma, t_dip)


# -- post-selection ------------------------------------------------------------


def postselected_evolution(params: SystemParams, rho0: DensityMatrix, t: float) -> np.ndarray:
    """Top-layer block evolved by ``exp(-i H_eff t)`` alone (no jump terms).

    Returns the unnormalized ``d x d`` block on the ``sum n = max_total`` layer.
    """
    _require_constant(params)
    basis = rho0.basis
    sl = basis.layer_slice(basis.max_total)
    h = build_heff_operator(params, basis)[sl, sl]
    U = expm(-1j * t * h)
    block = rho0.m[sl, sl]
    return U @ block @ U.conj().T
