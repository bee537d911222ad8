"""Lie-algebraic structure of the quadratic superoperators.

The 3N^2 elements ``L_i^+ L_j^-``, ``R_i^+ R_j^-`` and ``L_i^- R_j^-`` close
under commutation. Structure constants are obtained numerically by projecting
matrix commutators back onto the span, and the Cartan-Killing form then
exposes the decomposition

    nilpotent (N^2)  +  Abelian (2)  +  sl(N, C)  +  sl(N, C).

All elements act within excitation layers <= 2, so a ``max_total = 2``
truncation represents the algebra faithfully.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import qr

from .errors import AlgebraNotClosedError, ConfigError, NumericalError, RankAmbiguityError
from .fock import FockBasis
from .liouville import SystemParams, linear_superoperators

CLOSURE_TOL = 1e-10
RANK_CUT = 1e-8
# relative singular values in (RANK_CUT / AMBIGUITY_BAND, RANK_CUT * AMBIGUITY_BAND)
# are treated as an undecidable rank
AMBIGUITY_BAND = 100.0


@dataclass(frozen=True)
class AlgebraBasis:
    n_modes: int
    labels: tuple[str, ...]
    kinds: tuple[str, ...]
    index_pairs: tuple[tuple[int, int], ...]
    matrices: np.ndarray
    basis: FockBasis

    def __len__(self) -> int:
        return len(self.labels)

    def indices(self, kind: str) -> list[int]:
        """Positions of all elements of one kind (``"LL"``, ``"RR"`` or ``"LR"``)."""
        return [a for a, k in enumerate(self.kinds) if k == kind]

    def position(self, kind: str, i: int, j: int) -> int:
        """Position of an element by kind and 1-based mode indices."""
        n = self.n_modes
        offset = {"LL": 0, "RR": 1, "LR": 2}[kind] * n * n
        return offset + (i - 1) * n + (j - 1)

    def element(self, coeffs) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs), self.matrices, axes=1)


def quadratic_basis(n_modes: int) -> AlgebraBasis:
    """All 3N^2 quadratic superoperators on ``FockBasis(N, 2)``."""
    if n_modes < 1:
        raise ConfigError("n_modes must be >= 1")
    basis = FockBasis(n_modes, 2)
    o = linear_superoperators(basis)
    labels, kinds, pairs, mats = [], [], [], []
    for kind, build, fmt in (
        ("LL", lambda i, j: o.Lp[i] @ o.Lm[j], "L{}+L{}-"),
        ("RR", lambda i, j: o.Rp[i] @ o.Rm[j], "R{}+R{}-"),
        ("LR", lambda i, j: o.Lm[i] @ o.Rm[j], "L{}-R{}-"),
    ):
        for i in range(n_modes):
            for j in range(n_modes):
                labels.append(fmt.format(i + 1, j + 1))
                kinds.append(kind)
                pairs.append((i + 1, j + 1))
                mats.append(build(i, j))
    return AlgebraBasis(
        n_modes, tuple(labels), tuple(kinds), tuple(pairs), np.array(mats), basis
    )


@dataclass
class StructureTensor:
    """``[X_a, X_b] = sum_c C[a, b, c] X_c`` together with the Killing form."""

    algebra: AlgebraBasis
    C: np.ndarray
    killing: np.ndarray
    closure_residual: float

    @property
    def dim(self) -> int:
        return self.C.shape[0]

    def ad(self, a: int) -> np.ndarray:
        """Regular representation of element ``a``: ``ad[c, b] = C[a, b, c]``."""
        return self.C[a].T

    def bracket(self, x, y) -> np.ndarray:
        """Coefficients of ``[x, y]`` for coefficient vectors ``x``, ``y``."""
        return np.einsum("a,b,abc->c", x, y, self.C)

    def killing_form(self, x, y) -> complex:
        return complex(np.asarray(x) @ self.killing @ np.asarray(y))

    def jacobi_residual(self) -> float:
        C = self.C
        t1 = np.einsum("abd,dce->abce", C, C)
        jac = t1 + t1.transpose(1, 2, 0, 3) + t1.transpose(2, 0, 1, 3)
        return float(np.abs(jac).max()) if jac.size else 0.0

    def antisymmetry_residual(self) -> float:
        return float(np.abs(self.C + self.C.transpose(1, 0, 2)).max())


def structure_constants(algebra: AlgebraBasis) -> StructureTensor:
    """Project every commutator onto the span with a Hilbert-Schmidt Gram solve.

    Raises
    ------
    AlgebraNotClosedError
        If some commutator leaves the span by more than ``1e-10`` (relative).
    """
    n = len(algebra)
    X = algebra.matrices.reshape(n, -1).T  # columns are vectorized elements
    gram = X.conj().T @ X
    m = algebra.matrices
    comms = np.matmul(m[:, None], m[None, :])
    comms = comms - comms.transpose(1, 0, 2, 3)
    rhs = comms.reshape(n * n, -1).T
    coeffs = np.linalg.solve(gram, X.conj().T @ rhs)
    scale = max(np.linalg.norm(X, axis=0).max(), 1.0)
    resid = np.linalg.norm(rhs - X @ coeffs, axis=0).max() / scale**2
    if resid > CLOSURE_TOL:
        raise AlgebraNotClosedError(f"commutator leaves the span, residual {resid:.3e}")
    C = coeffs.T.reshape(n, n, n)
    # integer-valued for this algebra; snap projection round-off
    snapped = np.round(C.real) + 1j * np.round(C.imag)
    C = np.where(np.abs(C - snapped) < CLOSURE_TOL, snapped, C)
    C = 0.5 * (C - C.transpose(1, 0, 2))
    if np.abs(C.imag).max() < CLOSURE_TOL:
        C = C.real.copy()
    killing = np.einsum("adc,bcd->ab", C, C)
    return StructureTensor(algebra, C, killing, float(resid))


@lru_cache(maxsize=8)
def structure_tensor(n_modes: int) -> StructureTensor:
    return structure_constants(quadratic_basis(n_modes))


def _rank(s: np.ndarray, what: str, ref: float | None = None) -> int:
    ref = s[0] if ref is None and s.size else ref
    if s.size == 0 or not ref:
        return 0
    rel = s / ref
    lo, hi = RANK_CUT / AMBIGUITY_BAND, RANK_CUT * AMBIGUITY_BAND
    amb = rel[(rel > lo) & (rel < hi)]
    if amb.size:
        raise RankAmbiguityError(
            f"rank of {what} undecidable: relative singular value {amb[0]:.3e} near cut {RANK_CUT:g}"
        )
    return int(np.sum(rel >= RANK_CUT))


def span(vectors: np.ndarray, what: str = "span", ref: float | None = None) -> np.ndarray:
    """Orthonormal basis (as columns) of the column span of ``vectors``.

    Singular values are judged relative to ``ref`` (default: the largest one).
    """
    if vectors.size == 0:
        return np.zeros((vectors.shape[0], 0))
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    return u[:, : _rank(s, what, ref)]


def null_space(m: np.ndarray, what: str = "null space") -> np.ndarray:
    _, s, vh = np.linalg.svd(m)
    r = _rank(s, what)
    return vh[r:].conj().T


def bracket_span(tensor: StructureTensor, A: np.ndarray, B: np.ndarray, what: str) -> np.ndarray:
    """Orthonormal basis of ``[span A, span B]``."""
    if A.shape[1] == 0 or B.shape[1] == 0:
        return np.zeros((tensor.dim, 0))
    v = np.einsum("ar,bs,abc->crs", A, B, tensor.C).reshape(tensor.dim, -1)
    # an all-zero bracket would otherwise be judged against its own round-off
    return span(v, what, ref=max(np.abs(tensor.C).max(), 1.0))


def derived_algebra(tensor: StructureTensor) -> np.ndarray:
    eye = np.eye(tensor.dim)
    return bracket_span(tensor, eye, eye, "derived algebra")


def _tags(algebra: AlgebraBasis, subspace: np.ndarray) -> tuple[str, ...]:
    """Labels of the original elements that dominate ``subspace`` (pivoted QR)."""
    if subspace.shape[1] == 0:
        return ()
    _, _, piv = qr(subspace.T, pivoting=True)
    return tuple(algebra.labels[p] for p in sorted(piv[: subspace.shape[1]]))


@dataclass
class Radical:
    """Radical of the algebra and its nilpotent/Abelian split."""

    basis: np.ndarray
    tags: tuple[str, ...]
    derived: np.ndarray
    nilpotent: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def nilpotent_dim(self) -> int:
        return self.nilpotent.shape[1]

    @property
    def abelian_dim(self) -> int:
        return self.dim - self.nilpotent_dim


def radical(tensor: StructureTensor) -> Radical:
    """Killing-orthogonal complement of ``[g, g]`` (Cartan's criterion).

    The nilpotent part is reported as ``[g, rad]``; the remaining directions
    of the radical are central-like Abelian elements.
    """
    derived = derived_algebra(tensor)
    rad = null_space(derived.T @ tensor.killing, "radical")
    rad = span(rad, "radical")
    nil = bracket_span(tensor, np.eye(tensor.dim), rad, "nilpotent ideal")
    return Radical(rad, _tags(tensor.algebra, rad), derived, nil)


def subspace_residual(vectors: np.ndarray, subspace: np.ndarray) -> float:
    """Largest distance of the columns of ``vectors`` from ``span(subspace)``."""
    if vectors.size == 0:
        return 0.0
    proj = subspace @ (subspace.conj().T @ vectors)
    return float(np.abs(vectors - proj).max())


def ideal_residual(tensor: StructureTensor, subspace: np.ndarray) -> float:
    """How far ``[g, subspace]`` sticks out of ``subspace``."""
    v = np.einsum("br,abc->car", subspace, tensor.C).reshape(tensor.dim, -1)
    return subspace_residual(v, subspace)


def derived_series(tensor: StructureTensor, subspace: np.ndarray, max_steps: int = 8) -> list[int]:
    """Dimensions of ``h, [h,h], [[h,h],[h,h]], ...`` until zero or ``max_steps``."""
    dims = [subspace.shape[1]]
    cur = subspace
    for _ in range(max_steps):
        if cur.shape[1] == 0:
            break
        cur = bracket_span(tensor, cur, cur, "derived series")
        dims.append(cur.shape[1])
    return dims


@dataclass
class SemisimpleReport:
    sl_left: np.ndarray
    sl_right: np.ndarray
    mutual_residual: float
    cartan_residual: float
    abelian_residual: float
    killing_condition: tuple[float, float]
    extras: dict = field(default_factory=dict)

    @property
    def dims(self) -> tuple[int, int]:
        return self.sl_left.shape[1], self.sl_right.shape[1]


def _cartan_elements(algebra: AlgebraBasis, kind: str) -> np.ndarray:
    n = algebra.n_modes
    out = np.zeros((len(algebra), max(n - 1, 0)))
    for i in range(1, n):
        out[algebra.position(kind, i, i), i - 1] = 1.0
        out[algebra.position(kind, i + 1, i + 1), i - 1] = -1.0
    return out


def _abelian_element(algebra: AlgebraBasis, kind: str) -> np.ndarray:
    v = np.zeros(len(algebra))
    for i in range(1, algebra.n_modes + 1):
        v[algebra.position(kind, i, i)] = 1.0
    return v


def classify_semisimple(tensor: StructureTensor, rad: Radical) -> SemisimpleReport:
    """Identify the two commuting sl(N, C) ideals outside the radical.

    Raises
    ------
    NumericalError
        If the Killing form restricted to either ideal is degenerate.
    """
    alg = tensor.algebra
    n = alg.n_modes
    eye = np.eye(tensor.dim)
    sides = {}
    for kind in ("LL", "RR"):
        sub = eye[:, alg.indices(kind)]
        sides[kind] = bracket_span(tensor, sub, sub, f"sl ideal {kind}")

    left, right = sides["LL"], sides["RR"]
    mutual = np.einsum("ar,bs,abc->crs", left, right, tensor.C)
    mutual_res = float(np.abs(mutual).max()) if mutual.size else 0.0

    cartan_res = 0.0
    for kind, sub in sides.items():
        T = _cartan_elements(alg, kind)
        cartan_res = max(cartan_res, subspace_residual(T, sub))

    abelian_res = 0.0
    for kind in ("LL", "RR"):
        z = _abelian_element(alg, kind)
        for a in alg.indices(kind):
            abelian_res = max(abelian_res, float(np.abs(tensor.bracket(z, eye[a])).max()))

    conds = []
    for kind, sub in sides.items():
        if sub.shape[1] == 0:
            conds.append(0.0)
            continue
        s = np.linalg.svd(sub.T @ tensor.killing @ sub, compute_uv=False)
        cond = float(s[-1] / s[0]) if s[0] > 0 else 0.0
        if cond < RANK_CUT:
            raise NumericalError(f"Killing form degenerate on the {kind} ideal (ratio {cond:.3e})")
        conds.append(cond)

    if left.shape[1] != n * n - 1 or right.shape[1] != n * n - 1:
        raise NumericalError(
            f"semisimple ideals have dimensions {left.shape[1]}, {right.shape[1]}, expected {n * n - 1}"
        )
    return SemisimpleReport(left, right, mutual_res, cartan_res, abelian_res, tuple(conds))


def decompose(n_modes: int) -> dict:
    """Dimension bookkeeping and residuals for the CLI and tests."""
    tensor = structure_tensor(n_modes)
    rad = radical(tensor)
    if n_modes > 1:
        ss = classify_semisimple(tensor, rad)
        sl_l, sl_r = ss.dims
    else:
        sl_l = sl_r = 0
    return {
        "n_modes": n_modes,
        "dims": {
            "total": tensor.dim,
            "nilpotent": rad.nilpotent_dim,
            "abelian": rad.abelian_dim,
            "sl_left": sl_l,
            "sl_right": sl_r,
        },
        "radical_dim": rad.dim,
        "radical_tags": list(rad.tags),
        "closure_residual": tensor.closure_residual,
        "jacobi_residual": tensor.jacobi_residual(),
        "radical_ideal_residual": ideal_residual(tensor, rad.basis),
        "radical_derived_series": derived_series(tensor, rad.basis),
    }


def semisimple_element(params: SystemParams, t: float = 0.0) -> np.ndarray:
    """Coefficient vector of the left sl(2) part ``L_S1`` at time ``t``."""
    if params.n_modes != 2:
        raise ConfigError("the semisimple element is defined for two modes")
    alg = structure_tensor(2).algebra
    (s1, s2), (g1, g2), (kap,) = params.at(t)
    c0 = 0.5 * (-1j * (s1 - s2) - (g1 - g2))
    z = np.zeros(len(alg), dtype=complex)
    z[alg.position("LL", 1, 1)] = c0
    z[alg.position("LL", 2, 2)] = -c0
    z[alg.position("LL", 1, 2)] = -1j * kap
    z[alg.position("LL", 2, 1)] = -1j * kap
    return z


def killing_norm_semisimple(params: SystemParams, t: float = 0.0) -> complex:
    """``(Z, Z)_CK`` for ``Z = L_S1``, complex-bilinear in the coefficients.

    For equal detunings the value is real and negative while the coupler is
    PT-unbroken (``(gamma_1 - gamma_2) / 2 < kappa``), positive beyond.
    """
    tensor = structure_tensor(2)
    z = semisimple_element(params, t)
    return complex(z @ tensor.killing @ z)
