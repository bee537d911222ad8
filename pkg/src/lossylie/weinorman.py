"""Wei-Norman product expansion of the two-mode propagator.

The Liouvillian splits into a solvable part (mean energy/loss plus the
excitation-removing ``L_i^- R_j^-``) and two commuting sl(2, C) copies, one
acting from the left and one from the right. Each sl(2) factor is written as

    U_S1 = exp(f+ K+) exp(f0 K0) exp(f- K-)

and the right-acting copy uses the complex-conjugate functions. The f's come
from the 2x2 fundamental matrix ``M' = A(t) M``, which sidesteps the finite
time blow-up of the equivalent Riccati equation; the radical functions
``a_1..a_6`` are then plain quadratures driven by the f's.

Works for time-dependent schedules, including at the exceptional point.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from . import _dopri
from .errors import ConfigError, FactorizationSingularity
from .fock import DensityMatrix, FockBasis
from .liouville import SystemParams, devectorize, linear_superoperators, vectorize
from .oracle import IntegratorConfig, Trajectory, check_time_grid

SINGULAR_REL = 1e-10
# evolve_weinorman re-anchors the factorization once |M_22| / ||M|| falls below this
CHART_GUARD = 0.1


def _require_two_modes(params: SystemParams) -> None:
    if params.n_modes != 2:
        raise ConfigError(
            f"the Wei-Norman solver is implemented for two modes, got {params.n_modes}"
        )


@dataclass(frozen=True)
class WNSplit:
    """Coefficients of ``L = L_R + L_S1 + L_S2`` at one instant.

    ``delta`` is defined so that ``c_k0 == -1j * delta`` holds identically.
    """

    abelian_left: complex
    abelian_right: complex
    loss: tuple[float, float]
    c_k0: complex
    c_kplus: complex
    c_kminus: complex
    kappa: float
    delta: complex

    @property
    def s2_coefficients(self) -> tuple[complex, complex, complex]:
        return (self.c_k0.conjugate(), self.c_kplus.conjugate(), self.c_kminus.conjugate())

    def superoperators(self, basis: FockBasis) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(L_R, L_S1, L_S2)`` as matrices on ``basis``."""
        g = wn_generators(basis)
        L_R = (
            self.abelian_left * g["N_L"]
            + self.abelian_right * g["N_R"]
            + self.loss[0] * g["LR11"]
            + self.loss[1] * g["LR22"]
        )
        L_S1 = self.c_k0 * g["K0_L"] + self.c_kplus * g["Kp_L"] + self.c_kminus * g["Km_L"]
        c0, cp, cm = self.s2_coefficients
        L_S2 = c0 * g["K0_R"] + cp * g["Kp_R"] + cm * g["Km_R"]
        return L_R, L_S1, L_S2


def split_liouvillian(params: SystemParams, t: float = 0.0) -> WNSplit:
    _require_two_modes(params)
    (s1, s2), (g1, g2), (kap,) = params.at(t)
    c_k0 = 0.5 * (-1j * (s1 - s2) - (g1 - g2))
    return WNSplit(
        abelian_left=0.5 * (-1j * (s1 + s2) - (g1 + g2)),
        abelian_right=0.5 * (1j * (s1 + s2) - (g1 + g2)),
        loss=(2 * g1, 2 * g2),
        c_k0=c_k0,
        c_kplus=-1j * kap,
        c_kminus=-1j * kap,
        kappa=float(kap),
        delta=1j * c_k0,
    )


@lru_cache(maxsize=16)
def wn_generators(basis: FockBasis) -> dict:
    """Fixed superoperators of the two-mode expansion (labels use 1-based modes)."""
    if basis.n_modes != 2:
        raise ConfigError("Wei-Norman generators need a two-mode basis")
    o = linear_superoperators(basis)
    Lm, Lp, Rm, Rp = o.Lm, o.Lp, o.Rm, o.Rp
    out = {
        "N_L": Lp[0] @ Lm[0] + Lp[1] @ Lm[1],
        "N_R": Rp[0] @ Rm[0] + Rp[1] @ Rm[1],
        "K0_L": Lp[0] @ Lm[0] - Lp[1] @ Lm[1],
        "Kp_L": Lp[0] @ Lm[1],
        "Km_L": Lp[1] @ Lm[0],
        "K0_R": Rp[0] @ Rm[0] - Rp[1] @ Rm[1],
        "Kp_R": Rp[0] @ Rm[1],
        "Km_R": Rp[1] @ Rm[0],
        "LR11": Lm[0] @ Rm[0],
        "LR22": Lm[1] @ Rm[1],
        "LR21": Lm[1] @ Rm[0],
        "LR12": Lm[0] @ Rm[1],
    }
    for m in out.values():
        m.setflags(write=False)
    return out


def _sl2_generator(params: SystemParams, t: float) -> np.ndarray:
    sp = split_liouvillian(params, t)
    return np.array([[sp.c_k0, sp.c_kplus], [sp.c_kminus, -sp.c_k0]])


@dataclass
class SL2Solution:
    """Dense 2x2 fundamental matrix and the f-functions extracted from it."""

    dense: _dopri.DenseSolution
    t_end: float
    _nodes: np.ndarray
    _log_m22_imag: np.ndarray
    singular: bool = False
    t_singular: float | None = None
    t0: float = 0.0

    def matrix(self, t: float) -> np.ndarray:
        if t == self.t0:
            return np.eye(2, dtype=complex)
        return self.dense(t).reshape(2, 2)

    def matrix_derivative(self, t: float) -> np.ndarray:
        return self.dense.derivative(t).reshape(2, 2)

    def _log_m22(self, t: float, m22: complex) -> complex:
        if t == self.t0:
            return 0j
        i = int(np.searchsorted(self._nodes, t, side="right")) - 1
        i = min(max(i, 0), len(self._nodes) - 1)
        ref = self._log_m22_imag[i]
        z = cmath.log(m22)
        k = round((ref - z.imag) / (2 * math.pi))
        return complex(z.real, z.imag + 2 * math.pi * k)

    def f(self, t: float) -> tuple[complex, complex, complex]:
        """``(f_plus, f_zero, f_minus)`` at ``t``; ``f_zero`` on the continuous branch."""
        if t == self.t0:
            return 0j, 0j, 0j
        M = self.matrix(t)
        m22 = M[1, 1]
        return M[0, 1] / m22, -self._log_m22(t, m22), M[1, 0] / m22

    def derivatives(self, t: float) -> tuple[complex, complex, complex]:
        """Time derivatives of the f's from the dense interpolant of ``M``."""
        M = self.matrix(t)
        dM = self.matrix_derivative(t)
        m22, d22 = M[1, 1], dM[1, 1]
        dfp = (dM[0, 1] * m22 - M[0, 1] * d22) / m22**2
        df0 = -d22 / m22
        dfm = (dM[1, 0] * m22 - M[1, 0] * d22) / m22**2
        return dfp, df0, dfm


def integrate_sl2(
    params: SystemParams,
    t_end: float,
    config: IntegratorConfig | None = None,
    raise_on_singular: bool = True,
    t0: float = 0.0,
) -> SL2Solution:
    """Integrate ``M' = A(t) M``, ``M(t0) = 1`` in the defining sl(2) representation.

    Raises
    ------
    FactorizationSingularity
        When ``|M_22|`` drops below ``1e-10 ||M||`` somewhere in ``[t0, t_end]``;
        the exp(f+K+)exp(f0K0)exp(f-K-) ordering does not exist there.
    """
    _require_two_modes(params)
    config = config or IntegratorConfig()
    if t_end < t0:
        raise ConfigError("t_end must not precede the start time")

    dense, nodes, log_imag = _integrate_fundamental(params, t0, t_end, config)
    t_sing = _find_singularity(dense) if t_end > t0 else None
    sol = SL2Solution(dense, t_end, nodes, log_imag, t_sing is not None, t_sing, t0)
    if t_sing is not None and raise_on_singular:
        raise FactorizationSingularity(
            f"Wei-Norman factorization breaks down near t={t_sing:.6g} (M_22 -> 0)",
            t_singular=t_sing,
        )
    return sol


# the 2x2 system is cheap; run it tighter so that interpolant derivatives
# (used by the f-equations) stay accurate
SL2_TIGHTEN = 1e-2


def _integrate_fundamental(params, t0, t_end, config):
    config = config or IntegratorConfig()

    def fun(t, y):
        return (_sl2_generator(params, t) @ y.reshape(2, 2)).ravel()

    y0 = np.eye(2, dtype=complex).ravel()
    if t_end == t0:
        dense = _dopri.DenseSolution()
        zero = np.zeros(4, dtype=complex)
        dense.append(t0, 1.0, (y0, zero, zero, zero, zero))
        return dense, np.array([t0]), np.array([0.0])

    res = _dopri.solve(
        fun,
        y0,
        [t0, t_end],
        rtol=max(config.rtol * SL2_TIGHTEN, 1e-13),
        atol=max(config.atol * SL2_TIGHTEN, 1e-15),
        max_steps=config.max_steps,
        h_init=config.initial_step,
        dense=True,
    )
    dense = res.dense
    m22_nodes = np.array([c[0][3] for c in dense.coeffs])
    return dense, np.array(dense.t_nodes), np.unwrap(np.angle(m22_nodes))


_THETAS = np.linspace(0.0, 1.0, 17)
# sampled ratios above this cannot hide a zero of M_22 between samples
_REFINE_BELOW = 0.05


def _m22_ratio(rc, theta):
    """``|M_22| / ||M||`` on one step; ``theta`` may be an array."""
    th = np.asarray(theta, dtype=float)[..., None]
    y = _dopri._contd5(rc, th)
    return np.abs(y[..., 3]) / np.maximum(np.linalg.norm(y, axis=-1), 1e-300)


def _first_below(dense: _dopri.DenseSolution, level: float) -> float | None:
    """First sampled time at which ``|M_22| / ||M||`` drops below ``level``."""
    for t0, h, rc in zip(dense.t_nodes, dense.h, dense.coeffs):
        below = np.flatnonzero(_m22_ratio(rc, _THETAS[1:]) < level)
        if below.size:
            return t0 + _THETAS[1 + below[0]] * h
    return None


def _find_singularity(dense: _dopri.DenseSolution) -> float | None:
    thetas = _THETAS
    for t0, h, rc in zip(dense.t_nodes, dense.h, dense.coeffs):
        vals = _m22_ratio(rc, thetas)
        k = int(np.argmin(vals))
        best_theta, best = thetas[k], vals[k]
        if best > _REFINE_BELOW:
            continue
        lo, hi = thetas[max(k - 1, 0)], thetas[min(k + 1, len(thetas) - 1)]
        r = minimize_scalar(
            lambda th: float(_m22_ratio(rc, th)),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1e-14},
        )
        if r.fun < best:
            best_theta, best = r.x, r.fun
        if best < SINGULAR_REL:
            return t0 + best_theta * h
    return None


def riccati_residual(f_values, params: SystemParams, t: float) -> complex:
    """Residual of ``f+' + 2i delta f+ - i kappa f+^2 + i kappa = 0``.

    ``f_values`` is an :class:`SL2Solution` or a ``(f_plus, f_plus_dot)`` pair.
    """
    if isinstance(f_values, SL2Solution):
        fp = f_values.f(t)[0]
        dfp = f_values.derivatives(t)[0]
    else:
        fp, dfp = f_values
    sp = split_liouvillian(params, t)
    kap = sp.kappa
    return dfp + 2j * sp.delta * fp - 1j * kap * fp**2 + 1j * kap


def f_ode_residuals(sol: SL2Solution, params: SystemParams, t: float) -> np.ndarray:
    """Residuals of the three coupled f-equations at ``t``."""
    fp, f0, fm = sol.f(t)
    dfp, df0, dfm = sol.derivatives(t)
    sp = split_liouvillian(params, t)
    kap, delta = sp.kappa, sp.delta
    e = cmath.exp(-2 * f0)
    return np.array(
        [
            dfm * e + 1j * kap,
            df0 + dfm * fp * e + 1j * delta,
            dfp - 2 * df0 * fp - dfm * fp**2 * e + 1j * kap,
        ]
    )


@dataclass
class WNFunctions:
    """Dense f-functions and a-functions on ``[0, t_end]``."""

    sl2: SL2Solution
    radical: _dopri.DenseSolution | None
    t_end: float
    t0: float = 0.0

    @property
    def singular(self) -> bool:
        return self.sl2.singular

    @property
    def t_singular(self):
        return self.sl2.t_singular

    def f(self, t: float):
        return self.sl2.f(t)

    def a(self, t: float) -> np.ndarray:
        if t == self.t0 or self.radical is None:
            return np.zeros(6, dtype=complex)
        return self.radical(t)


def _radical_rhs(params: SystemParams, sl2: SL2Solution):
    def fun(t, a):
        (s1, s2), (g1, g2), _ = params.at(t)
        fp, f0, fm = sl2.f(t)
        e = cmath.exp(a[0] + a[1])
        ef0 = cmath.exp(f0)
        emf0 = cmath.exp(-f0)
        damp = math.exp(-2 * f0.real)
        m11 = ef0 + emf0 * fp * fm
        out = np.empty(6, dtype=complex)
        out[0] = 0.5 * (-1j * (s1 + s2) - (g1 + g2))
        out[1] = 0.5 * (1j * (s1 + s2) - (g1 + g2))
        out[2] = 2 * e * (g1 * abs(m11) ** 2 + g2 * damp * abs(fm) ** 2)
        out[3] = 2 * e * (g1 * damp * abs(fp) ** 2 + g2 * damp)
        out[4] = 2 * e * (g1 * m11.conjugate() * emf0 * fp + g2 * damp * fm.conjugate())
        out[5] = 2 * e * (g1 * m11 * emf0.conjugate() * fp.conjugate() + g2 * damp * fm)
        return out

    return fun


def integrate_radical(
    params: SystemParams,
    f_functions: SL2Solution,
    t_end: float,
    config: IntegratorConfig | None = None,
) -> _dopri.DenseSolution | None:
    """Integrate ``a_1..a_6`` (zero at the start of the f's) as one system driven by the f's."""
    _require_two_modes(params)
    config = config or IntegratorConfig()
    t0 = f_functions.t0
    if t_end == t0:
        return None
    res = _dopri.solve(
        _radical_rhs(params, f_functions),
        np.zeros(6, dtype=complex),
        [t0, t_end],
        rtol=config.rtol,
        atol=config.atol,
        max_steps=config.max_steps,
        h_init=config.initial_step,
        dense=True,
    )
    return res.dense


def wei_norman_functions(
    params: SystemParams, t_end: float, config: IntegratorConfig | None = None, t0: float = 0.0
) -> WNFunctions:
    """f- and a-functions on ``[t0, t_end]``; raises if the factorization breaks down."""
    sl2 = integrate_sl2(params, t_end, config, t0=t0)
    return WNFunctions(sl2, integrate_radical(params, sl2, t_end, config), t_end, t0)


def chart_segments(
    params: SystemParams, t_end: float, config: IntegratorConfig | None = None
) -> list[WNFunctions]:
    """Cover ``[0, t_end]`` with Wei-Norman charts that stay away from ``M_22 = 0``.

    The first-kind coordinates f+, f0, f- blow up where ``M_22`` vanishes
    (already at ``kappa t = pi/2`` without loss), although the propagator is
    perfectly regular there. Each chart restarts the factorization from the
    identity once ``|M_22| / ||M||`` falls below ``CHART_GUARD``.
    """
    segments = []
    t0 = 0.0
    while True:
        dense, nodes, log_imag = _integrate_fundamental(params, t0, t_end, config)
        t_cut = _first_below(dense, CHART_GUARD) if t_end > t0 else None
        t_stop = t_end if t_cut is None or t_cut >= t_end else t_cut
        sl2 = SL2Solution(dense, t_stop, nodes, log_imag, t0=t0)
        segments.append(WNFunctions(sl2, integrate_radical(params, sl2, t_stop, config), t_stop, t0))
        if t_stop >= t_end:
            return segments
        t0 = t_stop


@lru_cache(maxsize=16)
def _exp_tables(basis: FockBasis) -> dict:
    """Exact exponential data for each factor generator.

    Number-type generators are diagonal; ladder-type ones are nilpotent, so
    ``exp(c X)`` is a finite power series.
    """
    out = {}
    for name, X in wn_generators(basis).items():
        if not np.any(X - np.diag(np.diag(X))):
            out[name] = ("diag", np.diag(X).copy())
            continue
        terms = [np.eye(X.shape[0], dtype=complex)]
        P = X.astype(complex)
        k = 1
        while np.any(P):
            if k > X.shape[0]:
                raise ArithmeticError(f"generator {name} is neither diagonal nor nilpotent")
            terms.append(P / math.factorial(k))
            P = P @ X
            k += 1
        out[name] = ("nil", np.array(terms))
    return out


def _factor_exp(table, c: complex) -> np.ndarray:
    kind, data = table
    if kind == "diag":
        return np.diag(np.exp(c * data))
    return np.tensordot(c ** np.arange(len(data)), data, axes=1)


def propagator_factors(basis: FockBasis, f_values, a_values):
    """``(U_S1, U_S2, U_R)`` as superoperator matrices for given function values."""
    tab = _exp_tables(basis)
    fp, f0, fm = f_values
    a1, a2, a3, a4, a5, a6 = a_values

    def chain(*pairs):
        out = _factor_exp(tab[pairs[0][0]], pairs[0][1])
        for name, c in pairs[1:]:
            out = out @ _factor_exp(tab[name], c)
        return out

    U_S1 = chain(("Kp_L", fp), ("K0_L", f0), ("Km_L", fm))
    U_S2 = chain(("Kp_R", np.conj(fp)), ("K0_R", np.conj(f0)), ("Km_R", np.conj(fm)))
    U_R = chain(
        ("N_L", a1), ("N_R", a2), ("LR11", a3), ("LR22", a4), ("LR21", a5), ("LR12", a6)
    )
    return U_S1, U_S2, U_R


def evolve_weinorman(
    params: SystemParams,
    rho0: DensityMatrix,
    t_grid,
    config: IntegratorConfig | None = None,
) -> Trajectory:
    """Propagate with ``U = U_S1 U_S2 U_R`` assembled from the Wei-Norman functions.

    Long horizons are split into charts (see :func:`chart_segments`); within
    each chart the product form is evaluated directly.
    """
    _require_two_modes(params)
    t = check_time_grid(t_grid)
    basis = rho0.basis
    segments = chart_segments(params, float(t[-1]), config)

    def apply(seg, ti, v):
        U_S1, U_S2, U_R = propagator_factors(basis, seg.f(ti), seg.a(ti))
        return U_S1 @ (U_S2 @ (U_R @ v))

    states = [rho0]
    v_start = vectorize(rho0)
    k = 0
    for ti in t[1:]:
        while ti > segments[k].t_end:
            v_start = apply(segments[k], segments[k].t_end, v_start)
            k += 1
        states.append(devectorize(apply(segments[k], ti, v_start), basis))
    meta = {"solver": "weinorman", "functions": segments[0], "segments": segments}
    return Trajectory(t, states, meta)


def coincidence_weinorman(f_values, a_values) -> float:
    """Coincidence rate of the ``|1,1>`` input from Wei-Norman function values."""
    fp, f0, fm = f_values
    a1, a2 = a_values[0], a_values[1]
    value = cmath.exp(2 * (a1 + a2)) * abs(1 + 2 * fp * fm * cmath.exp(-2 * f0)) ** 2
    return float(value.real)
