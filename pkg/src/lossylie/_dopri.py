"""Dormand-Prince 5(4) with Hairer's 4th-order continuous extension.

Generic pure-Python driver used for the small nonlinear ODE systems and as
the fallback engine for the linear Liouville kernel. The compiled kernel in
``_kernels.pyx`` mirrors the step logic here line for line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError, NonFiniteError

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
D1 = -12715105075 / 11282082432
D3 = 87487479700 / 32700410799
D4 = -10690763975 / 1880347072
D5 = 701980252875 / 199316789632
D6 = -1453857185 / 822651844
D7 = 69997945 / 29380423

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0


def _rms(x: np.ndarray) -> float:
    return math.sqrt(float(np.mean(np.abs(x) ** 2))) if x.size else 0.0


def initial_step(fun, t0, y0, f0, t_end, rtol, atol) -> float:
    sk = atol + rtol * np.abs(y0)
    d0 = _rms(y0 / sk)
    d1 = _rms(f0 / sk)
    h0 = 0.01 * d0 / d1 if (d0 > 1e-5 and d1 > 1e-5) else 1e-6
    h0 = min(h0, t_end - t0)
    f1 = fun(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / sk) / h0
    big = max(d1, d2)
    h1 = (0.01 / big) ** 0.2 if big > 1e-15 else max(1e-6, h0 * 1e-3)
    return min(100 * h0, h1, t_end - t0)


@dataclass
class DenseSolution:
    """Piecewise quartic interpolant over the accepted steps."""

    t_nodes: list = field(default_factory=list)
    h: list = field(default_factory=list)
    coeffs: list = field(default_factory=list)

    def append(self, t, h, rcont):
        self.t_nodes.append(t)
        self.h.append(h)
        self.coeffs.append(rcont)

    @property
    def t_end(self) -> float:
        return self.t_nodes[-1] + self.h[-1] if self.t_nodes else 0.0

    def __call__(self, t: float) -> np.ndarray:
        if not self.t_nodes:
            raise ValueError("empty dense solution")
        i = int(np.searchsorted(self.t_nodes, t, side="right")) - 1
        i = min(max(i, 0), len(self.t_nodes) - 1)
        theta = (t - self.t_nodes[i]) / self.h[i]
        return _contd5(self.coeffs[i], theta)

    def derivative(self, t: float) -> np.ndarray:
        i = int(np.searchsorted(self.t_nodes, t, side="right")) - 1
        i = min(max(i, 0), len(self.t_nodes) - 1)
        theta = (t - self.t_nodes[i]) / self.h[i]
        r1, r2, r3, r4, r5 = self.coeffs[i]
        # d/dtheta of r1 + th(r2 + (1-th)(r3 + th(r4 + (1-th) r5)))
        th, th1 = theta, 1.0 - theta
        inner = r4 + th1 * r5
        d_inner = -r5
        mid = r3 + th * inner
        d_mid = inner + th * d_inner
        outer = r2 + th1 * mid
        d_outer = -mid + th1 * d_mid
        return (outer + th * d_outer) / self.h[i]


def _contd5(rcont, theta):
    r1, r2, r3, r4, r5 = rcont
    th1 = 1.0 - theta
    return r1 + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)))


@dataclass
class DopriResult:
    t_eval: np.ndarray
    y: np.ndarray
    dense: DenseSolution | None
    n_steps: int
    n_accepted: int
    n_rejected: int


def solve(
    fun,
    y0,
    t_eval,
    *,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    max_steps: int = 200_000,
    h_init: float | None = None,
    dense: bool = False,
) -> DopriResult:
    """Integrate ``y' = fun(t, y)`` from ``t_eval[0]`` to ``t_eval[-1]``.

    Output points are filled by the continuous extension and never shape the
    step sequence, except that the final step is clipped onto ``t_eval[-1]``.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    y0 = np.array(y0, dtype=complex)
    out = np.empty((t_eval.size,) + y0.shape, dtype=complex)
    out[0] = y0
    t0, t_end = float(t_eval[0]), float(t_eval[-1])
    sol = DenseSolution() if dense else None
    if t_end == t0:
        out[:] = y0
        return DopriResult(t_eval, out, sol, 0, 0, 0)

    t, y = t0, y0
    k1 = fun(t, y)
    h = h_init if h_init else initial_step(fun, t, y, k1, t_end, rtol, atol)
    next_out = 1
    while next_out < t_eval.size and t_eval[next_out] <= t0:
        out[next_out] = y0
        next_out += 1

    n_steps = n_acc = n_rej = 0
    last_rejected = False
    while t < t_end:
        if n_steps >= max_steps:
            raise IntegrationError(
                f"max_steps={max_steps} exceeded at t={t:.6g}", t_reached=t
            )
        n_steps += 1
        if t + 1.01 * h >= t_end:
            h = t_end - t
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError(f"step size underflow at t={t:.6g}", t_reached=t)

        k2 = fun(t + C2 * h, y + h * A21 * k1)
        k3 = fun(t + C3 * h, y + h * (A31 * k1 + A32 * k2))
        k4 = fun(t + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = fun(t + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = fun(t + h, y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        y_new = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        k7 = fun(t + h, y_new)
        err_vec = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sk = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(invalid="ignore", over="ignore"):
            err = _rms(err_vec / sk)

        if not math.isfinite(err) or not np.all(np.isfinite(y_new)):
            raise NonFiniteError(f"non-finite state encountered near t={t:.6g}")

        if err <= 1.0:
            n_acc += 1
            t_new = t_end if h == t_end - t else t + h
            ydiff = y_new - y
            bspl = h * k1 - ydiff
            rcont = (
                y,
                ydiff,
                bspl,
                ydiff - h * k7 - bspl,
                h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
            )
            if sol is not None:
                sol.append(t, h, rcont)
            while next_out < t_eval.size and t_eval[next_out] <= t_new:
                te = t_eval[next_out]
                out[next_out] = y_new if te == t_new else _contd5(rcont, (te - t) / h)
                next_out += 1
            fac = SAFETY * err ** -0.2 if err > 0 else FAC_MAX
            fac = min(FAC_MAX, max(FAC_MIN, fac))
            if last_rejected:
                fac = min(fac, 1.0)
            last_rejected = False
            t, y, k1 = t_new, y_new, k7
            h *= fac
        else:
            n_rej += 1
            last_rejected = True
            h *= max(FAC_MIN, SAFETY * err ** -0.2)

    return DopriResult(t_eval, out, sol, n_steps, n_acc, n_rej)
