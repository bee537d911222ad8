"""Pure-Python twin of the compiled ``integrate_affine`` kernel."""

from __future__ import annotations

import numpy as np

from . import _dopri
from .errors import IntegrationError, NonFiniteError

STATUS_OK = 0
STATUS_MAX_STEPS = 1
STATUS_NONFINITE = 2
STATUS_UNDERFLOW = 3


def _theta_function(knot_t, knot_v, knot_off):
    pieces = [
        (knot_t[knot_off[p] : knot_off[p + 1]], knot_v[knot_off[p] : knot_off[p + 1]])
        for p in range(len(knot_off) - 1)
    ]

    def theta(t):
        return np.array([v[0] if v.size == 1 else np.interp(t, ts, v) for ts, v in pieces])

    constant = all(np.all(v == v[0]) for _, v in pieces)
    return theta, constant


def integrate_affine(gens, knot_t, knot_v, knot_off, y0, t_eval, rtol, atol, max_steps, h_init):
    """Return ``(out, n_steps, n_accepted, n_rejected, status, t_reached)``."""
    gens = np.asarray(gens)
    n_par, n, _ = gens.shape
    theta, constant = _theta_function(np.asarray(knot_t), np.asarray(knot_v), np.asarray(knot_off))

    if constant:
        L = np.tensordot(theta(0.0), gens, axes=1)

        def fun(t, y):
            return L @ y

    else:
        stacked = gens.reshape(n_par * n, n)

        def fun(t, y):
            return theta(t) @ (stacked @ y).reshape(n_par, n)

    try:
        res = _dopri.solve(
            fun,
            y0,
            t_eval,
            rtol=rtol,
            atol=atol,
            max_steps=max_steps,
            h_init=h_init if h_init > 0 else None,
        )
    except NonFiniteError:
        return None, 0, 0, 0, STATUS_NONFINITE, float("nan")
    except IntegrationError as exc:
        status = STATUS_UNDERFLOW if "underflow" in str(exc) else STATUS_MAX_STEPS
        return None, max_steps, 0, 0, status, exc.t_reached
    return res.y, res.n_steps, res.n_accepted, res.n_rejected, STATUS_OK, float(t_eval[-1])
