"""Backend selection for the hot integration kernel.

The compiled extension is used when it was built; otherwise the numpy
implementation takes over transparently. ``BACKEND`` records which one won.
"""

from __future__ import annotations

import numpy as np

from . import _kernels_py
from .errors import IntegrationError, NonFiniteError

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def pack_schedules(schedules):
    """Flatten schedules into ``(knot_t, knot_v, knot_off)`` arrays."""
    knot_t, knot_v, off = [], [], [0]
    for s in schedules:
        knot_t.extend(s.times)
        knot_v.extend(s.values)
        off.append(len(knot_t))
    if not knot_t:
        knot_t, knot_v = [0.0], [0.0]
    return (
        np.array(knot_t, dtype=np.float64),
        np.array(knot_v, dtype=np.float64),
        np.array(off, dtype=np.int64),
    )


def integrate_affine(gens, schedules, y0, t_eval, *, rtol, atol, max_steps, h_init=None, backend=None):
    """Integrate ``y' = sum_p theta_p(t) gens[p] y`` and sample at ``t_eval``.

    Returns ``(samples, stats)``; raises on integrator failure.
    """
    impl = _BACKENDS[backend or BACKEND]
    knot_t, knot_v, knot_off = pack_schedules(schedules)
    out, n_steps, n_acc, n_rej, status, t_reached = impl.integrate_affine(
        np.ascontiguousarray(gens, dtype=np.complex128),
        knot_t,
        knot_v,
        knot_off,
        np.ascontiguousarray(y0, dtype=np.complex128),
        np.ascontiguousarray(t_eval, dtype=np.float64),
        float(rtol),
        float(atol),
        int(max_steps),
        float(h_init or 0.0),
    )
    if status == _kernels_py.STATUS_NONFINITE:
        raise NonFiniteError("non-finite state during integration")
    if status == _kernels_py.STATUS_MAX_STEPS:
        raise IntegrationError(f"max_steps={max_steps} exceeded at t={t_reached:.6g}", t_reached)
    if status == _kernels_py.STATUS_UNDERFLOW:
        raise IntegrationError(f"step size underflow at t={t_reached:.6g}", t_reached)
    stats = {"n_steps": int(n_steps), "n_accepted": int(n_acc), "n_rejected": int(n_rej)}
    return np.asarray(out), stats
