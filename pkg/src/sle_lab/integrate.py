"""Vectorized adaptive Runge-Kutta integration for holomorphic flows.

The Loewner solvers integrate many initial points through the same
time-dependent field; this module provides an embedded Dormand-Prince 5(4)
stepper that advances a whole complex array at once with a shared adaptive
step, per-point error weighting, and an optional stop condition (used for
swallowing detection).  Points flagged by the stop condition are frozen and
excluded from further error control.
"""

from __future__ import annotations

import numpy as np

__all__ = ["integrate_flow"]

# Dormand-Prince 5(4) tableau
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


def integrate_flow(
    field,
    y0,
    t0,
    t1,
    rtol=1e-10,
    atol=1e-12,
    stop_condition=None,
    first_step=None,
    max_steps=100_000,
):
    """Integrate dy/dt = field(t, y) for a complex array of points.

    Parameters
    ----------
    field : callable
        field(t, y) -> dy/dt, vectorized over the active subset of points.
    y0 : ndarray (complex)
        Initial points.
    t0, t1 : float
        Integration window, t1 > t0.
    stop_condition : callable, optional
        stop_condition(y) -> bool mask; points where it fires are frozen at
        their current value and their stop time recorded.
    Returns
    -------
    y : ndarray
        Final (or frozen) values.
    stop_times : ndarray
        Stop time per point, NaN where the condition never fired.
    """
    y = np.array(y0, dtype=complex, copy=True)
    flat = y.reshape(-1)
    n = flat.size
    active = np.ones(n, dtype=bool)
    stop_times = np.full(n, np.nan)

    if stop_condition is not None:
        fired = stop_condition(flat)
        if np.any(fired):
            active &= ~fired
            stop_times[fired] = t0

    span = t1 - t0
    if span <= 0 or not np.any(active):
        return y, stop_times.reshape(y.shape)

    t = t0
    h = first_step if first_step is not None else min(span, max(1e-6, span / 100))

    steps = 0
    while t < t1 - 1e-14 and np.any(active):
        steps += 1
        if steps > max_steps:
            raise RuntimeError("adaptive integrator exceeded the step budget")
        h = min(h, t1 - t)
        ya = flat[active]
        stages = [field(t, ya)]
        for i in range(1, 7):
            yi = ya + h * np.tensordot(_A[i], np.asarray(stages[:i]), axes=(0, 0))
            stages.append(field(t + _C[i] * h, yi))
        stages = np.asarray(stages)
        y5 = ya + h * np.tensordot(_B5, stages, axes=(0, 0))
        y4 = ya + h * np.tensordot(_B4, stages, axes=(0, 0))
        err = np.abs(y5 - y4)
        scale = atol + rtol * np.maximum(np.abs(ya), np.abs(y5))
        ratio = float(np.max(err / scale)) if err.size else 0.0

        if not np.isfinite(ratio):
            if h <= 1e-14:
                raise RuntimeError("field evaluation not finite at a minimal step")
            h = max(1e-14, h * _MIN_FACTOR)
            continue
        if ratio <= 1.0 or h <= 1e-14:
            t += h
            flat[active] = y5
            if stop_condition is not None:
                fired_local = stop_condition(flat[active])
                if np.any(fired_local):
                    idx = np.flatnonzero(active)[fired_local]
                    stop_times[idx] = t
                    active[idx] = False
            factor = _MAX_FACTOR if ratio == 0 else min(
                _MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * ratio ** (-0.2))
            )
            h *= factor
        else:
            h *= max(_MIN_FACTOR, _SAFETY * ratio ** (-0.2))
    return y, stop_times.reshape(y.shape)
