"""Forward and backward radial Loewner solvers for measure-driven fields.

The forward flow integrates

    dg/dt = g * H_t(g),    H_t(g) = int (x + g)/(x - g) beta_t(dx),

for driving data beta_t that is either a piecewise-constant-in-time sequence
of circle measures (``DrivingPath``, the natural output of the particle SDE)
or the deterministic limit field evaluated exactly through its characteristic
equation (``LimitDrivingPath``).  The backward flow solves

    dh/ds = -h * H_{t-s}(h),    h(0) = w0,   s in [0, t],

whose endpoint is the inverse map g_t^{-1}(w0); it traces curve tips and
hull boundaries.  Under the capacity normalization g_t(0) = 0 and
g_t'(0) = e^t, which ``derivative_at_zero`` verifies by integrating the
variational equation d/dt g_t'(0) = g_t'(0) * H_t(0).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import DomainError, SingularityError
from .integrate import integrate_flow
from .measures import CircleMeasure, HerglotzField

__all__ = [
    "DrivingPath",
    "LimitDrivingPath",
    "Swallowed",
    "ConformalSample",
    "forward_flow",
    "forward_flow_grid",
    "derivative_at_zero",
    "reverse_flow",
    "reverse_flow_grid",
    "trace_curves",
    "hull_boundary",
    "sample_forward",
]

SWALLOW_EPS = 1e-6
TIP_OFFSET = 1e-4
BOUNDARY_DELTA = 1e-3
RK_RTOL = 1e-10
RK_ATOL = 1e-12


@dataclass(frozen=True)
class Swallowed:
    """Normal forward-flow outcome: the point was absorbed by the hull."""

    t: float


@dataclass
class ConformalSample:
    """Forward-map samples at one time: pairs (z_in, z_out) and g'(0)."""

    t: float
    points: list
    derivative_at_zero: complex


class DrivingPath:
    """Piecewise-constant-in-time driving measures on a strictly increasing
    time grid 0 = t_0 < ... < t_M; ``measures[i]`` drives on [t_i, t_{i+1}).

    Paths emitted by the particle SDE keep the per-particle angle matrix so
    curve tracing can address individual curve tips (atom identities).
    """

    def __init__(self, times, measures, thetas=None, weights=None):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise DomainError("a driving path needs at least two time points")
        if np.any(np.diff(times) <= 0):
            raise DomainError("path times must be strictly increasing")
        if len(measures) != times.size - 1:
            raise DomainError("need one measure per time interval")
        self.times = times
        self.measures = list(measures)
        self.thetas = None if thetas is None else np.asarray(thetas, dtype=float)
        self.weights = None if weights is None else np.asarray(weights, dtype=float)

    # -- constructors ---------------------------------------------------------
    @classmethod
    def constant(cls, measure: CircleMeasure, t_end: float):
        return cls([0.0, float(t_end)], [measure])

    @classmethod
    def from_particles(cls, times, thetas, weights):
        """Path of atomic measures carrying particle identities.

        ``thetas``: array (M+1, N) of unwrapped angles at the grid times;
        the measure on [t_i, t_{i+1}) has atoms exp(i theta[i]).
        """
        thetas = np.asarray(thetas, dtype=float)
        weights = np.asarray(weights, dtype=float)
        measures = [
            CircleMeasure.from_atoms(thetas[i], weights) for i in range(thetas.shape[0] - 1)
        ]
        return cls(times, measures, thetas=thetas, weights=weights)

    # -- queries ----------------------------------------------------------------
    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def piece_index(self, t: float) -> int:
        i = int(np.searchsorted(self.times, t, side="right") - 1)
        return min(max(i, 0), len(self.measures) - 1)

    def measure_at(self, t: float) -> CircleMeasure:
        return self.measures[self.piece_index(t)]

    def segments(self, t0: float, t1: float):
        """Yield (ta, tb, piece_index) covering [t0, t1]."""
        if t1 > self.t_end + 1e-12:
            raise DomainError(f"path ends at {self.t_end}, requested {t1}")
        t = t0
        while t < t1 - 1e-14:
            i = self.piece_index(t)
            tb = min(self.times[i + 1], t1)
            yield t, tb, i
            t = tb

    def piece_field(self, i: int):
        """H(g) for piece i, without the interior-disc domain guard."""
        mu = self.measures[i]
        if mu.kind == "atoms":
            x = mu.atom_points()
            wts = mu.weights.astype(complex)

            def H(g):
                gg = np.asarray(g, dtype=complex)[..., None]
                return ((x + gg) / (x - gg)) @ wts

            return H
        from .series import ser_eval

        K = mu.weights.size // 2 - 1
        m = mu._fourier_moments(K)
        c = np.concatenate([[mu.total_mass], 2.0 * np.conj(m[1:])])
        return lambda g: ser_eval(c, np.asarray(g, dtype=complex))

    def piece_atoms(self, i: int):
        mu = self.measures[i]
        return mu.atom_points() if mu.kind == "atoms" else None

    def tip_angle(self, k: int, t: float) -> float:
        if self.thetas is None:
            raise DomainError("path does not carry particle identities")
        idx = int(np.argmin(np.abs(self.times - t)))
        return float(self.thetas[idx, k])

    @property
    def n_particles(self):
        return None if self.thetas is None else self.thetas.shape[1]


class LimitDrivingPath:
    """Driving by the deterministic limit field M_t, evaluated exactly.

    Instead of freezing densities on a time grid, the Herglotz field of the
    limit measure is evaluated pointwise through its characteristic equation
    (with warm-started Newton iterations), so the Loewner solvers see the
    continuous-in-time field.  ``measure_at`` synthesizes a density measure
    from the moment hierarchy when a concrete measure is needed.
    """

    def __init__(self, m0, generator, t_end: float):
        from .semigroup import GeneratorS

        if isinstance(m0, CircleMeasure):
            self.m0_measure = m0
            self.M0 = HerglotzField.from_measure(m0)
        else:
            self.m0_measure = None
            self.M0 = m0
        if not isinstance(generator, GeneratorS):
            raise DomainError("limit path needs a GeneratorS")
        self.S = generator
        self._t_end = float(t_end)
        self._cache = None  # (t, z, w) of the last successful evaluation
        self.thetas = None
        self.weights = None

    @property
    def t_end(self) -> float:
        return self._t_end

    def field_eval(self, t, g):
        """M_t(g) with per-point NaN for points outside the solvable region."""
        from .semigroup import _characteristic_root, _root_with_guess

        g = np.atleast_1d(np.asarray(g, dtype=complex))
        out = np.full(g.shape, np.nan, dtype=complex)
        ok = np.abs(g) < 1.0 - 1e-12
        if not np.any(ok):
            return out
        z = g[ok]
        warm = (
            self._cache is not None
            and self._cache[1].shape == z.shape
            and abs(self._cache[0] - t) < 0.04
            and float(np.max(np.abs(self._cache[1] - z))) < 0.04
        )
        if warm:
            w, failed = _root_with_guess(self.M0, self.S, t, z, self._cache[2])
        else:
            w, failed = _characteristic_root(self.M0, self.S, t, z)
        if not np.all(failed):
            self._cache = (t, z, w)
        vals = self.M0.eval(w)
        vals[failed] = np.nan
        out[ok] = vals
        return out

    def segments(self, t0: float, t1: float):
        if t1 > self._t_end + 1e-12:
            raise DomainError(f"path ends at {self._t_end}, requested {t1}")
        yield t0, t1, None

    def piece_field(self, _i):
        raise DomainError("limit paths evaluate a time-dependent field")

    def piece_atoms(self, _i):
        return None

    def measure_at(self, t: float, K: int = 256, grid_size: int = 4096) -> CircleMeasure:
        from .semigroup import moment_hierarchy, moments_from_field

        if self.m0_measure is not None and self.S.closed_form == "burgers":
            m0 = self.m0_measure.moments(K)
            m = moment_hierarchy(m0, t, K).m
        else:
            m = moments_from_field(self._flow_at(t), K).m
        return CircleMeasure.from_moments(m, grid_size=grid_size)

    def _flow_at(self, t):
        from .semigroup import flow_field

        return flow_field(self.M0, self.S, t)


def _forward_piece_field(H):
    return lambda _t, y: y * H(y)


def _swallow_condition(atoms, eps):
    if atoms is None:
        return lambda y: (1.0 - np.abs(y)) < eps

    def cond(y):
        d = np.min(np.abs(y[..., None] - atoms), axis=-1)
        return (d < eps) | ((1.0 - np.abs(y)) < eps)

    return cond


def forward_flow_grid(path, z0, t_end, rtol=RK_RTOL, atol=RK_ATOL, swallow_eps=SWALLOW_EPS):
    """Vectorized forward flow; returns (g, t_star) with NaN t_star = alive."""
    z0 = np.atleast_1d(np.asarray(z0, dtype=complex))
    if np.any(np.abs(z0) >= 1.0):
        raise DomainError("forward flow starts strictly inside the disc")
    g = z0.copy()
    t_star = np.full(z0.shape, np.nan)
    alive = np.ones(z0.shape, dtype=bool)
    for ta, tb, i in path.segments(0.0, t_end):
        if not np.any(alive):
            break
        if i is None:
            fld = lambda t, y: y * path.field_eval(t, y)
            atoms = None
        else:
            fld = _forward_piece_field(path.piece_field(i))
            atoms = path.piece_atoms(i)
        cond = _swallow_condition(atoms, swallow_eps)
        vals, stops = integrate_flow(
            fld, g[alive], ta, tb, rtol=rtol, atol=atol, stop_condition=cond
        )
        idx = np.flatnonzero(alive)
        g[idx] = vals
        fired = ~np.isnan(stops)
        t_star[idx[fired]] = stops[fired]
        alive[idx[fired]] = False
    return g, t_star


def forward_flow(path, z0, t_end, rtol=RK_RTOL, atol=RK_ATOL, swallow_eps=SWALLOW_EPS):
    """g_{t_end}(z0), or ``Swallowed(t*)`` if the point is absorbed first."""
    g, t_star = forward_flow_grid(
        path, [z0], t_end, rtol=rtol, atol=atol, swallow_eps=swallow_eps
    )
    if not np.isnan(t_star[0]):
        return Swallowed(float(t_star[0]))
    return complex(g[0])


def derivative_at_zero(path, t, rtol=1e-12, atol=1e-14):
    """g_t'(0) by the variational equation d/dt g'(0) = g'(0) H_t(0).

    For probability driving H_t(0) = 1, so the exact value is e^t; the
    numeric integration checks the normalization of the supplied path.
    """
    y = np.array([1.0 + 0.0j])
    for ta, tb, i in path.segments(0.0, t):
        if i is None:
            fld = lambda s, v: v * path.field_eval(s, np.zeros(1, dtype=complex))
        else:
            H0 = complex(path.piece_field(i)(np.zeros(1, dtype=complex))[0])
            fld = lambda s, v, H0=H0: v * H0
        y, _ = integrate_flow(fld, y, ta, tb, rtol=rtol, atol=atol)
    return complex(y[0])


def reverse_flow_grid(path, t, w0, rtol=RK_RTOL, atol=RK_ATOL, swallow_eps=SWALLOW_EPS):
    """Backward flow endpoints for an array of starts; singular points NaN.

    Integrates dh/ds = -h H_{t-s}(h) over s in [0, t].  Trajectories that
    approach an atom of the reversed driving within ``swallow_eps`` are
    reported via the returned mask and set to NaN.
    """
    w = np.atleast_1d(np.asarray(w0, dtype=complex)).copy()
    if np.any(np.abs(w) > 1.0 + 1e-12):
        raise DomainError("reverse flow starts in the closed disc")
    singular = np.zeros(w.shape, dtype=bool)
    alive = np.ones(w.shape, dtype=bool)
    # walk the pieces of [0, t] in reverse: s in [t - t_{i+1}, t - t_i]
    segs = list(path.segments(0.0, t))
    for ta, tb, i in reversed(segs):
        if not np.any(alive):
            break
        sa, sb = t - tb, t - ta
        if i is None:
            fld = lambda s, y: -y * path.field_eval(t - s, y)
            cond = None
        else:
            H = path.piece_field(i)
            fld = lambda s, y, H=H: -y * H(y)
            atoms = path.piece_atoms(i)
            if atoms is None:
                cond = None
            else:
                cond = lambda y, atoms=atoms: (
                    np.min(np.abs(y[..., None] - atoms), axis=-1) < swallow_eps
                )
        vals, stops = integrate_flow(
            fld, w[alive], sa, sb, rtol=rtol, atol=atol, stop_condition=cond
        )
        idx = np.flatnonzero(alive)
        w[idx] = vals
        fired = ~np.isnan(stops)
        singular[idx[fired]] = True
        alive[idx[fired]] = False
    w[singular] = np.nan
    return w, singular


def reverse_flow(path, t, w0, rtol=RK_RTOL, atol=RK_ATOL):
    """h_t(w0) = g_t^{-1}(w0) for a single interior (or boundary) start."""
    vals, singular = reverse_flow_grid(path, t, [w0], rtol=rtol, atol=atol)
    if singular[0]:
        raise SingularityError(f"backward trajectory from {w0} hit the driving at t={t}")
    return complex(vals[0])


def trace_curves(path, sample_times, tip_offset=TIP_OFFSET, rtol=RK_RTOL, atol=RK_ATOL):
    """Approximate the curves gamma_k via tips: gamma_k(t) = g_t^{-1}(V_k(t)).

    For each sample time the backward flow starts just inside the tip,
    at (1 - tip_offset) exp(i theta_k(t)).  Returns a dict
    {k: (times_array, points_array)} where failed (singular) samples are
    dropped; the sample at t = 0 is the starting configuration itself.
    """
    if path.thetas is None:
        raise DomainError("curve tracing needs a path with particle identities")
    n = path.thetas.shape[1]
    times_out = {k: [] for k in range(n)}
    points_out = {k: [] for k in range(n)}
    for t in sample_times:
        if t < 0 or t > path.t_end + 1e-12:
            raise DomainError(f"sample time {t} outside the path range")
        idx = int(np.argmin(np.abs(path.times - t)))
        tips = (1.0 - tip_offset) * np.exp(1j * path.thetas[idx])
        if t <= 1e-14:
            for k in range(n):
                times_out[k].append(0.0)
                points_out[k].append(complex(np.exp(1j * path.thetas[0, k])))
            continue
        vals, singular = reverse_flow_grid(path, float(t), tips, rtol=rtol, atol=atol)
        for k in range(n):
            if not singular[k]:
                times_out[k].append(float(t))
                points_out[k].append(complex(vals[k]))
    return {
        k: (np.asarray(times_out[k]), np.asarray(points_out[k], dtype=complex))
        for k in range(n)
    }


def hull_boundary(
    path,
    t,
    boundary_grid: int = 512,
    boundary_delta: float = BOUNDARY_DELTA,
    rtol=RK_RTOL,
    atol=RK_ATOL,
):
    """Closed polyline approximating the hull boundary at time t.

    Image of the circle of radius 1 - boundary_delta under g_t^{-1};
    per-point singularities are skipped.  Returns (vertices, kept_mask).
    """
    ring = (1.0 - boundary_delta) * np.exp(
        1j * np.arange(boundary_grid) * (2 * np.pi / boundary_grid)
    )
    vals, singular = reverse_flow_grid(path, float(t), ring, rtol=rtol, atol=atol)
    return vals[~singular], ~singular


def sample_forward(path, t, z_list, rtol=RK_RTOL, atol=RK_ATOL) -> ConformalSample:
    """Forward-map samples for CSV export; swallowed points map to NaN."""
    z = np.asarray(z_list, dtype=complex)
    g, t_star = forward_flow_grid(path, z, t, rtol=rtol, atol=atol)
    g = np.where(np.isnan(t_star), g, np.nan + 0j)
    return ConformalSample(
        t=float(t),
        points=list(zip(z.tolist(), g.tolist())),
        derivative_at_zero=derivative_at_zero(path, t),
    )
