"""Convergence diagnostics between particle systems and the deterministic
limit, the cumulative weight-profile relation, and support-time detection.

Support time.  When the initial measure does not cover the whole circle,
write the driving data as an angle measure mu' and set

    V0(x)  = int sin(x - s) / (1 - cos(x - s)) mu'(ds),
    V0'(x) = int 1 / (cos(s - x) - 1) mu'(ds)  < 0,

for x outside the support.  A boundary angle x joins the support of the
evolved measure at time T(x) = -1 / (2 V0'(x)), so with
m = min |V0'| over the complement the support covers the circle first at
T = 1 / (2 m).  ``support_time`` evaluates the minimum by a dense scan plus
golden-section refinement; ``full_support_detect`` confirms it on the PDE
side by locating the first time the boundary density exists and is
strictly positive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .driving import SimulationConfig, simulate
from .errors import DomainError, InsideSupport, NotBoundaryRegular
from .measures import CircleMeasure, HerglotzField, circle_distance, invert_density
from .semigroup import GeneratorS, flow_field

__all__ = [
    "cdf_relation_check",
    "ConvergenceReport",
    "convergence_study",
    "v0_derivative",
    "support_time",
    "AlreadyFull",
    "ALREADY_FULL",
    "full_support_detect",
]

TWO_PI = 2.0 * np.pi


class AlreadyFull:
    """Sentinel: the initial measure already has full support."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "AlreadyFull"


ALREADY_FULL = AlreadyFull()


def cdf_relation_check(mu: CircleMeasure, alpha: CircleMeasure, L) -> float:
    """max over atoms of |F(x) - L(G(x))| for the two empirical measures.

    F and G are the closed-arc distribution functions from the reference
    angle 0 of the weighted (mu) and unweighted (alpha) measures; both must
    be atomic with identical atom locations.
    """
    if mu.kind != "atoms" or alpha.kind != "atoms":
        raise DomainError("the profile relation applies to atomic measures")
    if mu.angles.size != alpha.angles.size or np.max(np.abs(mu.angles - alpha.angles)) > 1e-12:
        raise DomainError("mu and alpha must share atom locations")
    F = np.cumsum(mu.weights)
    G = np.cumsum(alpha.weights)
    return float(np.max(np.abs(F - L(G))))


@dataclass
class ConvergenceReport:
    """W1 distances (pooled over runs) to the limit, with jackknife errors."""

    n_values: list
    record_times: list
    distances: np.ndarray  # shape (len(n_values), len(record_times))
    std_errors: np.ndarray
    m1_errors: np.ndarray  # |pooled m1 - limit m1|
    m1_std_errors: np.ndarray

    def to_json_dict(self):
        return {
            "n_values": list(map(int, self.n_values)),
            "record_times": list(map(float, self.record_times)),
            "w1_distances": self.distances.tolist(),
            "w1_std_errors": self.std_errors.tolist(),
            "m1_abs_errors": self.m1_errors.tolist(),
            "m1_std_errors": self.m1_std_errors.tolist(),
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_json_dict(), indent=indent)

    def monotone_in_n(self, slack_sigmas: float = 2.0) -> bool:
        """Distances nonincreasing in N up to ``slack_sigmas`` joint errors."""
        ok = True
        for j in range(self.distances.shape[1]):
            for i in range(len(self.n_values) - 1):
                slack = slack_sigmas * float(
                    np.hypot(self.std_errors[i, j], self.std_errors[i + 1, j])
                )
                ok &= self.distances[i + 1, j] <= self.distances[i, j] + slack
        return ok


def _pooled_measure(runs, time_index, n):
    angles = np.concatenate(
        [np.mod(r.records[time_index][0].theta, TWO_PI) for r in runs]
    )
    return CircleMeasure.from_atoms(angles, np.full(angles.size, 1.0 / angles.size))


def convergence_study(
    base_config: SimulationConfig,
    n_values,
    limit_measures,
    limit_m1=None,
    threads: int | None = None,
) -> ConvergenceReport:
    """W1 distance of run-pooled empirical measures to the deterministic limit.

    ``limit_measures``: one CircleMeasure per record time of the config.
    Equal weights only (the regime with a deterministic limit).  Runs fan
    out over a process pool when ``threads`` > 1; results do not depend on
    the schedule since every run has its own seed stream.
    """
    if isinstance(base_config.weights, str) and base_config.weights != "equal":
        raise DomainError("the deterministic limit needs equal weights")
    times = list(base_config.record_times)
    if len(limit_measures) != len(times):
        raise DomainError("need one limit measure per record time")
    shape = (len(n_values), len(times))
    dist = np.zeros(shape)
    err = np.zeros(shape)
    m1e = np.zeros(shape)
    m1se = np.zeros(shape)
    for i, n in enumerate(n_values):
        cfg = SimulationConfig(
            n=int(n),
            kappa=base_config.kappa,
            weights="equal",
            init=base_config.init,
            dt=base_config.dt,
            t_end=base_config.t_end,
            seed=base_config.seed,
            n_runs=base_config.n_runs,
            record_times=times,
        )
        runs = _run_many(cfg, threads).runs
        for j in range(len(times)):
            pooled = _pooled_measure(runs, j, n)
            dist[i, j] = circle_distance(pooled, limit_measures[j])
            # jackknife over runs
            if len(runs) > 1:
                deltas = []
                for drop in range(len(runs)):
                    sub = [r for k, r in enumerate(runs) if k != drop]
                    deltas.append(
                        circle_distance(_pooled_measure(sub, j, n), limit_measures[j])
                    )
                deltas = np.asarray(deltas)
                R = len(runs)
                err[i, j] = np.sqrt((R - 1) / R * np.sum((deltas - deltas.mean()) ** 2))
            m1_runs = np.asarray(
                [np.mean(np.exp(1j * r.records[j][0].theta)) for r in runs]
            )
            target = (
                limit_m1[j]
                if limit_m1 is not None
                else complex(limit_measures[j].moments(1).m[1])
            )
            m1e[i, j] = abs(m1_runs.mean() - target)
            if len(runs) > 1:
                comp = np.stack([m1_runs.real, m1_runs.imag])
                m1se[i, j] = float(
                    np.linalg.norm(comp.std(axis=1, ddof=1)) / np.sqrt(len(runs))
                )
    return ConvergenceReport(list(n_values), times, dist, err, m1e, m1se)


def _run_many(cfg: SimulationConfig, threads):
    if threads is None or threads <= 1 or cfg.n_runs == 1:
        return simulate(cfg, store_path=False)
    from concurrent.futures import ProcessPoolExecutor

    from .driving import SimulationResult, _run_one

    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_run_one, cfg, r, False) for r in range(cfg.n_runs)]
        runs = [f.result() for f in futures]
    runs.sort(key=lambda r: r.run_index)
    return SimulationResult(cfg, runs)


def _angle_support(mu: CircleMeasure, resolution: int):
    """Support angles of mu as an array, or None for full support."""
    if mu.kind == "atoms":
        if mu.angles.size >= 2:
            gaps = np.diff(np.concatenate([mu.angles, [mu.angles[0] + TWO_PI]]))
            if np.min(gaps) < TWO_PI / resolution:
                return None
        return mu.angles
    positive = mu.weights > 1e-12
    if np.all(positive):
        return None
    return mu.angles[positive]


def _v0_deriv_many(mu_prime: CircleMeasure, x):
    x = np.asarray(x, dtype=float)
    if mu_prime.kind == "atoms":
        s = mu_prime.angles
        w = mu_prime.weights
        return (1.0 / (np.cos(s - x[..., None]) - 1.0)) @ w
    s = mu_prime.angles
    w = mu_prime.weights * (TWO_PI / s.size)
    return (1.0 / (np.cos(s - x[..., None]) - 1.0)) @ w


def v0_derivative(mu_prime: CircleMeasure, x: float) -> float:
    """V0'(x) = int 1/(cos(s - x) - 1) mu'(ds); always negative.

    Raises ``InsideSupport`` when x is within 1e-9 of the support of mu'.
    """
    xm = np.mod(x, TWO_PI)
    supp = _angle_support(mu_prime, resolution=1 << 20)
    if supp is None:
        raise InsideSupport("measure has full support")
    d = np.abs(np.mod(xm - supp + np.pi, TWO_PI) - np.pi)
    if np.min(d) < 1e-9:
        raise InsideSupport(f"x={x} is within 1e-9 of the support")
    return float(_v0_deriv_many(mu_prime, np.asarray(xm)))


def support_time(mu0: CircleMeasure, scan_points: int = 4096, resolution: int = 2048):
    """First time the evolved measure covers the circle: T = 1/(2m).

    Returns ``ALREADY_FULL`` when mu0 already has full support (strictly
    positive density, or atoms denser than ``resolution``); otherwise scans
    |V0'| on the complement of the support and refines the minimum by
    golden-section search.
    """
    supp = _angle_support(mu0, resolution)
    if supp is None:
        return ALREADY_FULL
    x = np.arange(scan_points) * (TWO_PI / scan_points)
    d = np.min(np.abs(np.mod(x[:, None] - supp + np.pi, TWO_PI) - np.pi), axis=1)
    valid = d > 1e-6
    vals = np.full(scan_points, np.inf)
    vals[valid] = np.abs(_v0_deriv_many(mu0, x[valid]))
    i = int(np.argmin(vals))
    h = TWO_PI / scan_points
    lo, hi = x[i] - h, x[i] + h

    def f(xx):
        return float(np.abs(_v0_deriv_many(mu0, np.asarray(xx))))

    res = minimize_scalar(f, bracket=(lo, x[i], hi), method="golden",
                          options={"xtol": 1e-10})
    m = float(res.fun)
    argmin_x = float(np.mod(res.x, TWO_PI))
    return {"T": 1.0 / (2.0 * m), "argmin_x": argmin_x, "m": m}


def full_support_detect(
    M0: HerglotzField,
    S: GeneratorS,
    t_grid,
    grid_size: int = 2048,
    min_density: float = 1e-6,
    delta: float = 2.5e-4,
) -> float:
    """Smallest grid time with an everywhere-positive boundary density.

    Runs the characteristic flow at each t, attempts the radial density
    inversion, and returns the first t where it succeeds with
    min density > ``min_density``; +inf when no grid time qualifies.
    The flow roots are warm-started across the sweep, and the radial limit
    uses finer radii than the invert_density default (``delta`` = 2.5e-4):
    just past the closing time the boundary derivative still carries the
    cusp of the last gap point, and the default radii flag it as irregular
    for one extra grid step.
    """
    prev = None
    for t in np.asarray(t_grid, dtype=float):
        field = flow_field(M0, S, float(t)).warm_from(prev)
        prev = field
        try:
            mu = invert_density(field, grid_size=grid_size, delta=delta)
        except NotBoundaryRegular:
            continue
        if float(np.min(mu.weights)) > min_density:
            return float(t)
    return float("inf")
