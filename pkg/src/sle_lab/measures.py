"""Probability measures on the unit circle and their analytic transforms.

A measure is held either as a finite list of atoms (angle, weight) or as
nonnegative density values on a uniform angular grid over [0, 2*pi).  Atom
angles are canonicalized into [0, 2*pi); density measures are normalized by
the periodic trapezoid rule (which coincides with the rectangle sum on a
uniform periodic grid).

Transforms
----------
For a measure mu and |z| < 1 the package uses

* ``herglotz_eval``:  M(z)  = int (x + z)/(x - z) mu(dx),  x on the circle,
* ``psi_eval``:       psi(z) = int x z/(1 - x z) mu(dx) = sum m_n z^n,
* ``eta_eval``:       eta = psi/(1 + psi),

with moments m_n = int x^n mu(dx).  M maps the disc into the closed right
half-plane with M(0) = 1.  Expanding the kernel gives
M(z) = 1 + 2 sum_n conj(m_n) z^n, so the pointwise identity M = 1 + 2 psi
holds exactly when mu is invariant under angle negation (all the driving
measures of interest here are built from such data); in general the two
sides are related by conjugation, M(z) = conj(1 + 2 psi(conj z)).

Density recovery uses the radial limit density(x) = lim_{r->1}
Re M(r e^{ix}) / (2 pi), implemented by Richardson extrapolation in r.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotBoundaryRegular

__all__ = [
    "CircleMeasure",
    "MomentSequence",
    "HerglotzField",
    "herglotz_eval",
    "psi_eval",
    "eta_eval",
    "moments",
    "invert_density",
    "circle_distance",
]

TWO_PI = 2.0 * np.pi

#: probability-mass tolerance used by the constructors
MASS_TOL = 1e-12

#: defaults for the radial boundary limit (see invert_density)
BOUNDARY_DELTA = 1e-3
BOUNDARY_DISAGREEMENT_TOL = 1e-4
DEFAULT_GRID = 2048


def _canonical_angles(angles):
    return np.mod(np.asarray(angles, dtype=float), TWO_PI)


class CircleMeasure:
    """Finite nonnegative measure on the unit circle.

    Parameters
    ----------
    kind : {"atoms", "density"}
    angles : array_like
        Atom angles (radians) for ``atoms``; the implicit uniform grid is
        used for ``density``.
    weights : array_like
        Atom weights, or density values on the grid (with respect to the
        angle ds, not ds/2pi).
    require_probability : bool
        When true (default) the total mass must equal 1 within 1e-12.
    """

    __slots__ = ("kind", "angles", "weights", "total_mass")

    def __init__(self, kind, angles, weights, require_probability=True):
        weights = np.asarray(weights, dtype=float)
        if np.any(weights < -1e-15):
            raise DomainError("measure weights/density must be nonnegative")
        weights = np.maximum(weights, 0.0)
        if kind == "atoms":
            angles = _canonical_angles(angles)
            if angles.shape != weights.shape:
                raise DomainError("angles and weights must have equal length")
            order = np.argsort(angles, kind="stable")
            angles = angles[order]
            weights = weights[order]
            # merge numerically coincident atoms so angles end up strictly increasing
            if angles.size > 1:
                keep = np.concatenate([[True], np.diff(angles) > 1e-15])
                if not np.all(keep):
                    idx = np.cumsum(keep) - 1
                    merged = np.zeros(int(idx[-1]) + 1)
                    np.add.at(merged, idx, weights)
                    angles = angles[keep]
                    weights = merged
            mass = float(weights.sum())
        elif kind == "density":
            G = weights.size
            if G < 8:
                raise DomainError("density grid too small")
            angles = np.arange(G) * (TWO_PI / G)
            mass = float(weights.sum() * (TWO_PI / G))
        else:
            raise DomainError(f"unknown measure kind {kind!r}")
        if require_probability and abs(mass - 1.0) > MASS_TOL:
            raise DomainError(f"total mass {mass} is not 1 within {MASS_TOL}")
        self.kind = kind
        self.angles = angles
        self.weights = weights
        self.total_mass = mass

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_atoms(cls, angles, weights=None, require_probability=True):
        angles = np.asarray(angles, dtype=float)
        if weights is None:
            weights = np.full(angles.size, 1.0 / angles.size)
        return cls("atoms", angles, weights, require_probability)

    @classmethod
    def point_mass(cls, angle=0.0):
        return cls("atoms", [angle], [1.0])

    @classmethod
    def two_atoms(cls, angle):
        """Equal masses at angles 0 and ``angle``."""
        return cls("atoms", [0.0, angle], [0.5, 0.5])

    @classmethod
    def uniform(cls, grid_size=DEFAULT_GRID):
        return cls("density", None, np.full(grid_size, 1.0 / TWO_PI))

    @classmethod
    def from_density(cls, values, require_probability=True):
        return cls("density", None, values, require_probability)

    @classmethod
    def from_moments(cls, m, grid_size=DEFAULT_GRID, clip=True):
        """Fourier synthesis of a density from moments m_1..m_K.

        The partial sum may dip slightly negative near support edges; with
        ``clip`` the negative part is set to zero and the mass renormalized.
        """
        m = np.asarray(m, dtype=complex).ravel()
        if m.size and m[0] == 1.0:
            m = m[1:]
        s = np.arange(grid_size) * (TWO_PI / grid_size)
        p = np.full(grid_size, 1.0 / TWO_PI)
        for n, mn in enumerate(m, start=1):
            p += np.real(mn * np.exp(-1j * n * s)) / np.pi
        if clip:
            p = np.maximum(p, 0.0)
            p /= p.sum() * (TWO_PI / grid_size)
        return cls("density", None, p)

    # -- basic queries -------------------------------------------------------
    @property
    def is_probability(self):
        return abs(self.total_mass - 1.0) <= MASS_TOL

    @property
    def grid_size(self):
        return self.weights.size if self.kind == "density" else None

    def atom_points(self):
        """Atoms as complex points on the circle."""
        if self.kind != "atoms":
            raise DomainError("not an atomic measure")
        return np.exp(1j * self.angles)

    def rotated(self, phi):
        """Push-forward under rotation by angle phi."""
        if self.kind == "atoms":
            return CircleMeasure(
                "atoms", self.angles + phi, self.weights,
                require_probability=self.is_probability,
            )
        shift = int(round(phi / (TWO_PI / self.weights.size)))
        return CircleMeasure(
            "density", None, np.roll(self.weights, shift),
            require_probability=self.is_probability,
        )

    # -- transforms ----------------------------------------------------------
    def _fourier_moments(self, K):
        """m_n = int x^n dmu for n = 0..K (exact trapezoid for densities)."""
        if self.kind == "atoms":
            n = np.arange(K + 1)
            return np.exp(1j * np.outer(n, self.angles)) @ self.weights.astype(complex)
        G = self.weights.size
        coeffs = np.fft.fft(self.weights) * (TWO_PI / G)
        m = np.zeros(K + 1, dtype=complex)
        m[0] = coeffs[0]
        top = min(K, G // 2 - 1)
        # fft bin k holds int e^{-iks} p(s) ds; moments need e^{+ins}
        if top:
            m[1 : top + 1] = coeffs[-1 : -top - 1 : -1]
        return m

    def herglotz(self, z, check=True):
        """M(z) = int (x+z)/(x-z) dmu, vectorized over z, |z| < 1."""
        z = np.asarray(z, dtype=complex)
        if check and np.any(np.abs(z) >= 1.0 - 1e-12):
            raise DomainError("herglotz transform needs |z| < 1 - 1e-12")
        if self.kind == "atoms":
            x = self.atom_points()
            zz = z[..., None]
            return ((x + zz) / (x - zz)) @ self.weights.astype(complex)
        # Densities: summing the kernel series in the exact trapezoid moments
        # avoids the aliasing the raw kernel sum suffers near the circle.
        K = self.weights.size // 2 - 1
        m = self._fourier_moments(K)
        c = np.zeros(K + 1, dtype=complex)
        c[0] = self.total_mass
        c[1:] = 2.0 * np.conj(m[1:])
        from .series import ser_eval

        return ser_eval(c, z)

    def herglotz_deriv(self, z):
        """M'(z) = int 2x/(x-z)^2 dmu."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "atoms":
            x = self.atom_points()
            zz = z[..., None]
            return (2.0 * x / (x - zz) ** 2) @ self.weights.astype(complex)
        from .series import ser_deriv, ser_eval

        K = self.weights.size // 2 - 1
        m = self._fourier_moments(K)
        c = np.concatenate([[self.total_mass], 2.0 * np.conj(m[1:])])
        return ser_eval(ser_deriv(c), z)

    def psi(self, z):
        """psi(z) = int xz/(1-xz) dmu = sum_n m_n z^n."""
        z = np.asarray(z, dtype=complex)
        if np.any(np.abs(z) >= 1.0):
            raise DomainError("psi transform needs |z| < 1")
        if self.kind == "atoms":
            x = self.atom_points()
            zz = z[..., None]
            return (x * zz / (1.0 - x * zz)) @ self.weights.astype(complex)
        K = self.weights.size // 2 - 1
        m = self._fourier_moments(K)
        m[0] = 0.0
        from .series import ser_eval

        return ser_eval(m, z)

    def eta(self, z):
        psi = self.psi(z)
        denom = 1.0 + psi
        if np.any(np.abs(denom) < 1e-14):
            raise RuntimeError("1 + psi vanished for a probability measure")
        return psi / denom

    def moments(self, K):
        return MomentSequence(self._fourier_moments(K))

    # -- distribution functions ----------------------------------------------
    def cdf_breakpoints(self):
        """Breakpoints and CDF values from the reference angle 0.

        Returns (x, F) where F is the piecewise-linear interpolant value at
        each breakpoint; atomic measures produce jump pairs (left limit,
        right value) at each atom.
        """
        if self.kind == "atoms":
            xs, Fs = [0.0], [0.0]
            acc = 0.0
            for a, w in zip(self.angles, self.weights):
                xs.extend([a, a])
                Fs.extend([acc, acc + w])
                acc += w
            xs.append(TWO_PI)
            Fs.append(acc)
            return np.asarray(xs), np.asarray(Fs)
        G = self.weights.size
        h = TWO_PI / G
        # cell [s_j, s_{j+1}) carries the trapezoid mass of the two endpoints
        cell = 0.5 * (self.weights + np.roll(self.weights, -1)) * h
        F = np.concatenate([[0.0], np.cumsum(cell)])
        x = np.concatenate([np.arange(G) * h, [TWO_PI]])
        return x, F

    def cdf(self, x):
        """Closed-arc CDF mu([angle 0, x]) evaluated at angles x."""
        bx, bF = self.cdf_breakpoints()
        x = np.mod(np.asarray(x, dtype=float), TWO_PI)
        if self.kind == "atoms":
            # right-continuous step function including the atom at x itself
            out = np.zeros(x.shape)
            for a, w in zip(self.angles, self.weights):
                out += np.where(x >= a - 1e-15, w, 0.0)
            return out
        return np.interp(x, bx, bF)

    # -- serialization ---------------------------------------------------------
    def to_json_dict(self):
        return {
            "type": self.kind,
            "angles": [float(a) for a in self.angles],
            "weights": [float(w) for w in self.weights],
        }

    def to_json(self):
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, d, require_probability=True):
        kind = d.get("type")
        if kind == "atoms":
            return cls("atoms", d["angles"], d["weights"], require_probability)
        if kind == "density":
            return cls("density", None, d["weights"], require_probability)
        raise DomainError(f"unknown measure type {kind!r}")

    @classmethod
    def from_json(cls, text, require_probability=True):
        return cls.from_json_dict(json.loads(text), require_probability)

    def density_csv_rows(self):
        """Rows (angle, value) for CSV export of a density measure."""
        if self.kind != "density":
            raise DomainError("CSV density export needs a density measure")
        return zip(self.angles, self.weights)

    def __repr__(self):
        n = self.weights.size
        return f"CircleMeasure(kind={self.kind!r}, n={n}, mass={self.total_mass:.12g})"


@dataclass(frozen=True)
class MomentSequence:
    """Moments m_0..m_K with m_0 = 1 for probability measures."""

    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", np.asarray(self.m, dtype=complex).ravel())

    def __len__(self):
        return self.m.size

    def __getitem__(self, n):
        return self.m[n]

    @property
    def order(self):
        return self.m.size - 1


class HerglotzField:
    """Evaluable holomorphic map M of the disc with Re M >= 0, M(0) = 1.

    Backings: a circle measure (direct integral), a truncated series
    ``1 + 2 sum psi_n z^n``, or an arbitrary closure (used by the PDE flow
    solver).  ``eval``/``deriv`` accept scalars or arrays.
    """

    def __init__(self, eval_fn, deriv_fn=None, label="field"):
        self._eval = eval_fn
        self._deriv = deriv_fn
        self.label = label

    @classmethod
    def from_measure(cls, mu: CircleMeasure):
        # the flow machinery manages its own disc bounds, so no domain guard
        return cls(
            lambda z: mu.herglotz(z, check=False),
            _measure_deriv(mu),
            label=f"measure:{mu.kind}",
        )

    @classmethod
    def from_psi_series(cls, psi_coeffs):
        """Field 1 + 2 sum_n psi_n z^n from series coefficients psi_1.."""
        from .series import ser_deriv, ser_eval

        psi = np.asarray(psi_coeffs, dtype=complex).ravel()
        if psi.size and psi[0] == 0:
            psi = psi[1:]
        c = np.concatenate([[1.0], 2.0 * psi])
        d = ser_deriv(c)
        return cls(lambda z: ser_eval(c, z), lambda z: ser_eval(d, z), label="series")

    @classmethod
    def from_callable(cls, eval_fn, deriv_fn=None, label="closure"):
        return cls(eval_fn, deriv_fn, label=label)

    @classmethod
    def constant_one(cls):
        one = lambda z: np.ones_like(np.asarray(z, dtype=complex))
        zero = lambda z: np.zeros_like(np.asarray(z, dtype=complex))
        return cls(one, zero, label="uniform")

    def eval(self, z):
        return self._eval(np.asarray(z, dtype=complex))

    __call__ = eval

    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        if self._deriv is not None:
            return self._deriv(z)
        h = 1e-6
        return (self._eval(z + h) - self._eval(z - h)) / (2 * h)


def _measure_deriv(mu: CircleMeasure):
    if mu.kind == "atoms":
        def deriv(z):
            z = np.asarray(z, dtype=complex)
            x = mu.atom_points()
            zz = z[..., None]
            return (2.0 * x / (x - zz) ** 2) @ mu.weights.astype(complex)

        return deriv

    from .series import ser_deriv, ser_eval

    K = mu.weights.size // 2 - 1
    m = mu._fourier_moments(K)
    c = np.concatenate([[mu.total_mass], 2.0 * np.conj(m[1:])])
    d = ser_deriv(c)
    return lambda z: ser_eval(d, z)


# -- module-level operation wrappers ------------------------------------------


def herglotz_eval(mu: CircleMeasure, z):
    """M(z) = int (x+z)/(x-z) mu(dx) for |z| < 1 - 1e-12."""
    return mu.herglotz(z)


def psi_eval(mu: CircleMeasure, z):
    """psi(z) = int xz/(1-xz) mu(dx)."""
    return mu.psi(z)


def eta_eval(mu: CircleMeasure, z):
    """eta = psi/(1+psi); maps the disc into itself with eta(0) = 0."""
    return mu.eta(z)


def moments(mu: CircleMeasure, K) -> MomentSequence:
    """Moment sequence m_n = int x^n dmu, n = 0..K."""
    if K < 0:
        raise DomainError("moment order must be >= 0")
    return mu.moments(K)


def invert_density(
    M: HerglotzField,
    grid_size: int = DEFAULT_GRID,
    delta: float = BOUNDARY_DELTA,
    disagreement_tol: float = BOUNDARY_DISAGREEMENT_TOL,
) -> CircleMeasure:
    """Recover the boundary density of a Herglotz field.

    Samples Re M on the circles of radius 1-delta, 1-delta/2 and 1-delta/4
    and forms the two Richardson extrapolants (eliminating the O(1-r) term);
    their disagreement beyond ``disagreement_tol`` means M does not extend
    continuously along radii and ``NotBoundaryRegular`` is raised.  The
    result is renormalized to mass 1 when the extrapolated mass is within
    1e-3 of 1, otherwise the extrapolation is rejected as inconsistent.
    """
    s = np.arange(grid_size) * (TWO_PI / grid_size)
    e = np.exp(1j * s)
    f1 = np.real(M.eval((1.0 - delta) * e))
    f2 = np.real(M.eval((1.0 - delta / 2) * e))
    f3 = np.real(M.eval((1.0 - delta / 4) * e))
    rich_coarse = 2.0 * f2 - f1
    rich_fine = 2.0 * f3 - f2
    scale = max(1.0, float(np.max(np.abs(rich_fine))))
    gap = float(np.max(np.abs(rich_fine - rich_coarse)))
    if gap > disagreement_tol * scale:
        raise NotBoundaryRegular(
            f"radial extrapolants disagree by {gap:.3g} (tol {disagreement_tol:.3g}"
            f" x scale {scale:.3g})"
        )
    density = rich_fine / TWO_PI
    mass = density.sum() * (TWO_PI / grid_size)
    if abs(mass - 1.0) > 1e-3:
        raise NotBoundaryRegular(f"extrapolated mass {mass} too far from 1")
    density = np.maximum(density, 0.0)
    density /= density.sum() * (TWO_PI / grid_size)
    return CircleMeasure.from_density(density)


# -- Wasserstein-1 distance on the circle --------------------------------------


def _piecewise_delta(mu: CircleMeasure, nu: CircleMeasure):
    """Breakpoints and (F_mu - F_nu) values of the CDF difference on [0, 2pi]."""
    ax, aF = mu.cdf_breakpoints()
    bx, bF = nu.cdf_breakpoints()
    xs = np.unique(np.concatenate([ax, bx]))
    # evaluate both CDFs just left and right of every breakpoint so jumps
    # contribute zero-length segments and linear parts are kept exactly
    eps = 1e-12
    grid = np.sort(np.concatenate([xs, np.clip(xs - eps, 0, TWO_PI), np.clip(xs + eps, 0, TWO_PI)]))
    Fa = np.interp(grid, ax, aF)
    Fb = np.interp(grid, bx, bF)
    return grid, Fa - Fb


def circle_distance(mu: CircleMeasure, nu: CircleMeasure) -> float:
    """Order-1 Wasserstein distance for the geodesic metric on the circle.

    W1(mu, nu) = min_c int_0^{2pi} |F_mu(x) - F_nu(x) - c| dx, evaluated
    exactly on the piecewise-linear CDF difference; the minimum over the
    shift c is found by golden-section search of the convex objective.
    """
    if not (mu.is_probability and nu.is_probability):
        raise DomainError("circle_distance needs probability measures")
    grid, delta = _piecewise_delta(mu, nu)
    seg = np.diff(grid)

    d0 = delta[:-1]
    d1 = delta[1:]

    def objective(c):
        a = d0 - c
        b = d1 - c
        same = a * b >= 0
        # linear segment integral of |value|: trapezoid when no sign change,
        # two triangles when the segment crosses zero
        base = 0.5 * (np.abs(a) + np.abs(b)) * seg
        denom = np.where(np.abs(b - a) < 1e-300, 1.0, b - a)
        t = np.clip(-a / denom, 0.0, 1.0)
        cross = 0.5 * seg * (np.abs(a) * t + np.abs(b) * (1.0 - t))
        return float(np.sum(np.where(same, base, cross)))

    lo = float(np.min(delta))
    hi = float(np.max(delta))
    if hi - lo < 1e-15:
        return objective(lo)
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1 = b - gr * (b - a)
    c2 = a + gr * (b - a)
    f1, f2 = objective(c1), objective(c2)
    for _ in range(200):
        if b - a < 1e-13 * max(1.0, abs(hi - lo)):
            break
        if f1 <= f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - gr * (b - a)
            f1 = objective(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + gr * (b - a)
            f2 = objective(c2)
    return min(f1, f2)
