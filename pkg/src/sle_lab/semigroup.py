"""Deterministic infinite-slit limit engine and circle convolution algebra.

The central object is the first-order PDE

    dM_t/dt = -z S(M_t(z)) dM_t/dz,    M_0(z) = int (x+z)/(x-z) mu_0(dx),

for a holomorphic right-half-plane self-map S.  The equal-weight infinite-
slit limit is the special case S(w) = 2w, where the equation is the inviscid
complex Burgers equation after an exponential change of variables.  Three
independent solution routes are provided and cross-checked:

1.  ``characteristic_solve`` -- method of characteristics.  The solution is
    M_t(z) = M_0(w) where w solves the implicit characteristic equation

        w * exp(t * S(M_0(w))) = z,

    found by Newton continuation in t starting from w = z at t = 0.  The map
    z -> w is the eta-transform of a multiplicative-convolution semigroup
    nu_t, and M_t = M_0 o eta_{nu_t} (subordination).

2.  ``coefficient_ode`` -- the Cayley transform eta = (M-1)/(M+1) turns the
    PDE into d(eta_t)/dt = -z u(eta_t(z)) d(eta_t)/dz with
    u(w) = S((1+w)/(1-w)), and matching powers of z in
    eta_t(z) = sum a_n(t) z^n, u(z) = sum b_q z^q gives the triangular system

        da_n/dt = -n b_0 a_n - sum_{k=1}^{n-1} k a_k U_{n-k},
        U_j = [z^j] u(eta_t(z)),

    whose solution has the closed form a_n(t) = exp(-n b_0 t) P_n(t) with
    P_n a polynomial of degree < n: every forcing monomial k a_k U_{n-k}
    carries the exponential factor exp(-n b_0 t) exactly (z-orders add), so
    integrating the reduced equation dP_n/dt = forcing / exp(-n b_0 t) is
    plain polynomial integration.  This route is exact up to rounding.

3.  ``moment_hierarchy`` -- for the equal-weight field S(w) = 2w the moments
    m_n(t) = int x^n mu_t(dx) close among themselves.  Derivation: the weak
    form of the evolution reads, for smooth f,

        d/dt int f dmu_t = - int int (x f'(x) - y f'(y))/(x - y) * (x + y)
                                     mu_t(dx) mu_t(dy).

    Take f(x) = x^n, so x f'(x) = n x^n and

        (x^n - y^n)/(x - y) * (x + y)
            = (sum_{i=0}^{n-1} x^i y^{n-1-i}) (x + y)
            = x^n + y^n + 2 sum_{j=1}^{n-1} x^j y^{n-j}.

    Integrating against mu_t(dx) mu_t(dy) term by term gives

        dm_n/dt = -n (m_n + m_n + 2 sum_{j=1}^{n-1} m_j m_{n-j})
                 = -2 n m_n - 2 n sum_{j=1}^{n-1} m_j m_{n-j},

    again a closed triangular system; it is integrated numerically with a
    high-order Runge-Kutta method, independent of routes 1 and 2.

Convolution algebra: eta-transforms compose under monotone convolution,
Sigma-transforms (Sigma = eta^{-1}(z)/z) multiply under free multiplicative
convolution, and Sigma = exp(u) with Herglotz u characterizes the freely
infinitely divisible laws; ``GeneratorS`` carries exactly that Herglotz data
(alpha, rho) and evaluates S(w) = u((w-1)/(w+1)).
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ContinuationFailed, DomainError, InconclusiveTruncation, ZeroMeanMeasure
from .measures import CircleMeasure, HerglotzField, MomentSequence
from .series import (
    SeriesMap,
    ser_compose,
    ser_div,
    ser_eval,
    ser_exp,
    ser_inverse,
    ser_log,
    ser_mul,
)

__all__ = [
    "GeneratorS",
    "characteristic_solve",
    "eta_semigroup",
    "flow_field",
    "coefficient_ode",
    "moment_hierarchy",
    "eta_series_from_moments",
    "moments_from_eta_series",
    "sigma_transform",
    "free_mult_convolve",
    "monotone_convolve",
    "semigroup_sigma_series",
    "is_free_infdiv",
    "long_time_limit_check",
]

DEFAULT_ORDER = 24
CONTINUATION_STEP = 0.05
CONTINUATION_STEP_MIN = 1e-5
NEWTON_TOL = 1e-12


class GeneratorS:
    """Holomorphic self-map of the right half-plane in Herglotz form.

    S(w) = u((w-1)/(w+1)) with u(z) = -i alpha + int (1 + z zeta)/(1 - z zeta)
    rho(d zeta) for a real alpha and a finite nonnegative measure rho on the
    circle.  With this pairing the generator of the equal-weight limit,
    S(w) = 2w, has the data alpha = 0, rho = 2 * delta at angle 0, and the
    power-series of u around 0 is exactly the series driving the coefficient
    ODEs (u(z) = S((1+z)/(1-z))).
    """

    def __init__(self, alpha=0.0, rho: CircleMeasure | None = None, closed_form=None):
        self.alpha = float(alpha)
        self.rho = rho
        self.closed_form = closed_form
        if rho is None and closed_form is None:
            raise DomainError("generator needs Herglotz data or a closed form")

    # -- registry -------------------------------------------------------------
    @classmethod
    def burgers(cls):
        """S(w) = 2w, the equal-weight infinite-slit generator."""
        rho = CircleMeasure("atoms", [0.0], [2.0], require_probability=False)
        return cls(0.0, rho, closed_form="burgers")

    @classmethod
    def rotation(cls, alpha):
        """S(w) = -i alpha: rigid rotation of the driving measure."""
        rho = CircleMeasure("atoms", [0.0], [0.0], require_probability=False)
        return cls(alpha, rho, closed_form=("constant", -1j * float(alpha)))

    @classmethod
    def constant(cls, a):
        """S(w) = a with Re a >= 0."""
        a = complex(a)
        if a.real < 0:
            raise DomainError("constant generator needs Re a >= 0")
        rho = CircleMeasure.uniform().weights * a.real
        rho = CircleMeasure("density", None, rho, require_probability=False)
        return cls(-a.imag, rho, closed_form=("constant", a))

    @classmethod
    def from_herglotz_data(cls, alpha, rho: CircleMeasure):
        gen = cls(alpha, rho)
        gen.check_half_plane()
        return gen

    # -- evaluation -------------------------------------------------------------
    def u(self, z):
        """u(z) = -i alpha + int (1 + z zeta)/(1 - z zeta) rho(d zeta), |z| < 1."""
        z = np.asarray(z, dtype=complex)
        if self.closed_form == "burgers":
            return 2.0 * (1.0 + z) / (1.0 - z)
        if isinstance(self.closed_form, tuple) and self.closed_form[0] == "constant":
            return np.full(z.shape, self.closed_form[1], dtype=complex)
        out = np.full(z.shape, -1j * self.alpha, dtype=complex)
        if self.rho.kind == "atoms":
            zeta = self.rho.atom_points()
            zz = z[..., None]
            out = out + ((1.0 + zz * zeta) / (1.0 - zz * zeta)) @ self.rho.weights.astype(complex)
        else:
            K = self.rho.weights.size // 2 - 1
            m = self.rho._fourier_moments(K)
            c = np.concatenate([[self.rho.total_mass], 2.0 * m[1:]])
            out = out + ser_eval(c, z)
        return out

    def u_deriv(self, z):
        z = np.asarray(z, dtype=complex)
        if self.closed_form == "burgers":
            return 4.0 / (1.0 - z) ** 2
        if isinstance(self.closed_form, tuple) and self.closed_form[0] == "constant":
            return np.zeros(z.shape, dtype=complex)
        if self.rho.kind == "atoms":
            zeta = self.rho.atom_points()
            zz = z[..., None]
            return (2.0 * zeta / (1.0 - zz * zeta) ** 2) @ self.rho.weights.astype(complex)
        K = self.rho.weights.size // 2 - 1
        m = self.rho._fourier_moments(K)
        c = 2.0 * m[1:] * np.arange(1, K + 1)
        return ser_eval(np.concatenate([c]), z) if c.size else np.zeros(z.shape, complex)

    def eval(self, w):
        """S(w) for Re w > 0."""
        w = np.asarray(w, dtype=complex)
        if self.closed_form == "burgers":
            return 2.0 * w
        if isinstance(self.closed_form, tuple) and self.closed_form[0] == "constant":
            return np.full(w.shape, self.closed_form[1], dtype=complex)
        return self.u((w - 1.0) / (w + 1.0))

    __call__ = eval

    def deriv(self, w):
        w = np.asarray(w, dtype=complex)
        if self.closed_form == "burgers":
            return np.full(w.shape, 2.0, dtype=complex)
        if isinstance(self.closed_form, tuple) and self.closed_form[0] == "constant":
            return np.zeros(w.shape, dtype=complex)
        c = (w - 1.0) / (w + 1.0)
        return self.u_deriv(c) * 2.0 / (w + 1.0) ** 2

    def u_series(self, K):
        """Coefficients b_0..b_K of u(z) = S((1+z)/(1-z)) around z = 0."""
        if self.closed_form == "burgers":
            b = np.full(K + 1, 4.0, dtype=complex)
            b[0] = 2.0
            return b
        if isinstance(self.closed_form, tuple) and self.closed_form[0] == "constant":
            b = np.zeros(K + 1, dtype=complex)
            b[0] = self.closed_form[1]
            return b
        m = self.rho._fourier_moments(K)
        b = 2.0 * m.astype(complex)
        b[0] = -1j * self.alpha + self.rho.total_mass
        return b

    def check_half_plane(self, n_grid=48, tol=1e-10):
        """Verify Re S >= 0 on a grid of the right half-plane."""
        r = np.linspace(0.05, 0.95, 8)
        th = np.linspace(0, 2 * np.pi, n_grid, endpoint=False)
        z = (r[:, None] * np.exp(1j * th)).ravel()
        vals = self.u(z)
        if np.min(vals.real) < -tol:
            raise DomainError("Herglotz data does not map into the right half-plane")
        return True


def _m0_deriv(M0: HerglotzField, w):
    return M0.deriv(w)


def _newton_refine(M0, S, tau, z, w, tol, max_iter=60):
    """Newton iterations for phi(w) = w exp(tau S(M0(w))) - z at fixed tau.

    Operates in place on the active mask; returns (w, converged_mask).
    """
    w = np.array(w, dtype=complex, copy=True)
    active = np.ones(w.shape, dtype=bool)
    # transient overflow/invalid values are expected while iterates wander
    # near the singular set; they are projected or reported as failures
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            Mw = M0.eval(w[active])
            expf = np.exp(tau * S.eval(Mw))
            phi = w[active] * expf - z[active]
            dphi = expf * (1.0 + tau * w[active] * S.deriv(Mw) * _m0_deriv(M0, w[active]))
            step = phi / dphi
            step = np.where(np.isfinite(step), step, 0.5 * w[active])
            w_new = w[active] - step
            # project iterates that overshoot the disc back inside; the tracked
            # branch satisfies |w| <= |z| < 1 so this only touches transients
            r = np.abs(w_new)
            over = r >= 1.0 - 1e-12
            if np.any(over):
                w_new[over] *= (1.0 - 1e-9) / r[over]
            w[active] = w_new
            done = np.abs(step) <= tol * (1.0 + np.abs(w[active]))
            if np.all(done):
                active[active] = False
                break
            still = np.zeros_like(active)
            still[active] = ~done
            active = still
    converged = ~active
    bad = ~np.isfinite(w) | (np.abs(w) >= 1.0)
    converged &= ~bad
    return w, converged


def _characteristic_root(M0, S, t, z, dt_max=CONTINUATION_STEP, tol=NEWTON_TOL):
    """Track the characteristic root w(t) with w(0) = z by continuation in t."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(np.abs(z) >= 1.0):
        raise DomainError("characteristic solve needs |z| < 1")
    if t < 0:
        raise DomainError("time must be nonnegative")

    w = z.copy()
    tau = 0.0
    failed = np.zeros(z.shape, dtype=bool)
    while tau < t - 1e-15:
        step = min(dt_max, t - tau)
        while True:
            w_try, ok = _newton_refine(M0, S, tau + step, z, w, tol)
            if np.all(ok | failed):
                break
            if step <= CONTINUATION_STEP_MIN:
                # whoever still fails at the floor step is marked dead
                failed |= ~ok
                w_try[~ok] = np.nan
                break
            step /= 2.0
        w = np.where(failed, w, w_try)
        tau += step
    if scalar and failed[0]:
        raise ContinuationFailed(f"characteristic Newton diverged at t={t}")
    return (w[0] if scalar else w), failed


def _root_with_guess(M0, S, t, z, w_guess):
    """Characteristic root at fixed t, warm-started from a nearby root.

    Tries direct Newton from the guess; points that fail (or land outside
    the disc) fall back to full continuation from t = 0.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w_guess = np.broadcast_to(np.asarray(w_guess, dtype=complex), z.shape)
    w, ok = _newton_refine(M0, S, t, z, w_guess, NEWTON_TOL, max_iter=12)
    # a root found from a stale guess must still be the continuation branch:
    # reject guesses that jumped outside |w| <= |z| (the branch is a disc
    # self-map fixing 0, so it satisfies the Schwarz bound)
    ok &= np.abs(w) <= np.abs(z) + 1e-9
    if np.all(ok):
        return w, np.zeros(z.shape, dtype=bool)
    w_cold, failed = _characteristic_root(M0, S, t, z[~ok])
    out = w.copy()
    out[~ok] = w_cold
    fail_mask = np.zeros(z.shape, dtype=bool)
    fail_mask[~ok] = failed
    return out, fail_mask


def characteristic_solve(M0: HerglotzField, S: GeneratorS, t: float, z):
    """M_t(z) via the method of characteristics.

    Solves w exp(t S(M0(w))) = z by Newton continuation in t from w = z
    at t = 0 and returns M0(w).  Raises ``ContinuationFailed`` for scalar
    input when the continuation cannot reach t (z too close to a developing
    singularity of the inverse); for array input failed entries are NaN.
    """
    w, _failed = _characteristic_root(M0, S, t, z)
    return M0.eval(w)


def eta_semigroup(M0: HerglotzField, S: GeneratorS, t: float, z):
    """The subordinator eta_{nu_t}(z): the characteristic root w itself."""
    w, _failed = _characteristic_root(M0, S, t, z)
    return w


class FlowField(HerglotzField):
    """Herglotz field M_t produced by the characteristic flow.

    Keeps the roots of the last evaluation so sweeps over nearby point sets
    (density scans, backward flows) warm-start the Newton iteration.
    """

    def __init__(self, M0: HerglotzField, S: GeneratorS, t: float):
        self.M0 = M0
        self.S = S
        self.t = float(t)
        self._cache_z = None
        self._cache_w = None
        super().__init__(self._eval_flow, self._deriv_flow, label=f"flow(t={t:g})")

    def _roots(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if (
            self._cache_z is not None
            and self._cache_z.shape == z.shape
            and float(np.max(np.abs(self._cache_z - z))) < 0.05
        ):
            w, failed = _root_with_guess(self.M0, self.S, self.t, z, self._cache_w)
        else:
            w, failed = _characteristic_root(self.M0, self.S, self.t, z)
        # keep stale guesses (finally the start point itself) for failed slots
        prev = self._cache_w if self._cache_w is not None and self._cache_w.shape == z.shape else z
        self._cache_z = z.copy()
        self._cache_w = np.where(failed, prev, w)
        return w

    def warm_from(self, other: "FlowField"):
        """Adopt the root cache of a field at a nearby time (sweep helper)."""
        if other is not None and abs(other.t - self.t) < 0.05:
            self._cache_z = other._cache_z
            self._cache_w = other._cache_w
        return self

    def _eval_flow(self, z):
        z = np.asarray(z, dtype=complex)
        w = self._roots(z)
        out = self.M0.eval(w)
        return out[0] if z.ndim == 0 else out

    def _deriv_flow(self, z):
        # dM_t/dz = M0'(w) dw/dz with dz/dw from the implicit equation
        z = np.asarray(z, dtype=complex)
        w = self._roots(z)
        Mw = self.M0.eval(w)
        expf = np.exp(self.t * self.S.eval(Mw))
        dz_dw = expf * (1.0 + self.t * w * self.S.deriv(Mw) * self.M0.deriv(w))
        out = self.M0.deriv(w) / dz_dw
        return out[0] if z.ndim == 0 else out


def flow_field(M0: HerglotzField, S: GeneratorS, t: float) -> FlowField:
    """The field M_t as an evaluable HerglotzField."""
    return FlowField(M0, S, t)


# -- series routes ---------------------------------------------------------------


def eta_series_from_moments(m, K) -> SeriesMap:
    """eta-series a_1..a_K from moments m_1..m_K (psi = eta/(1-eta))."""
    m = np.asarray(m, dtype=complex).ravel()
    psi = np.zeros(K + 1, dtype=complex)
    upto = min(K, m.size - 1)
    psi[1 : upto + 1] = m[1 : upto + 1]
    one_plus = psi.copy()
    one_plus[0] = 1.0
    return SeriesMap(ser_div(psi, one_plus, K))


def moments_from_eta_series(eta: SeriesMap) -> MomentSequence:
    """Moments from an eta-series via psi = eta/(1 - eta)."""
    K = eta.order
    denom = -eta.coeffs.copy()
    denom[0] = 1.0
    psi = ser_div(eta.coeffs, denom, K)
    m = psi.copy()
    m[0] = 1.0
    return MomentSequence(m)


def _poly_add(p, q):
    if p.size < q.size:
        p, q = q, p
    out = p.copy()
    out[: q.size] += q
    return out


def _eta_coefficient_polys(c, b, K):
    """Polynomials P_n with a_n(t) = exp(-n b_0 t) P_n(t).

    ``c``: initial eta coefficients (index n holds c_n, index 0 unused),
    ``b``: u-series coefficients b_0..b_K.  Every forcing monomial for a_n
    carries the factor exp(-n b_0 t) exactly (z-orders add under products of
    eta-coefficients), so the reduced equations dP_n/dt = forcing are pure
    polynomial integrations.  Returns {n: t-coefficient array of P_n}.
    """
    P = {}
    power = {}  # (q, j) -> polynomial of [z^j] (eta^q), exp factor dropped

    def power_poly(q, j):
        if q == 1:
            return P[j]
        key = (q, j)
        if key not in power:
            acc = np.array([0.0 + 0j])
            for i in range(q - 1, j):
                acc = _poly_add(acc, np.convolve(power_poly(q - 1, i), P[j - i]))
            power[key] = acc
        return power[key]

    for n in range(1, K + 1):
        # dP_n/dt = -sum_{k=1}^{n-1} k P_k Q_{n-k},
        # Q_j = [z^j] u(eta) / exp(-j b0 t) = sum_{q=1..j} b_q [z^j](eta^q)
        forcing = np.array([0.0 + 0j])
        for k in range(1, n):
            j = n - k
            Qj = np.array([0.0 + 0j])
            for q in range(1, j + 1):
                if b[q] != 0:
                    Qj = _poly_add(Qj, b[q] * power_poly(q, j))
            if np.any(Qj):
                forcing = _poly_add(forcing, -k * np.convolve(P[k], Qj))
        Pn = np.concatenate([[c[n]], forcing / np.arange(1, forcing.size + 1)])
        P[n] = np.trim_zeros(Pn, "b") if np.any(Pn) else np.array([0.0 + 0j])
    return P


def coefficient_ode(eta0: SeriesMap, u_series, K: int, t: float) -> SeriesMap:
    """Evolve an eta-series by the triangular coefficient ODE system.

    ``eta0``: series of the initial eta-transform (vanishing at 0);
    ``u_series``: coefficients b_0.. of the field u(z) = S((1+z)/(1-z)).
    The system da_1/dt = -b_0 a_1, da_2/dt = -2 b_0 a_2 - b_1 a_1^2, ... is
    solved exactly: each a_n(t) = exp(-n b_0 t) P_n(t) with P_n obtained by
    iterated polynomial integration (see module docstring).
    """
    if isinstance(u_series, SeriesMap):
        b = u_series.coeffs
    else:
        b = np.asarray(u_series, dtype=complex).ravel()
    if b.size < K + 1:
        b = np.concatenate([b, np.zeros(K + 1 - b.size, dtype=complex)])
    if b[0].real <= 1e-15:
        raise DomainError("coefficient ODEs need Re b_0 > 0 (pure rotations excluded)")
    c = np.zeros(K + 1, dtype=complex)
    src = eta0.coeffs
    c[1 : min(K, eta0.order) + 1] = src[1 : min(K, eta0.order) + 1]
    polys = _eta_coefficient_polys(c, b, K)
    a = np.zeros(K + 1, dtype=complex)
    for n in range(1, K + 1):
        a[n] = np.exp(-n * b[0] * t) * ser_eval(polys[n], np.asarray(t, dtype=complex))
    return SeriesMap(a)


def moment_hierarchy(m0, t: float, K: int, rtol=1e-12, atol=1e-14) -> MomentSequence:
    """Integrate dm_n/dt = -2n m_n - 2n sum_{j<n} m_j m_{n-j} to time t.

    ``m0`` may be a MomentSequence or an array m_0..m_K; the system is the
    closed equal-weight hierarchy (see module docstring for the derivation).
    """
    if isinstance(m0, MomentSequence):
        m0 = m0.m
    m0 = np.asarray(m0, dtype=complex).ravel()
    if m0.size < K + 1:
        raise DomainError("initial moments shorter than requested order")
    y0 = m0[1 : K + 1]
    if t == 0:
        return MomentSequence(np.concatenate([[1.0], y0]))
    n = np.arange(1, K + 1)

    def rhs(_t, y):
        c = np.convolve(y, y)[: K + 1]  # index n-2 holds sum_{j} m_j m_{n-j}
        quad = np.zeros(K, dtype=complex)
        quad[1:] = c[: K - 1]
        return -2.0 * n * (y + quad)

    sol = solve_ivp(
        rhs, (0.0, float(t)), y0, method="DOP853", rtol=rtol, atol=atol, dense_output=False
    )
    if not sol.success:
        raise RuntimeError(f"moment hierarchy integration failed: {sol.message}")
    return MomentSequence(np.concatenate([[1.0], sol.y[:, -1]]))


# -- convolution algebra ------------------------------------------------------------


def _eta_series_of(mu, K) -> SeriesMap:
    if isinstance(mu, SeriesMap):
        return mu.truncated(K)
    if isinstance(mu, MomentSequence):
        return eta_series_from_moments(mu.m, K)
    if isinstance(mu, CircleMeasure):
        return eta_series_from_moments(mu.moments(K).m, K)
    raise DomainError(f"cannot build an eta-series from {type(mu)!r}")


def sigma_transform(mu, K: int) -> SeriesMap:
    """Sigma-series of a measure: Sigma(z) = eta^{-1}(z)/z, coeffs 0..K-1.

    Requires a nonzero first moment; raises ``ZeroMeanMeasure`` otherwise.
    """
    eta = _eta_series_of(mu, K)
    if abs(eta.coeffs[1]) < 1e-12:
        raise ZeroMeanMeasure("Sigma-transform needs |m_1| >= 1e-12")
    inv = ser_inverse(eta.coeffs, K)
    return SeriesMap(np.concatenate([inv[1:], [0.0]])[: K + 1])


def free_mult_convolve(mu, nu, K: int) -> MomentSequence:
    """Moments of the free multiplicative convolution at truncation K.

    Sigma-series multiply; the product is re-inverted to an eta-series and
    moments are read off.
    """
    sa = sigma_transform(mu, K)
    sb = sigma_transform(nu, K)
    prod = ser_mul(sa.coeffs, sb.coeffs, K)
    inv_eta = np.concatenate([[0.0], prod[:K]])  # z * Sigma(z)
    eta = ser_inverse(inv_eta, K)
    return moments_from_eta_series(SeriesMap(eta))


def monotone_convolve(mu, nu, K: int) -> MomentSequence:
    """Moments of the monotone convolution: eta-transforms compose."""
    ea = _eta_series_of(mu, K)
    eb = _eta_series_of(nu, K)
    return moments_from_eta_series(SeriesMap(ser_compose(ea.coeffs, eb.coeffs, K)))


def semigroup_sigma_series(M0, S: GeneratorS, t: float, K: int):
    """Sigma-series of nu_t: Sigma_{nu_t}(z) = exp(t S(M0(z))), coeffs 0..K.

    ``M0`` may be a CircleMeasure (series taken exactly from its moments) or
    a HerglotzField (series extracted by Cauchy sampling).
    """
    if isinstance(M0, CircleMeasure):
        m = M0.moments(K).m
        m0c = np.concatenate([[1.0], 2.0 * np.conj(m[1:])])
    else:
        m0c = taylor_coefficients(M0.eval, K, radius=0.5)
    sm0 = _compose_generator_series(S, m0c, K)
    return ser_exp(t * sm0, K)


def _compose_generator_series(S: GeneratorS, m0_coeffs, K):
    """Series of S(M0(z)) around 0 given the series of M0."""
    if S.closed_form == "burgers":
        return 2.0 * np.asarray(m0_coeffs[: K + 1], dtype=complex)
    if isinstance(S.closed_form, tuple) and S.closed_form[0] == "constant":
        c = np.zeros(K + 1, dtype=complex)
        c[0] = S.closed_form[1]
        return c
    # S(M0(z)) = u((M0-1)/(M0+1)); the argument vanishes at 0 since M0(0)=1
    m0 = np.asarray(m0_coeffs[: K + 1], dtype=complex)
    num = m0.copy()
    num[0] -= 1.0
    den = m0.copy()
    den[0] += 1.0
    arg = ser_div(num, den, K)
    b = S.u_series(K)
    return ser_compose(b, arg, K)


def taylor_coefficients(f, K, radius=0.5, n_samples=None):
    """Taylor coefficients of f at 0 by FFT on a circle of given radius."""
    N = n_samples or max(256, 4 * (K + 1))
    z = radius * np.exp(2j * np.pi * np.arange(N) / N)
    vals = f(z)
    coeffs = np.fft.fft(vals) / N
    return coeffs[: K + 1] / radius ** np.arange(K + 1)


def moments_from_field(M, K, radius=0.5) -> MomentSequence:
    """Moments of the measure represented by a Herglotz field.

    M(z) = 1 + 2 sum conj(m_n) z^n, so m_n = conj(coefficient)/2.
    """
    c = taylor_coefficients(M.eval if isinstance(M, HerglotzField) else M, K, radius)
    m = np.conj(c) / 2.0
    m[0] = 1.0
    return MomentSequence(m)


def is_free_infdiv(mu, K: int = DEFAULT_ORDER, grid: int = 24):
    """Test free infinite divisibility via Sigma = exp(u) with Herglotz u.

    Computes log Sigma_mu as a series (principal branch anchored at z = 0),
    evaluates the partial sum on a polar grid of the disc |z| <= 0.5 and
    tests Re >= -1e-8.  The truncation tail |c_K| r^K is treated as the
    uncertainty of the evaluation: when the minimum of Re u sits within one
    tail bound of the threshold the decision could flip at higher order and
    ``InconclusiveTruncation`` is raised.  On success returns
    (True, GeneratorS) where the generator carries the fitted Herglotz data
    of u; a confident negative returns (False, None).
    """
    r_test = 0.5
    sigma = sigma_transform(mu, K)
    u = ser_log(sigma.coeffs, K)
    tail = abs(u[K]) * r_test**K
    radii = np.linspace(0.05, r_test, max(4, grid // 4))
    angles = np.arange(grid) * (2 * np.pi / grid)
    z = (radii[:, None] * np.exp(1j * angles)).ravel()
    vals = ser_eval(u, z)
    min_re = float(np.min(vals.real))
    if abs(min_re + 1e-8) <= tail:
        raise InconclusiveTruncation(
            f"min Re u = {min_re:.3g} is within the tail bound {tail:.3g} of the"
            f" threshold at r={r_test}; increase the truncation order"
        )
    if min_re < -1e-8:
        return False, None
    # Herglotz data: u(z) = -i alpha + rho_mass + 2 sum_n (int zeta^n drho) z^n
    alpha = -float(u[0].imag)
    mass = float(u[0].real)
    if mass <= 1e-14:
        rho = CircleMeasure("atoms", [0.0], [max(mass, 0.0)], require_probability=False)
        return True, GeneratorS(alpha, rho)
    rho_moments = u[1:] / 2.0
    G = 512
    s = np.arange(G) * (2 * np.pi / G)
    p = np.full(G, mass / (2 * np.pi))
    # Fejer weights keep the synthesized density nonnegative up to truncation
    for n_idx, rn in enumerate(rho_moments, start=1):
        w = 1.0 - n_idx / (rho_moments.size + 1)
        p += w * np.real(rn * np.exp(-1j * n_idx * s)) / np.pi
    p = np.maximum(p, 0.0)
    total = p.sum() * (2 * np.pi / G)
    if total > 0:
        p *= mass / total
    rho = CircleMeasure("density", None, p, require_probability=False)
    return True, GeneratorS(alpha, rho)


def long_time_limit_check(M0: HerglotzField, S: GeneratorS, t_list, radius=0.5):
    """sup_{|z| <= radius} |M_t(z) - 1| for each t in t_list."""
    angles = np.exp(1j * np.arange(64) * (2 * np.pi / 64))
    z = np.concatenate([(radius * f) * angles for f in (0.25, 0.5, 0.75, 1.0)])
    out = []
    for t in t_list:
        vals = characteristic_solve(M0, S, float(t), z)
        out.append(float(np.max(np.abs(vals - 1.0))))
    return out
