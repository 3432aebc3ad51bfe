"""Truncated power-series arithmetic.

All routines work on plain 1-D complex ndarrays ``c`` where ``c[n]`` is the
coefficient of ``z**n``; every operation is exact through the common
truncation order (the arrays carry coefficients 0..K).  ``SeriesMap`` wraps
such an array for maps of the disc; most transform algebra (eta/Sigma series,
convolutions, infinite-divisibility checks) is built from these helpers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SeriesMap",
    "ser_mul",
    "ser_div",
    "ser_exp",
    "ser_log",
    "ser_compose",
    "ser_inverse",
    "ser_eval",
    "ser_deriv",
]


def _as_coeffs(c, K=None):
    c = np.asarray(c, dtype=complex).ravel()
    if K is not None:
        if c.size > K + 1:
            c = c[: K + 1]
        elif c.size < K + 1:
            c = np.concatenate([c, np.zeros(K + 1 - c.size, dtype=complex)])
    return c


def ser_mul(a, b, K):
    """Product of two series, truncated at order K."""
    a = _as_coeffs(a, K)
    b = _as_coeffs(b, K)
    return np.convolve(a, b)[: K + 1]


def ser_div(a, b, K):
    """Quotient a/b; requires b[0] != 0."""
    a = _as_coeffs(a, K)
    b = _as_coeffs(b, K)
    if b[0] == 0:
        raise ZeroDivisionError("series division needs a nonzero constant term")
    q = np.zeros(K + 1, dtype=complex)
    for n in range(K + 1):
        s = a[n] - np.dot(q[:n], b[n:0:-1]) if n else a[0]
        q[n] = s / b[0]
    return q


def ser_exp(a, K):
    """exp of a series (constant term exponentiates directly)."""
    a = _as_coeffs(a, K)
    e = np.zeros(K + 1, dtype=complex)
    e[0] = np.exp(a[0])
    # e' = a' e  =>  n e_n = sum_{k=1..n} k a_k e_{n-k}
    for n in range(1, K + 1):
        ks = np.arange(1, n + 1)
        e[n] = np.dot(ks * a[1 : n + 1], e[n - 1 :: -1][:n]) / n
    return e


def ser_log(a, K):
    """Principal-branch log of a series with a[0] != 0."""
    a = _as_coeffs(a, K)
    if a[0] == 0:
        raise ZeroDivisionError("series log needs a nonzero constant term")
    lg = np.zeros(K + 1, dtype=complex)
    lg[0] = np.log(a[0])
    # a' = l' a  =>  n a_n = sum_{k=1..n} k l_k a_{n-k}
    for n in range(1, K + 1):
        ks = np.arange(1, n)
        s = np.dot(ks * lg[1:n], a[n - 1 : 0 : -1]) if n > 1 else 0.0
        lg[n] = (n * a[n] - s) / (n * a[0])
    return lg


def ser_compose(outer, inner, K):
    """outer(inner(z)) truncated at K; requires inner[0] == 0."""
    outer = _as_coeffs(outer, K)
    inner = _as_coeffs(inner, K)
    if inner[0] != 0:
        raise ValueError("series composition needs inner constant term 0")
    out = np.zeros(K + 1, dtype=complex)
    out[0] = outer[0]
    power = np.zeros(K + 1, dtype=complex)
    power[0] = 1.0
    for q in range(1, K + 1):
        power = ser_mul(power, inner, K)
        if not np.any(power):
            break
        out += outer[q] * power
    return out


def ser_inverse(a, K):
    """Compositional inverse of a series with a[0] == 0, a[1] != 0."""
    a = _as_coeffs(a, K)
    if a[0] != 0:
        raise ValueError("compositional inverse needs constant term 0")
    if a[1] == 0:
        raise ValueError("compositional inverse needs a nonzero linear term")
    h = np.zeros(K + 1, dtype=complex)
    h[1] = 1.0 / a[1]
    # Match coefficients of a(h(z)) = z order by order; at order n only
    # h_1..h_{n-1} enter the higher powers of h, so the system is triangular.
    for n in range(2, K + 1):
        comp = ser_compose(a, h, n)
        h[n] = -comp[n] / a[1]
    return h


def ser_eval(a, z):
    """Evaluate the series at points z (Horner, vectorized)."""
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    out = np.full(z.shape, a[-1], dtype=complex)
    for c in a[-2::-1]:
        out = out * z + c
    return out


def ser_deriv(a, K=None):
    """Coefficients of the derivative series."""
    a = np.asarray(a, dtype=complex)
    d = a[1:] * np.arange(1, a.size)
    if K is not None:
        d = _as_coeffs(d, K)
    return d


@dataclass(frozen=True)
class SeriesMap:
    """A truncated power series c_0 + c_1 z + ... + c_K z^K.

    Disc maps handled by the transform algebra (eta-transforms and their
    relatives) vanish at the origin, i.e. ``c_0 == 0``; ``Sigma``-type series
    carry a nonzero constant term.  ``coeffs[n]`` is the coefficient of
    ``z**n``.
    """

    coeffs: np.ndarray
    order: int = field(default=-1)

    def __post_init__(self):
        c = _as_coeffs(self.coeffs)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "order", c.size - 1)

    @classmethod
    def from_linear(cls, c1, K):
        c = np.zeros(K + 1, dtype=complex)
        c[1] = c1
        return cls(c)

    @classmethod
    def identity(cls, K):
        return cls.from_linear(1.0, K)

    @property
    def vanishes_at_zero(self) -> bool:
        return self.coeffs[0] == 0

    def truncated(self, K) -> "SeriesMap":
        return SeriesMap(_as_coeffs(self.coeffs, K))

    def __call__(self, z):
        return ser_eval(self.coeffs, z)

    def compose(self, inner: "SeriesMap") -> "SeriesMap":
        K = min(self.order, inner.order)
        return SeriesMap(ser_compose(self.coeffs, inner.coeffs, K))

    def inverse(self) -> "SeriesMap":
        return SeriesMap(ser_inverse(self.coeffs, self.order))

    def mul(self, other: "SeriesMap") -> "SeriesMap":
        K = min(self.order, other.order)
        return SeriesMap(ser_mul(self.coeffs, other.coeffs, K))
