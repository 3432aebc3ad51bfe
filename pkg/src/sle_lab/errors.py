"""Exception types shared across the package.

Numerical routines raise these instead of bare ValueError/RuntimeError so
callers can distinguish "your input is outside the contract" from "the
computation detected a genuine analytic obstruction" (a measure that does
not extend to the boundary, a Newton continuation running into a
singularity, and so on).
"""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class GapUnderflow(RuntimeError):
    """Two driving angles came closer than the configured gap floor."""


class OrderingViolated(RuntimeError):
    """Adaptive sub-stepping bottomed out without preserving the angle order."""


class NotBoundaryRegular(RuntimeError):
    """Radial boundary limits of a Herglotz function disagree; no density."""


class ContinuationFailed(RuntimeError):
    """Newton continuation for the characteristic equation diverged."""


class ZeroMeanMeasure(ValueError):
    """First moment vanishes; the Sigma-transform is undefined."""


class InconclusiveTruncation(RuntimeError):
    """Series truncation too coarse to decide infinite divisibility."""


class InsideSupport(ValueError):
    """Evaluation point lies inside (or too close to) the measure support."""


class SingularityError(RuntimeError):
    """A backward Loewner trajectory approached a driving atom."""


class SchemaError(ValueError):
    """A CSV/JSON payload does not match the documented schema."""


class ConfigError(ValueError):
    """A CLI or file configuration is invalid."""
