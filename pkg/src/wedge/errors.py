"""Exception hierarchy shared by every solver stage."""


class WedgeError(Exception):
    """Base class for all solver errors."""


class InvalidParams(WedgeError, ValueError):
    """One or more parameter invariants are violated.

    ``problems`` maps a field name to a human readable reason.
    """

    def __init__(self, problems):
        self.problems = dict(problems)
        detail = "; ".join(f"{k}: {v}" for k, v in self.problems.items())
        super().__init__(f"invalid parameters ({detail})")


class BoundaryCase(WedgeError):
    """Parameters sit on one of the excluded critical equalities."""

    def __init__(self, which):
        self.which = which
        super().__init__(f"boundary parameter case: {which}")


class DegenerateStart(WedgeError):
    """The start point is the tangency q = q_M; the curve is a single point."""


class SingularDenominator(WedgeError):
    """The ODE denominator l(q) - n vanished away from q = 1."""


class HitZero(WedgeError):
    """The candidate curve reached n = 0 before re-meeting m."""

    def __init__(self, q):
        self.q = q
        super().__init__(f"solution hit zero at q = {q!r}")


class StepFailure(WedgeError):
    """The adaptive integrator could not meet its tolerance."""


class NotSingularCase(WedgeError):
    """A singular-point operation was requested outside Case I geometry."""


class RootsNotReal(WedgeError):
    """The quadratic m has no real roots."""


class OrderingUnsupported(WedgeError):
    """Root ordering is not one of the three covered by the closed form."""


class IllPosedCurve(WedgeError):
    """Lambda requested on a curve that hit zero."""


class IllPosedForThisXi(WedgeError):
    """Round-trip cost is at or below the well-posedness threshold."""

    def __init__(self, xi, xi_under):
        self.xi = xi
        self.xi_under = xi_under
        super().__init__(
            f"problem is ill-posed for xi = {xi!r}; needs xi > {xi_under!r}"
        )


class IllPosedAlways(WedgeError):
    """Problem is ill-posed for every level of transaction cost."""


class MertonIllPosed(WedgeError):
    """Frictionless problem has infinite value (m_M <= 0)."""


class Insolvent(WedgeError):
    """Portfolio lies outside the open solvency region."""


class ConfigInvalid(WedgeError, ValueError):
    """Simulation or run configuration is malformed."""
