"""Parameter reduction, the quadratics m and l, and the case classifier.

The whole problem is governed by

    m(q) = 1 - eps (1-R) q + (delta^2/2) R (1-R) q^2
    l(q) = m(q) + (delta^2/2) (1-R) q (1-q)

with eps = mu/beta, delta = sigma/sqrt(beta).  Which of the ten solution
regimes applies depends only on the signs of R-1, (1-R) m'(0), m(1),
(1-R) m'(1) and m_M = m(q_M).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import BoundaryCase, InvalidParams

# Relative width of the band around each critical equality that is
# rejected as a boundary case.
BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class MarketParams:
    """Market and preference inputs in natural units."""

    mu: float
    sigma: float
    beta: float
    R: float
    lam: float = 0.0
    gamma: float = 0.0

    def problems(self) -> dict:
        out = {}
        for name in ("mu", "sigma", "beta", "R", "lam", "gamma"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                out[name] = "must be a finite number"
        if out:
            return out
        if self.sigma <= 0:
            out["sigma"] = "must be > 0"
        if self.beta <= 0:
            out["beta"] = "must be > 0"
        if self.R <= 0:
            out["R"] = "must be > 0"
        elif self.R == 1:
            out["R"] = "R = 1 (log utility) is not supported"
        if self.lam < 0:
            out["lam"] = "must be >= 0"
        if not 0 <= self.gamma < 1:
            out["gamma"] = "must lie in [0, 1)"
        if "lam" not in out and "gamma" not in out and self.lam + self.gamma <= 0:
            out["lam+gamma"] = "at least one transaction cost must be positive"
        return out


@dataclass(frozen=True)
class DimensionlessParams:
    """Reduced inputs (eps, delta, R, xi); ``original`` keeps the split costs."""

    eps: float
    delta: float
    R: float
    xi: float
    original: MarketParams | None = field(default=None, compare=False)

    @property
    def lam(self) -> float:
        """Purchase cost; defaults to the purchase-only equivalent problem."""
        return self.original.lam if self.original is not None else self.xi

    @property
    def gamma(self) -> float:
        return self.original.gamma if self.original is not None else 0.0


def reduce_params(p: MarketParams) -> DimensionlessParams:
    problems = p.problems()
    if problems:
        raise InvalidParams(problems)
    return DimensionlessParams(
        eps=p.mu / p.beta,
        delta=p.sigma / math.sqrt(p.beta),
        R=p.R,
        xi=(p.lam + p.gamma) / (1.0 - p.gamma),
        original=p,
    )


def dimensionless(eps, delta, R, xi=None, lam=None, gamma=0.0, beta=1.0):
    """Build :class:`DimensionlessParams` directly from reduced quantities.

    A synthetic :class:`MarketParams` with discount rate ``beta`` is
    attached so that downstream value and simulation code has natural
    units.  Costs default to the purchase-only split (lam = xi, gamma = 0).
    """
    if lam is None:
        if xi is None:
            raise InvalidParams({"xi": "give xi or lam"})
        lam = xi * (1.0 - gamma) - gamma if gamma else xi
    mp = MarketParams(
        mu=eps * beta, sigma=delta * math.sqrt(beta), beta=beta, R=R, lam=lam, gamma=gamma
    )
    d = reduce_params(mp)
    if xi is not None and gamma == 0.0:
        # keep xi bit-exact when it was given directly
        d = DimensionlessParams(eps=d.eps, delta=d.delta, R=R, xi=xi, original=mp)
    return d


def _stable_roots(a, b, c):
    """Real roots of a q^2 + b q + c in increasing order, or None."""
    disc = b * b - 4.0 * a * c
    if disc < 0 or a == 0:
        return None
    sq = math.sqrt(disc)
    t = -0.5 * (b + math.copysign(sq, b))
    if t == 0.0:
        r1 = r2 = 0.0
    else:
        r1, r2 = t / a, c / t
    return (r1, r2) if r1 <= r2 else (r2, r1)


@dataclass(frozen=True)
class QuadraticGeometry:
    eps: float
    delta: float
    R: float
    qM: float
    mM: float
    q_minus: float | None
    q_plus: float | None
    p_minus: float | None
    p_plus: float | None

    @property
    def delta2(self) -> float:
        return self.delta * self.delta

    @property
    def k(self) -> float:
        """(delta^2/2)(1-R): l - m = k q (1-q)."""
        return 0.5 * self.delta2 * (1.0 - self.R)

    # m(q) = 1 + m1 q + m2 q^2
    @property
    def m1(self) -> float:
        return -self.eps * (1.0 - self.R)

    @property
    def m2(self) -> float:
        return 0.5 * self.delta2 * self.R * (1.0 - self.R)

    def m(self, q):
        return 1.0 + q * (self.m1 + self.m2 * q)

    def dm(self, q):
        return self.m1 + 2.0 * self.m2 * q

    def ell(self, q):
        return self.m(q) + self.k * q * (1.0 - q)

    def dell(self, q):
        return self.dm(q) + self.k * (1.0 - 2.0 * q)

    @property
    def m_at_1(self) -> float:
        return self.m(1.0)

    @property
    def ell_coefficients(self):
        """(c0, c1, c2) with l(q) = c0 + c1 q + c2 q^2."""
        return (1.0, self.m1 + self.k, self.m2 - self.k)


def geometry(d) -> QuadraticGeometry:
    """Evaluate the quadratic geometry for (eps, delta, R) of ``d``."""
    eps, delta, R = d.eps, d.delta, d.R
    delta2 = delta * delta
    qM = eps / (delta2 * R)
    m2 = 0.5 * delta2 * R * (1.0 - R)
    m1 = -eps * (1.0 - R)
    mM = 1.0 + qM * (m1 + m2 * qM)
    k = 0.5 * delta2 * (1.0 - R)
    qr = _stable_roots(m2, m1, 1.0)
    pr = _stable_roots(m2 - k, m1 + k, 1.0)
    return QuadraticGeometry(
        eps=eps,
        delta=delta,
        R=R,
        qM=qM,
        mM=mM,
        q_minus=qr[0] if qr else None,
        q_plus=qr[1] if qr else None,
        p_minus=pr[0] if pr else None,
        p_plus=pr[1] if pr else None,
    )


class Case(str, enum.Enum):
    C1AbIIii = "1AbIIii"
    C1Aa = "1Aa"
    C1AbIIi = "1AbIIi"
    C2AII = "2AII"
    C1AbIii = "1AbIii"
    C1AbIi = "1AbIi"
    C2AI = "2AI"
    C1Bii = "1Bii"
    C1Bi = "1Bi"
    C2B = "2B"

    def __str__(self):
        return self.value

    @property
    def singular(self) -> bool:
        """Case I: curves may pass through the singular point (1, m(1))."""
        return self in (Case.C1AbIii, Case.C1AbIi, Case.C2AI)

    @property
    def leftward(self) -> bool:
        """Case B: negative drift, curves run towards q < 0."""
        return self in (Case.C1Bii, Case.C1Bi, Case.C2B)


@dataclass(frozen=True)
class Boundary:
    """Parameters on an excluded critical equality; ``which`` names it."""

    which: str

    def __str__(self):
        return f"Boundary({self.which})"


CaseLabel = Case | Boundary


def _near_zero(value, scale):
    return value == 0.0 or abs(value) <= BOUNDARY_RTOL * scale


def classify(d) -> CaseLabel:
    """Decide the case from the signs of the quantities that define it."""
    g = d if isinstance(d, QuadraticGeometry) else geometry(d)
    R = g.R
    one_m_r = 1.0 - R
    dm0 = g.dm(0.0)
    m1v = g.m_at_1
    dm1 = g.dm(1.0)
    # scales for the relative zero band: magnitude of the summed terms
    s_dm0 = abs(one_m_r) * max(abs(g.eps), g.delta2 * R)
    s_m1 = 1.0 + abs(g.m1) + abs(g.m2)
    s_dm1 = abs(g.m1) + 2.0 * abs(g.m2)
    s_mM = 1.0 + abs(g.m1 * g.qM) + abs(g.m2 * g.qM * g.qM)

    if _near_zero(dm0, s_dm0):
        return Boundary("m'(0)=0")
    if R < 1:
        if one_m_r * dm0 > 0:
            if _near_zero(g.mM, s_mM):
                return Boundary("m_M=0")
            return Case.C1Bi if g.mM < 0 else Case.C1Bii
        if _near_zero(m1v, s_m1):
            return Boundary("m(1)=0")
        if m1v < 0:
            return Case.C1Aa
        if _near_zero(dm1, s_dm1):
            return Boundary("m'(1)=0")
        if _near_zero(g.mM, s_mM):
            return Boundary("m_M=0")
        big_i = one_m_r * dm1 < 0
        small_i = g.mM < 0
        if big_i:
            return Case.C1AbIi if small_i else Case.C1AbIii
        return Case.C1AbIIi if small_i else Case.C1AbIIii
    if one_m_r * dm0 > 0:
        return Case.C2B
    if _near_zero(dm1, s_dm1):
        return Boundary("m'(1)=0")
    return Case.C2AI if one_m_r * dm1 < 0 else Case.C2AII


def critical_eps(delta, R):
    """The excluded drift values for (delta, R), keyed by their equality."""
    out = {"m'(0)=0": 0.0, "m'(1)=0": delta * delta * R}
    if R < 1:
        s = delta * math.sqrt(2.0 * R / (1.0 - R))
        out["m_M=0"] = s
        out["m_M=0 (eps<0)"] = -s
        out["m(1)=0"] = 1.0 / (1.0 - R) + 0.5 * delta * delta * R
    return out


def classify_by_range(eps, delta, R) -> CaseLabel:
    """Classify using the drift ranges listed alongside each case.

    Kept as an independent formulation of :func:`classify`.
    """
    crit = critical_eps(delta, R)
    scale = max(1.0, abs(eps), delta * delta * R)
    for name, c in crit.items():
        if abs(eps - c) <= BOUNDARY_RTOL * max(scale, abs(c)):
            if name == "m'(1)=0" and R < 1 and eps > crit["m(1)=0"]:
                continue  # slope at 1 is irrelevant once m(1) < 0
            return Boundary(name.split(" ")[0])
    d2r = delta * delta * R
    if R > 1:
        if eps < 0:
            return Case.C2B
        return Case.C2AII if eps < d2r else Case.C2AI
    s = crit["m_M=0"]
    top = crit["m(1)=0"]
    if eps < -s:
        return Case.C1Bi
    if eps < 0:
        return Case.C1Bii
    if top < eps:
        return Case.C1Aa
    if eps < min(d2r, s):
        return Case.C1AbIIii
    if s < eps < min(d2r, top):
        return Case.C1AbIIi
    if d2r < eps < s:
        return Case.C1AbIii
    return Case.C1AbIi  # max(d2r, s) < eps < top


class WellPosednessKind(str, enum.Enum):
    UNCONDITIONAL = "Unconditional"
    CONDITIONAL = "Conditional"
    ILL_POSED = "IllPosed"


@dataclass(frozen=True)
class WellPosedness:
    kind: WellPosednessKind
    xi_threshold: float | None = None

    def admits(self, xi: float) -> bool:
        if self.kind is WellPosednessKind.UNCONDITIONAL:
            return True
        if self.kind is WellPosednessKind.ILL_POSED:
            return False
        return xi > self.xi_threshold

    def __str__(self):
        if self.kind is WellPosednessKind.CONDITIONAL:
            return f"Conditional(xi > {self.xi_threshold!r})"
        return self.kind.value


def wellposedness(d) -> WellPosedness:
    """Well-posedness verdict and, when conditional, the cost threshold."""
    g = d if isinstance(d, QuadraticGeometry) else geometry(d)
    label = classify(g)
    if isinstance(label, Boundary):
        raise BoundaryCase(label.which)
    if label is Case.C1Aa:
        return WellPosedness(WellPosednessKind.ILL_POSED)
    if label in (Case.C1AbIIi, Case.C1AbIi, Case.C1Bi):
        from .boundary import closed_form_lambda_under

        lam_under = closed_form_lambda_under(g)
        return WellPosedness(WellPosednessKind.CONDITIONAL, math.expm1(lam_under))
    return WellPosedness(WellPosednessKind.UNCONDITIONAL)


CASE_EXAMPLES = {
    # one representative (eps, delta, R) per case
    Case.C1AbIIii: (0.5, 1.0, 2.0 / 3.0),
    Case.C1Aa: (17.5, 6.0, 2.0 / 3.0),
    Case.C1AbIIi: (13.5, 6.0, 2.0 / 3.0),
    Case.C2AII: (1.0, 1.0, 2.0),
    Case.C1AbIii: (1.5, 1.0, 2.0 / 3.0),
    Case.C1AbIi: (3.25, 1.5, 2.0 / 3.0),
    Case.C2AI: (2.5, 1.0, 2.0),
    Case.C1Bii: (-1.0, 1.0, 2.0 / 3.0),
    Case.C1Bi: (-3.0, 1.0, 2.0 / 3.0),
    Case.C2B: (-1.0, 1.0, 2.0),
}
