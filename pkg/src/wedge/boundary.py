"""Lambda(r), the cost thresholds, and the inversion Sigma(q_*) = xi.

Lambda(r) = int_r^zeta(r) (n - m) / (q (1-q) (l - n)) dq is decreasing in
r on the solution bracket, infinite at the origin and zero at q_M (or
equal to the lower threshold at the nearer root of m), so the purchase
boundary is found by bisection on Lambda(r) = ln(1 + xi).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import (
    BoundaryCase,
    HitZero,
    IllPosedAlways,
    IllPosedCurve,
    IllPosedForThisXi,
    NotSingularCase,
    OrderingUnsupported,
    RootsNotReal,
    StepFailure,
)
from .ode import (
    DEFAULT_OPTIONS,
    SolutionCurve,
    ToleranceOptions,
    integrate_curve,
    lambda_one,
    singular_expansion,
)
from .params import (
    Boundary,
    Case,
    DimensionlessParams,
    QuadraticGeometry,
    WellPosednessKind,
    classify,
    geometry,
    wellposedness,
)

MAX_BISECTIONS = 200
ENDPOINT_NUDGE = 1e-9
SINGULAR_BAND = 1e-9
# smallest |r| tried when pushing the bracket towards the origin; below
# about 1e-150 the squared launch step underflows
R_FLOOR = 1e-120


class Regime(str, enum.Enum):
    INTERIOR = "Interior"
    CROSSES_SINGULARITY = "CrossesSingularity"
    AT_SINGULAR_IVP = "AtSingularIVP"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class WedgeSolution:
    """Free boundaries in q for one set of reduced parameters.

    For positive drift q_star is the start of the curve and q_upper its
    exit; for negative drift the roles swap (q_upper is the start).
    """

    q_star: float
    q_upper: float
    lambda_value: float
    curve: SolutionCurve
    regime: Regime
    params: DimensionlessParams
    case: Case
    xi_under: float | None = None
    xi_bar: float | None = None

    @property
    def geometry(self) -> QuadraticGeometry:
        return self.curve.geometry

    @property
    def thresholds(self):
        return self.xi_under, self.xi_bar


def lambda_of(r, g, opts: ToleranceOptions = DEFAULT_OPTIONS) -> float:
    """Lambda(r) for the curve started at r."""
    try:
        return integrate_curve(r, g, opts).lambda_total
    except HitZero as exc:
        raise IllPosedCurve(f"curve from r = {r!r} hit zero at q = {exc.q!r}") from exc


def sigma_of(r, g, opts=DEFAULT_OPTIONS) -> float:
    return math.expm1(lambda_of(r, g, opts))


def lambda_by_quadrature(curve: SolutionCurve, form="ratio"):
    """Lambda recomputed by adaptive quadrature on the dense curve.

    ``form="ratio"`` integrates (n - m)/(q(1-q)(l - n)); ``"difference"``
    integrates k [1/(l - n) - 1/(l - m)].  Used as a cross-check on the
    value carried along by the integrator.
    """
    g = curve.geometry
    lo, hi = sorted((curve.r, curve.zeta))
    if hi <= lo:
        return 0.0

    if form == "ratio":
        c2 = singular_expansion(g).c2 if curve.crossed_singularity else 0.0

        def f(q):
            if c2 and abs(q - 1.0) < 1e-5:
                # 0/0 next to the singular point; the limit there is c2
                return c2
            e = float(curve.eta_at(q))
            s = q * (1.0 - q)
            if e == 0.0:
                return 0.0
            return e / (s * (s - e))
    elif form == "difference":
        def f(q):
            n = float(curve.n_at(q))
            return g.k * (1.0 / (g.ell(q) - n) - 1.0 / (g.ell(q) - g.m(q)))
    else:
        raise ValueError(f"unknown form {form!r}")

    pts = [p for p in (1.0,) if lo < p < hi]
    val, _ = integrate.quad(f, lo, hi, points=pts or None, limit=400,
                            epsabs=1e-12, epsrel=1e-9)
    return val


def _ordering(qm, qp, pm, pp):
    if pm < 0 < qm < qp < 1 < pp:
        return "interior"
    if pm < 0 < 1 < pp < qm < qp:
        return "beyond"
    if qm < qp < pm < 0 < pp:
        return "negative"
    return None


def closed_form_lambda_under(g: QuadraticGeometry) -> float:
    """Lower threshold Lambda = int_{q_-}^{q_+} |m| / (q(1-q) l) dq in closed form."""
    if g.q_minus is None or g.q_minus == g.q_plus:
        raise RootsNotReal("m has no distinct real roots")
    qm, qp = g.q_minus, g.q_plus
    if g.p_minus is None:
        raise OrderingUnsupported("l has no real roots")
    pm, pp = g.p_minus, g.p_plus
    if _ordering(qm, qp, pm, pp) is None:
        raise OrderingUnsupported(
            f"root ordering q=({qm!r}, {qp!r}), p=({pm!r}, {pp!r}) is not covered"
        )
    w = g.R / (1.0 - g.R)
    a_plus = (pp - qp) * (pp - qm) / (pp * (pp - 1.0) * (pp - pm))
    a_minus = (qp - pm) * (qm - pm) / (pm * (1.0 - pm) * (pp - pm))
    return (
        -math.log(qp / qm)
        - math.log((1.0 - qm) / (1.0 - qp))
        + w * a_plus * math.log((pp - qm) / (pp - qp))
        - w * a_minus * math.log((qp - pm) / (qm - pm))
    )


def lambda_at_singular(g, opts=DEFAULT_OPTIONS) -> float:
    """Lambda(1) along the unique branch through (1, m(1))."""
    label = classify(g)
    if not (isinstance(label, Case) and label.singular):
        raise NotSingularCase(f"case {label} has no singular crossing")
    return lambda_one(g, opts)[1]


def thresholds(g, opts=DEFAULT_OPTIONS):
    """(xi_under, xi_bar); each is None when it does not apply."""
    label = classify(g)
    if isinstance(label, Boundary):
        raise BoundaryCase(label.which)
    wp = wellposedness(g)
    under = wp.xi_threshold if wp.kind is WellPosednessKind.CONDITIONAL else None
    bar = math.expm1(lambda_at_singular(g, opts)) if label.singular else None
    return under, bar


def _bracket(g, label):
    """Range (0, t_hi) of t = |r| holding the start, and Lambda at t_hi."""
    if label.leftward:
        if g.mM < 0 and g.R < 1:
            return abs(g.q_plus), closed_form_lambda_under(g)
        return abs(g.qM), 0.0
    if g.mM < 0 and g.R < 1:
        return g.q_minus, closed_form_lambda_under(g)
    return g.qM, 0.0


class _Evaluator:
    """Lambda as a decreasing function of t = |r|, with memoised curves."""

    def __init__(self, g, sign, opts):
        self.g, self.sign, self.opts = g, sign, opts
        self.cache = {}

    def curve(self, t):
        if t not in self.cache:
            try:
                self.cache[t] = integrate_curve(self.sign * t, self.g, self.opts)
            except HitZero:
                # only happens next to the root of m, where Lambda is near
                # its lower limit: treat as "start too far out"
                self.cache[t] = None
        return self.cache[t]

    def lam(self, t):
        c = self.curve(t)
        return -math.inf if c is None else c.lambda_total


def _bisect(ev, target, a, b):
    """t in (a, b) with Lambda(t) = target; Lambda(a) > target > Lambda(b).

    ``a = 0`` stands for the origin where Lambda is infinite: the bracket is
    first pulled in geometrically.  Midpoints are geometric while the
    bracket spans more than a factor 4.
    """
    if a == 0.0:
        t = 0.5 * b
        shrink = 0.125
        while ev.lam(t) < target:
            if t <= R_FLOOR:
                raise StepFailure(
                    f"Lambda = {target!r} needs |r| below {R_FLOOR!r}; cost too large"
                )
            b = t
            # Lambda grows like log(1/r), so square the factor each time
            t = max(t * shrink, R_FLOOR)
            shrink = max(shrink * shrink, 1e-30)
        a = t
    for _ in range(MAX_BISECTIONS):
        mid = math.sqrt(a * b) if b > 4.0 * a else 0.5 * (a + b)
        if not a < mid < b:
            break
        if ev.lam(mid) > target:
            a = mid
        else:
            b = mid
        if b - a <= 1e-15 * b:
            break
    # keep the end with a valid curve closest to the target
    ca, cb = ev.curve(a), ev.curve(b)
    if cb is None:
        return a
    if ca is None:
        return b
    return a if abs(ca.lambda_total - target) <= abs(cb.lambda_total - target) else b


def solve_boundaries(d: DimensionlessParams, opts: ToleranceOptions = DEFAULT_OPTIONS) -> WedgeSolution:
    """Free boundaries (q_*, q^*) for round-trip cost d.xi."""
    g = geometry(d)
    label = classify(g)
    if isinstance(label, Boundary):
        raise BoundaryCase(label.which)
    wp = wellposedness(g)
    if wp.kind is WellPosednessKind.ILL_POSED:
        raise IllPosedAlways(f"case {label} is ill-posed for every transaction cost")
    xi = float(d.xi)
    xi_under = wp.xi_threshold if wp.kind is WellPosednessKind.CONDITIONAL else None
    if xi_under is not None and xi <= xi_under:
        raise IllPosedForThisXi(xi, xi_under)
    target = math.log1p(xi)
    sign = -1.0 if label.leftward else 1.0
    ev = _Evaluator(g, sign, opts)
    t_hi, lam_hi = _bracket(g, label)
    t_hi_in = t_hi * (1.0 - ENDPOINT_NUDGE)

    xi_bar = None
    regime = Regime.INTERIOR
    if label.singular:
        lam1 = lambda_at_singular(g, opts)
        xi_bar = math.expm1(lam1)
        if abs(target - lam1) <= SINGULAR_BAND * lam1:
            t = 1.0
            regime = Regime.AT_SINGULAR_IVP
        elif target > lam1:
            t = _bisect(ev, target, 0.0, 1.0 - ENDPOINT_NUDGE)
            regime = Regime.CROSSES_SINGULARITY
        else:
            t = _bisect(ev, target, 1.0 + ENDPOINT_NUDGE, t_hi_in)
    else:
        if target <= lam_hi:
            raise IllPosedForThisXi(xi, math.expm1(lam_hi))
        t = _bisect(ev, target, 0.0, t_hi_in)

    curve = ev.curve(t)
    if curve is None:
        raise StepFailure(f"no admissible curve at the solved start r = {sign * t!r}")
    r = sign * t
    if label.leftward:
        q_star, q_upper = curve.zeta, r
    else:
        q_star, q_upper = r, curve.zeta
    return WedgeSolution(
        q_star=float(q_star), q_upper=float(q_upper), lambda_value=curve.lambda_total,
        curve=curve, regime=regime, params=d, case=label, xi_under=xi_under, xi_bar=xi_bar,
    )


def lambda_grid(g, rs, opts=DEFAULT_OPTIONS):
    """Lambda on an array of starts; NaN where the curve hits zero."""
    out = np.empty(len(rs))
    for i, r in enumerate(rs):
        try:
            out[i] = lambda_of(float(r), g, opts)
        except IllPosedCurve:
            out[i] = np.nan
    return out
