"""Candidate curves n_r: launch, adaptive integration, exit point, singular crossing.

Curves are integrated in the shifted variable

    eta = (n - m(q)) / k,    k = (delta^2/2)(1-R),

so that l(q) - n = k (q(1-q) - eta) and n re-meets m exactly when eta
returns to zero.  Lambda is carried along as a second state component,
which makes the boundary-condition integral a by-product of the solve.

Near q = 1 the equation for eta has an irregular singular point.  Every
solution arriving from the left is drawn onto one centre manifold and
leaves along it, so the crossing is done with a Taylor series of that
manifold (computed by recursion to arbitrary order) on a small window
[1 - x_s, 1 + x_s] and ordinary integration outside it.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _backend
from ._fallback import ST_END, ST_EVENT, ST_FAIL, ST_MAXSTEPS, ST_ZERO
from .errors import (
    DegenerateStart,
    HitZero,
    NotSingularCase,
    SingularDenominator,
    StepFailure,
)
from .params import Case, QuadraticGeometry, classify

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)
WINDOW_SAMPLES = 24


@dataclass(frozen=True)
class ToleranceOptions:
    """Numerical knobs for curve integration.

    singular_offset is the smallest half-width of the singular window; the
    window is widened (up to max_switch_offset) when the stiffness near
    q = 1 would otherwise need many explicit steps.
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    event_tol: float = 1e-12
    max_steps: int = 2_000_000
    singular_offset: float = 1e-4
    max_switch_offset: float = 1e-2
    series_order: int = 16
    start_floor: float = 1e-6
    start_rel: float = 1e-4

    def tightened(self, factor=0.5):
        return ToleranceOptions(
            rtol=self.rtol * factor, atol=self.atol * factor, event_tol=self.event_tol,
            max_steps=self.max_steps, singular_offset=self.singular_offset,
            max_switch_offset=self.max_switch_offset, series_order=self.series_order,
            start_floor=self.start_floor, start_rel=self.start_rel,
        )


DEFAULT_OPTIONS = ToleranceOptions()


def _coeffs(g):
    return g.m1, g.m2, g.k, 2.0 / (g.delta2 * g.R)


def direction_of(g) -> int:
    """+1 when curves run to the right (positive drift), -1 otherwise."""
    return 1 if g.eps > 0 else -1


def ode_rhs(q, n, g: QuadraticGeometry):
    """Slope O(q, n) = ((1-R)/R) (n/(1-q)) (m(q)-n)/(l(q)-n)."""
    if q == 1.0:
        raise SingularDenominator("q = 1 is the singular point")
    m = g.m(q)
    den = g.ell(q) - n
    if abs(den) <= 1e-14 * max(1.0, abs(n)):
        raise SingularDenominator(f"l(q) - n vanishes at q = {q!r}")
    return (1.0 - g.R) / g.R * n / (1.0 - q) * (m - n) / den


def second_derivative_at_start(r, g):
    """n''(r) for the curve started on m with zero slope."""
    # l - m = k r (1 - r), written out to avoid cancellation near 0 and 1
    return (1.0 - g.R) / g.R * g.m(r) * g.dm(r) / ((1.0 - r) * g.k * r * (1.0 - r))


def detach_step(r, g, opts=DEFAULT_OPTIONS):
    """Length of the Taylor launch off (r, m(r)).

    Near q = 0 the gap l - m shrinks like q, n'' grows like 1/q and the
    admissible band is only O(q) wide, so the step is also capped by |r|.
    Near q = 1, n'' grows like 1/(1-r)^2 and the cap scales as |1-r|^1.5.
    """
    dist = abs(g.qM - r)
    s = min(max(opts.start_floor, opts.start_rel * dist), 0.25 * dist)
    kk = min(1.0, abs(g.k))
    return min(s, 1e-3 * abs(r) * kk, 1e-2 * abs(1.0 - r) ** 1.5 * kk)


def _is_merton_point(r, g):
    return abs(r - g.qM) <= 1e-14 * max(1.0, abs(g.qM))


def start_expansion(r, g, s=None, opts=DEFAULT_OPTIONS):
    """First off-boundary point (q1, n1) by a second-order Taylor launch.

    The step is taken in the integration direction (to the right for
    positive drift).  ``s`` overrides the detachment step.
    """
    if _is_merton_point(r, g):
        raise DegenerateStart(f"start r = {r!r} is the turning point q_M")
    if r == 1.0:
        raise SingularDenominator("cannot launch at q = 1")
    if s is None:
        s = detach_step(r, g, opts)
    if s == 0:
        return r, g.m(r)
    q1 = r + direction_of(g) * s
    return q1, g.m(r) + 0.5 * second_derivative_at_start(r, g) * s * s


def _integrand(q, eta):
    """Lambda integrand in eta form; positive on admissible curves."""
    s = q * (1.0 - q)
    return eta / (s * (s - eta))


# ---------------------------------------------------------------------------
# singular point


@dataclass(frozen=True)
class SingularExpansion:
    """Centre-manifold expansion eta(x) = sum_j coeffs[j] x^j, x = q - 1.

    c2 and A0, b0 are the leading coefficients; ``x0`` is the half-width of
    the window on which the series replaces integration and
    ``richardson`` the change in (zeta(1), Lambda(1)) when it is halved.
    """

    c2: float
    c3: float
    A0: float
    b0: float
    coeffs: tuple
    x0: float
    richardson: tuple = (0.0, 0.0)

    def eta(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def deta(self, x):
        c = np.asarray(self.coeffs)
        return np.polynomial.polynomial.polyval(x, c[1:] * np.arange(1, len(c)))

    def integrand(self, x):
        """Lambda integrand on the manifold, regular at x = 0."""
        c = np.asarray(self.coeffs)
        e2 = np.polynomial.polynomial.polyval(x, c[2:])
        e1 = x * e2
        return e2 / ((1.0 + x) * (1.0 + x + e1))

    def integral(self, a, b):
        """Signed integral of the manifold integrand from x=a to x=b."""
        if a == b:
            return 0.0
        xs = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
        return float(0.5 * (b - a) * np.dot(_GL_W, self.integrand(xs)))


def manifold_series(g, order=16):
    """Taylor coefficients of the manifold through (1, m(1)) by recursion.

    Writes the eta equation as
    x (x(1+x) + eta) (eta' - b(x)) + cr n eta = 0 and solves for one
    coefficient at a time; the new coefficient enters only via
    cr m(1) c_j, so each order is explicit.
    """
    N = order
    m1v = g.m_at_1
    dm1 = g.dm(1.0)
    cr = 2.0 / (g.delta2 * g.R)
    A0 = cr * m1v
    k = g.k
    mpoly = np.zeros(N + 1)
    mpoly[:3] = [m1v, dm1, g.m2]
    b = np.zeros(N + 1)
    b[:2] = [-dm1 / k, -2.0 * g.m2 / k]
    xx = np.zeros(N + 1)
    xx[1:3] = 1.0  # x(1+x)
    xpoly = np.zeros(N + 1)
    xpoly[1] = 1.0

    def mul(a, c):
        return np.convolve(a, c)[: N + 1]

    c = np.zeros(N + 1)
    for j in range(2, N + 1):
        dc = np.zeros(N + 1)
        dc[:-1] = c[1:] * np.arange(1, N + 1)
        F = mul(xpoly, mul(xx + c, dc - b)) + cr * mul(mpoly + k * c, c)
        c[j] = -F[j] / A0
    return c, A0, b[0]


def _switch_offset(c, A0, opts):
    xs = min(opts.max_switch_offset, max(opts.singular_offset, A0 / 3000.0))
    N = len(c) - 1
    while xs > opts.singular_offset:
        tail = max(abs(c[j]) * xs**j for j in range(N - 2, N + 1))
        if tail <= 1e-17 * abs(c[2]) * xs * xs:
            break
        xs *= 0.5
    return max(xs, opts.singular_offset)


def _require_singular(g):
    if not (g.eps > 0 and g.qM > 1 and g.m_at_1 > 0 and (1 - g.R) * g.dm(1.0) < 0):
        raise NotSingularCase("singular continuation needs q_M > 1, m(1) > 0, (1-R)m'(1) < 0")


@functools.lru_cache(maxsize=256)
def _expansion(g, opts):
    _require_singular(g)
    c, A0, b0 = manifold_series(g, opts.series_order)
    xs = _switch_offset(c, A0, opts)
    return SingularExpansion(
        c2=float(c[2]), c3=float(c[3]), A0=A0, b0=b0, coeffs=tuple(float(v) for v in c), x0=xs
    )


def continue_through_singularity(g, opts=DEFAULT_OPTIONS):
    """Restart point beyond q = 1 and the expansion used to reach it.

    Returns ((q_restart, n_restart), SingularExpansion) with the
    Richardson discrepancy of the resulting (zeta(1), Lambda(1)) filled in.
    """
    branch = _right_branch(g, opts)
    return (branch.q_restart, branch.n_restart), branch.expansion


def _window(exp, a, b, count=WINDOW_SAMPLES):
    """Chebyshev-spaced x samples on [a, b] excluding a, including b."""
    k = np.arange(1, count + 1)
    return a + (b - a) * 0.5 * (1.0 - np.cos(np.pi * k / count))


def _cumulative_series(exp, xs, x_from):
    out = np.empty_like(xs)
    acc = 0.0
    prev = x_from
    for i, x in enumerate(xs):
        acc += exp.integral(prev, x)
        out[i] = acc
        prev = x
    return out


@dataclass(frozen=True)
class _Branch:
    """The unique curve leaving (1, m(1)), stored from q = 1 onward."""

    q: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    deta: np.ndarray = field(repr=False)
    zeta: float = 0.0
    lam_total: float = 0.0
    q_restart: float = 0.0
    n_restart: float = 0.0
    expansion: SingularExpansion = None


def _integrate_branch(g, opts, exp, xs):
    m1, m2, k, cr = _coeffs(g)
    eta0 = float(exp.eta(xs))
    lam0 = exp.integral(0.0, xs)
    q_end = 2.0 * g.qM + 1.0
    status, q, e, l, d, qstop = _backend.integrate_eta(
        1.0 + xs, eta0, lam0, q_end, 1.0, m1, m2, k, cr,
        opts.rtol, opts.atol, opts.event_tol, opts.max_steps,
    )
    if status != ST_EVENT:
        _raise_status(status, qstop, "singular branch")
    return q, e, l, d, eta0


@functools.lru_cache(maxsize=256)
def _right_branch(g, opts):
    exp = _expansion(g, opts)
    xs = exp.x0
    q, e, l, d, eta0 = _integrate_branch(g, opts, exp, xs)
    # Richardson-style check with half the window
    q2, _, l2, _, _ = _integrate_branch(g, opts, exp, 0.5 * xs)
    rich = (float(q2[-1] - q[-1]), float(l2[-1] - l[-1]))
    exp = SingularExpansion(exp.c2, exp.c3, exp.A0, exp.b0, exp.coeffs, xs, rich)
    xw = _window(exp, 0.0, xs)[:-1]
    qw = np.concatenate([[1.0], 1.0 + xw])
    ew = np.concatenate([[0.0], exp.eta(xw)])
    lw = np.concatenate([[0.0], _cumulative_series(exp, xw, 0.0)])
    dw = np.concatenate([[0.0], exp.deta(xw)])
    return _Branch(
        q=np.concatenate([qw, q]), eta=np.concatenate([ew, e]),
        lam=np.concatenate([lw, l]), deta=np.concatenate([dw, d]),
        zeta=float(q[-1]), lam_total=float(l[-1]),
        q_restart=1.0 + xs, n_restart=g.m(1.0 + xs) + g.k * eta0, expansion=exp,
    )


def singular_expansion(g, opts=DEFAULT_OPTIONS) -> SingularExpansion:
    return _right_branch(g, opts).expansion


def lambda_one(g, opts=DEFAULT_OPTIONS):
    """(zeta(1), Lambda(1)) along the branch through the singular point."""
    b = _right_branch(g, opts)
    return b.zeta, b.lam_total


# ---------------------------------------------------------------------------
# curves


class SolutionCurve:
    """One candidate n_r with its exit point zeta(r).

    Arrays are stored in integration order; ``lam`` is the running value of
    the Lambda integral from r, so ``lambda_total`` is Lambda(r).
    """

    def __init__(self, r, g, q, eta, lam, deta, zeta, direction,
                 crossed_singularity=False, hit_zero=False):
        self.r = float(r)
        self.geometry = g
        self.q = np.asarray(q, dtype=float)
        self.eta = np.asarray(eta, dtype=float)
        self.lam = np.asarray(lam, dtype=float)
        self.deta = np.asarray(deta, dtype=float)
        self.zeta = float(zeta)
        self.direction = int(direction)
        self.crossed_singularity = bool(crossed_singularity)
        self.hit_zero = bool(hit_zero)
        self._interp = None

    @property
    def lambda_total(self):
        return float(self.lam[-1])

    @property
    def degenerate(self):
        return self.q.size == 1

    @property
    def n(self):
        return self.geometry.m(self.q) + self.geometry.k * self.eta

    @property
    def samples(self):
        """(q, n) pairs in integration order."""
        return np.column_stack([self.q, self.n])

    def _build(self):
        q, e, lam, de = self.q, self.eta, self.lam, self.deta
        if self.direction < 0:
            q, e, lam, de = q[::-1], e[::-1], lam[::-1], de[::-1]
        keep = np.concatenate([[True], np.diff(q) > 0])
        q, e, lam, de = q[keep], e[keep], lam[keep], de[keep]
        s = q * (1.0 - q)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = e / (s * (s - e))
        # limits where the ratio is 0/0: on m (eta = 0) away from q = 1 the
        # integrand vanishes, at q = 1 it tends to c2
        at_one = q == 1.0
        f = np.where(e == 0.0, 0.0, f)
        if at_one.any():
            f[at_one] = singular_expansion(self.geometry).c2
        dl = self.direction * f
        self._interp = (
            CubicHermiteSpline(q, e, de, extrapolate=False),
            CubicHermiteSpline(q, lam, dl, extrapolate=False),
        )

    def eta_at(self, q):
        if self._interp is None:
            self._build()
        return self._interp[0](q)

    def lam_at(self, q):
        """Lambda accumulated from r up to q."""
        if self._interp is None:
            self._build()
        return self._interp[1](q)

    def n_at(self, q):
        return self.geometry.m(q) + self.geometry.k * self.eta_at(q)

    def __repr__(self):
        return (f"SolutionCurve(r={self.r!r}, zeta={self.zeta!r}, "
                f"Lambda={self.lambda_total!r}, nodes={self.q.size})")


def _raise_status(status, q, what):
    if status == ST_ZERO:
        raise HitZero(q)
    if status == ST_FAIL:
        raise StepFailure(f"{what}: step size underflow near q = {q!r}")
    if status == ST_MAXSTEPS:
        raise StepFailure(f"{what}: step budget exhausted near q = {q!r}")
    if status == ST_END:
        raise StepFailure(f"{what}: reached q = {q!r} without re-meeting m")
    raise StepFailure(f"{what}: unexpected status {status}")


def _launch(r, g, opts):
    d = direction_of(g)
    s = detach_step(r, g, opts)
    q1 = r + d * s
    # (n - m)/k at q1 from the Taylor launch, without subtracting O(1) values
    eta1 = (0.5 * second_derivative_at_start(r, g) * s * s
            - g.dm(r) * d * s - g.m2 * s * s) / g.k
    lam1 = 0.5 * s * float(_integrand(q1, eta1))
    return q1, eta1, lam1, d


def _plain(r, g, opts, q_end):
    m1, m2, k, cr = _coeffs(g)
    q1, eta1, lam1, d = _launch(r, g, opts)
    status, q, e, l, de, qstop = _backend.integrate_eta(
        q1, eta1, lam1, q_end, float(d), m1, m2, k, cr,
        opts.rtol, opts.atol, opts.event_tol, opts.max_steps,
    )
    q = np.concatenate([[r], q])
    e = np.concatenate([[0.0], e])
    l = np.concatenate([[0.0], l])
    de = np.concatenate([[-g.dm(r) / g.k], de])
    return status, q, e, l, de, qstop


def _degenerate(r, g):
    return SolutionCurve(r, g, [r], [0.0], [0.0], [0.0], r, direction_of(g))


def integrate_curve(r, g: QuadraticGeometry, opts: ToleranceOptions = DEFAULT_OPTIONS):
    """Integrate n_r from (r, m(r)) to its exit point zeta(r).

    Raises HitZero (with the partial curve attached as ``.curve``) when
    n reaches zero first, and StepFailure when the tolerance cannot be met.
    """
    r = float(r)
    if _is_merton_point(r, g):
        return _degenerate(r, g)
    if g.R < 1 and g.m(r) <= 0.0:
        # n starts at m(r) <= 0: already at or below zero
        raise HitZero(r)
    label = classify(g)
    singular = isinstance(label, Case) and label.singular
    d = direction_of(g)
    if singular:
        return _curve_singular(r, g, opts)
    if d > 0:
        q_end = 1.0 - 1e-12 if g.qM < 1 else 2.0 * g.qM + 1.0
    else:
        q_end = 2.0 * g.qM - 1.0
    status, q, e, l, de, qstop = _plain(r, g, opts, q_end)
    if status == ST_EVENT:
        return SolutionCurve(r, g, q, e, l, de, qstop, d)
    if status == ST_ZERO:
        err = HitZero(qstop)
        err.curve = SolutionCurve(r, g, q, e, l, de, qstop, d, hit_zero=True)
        raise err
    _raise_status(status, qstop, f"curve from r = {r!r}")


def _curve_singular(r, g, opts):
    branch = _right_branch(g, opts)
    exp = branch.expansion
    x = r - 1.0
    small = 0.5 * opts.singular_offset
    if abs(x) <= small:
        # start inside the window: manifold plus the decayed transient
        lam_r = branch.lam_total + exp.integral(x, 0.0) - float(exp.eta(x)) / exp.A0
        offset = lam_r - branch.lam_total
        if x < 0:
            xw = _window(exp, x, 0.0)[:-1]
            qw = 1.0 + xw
            ew = exp.eta(xw)
            # branch Lambda is measured from q = 1, so it is negative here
            lw = offset + np.array([exp.integral(0.0, v) for v in xw])
            dw = exp.deta(xw)
            mask = branch.q >= 1.0
        else:
            qw = ew = lw = dw = np.empty(0)
            mask = branch.q > r
        q = np.concatenate([[r], qw, branch.q[mask]])
        e = np.concatenate([[0.0], ew, branch.eta[mask]])
        l = np.concatenate([[0.0], lw, offset + branch.lam[mask]])
        l[-1] = lam_r
        de = np.concatenate([[-g.dm(r) / g.k], dw, branch.deta[mask]])
        return SolutionCurve(r, g, q, e, l, de, branch.zeta, 1, crossed_singularity=x <= 0)
    if x > 0:
        status, q, e, l, de, qstop = _plain(r, g, opts, 2.0 * g.qM + 1.0)
        if status == ST_EVENT:
            return SolutionCurve(r, g, q, e, l, de, qstop, 1)
        if status == ST_ZERO:
            err = HitZero(qstop)
            err.curve = SolutionCurve(r, g, q, e, l, de, qstop, 1, hit_zero=True)
            raise err
        _raise_status(status, qstop, f"curve from r = {r!r}")
    # left of the window: integrate up to 1 - x_end, then follow the manifold
    x_end = min(exp.x0, 0.5 * (1.0 - r))
    status, q, e, l, de, qstop = _plain(r, g, opts, 1.0 - x_end)
    if status == ST_ZERO:
        err = HitZero(qstop)
        err.curve = SolutionCurve(r, g, q, e, l, de, qstop, 1, hit_zero=True)
        raise err
    if status != ST_END:
        if status == ST_EVENT:
            raise StepFailure(f"curve from r = {r!r} re-met m at {qstop!r} before q = 1")
        _raise_status(status, qstop, f"curve from r = {r!r}")
    psi = float(e[-1] - exp.eta(-x_end))
    base = float(l[-1]) + psi / exp.A0
    xw = _window(exp, -x_end, 0.0)[:-1]
    lw = base + np.array([exp.integral(-x_end, v) for v in xw])
    lam_at_one = base + exp.integral(-x_end, 0.0)
    mask = branch.q >= 1.0
    qq = np.concatenate([q, 1.0 + xw, branch.q[mask]])
    ee = np.concatenate([e, exp.eta(xw), branch.eta[mask]])
    ll = np.concatenate([l, lw, lam_at_one + branch.lam[mask]])
    dd = np.concatenate([de, exp.deta(xw), branch.deta[mask]])
    return SolutionCurve(r, g, qq, ee, ll, dd, branch.zeta, 1, crossed_singularity=True)


def zeta(r, g, opts=DEFAULT_OPTIONS):
    """Exit abscissa of the curve started at r."""
    return integrate_curve(r, g, opts).zeta
