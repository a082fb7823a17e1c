"""Wedge boundaries in z, p and wealth coordinates, value function and consumption.

Along the solved curve the running integral Lam(q) (measured from q_*)
fixes the risky-to-cash ratio

    z(q) = e^{Lam(q)} / (1 + lam) * q / (1 - q),

so with c(q) = e^{Lam(q)} / (1 + lam) and D(q) = 1 + q (c - 1) the paper
wealth fraction is p = c q / D and the value coefficient is

    G(p(q)) = n(q)^{-R} D(q)^{R-1}.

These expressions are smooth through q = 1 so Case I needs no special
treatment.  Outside the wedge G follows from projecting onto the nearer
boundary.  V(x, y) = W^{1-R}/(1-R) (R/beta)^R G(p) with W = x + y.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .boundary import Regime, WedgeSolution
from .errors import Insolvent, MertonIllPosed
from .params import DimensionlessParams, geometry

TABLE_NODES = 2048


class Action(str, enum.Enum):
    BUY = "Buy"
    SELL = "Sell"
    NO_TRADE = "NoTrade"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ValuePoint:
    x: float
    y_theta: float
    V: float
    C: float
    action: Action


@dataclass(frozen=True)
class ValueTable:
    """Samples over the wedge in increasing q."""

    q: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    n: np.ndarray = field(repr=False)
    m: np.ndarray = field(repr=False)
    ell: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    dG: np.ndarray = field(repr=False)
    coef: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class PolicySpec:
    q_star: float
    q_upper: float
    z_star: float
    z_upper: float
    p_star: float
    p_upper: float
    n_star: float
    n_upper: float
    A_star: float
    A_upper: float
    G_star: float
    G_upper: float
    lam: float
    gamma: float
    beta: float
    R: float
    regime: Regime
    table: ValueTable = field(repr=False)
    _G: CubicHermiteSpline = field(repr=False, compare=False)
    _coef: object = field(repr=False, compare=False)

    @property
    def log_z_ratio(self):
        """ln(z^*/z_*) from the boundary fractions (signs cancel in Case B)."""
        return math.log(abs(self.z_upper) / abs(self.z_star))

    def action(self, p):
        if p < self.p_star:
            return Action.BUY
        if p > self.p_upper:
            return Action.SELL
        return Action.NO_TRADE

    def G(self, p):
        """Value coefficient G(p) on the whole solvent range."""
        p = np.asarray(p, dtype=float)
        lo = np.minimum(p, self.p_star)
        hi = np.maximum(p, self.p_upper)
        mid = np.clip(p, self.p_star, self.p_upper)
        inner = self._G(mid) if self.p_upper > self.p_star else np.full_like(mid, self.G_star)
        with np.errstate(invalid="ignore", divide="ignore"):
            buy = self.G_star * ((1.0 + self.lam * lo) /
                                 (1.0 + self.lam * self.p_star)) ** (1.0 - self.R)
            sell = self.G_upper * ((1.0 - self.gamma * hi) /
                                   (1.0 - self.gamma * self.p_upper)) ** (1.0 - self.R)
        out = np.where(p < self.p_star, buy, np.where(p > self.p_upper, sell, inner))
        return out if out.ndim else float(out)

    def dG(self, p):
        p = np.asarray(p, dtype=float)
        G = np.asarray(self.G(p))
        mid = np.clip(p, self.p_star, self.p_upper)
        with np.errstate(invalid="ignore", divide="ignore"):
            # from G - p G'/(1-R) = coef^{-R}; more accurate between nodes
            # than differentiating the G spline (p never vanishes on the wedge)
            inner = (1.0 - self.R) * (np.asarray(self.G(mid))
                                      - np.asarray(self._coef(mid)) ** (-self.R)) / mid
            buy = (1.0 - self.R) * self.lam * G / (1.0 + self.lam * p)
            sell = -(1.0 - self.R) * self.gamma * G / (1.0 - self.gamma * p)
        out = np.where(p < self.p_star, buy, np.where(p > self.p_upper, sell, inner))
        return out if out.ndim else float(out)

    def consumption_coefficient(self, p):
        """c/W divided by beta/R, i.e. [G - p G'/(1-R)]^{-1/R}."""
        p = np.asarray(p, dtype=float)
        mid = np.clip(p, self.p_star, self.p_upper)
        inner = self._coef(mid)
        buy = self.n_star * (1.0 + self.lam * p)
        sell = self.n_upper * (1.0 - self.gamma * p)
        out = np.where(p < self.p_star, buy, np.where(p > self.p_upper, sell, inner))
        return out if out.ndim else float(out)

    def coef_grid(self, count=4097):
        """Consumption coefficient on a uniform p grid over the wedge."""
        ps = np.linspace(self.p_star, self.p_upper, count)
        return np.ascontiguousarray(self.consumption_coefficient(ps), dtype=float)


def _chebyshev_nodes(a, b, count):
    k = np.arange(count)
    x = 0.5 * (1.0 - np.cos(np.pi * k / (count - 1)))
    out = a + (b - a) * x
    out[0], out[-1] = a, b
    return out


def _running_lambda(w: WedgeSolution, q):
    """Integral of the Lambda integrand from q_* to q."""
    c = w.curve
    part = np.asarray(c.lam_at(q), dtype=float)
    if c.direction < 0:
        part = c.lambda_total - part
    # endpoints exactly
    part = np.where(q == w.q_star, 0.0, part)
    part = np.where(q == w.q_upper, c.lambda_total, part)
    return part


def build_policy(w: WedgeSolution, d: DimensionlessParams | None = None,
                 nodes: int = TABLE_NODES) -> PolicySpec:
    """Tabulate p(q), G and the consumption rule on the solved wedge."""
    d = w.params if d is None else d
    lam, gamma = d.lam, d.gamma
    g = w.geometry
    R = g.R
    beta = d.original.beta if d.original is not None else 1.0
    qs, qu = w.q_star, w.q_upper
    if qu > qs:
        q = _chebyshev_nodes(qs, qu, nodes)
    else:
        q = np.array([qs])
    lam_part = _running_lambda(w, q)
    n = np.asarray(w.curve.n_at(q), dtype=float)
    n[0], n[-1] = g.m(qs), g.m(qu)
    cq = np.exp(lam_part) / (1.0 + lam)
    D = 1.0 + q * (cq - 1.0)
    p = cq * q / D
    G = n ** (-R) * D ** (R - 1.0)
    dG = (1.0 - R) * G * D * (1.0 - cq) / cq
    coef = n / D
    p_star = qs / (1.0 + lam - lam * qs)
    p_upper = qu / (1.0 - gamma + gamma * qu)
    # pin the tabulated ends to the boundary formulas
    p[0], p[-1] = p_star, p_upper
    n_star, n_upper = float(n[0]), float(n[-1])
    G_star = n_star ** (-R) * (1.0 + lam * p_star) ** (1.0 - R)
    G_upper = n_upper ** (-R) * (1.0 - gamma * p_upper) ** (1.0 - R)
    G[0], G[-1] = G_star, G_upper
    if p.size > 1:
        keep = np.concatenate([[True], np.diff(p) > 0])
        spline = CubicHermiteSpline(p[keep], G[keep], dG[keep])
        coef_spline = CubicHermiteSpline(
            p[keep], coef[keep], np.gradient(coef[keep], p[keep], edge_order=2)
        )
    else:
        spline = None

        def coef_spline(x, _c=float(coef[0])):
            return np.full_like(np.asarray(x, dtype=float), _c)

    table = ValueTable(q=q, p=p, n=n, m=g.m(q), ell=g.ell(q), G=G, dG=dG, coef=coef)
    return PolicySpec(
        q_star=qs, q_upper=qu,
        z_star=qs / ((1.0 + lam) * (1.0 - qs)) if qs != 1.0 else math.inf,
        z_upper=qu / ((1.0 - gamma) * (1.0 - qu)) if qu != 1.0 else math.inf,
        p_star=p_star, p_upper=p_upper,
        n_star=n_star, n_upper=n_upper,
        A_star=n_star ** (-R), A_upper=n_upper ** (-R),
        G_star=G_star, G_upper=G_upper,
        lam=lam, gamma=gamma, beta=beta, R=R, regime=w.regime,
        table=table, _G=spline, _coef=coef_spline,
    )


def solvency(x, y_theta, lam, gamma):
    """Liquidation value x + (1-gamma) y^+ - (1+lam) y^-."""
    return x + (1.0 - gamma) * max(y_theta, 0.0) - (1.0 + lam) * max(-y_theta, 0.0)


def value_at(spec: PolicySpec, x, y_theta) -> ValuePoint:
    """Value and optimal consumption rate at cash x, risky holding y_theta (t = 0)."""
    x, y = float(x), float(y_theta)
    if not solvency(x, y, spec.lam, spec.gamma) > 0.0:
        raise Insolvent(f"(x, y_theta) = ({x!r}, {y!r}) is not strictly solvent")
    W = x + y
    p = y / W
    R, beta = spec.R, spec.beta
    G = spec.G(p)
    V = W ** (1.0 - R) / (1.0 - R) * (R / beta) ** R * G
    C = beta / R * W * spec.consumption_coefficient(p)
    return ValuePoint(x=x, y_theta=y, V=float(V), C=float(C), action=spec.action(p))


def discount(beta, t):
    """Multiplier e^{-beta t} turning the t = 0 value into the value at time t."""
    return math.exp(-beta * t)


def merton_reference(d):
    """(q_M, m_M^{-R}): frictionless target fraction and value coefficient."""
    g = geometry(d)
    if g.mM <= 0.0:
        raise MertonIllPosed(f"m(q_M) = {g.mM!r} <= 0: frictionless value is infinite")
    return g.qM, g.mM ** (-g.R)


def merton_value(d, x, y_theta):
    """Frictionless value at paper wealth x + y_theta."""
    _, coef = merton_reference(d)
    R = d.R
    beta = d.original.beta if d.original is not None else 1.0
    W = float(x) + float(y_theta)
    return W ** (1.0 - R) / (1.0 - R) * (R / beta) ** R * coef
