"""Parameter sweeps, monotonicity verdicts and the classical wedge bounds."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .boundary import solve_boundaries
from .errors import BoundaryCase, IllPosedAlways, IllPosedForThisXi, WedgeError
from .ode import DEFAULT_OPTIONS
from .params import Boundary, classify, dimensionless, geometry, wellposedness
from .policy import build_policy

TIE_TOL = 1e-9


def worker_count():
    """Pool size: WEDGE_THREADS when set, else the CPU count."""
    env = os.environ.get("WEDGE_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _pmap(fn, items):
    items = list(items)
    workers = min(worker_count(), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class SweepRow:
    value: float
    status: str  # "ok" or the marker of why there is no solution
    case: str = ""
    wellposedness: str = ""
    q_star: float = math.nan
    q_upper: float = math.nan
    p_star: float = math.nan
    p_upper: float = math.nan
    z_star: float = math.nan
    z_upper: float = math.nan
    Lambda: float = math.nan
    regime: str = ""
    message: str = ""

    @property
    def ok(self):
        return self.status == "ok"


@dataclass(frozen=True)
class SweepResult:
    axis: str
    grid: tuple
    rows: tuple
    notes: tuple = field(default_factory=tuple)

    def column(self, name):
        return np.array([getattr(r, name) if r.ok else math.nan for r in self.rows])


def _solve_row(value, d, opts):
    try:
        label = classify(d)
        if isinstance(label, Boundary):
            raise BoundaryCase(label.which)
        wp = str(wellposedness(d))
        w = solve_boundaries(d, opts)
        spec = build_policy(w, d, nodes=64)
    except BoundaryCase as exc:
        return SweepRow(value=value, status=f"Boundary({exc.which})", message=str(exc))
    except IllPosedForThisXi as exc:
        return SweepRow(value=value, status="IllPosedForThisXi", case=str(label),
                        wellposedness=wp, message=str(exc))
    except IllPosedAlways as exc:
        return SweepRow(value=value, status="IllPosedAlways", case=str(label),
                        wellposedness="IllPosed", message=str(exc))
    except WedgeError as exc:
        return SweepRow(value=value, status=type(exc).__name__, message=str(exc))
    return SweepRow(
        value=value, status="ok", case=str(w.case), wellposedness=wp,
        q_star=w.q_star, q_upper=w.q_upper, p_star=spec.p_star, p_upper=spec.p_upper,
        z_star=spec.z_star, z_upper=spec.z_upper, Lambda=w.lambda_value, regime=str(w.regime),
    )


def _beta(d):
    return d.original.beta if d.original is not None else 1.0


def sweep_xi(d, grid, gamma=0.0, opts=DEFAULT_OPTIONS) -> SweepResult:
    """Re-solve at each round-trip cost in ``grid`` with (eps, delta, R) fixed.

    Costs are split with sale cost ``gamma`` held fixed (purchase-only by
    default); the q-boundaries depend on xi alone.
    """
    grid = tuple(float(x) for x in grid)

    def one(xi):
        try:
            dd = dimensionless(d.eps, d.delta, d.R, xi=xi, gamma=gamma, beta=_beta(d))
        except WedgeError as exc:
            return SweepRow(value=xi, status=type(exc).__name__, message=str(exc))
        return _solve_row(xi, dd, opts)

    rows = tuple(_pmap(one, grid))
    return SweepResult(axis="xi", grid=grid, rows=rows, notes=_xi_notes(d, rows))


def _xi_notes(d, rows):
    notes = []
    g = geometry(d)
    label = classify(g)
    if isinstance(label, Boundary):
        return ()
    ok = [r for r in rows if r.ok]
    if d.eps > 0 and ok:
        v = monotone([r.q_upper for r in ok], increasing=True)
        notes.append(f"q_upper non-decreasing in xi: {v}")
        v = monotone([r.q_star for r in ok], increasing=False)
        notes.append(f"q_star non-increasing in xi: {v}")
    regimes = sorted({r.regime for r in ok})
    if regimes:
        notes.append("regimes seen: " + ", ".join(regimes))
    return tuple(notes)


def sweep_drift(d, grid, opts=DEFAULT_OPTIONS) -> SweepResult:
    """Re-solve at each drift eps in ``grid`` with delta, R and the costs fixed."""
    grid = tuple(float(x) for x in grid)
    lam, gamma = d.lam, d.gamma

    def one(eps):
        try:
            dd = dimensionless(eps, d.delta, d.R, lam=lam, gamma=gamma, beta=_beta(d))
        except WedgeError as exc:
            return SweepRow(value=eps, status=type(exc).__name__, message=str(exc))
        return _solve_row(eps, dd, opts)

    rows = tuple(_pmap(one, grid))
    ok = [r for r in rows if r.ok]
    notes = ()
    if ok:
        notes = (
            f"p_star increasing in eps: {monotone([r.p_star for r in ok], strict=True)}",
            f"p_upper increasing in eps: {monotone([r.p_upper for r in ok], strict=True)}",
        )
    return SweepResult(axis="eps", grid=grid, rows=rows, notes=notes)


@dataclass(frozen=True)
class Verdict:
    """Three-valued monotonicity outcome."""

    kind: str  # "monotone", "violated", "inconclusive"
    index: int | None = None

    def __bool__(self):
        return self.kind == "monotone"

    def __str__(self):
        return self.kind if self.index is None else f"{self.kind} at index {self.index}"


def monotone(values, increasing=True, strict=False, tol=TIE_TOL) -> Verdict:
    """Check a sequence for (non-)decreasing order.

    A step against the claimed direction beyond ``tol`` is a violation; for
    strict claims a step smaller than ``tol`` in magnitude is inconclusive.
    """
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size < 2:
        return Verdict("inconclusive")
    diffs = np.diff(v) if increasing else -np.diff(v)
    bad = np.nonzero(diffs < -tol)[0]
    if bad.size:
        return Verdict("violated", int(bad[0]) + 1)
    if strict:
        ties = np.nonzero(np.abs(diffs) <= tol)[0]
        if ties.size:
            return Verdict("inconclusive", int(ties[0]) + 1)
    return Verdict("monotone")


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    relation: str  # "<" or ">"
    applicable: bool

    @property
    def margin(self):
        """Positive when the inequality holds."""
        return self.rhs - self.lhs if self.relation == "<" else self.lhs - self.rhs

    @property
    def passed(self):
        return (not self.applicable) or self.margin > 0


def check_bounds(w, spec, d=None):
    """Evaluate the classical bounds on the wedge for positive drift.

    Returns a list of :class:`BoundCheck`; entries whose precondition fails
    are marked not applicable.
    """
    d = w.params if d is None else d
    eps, R = d.eps, d.R
    d2r = d.delta ** 2 * R
    lam, gamma = d.lam, d.gamma
    qM = eps / d2r
    ps, pu = spec.p_star, spec.p_upper
    qu = w.q_upper
    pos = eps > 0
    out = [
        BoundCheck("q_upper < min(2 q_M, 1)", qu, min(2.0 * qM, 1.0), "<", pos and qM < 1),
        BoundCheck("q_upper < 2 q_M - 1", qu, 2.0 * qM - 1.0, "<", pos and qM > 1),
        BoundCheck("p_upper < eps / ((1-gamma) d2R / 2 + gamma eps)", pu,
                   eps / (0.5 * (1.0 - gamma) * d2r + gamma * eps), "<", pos),
        BoundCheck("p_upper < (2 eps - d2R) / ((1 - 2 gamma) d2R + 2 gamma eps)", pu,
                   (2.0 * eps - d2r) / ((1.0 - 2.0 * gamma) * d2r + 2.0 * gamma * eps), "<",
                   pos and qM > 1),
        BoundCheck("p_upper > eps / ((1-gamma) d2R + gamma eps)", pu,
                   eps / ((1.0 - gamma) * d2r + gamma * eps), ">", pos),
        BoundCheck("p_star > 0", ps, 0.0, ">", pos),
    ]
    cond = pos and (lam == 0 or eps < d2r * (1.0 + lam) / lam)
    rhs = eps / ((1.0 + lam) * d2r - lam * eps) if cond else math.nan
    out.append(BoundCheck("p_star < eps / ((1+lam) d2R - lam eps)", ps, rhs, "<", cond))
    return out
