"""Monte Carlo check of the value function under the wedge policy.

Risky wealth moves by exact log-normal increments, cash pays for
consumption at the tabulated rate, and whenever the paper-wealth fraction
leaves [p_*, p^*] the minimal trade back to the violated boundary is
made (projection).  Discounted utility is accumulated by the trapezoid
rule and the continuation value e^{-beta T} V(X_T, Y_T) is added at the
horizon.

Every path draws its normals from its own Philox stream spawned from the
master seed, so results do not depend on batch size or worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import ConfigInvalid, Insolvent
from .policy import PolicySpec, solvency, value_at
from .statics import monotone

BATCH = 256


@dataclass(frozen=True)
class SimConfig:
    paths: int = 10_000
    dt: float = 1e-3
    horizon: float = 40.0
    seed: int = 20240607
    x0: float = 0.5
    y0: float = 0.5

    def problems(self):
        out = {}
        if not isinstance(self.paths, (int, np.integer)) or self.paths < 1:
            out["paths"] = "must be an integer >= 1"
        if not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt) and self.dt > 0):
            out["dt"] = "must be > 0"
        elif not (isinstance(self.horizon, (int, float)) and self.horizon >= self.dt):
            out["horizon"] = "must be >= dt"
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2 ** 64:
            out["seed"] = "must be an integer in [0, 2^64)"
        for k in ("x0", "y0"):
            if not (isinstance(getattr(self, k), (int, float)) and math.isfinite(getattr(self, k))):
                out[k] = "must be a finite number"
        return out

    @property
    def steps(self):
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class SimResult:
    mean_utility: float
    std_error: float
    analytic_value: float
    z_score: float
    mean_without_tail: float
    tail_mean: float
    mean_time_buying: float
    mean_time_selling: float
    insolvency_count: int
    first_action: dict
    paths: int
    dt: float
    horizon: float
    seed: int
    backend: str
    per_path: np.ndarray = field(repr=False, compare=False, default=None)

    def summary(self):
        return {
            "mean_utility": self.mean_utility,
            "std_error": self.std_error,
            "analytic_value": self.analytic_value,
            "z_score": self.z_score,
            "mean_without_tail": self.mean_without_tail,
            "tail_mean": self.tail_mean,
            "mean_time_buying": self.mean_time_buying,
            "mean_time_selling": self.mean_time_selling,
            "insolvency_count": self.insolvency_count,
            "first_action": dict(self.first_action),
            "paths": self.paths,
            "dt": self.dt,
            "horizon": self.horizon,
            "seed": self.seed,
            "backend": self.backend,
        }


def _market(d):
    o = d.original
    if o is None:
        raise ConfigInvalid("simulation needs natural-unit parameters (mu, sigma, beta)")
    return o


def _terminal_value(spec: PolicySpec, x, s):
    W = x + s
    p = s / W
    G = np.asarray(spec.G(p), dtype=float)
    R = spec.R
    return W ** (1.0 - R) / (1.0 - R) * (R / spec.beta) ** R * G


def _streams(seed, paths):
    return np.random.SeedSequence(int(seed)).spawn(int(paths))


def _normals(children, steps):
    z = np.empty((len(children), steps))
    for i, ch in enumerate(children):
        z[i] = np.random.Generator(np.random.Philox(ch)).standard_normal(steps)
    return z


def _coarsen(z, factor):
    """Sum groups of ``factor`` fine increments into one coarse normal."""
    if factor == 1:
        return z
    p, n = z.shape
    return z.reshape(p, n // factor, factor).sum(axis=2) / math.sqrt(factor)


def _run(spec, d, cfg, z_source, kernels=None):
    """Shared driver; ``z_source(children)`` returns the normals for a batch."""
    k = _backend if kernels is None else kernels
    o = _market(d)
    coef = spec.coef_grid()
    steps = cfg.steps
    per_path = np.empty(cfg.paths)
    no_tail = np.empty(cfg.paths)
    buy_t = np.empty(cfg.paths)
    sell_t = np.empty(cfg.paths)
    bad_total = 0
    first = np.empty(cfg.paths, dtype=np.int64)
    children = _streams(cfg.seed, cfg.paths)
    disc_T = math.exp(-o.beta * steps * cfg.dt)
    for b0 in range(0, cfg.paths, BATCH):
        ch = children[b0:b0 + BATCH]
        z = np.ascontiguousarray(z_source(ch, steps))
        acc, x, s, tb, ts, bad, fa = k.simulate_batch(
            z, float(cfg.x0), float(cfg.y0), float(cfg.dt), o.beta, o.R, o.mu, o.sigma,
            spec.lam, spec.gamma, spec.p_star, spec.p_upper, coef, spec.p_star, spec.p_upper,
        )
        acc = np.asarray(acc)
        sl = slice(b0, b0 + len(ch))
        no_tail[sl] = acc
        per_path[sl] = acc + disc_T * _terminal_value(spec, np.asarray(x), np.asarray(s))
        buy_t[sl] = tb
        sell_t[sl] = ts
        first[sl] = fa
        bad_total += int(np.sum(bad))
    return per_path, no_tail, buy_t, sell_t, bad_total, first


def _result(spec, cfg, per_path, no_tail, buy_t, sell_t, bad, first, analytic, backend):
    n = cfg.paths
    mean = float(np.sum(per_path) / n)
    se = float(np.std(per_path, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    z = (mean - analytic) / se if se > 0 and math.isfinite(se) else 0.0
    names = {0: "none", 1: "Buy", 2: "Sell"}
    counts = {names[i]: int(np.sum(first == i)) for i in (0, 1, 2)}
    mean_nt = float(np.sum(no_tail) / n)
    return SimResult(
        mean_utility=mean, std_error=se, analytic_value=analytic, z_score=float(z),
        mean_without_tail=mean_nt, tail_mean=mean - mean_nt,
        mean_time_buying=float(np.mean(buy_t)), mean_time_selling=float(np.mean(sell_t)),
        insolvency_count=bad, first_action=counts, paths=n, dt=cfg.dt,
        horizon=cfg.horizon, seed=int(cfg.seed), backend=backend, per_path=per_path,
    )


def _check(cfg, spec):
    problems = cfg.problems()
    if problems:
        raise ConfigInvalid("; ".join(f"{k}: {v}" for k, v in problems.items()))
    if solvency(cfg.x0, cfg.y0, spec.lam, spec.gamma) <= 0:
        raise ConfigInvalid("initial position is not solvent")


def simulate_policy(spec: PolicySpec, d, cfg: SimConfig, kernels=None) -> SimResult:
    """Simulate ``cfg.paths`` paths and compare with the value function."""
    _check(cfg, spec)
    try:
        analytic = value_at(spec, cfg.x0, cfg.y0).V
    except Insolvent as exc:
        raise ConfigInvalid(str(exc)) from exc
    out = _run(spec, d, cfg, _normals, kernels)
    return _result(spec, cfg, *out, analytic, (kernels or _backend).NAME)


@dataclass(frozen=True)
class Verdict:
    z_score: float
    within_noise: bool
    trend: str | None
    raw_trend: str | None
    passed: bool


def compare(sim: SimResult, study: "DtStudy | None" = None, z_max=3.0) -> Verdict:
    """Pass iff |z| <= z_max and, given a dt study, its discretisation bias shrinks."""
    ok = abs(sim.z_score) <= z_max
    trend = raw = None
    if study is not None:
        trend, raw = str(study.trend), str(study.raw_trend)
        ok = ok and study.trend.kind != "violated"
    return Verdict(z_score=sim.z_score, within_noise=abs(sim.z_score) <= z_max,
                   trend=trend, raw_trend=raw, passed=ok)


@dataclass(frozen=True)
class DtStudy:
    """Runs at successively halved dt on common random numbers.

    ``biases`` are mean - analytic; they share one Monte Carlo noise offset.
    ``increments`` are the paired changes in the mean between neighbouring
    dt values, which isolate the discretisation effect; ``trend`` asks
    whether their magnitude shrinks, ``raw_trend`` whether |bias| does.
    """

    dts: tuple
    means: tuple
    std_errors: tuple
    biases: tuple
    increments: tuple
    increment_std_errors: tuple
    extrapolated: float | None
    extrapolated_z: float | None
    trend: object
    raw_trend: object
    results: tuple = field(repr=False, default=())


def dt_study(spec, d, cfg: SimConfig, dts=(1e-2, 5e-3, 2.5e-3), kernels=None) -> DtStudy:
    """Bias against the analytic value under successive dt halving.

    Every coarse increment is the normalised sum of the finer increments it
    covers.  Changes smaller than two paired standard errors count as ties.
    """
    dts = tuple(sorted((float(v) for v in dts), reverse=True))
    fine = dts[-1]
    factors = [int(round(v / fine)) for v in dts]
    if any(abs(f * fine - v) > 1e-12 * v for f, v in zip(factors, dts)):
        raise ConfigInvalid("dt values must be integer multiples of the smallest")
    fine_steps = int(round(cfg.horizon / fine))
    if any(fine_steps % f for f in factors):
        raise ConfigInvalid("horizon must be a whole number of the coarsest step")
    _check(cfg, spec)
    analytic = value_at(spec, cfg.x0, cfg.y0).V
    results = []
    for f, v in zip(factors, dts):
        c = SimConfig(paths=cfg.paths, dt=v, horizon=cfg.horizon, seed=cfg.seed,
                      x0=cfg.x0, y0=cfg.y0)

        def source(children, steps, _f=f):
            return _coarsen(_normals(children, steps * _f), _f)

        out = _run(spec, d, c, source, kernels)
        results.append(_result(spec, c, *out, analytic, (kernels or _backend).NAME))
    means = tuple(r.mean_utility for r in results)
    biases = tuple(m - analytic for m in means)
    inc, inc_se = [], []
    for a, b in zip(results, results[1:]):
        diff = b.per_path - a.per_path
        inc.append(float(np.sum(diff) / cfg.paths))
        inc_se.append(float(np.std(diff, ddof=1) / math.sqrt(cfg.paths)))
    tol = 2.0 * max(inc_se) if inc_se else 0.0
    trend = monotone(np.abs(inc), increasing=False, tol=tol)
    raw = monotone(np.abs(biases), increasing=False, tol=tol)
    extra = extra_z = None
    if len(inc) >= 2 and inc[-2] != 0.0:
        ratio = inc[-1] / inc[-2]
        if 0.0 < ratio < 1.0:
            # geometric tail of the remaining increments
            extra = means[-1] + inc[-1] * ratio / (1.0 - ratio)
            extra_z = (extra - analytic) / results[-1].std_error
    return DtStudy(
        dts=dts, means=means, std_errors=tuple(r.std_error for r in results),
        biases=biases, increments=tuple(inc), increment_std_errors=tuple(inc_se),
        extrapolated=extra, extrapolated_z=extra_z, trend=trend, raw_trend=raw,
        results=tuple(results),
    )
