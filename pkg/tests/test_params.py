import math

import pytest

from wedge import (
    Boundary,
    BoundaryCase,
    Case,
    InvalidParams,
    MarketParams,
    MertonIllPosed,
    classify,
    classify_by_range,
    dimensionless,
    geometry,
    merton_reference,
    reduce_params,
    wellposedness,
)
from wedge.params import CASE_EXAMPLES, WellPosednessKind, critical_eps


def test_reduce_ratios():
    d = reduce_params(MarketParams(mu=0.25, sigma=math.sqrt(0.5), beta=0.5, R=2 / 3, lam=0.1))
    assert d.eps == pytest.approx(0.5, rel=1e-15)
    assert d.delta == pytest.approx(1.0, rel=1e-15)
    assert d.xi == pytest.approx(0.1, rel=1e-15)


def test_sale_cost_only_round_trip():
    d = reduce_params(MarketParams(mu=0.1, sigma=0.2, beta=0.1, R=0.5, lam=0.0, gamma=0.5))
    assert d.xi == 1.0


def test_zero_costs_rejected():
    with pytest.raises(InvalidParams) as info:
        reduce_params(MarketParams(mu=0.1, sigma=0.2, beta=0.1, R=0.5))
    assert "lam+gamma" in info.value.problems


def test_every_bad_field_reported():
    with pytest.raises(InvalidParams) as info:
        reduce_params(MarketParams(mu=0.1, sigma=-1, beta=0, R=1, lam=-0.1, gamma=1.0))
    assert set(info.value.problems) >= {"sigma", "beta", "R", "lam", "gamma"}


def test_nan_rejected():
    with pytest.raises(InvalidParams):
        reduce_params(MarketParams(mu=math.nan, sigma=0.2, beta=0.1, R=0.5, lam=0.1))


def test_geometry_base():
    g = geometry(dimensionless(0.5, 1.0, 2 / 3, xi=0.1))
    assert g.qM == pytest.approx(0.75, rel=1e-15)
    assert g.mM == pytest.approx(0.9375, rel=1e-15)
    assert g.q_minus is None and g.q_plus is None
    assert g.m(0.0) == 1.0 and g.ell(0.0) == 1.0
    assert g.ell(1.0) == pytest.approx(g.m(1.0), abs=1e-15)


def test_geometry_high_risk_aversion():
    g = geometry(dimensionless(1.0, 1.0, 2.0, xi=0.1))
    assert g.qM == 0.5
    assert g.m(1.0) == pytest.approx(1.0, abs=1e-15)
    assert g.mM == pytest.approx(1.25, rel=1e-15)


def test_roots_match_bisection(frozen):
    g = geometry(dimensionless(13.5, 6.0, 2 / 3, xi=0.1))
    exact = ((13.5 - math.sqrt(38.25)) / 24, (13.5 + math.sqrt(38.25)) / 24)
    assert (g.q_minus, g.q_plus) == pytest.approx(exact, rel=1e-14)
    assert (g.q_minus, g.q_plus) == pytest.approx(frozen["q_roots_13.5"], rel=1e-13)


def test_stable_roots_no_cancellation():
    # large drift makes q_- a small difference of large numbers
    g = geometry(dimensionless(1e6, 1.0, 0.5, xi=0.1))
    for r in (g.q_minus, g.q_plus):
        scale = 1 + abs(g.m1 * r) + abs(g.m2 * r * r)
        assert abs(g.m(r)) <= 1e-12 * scale


@pytest.mark.parametrize("case, triple", list(CASE_EXAMPLES.items()))
def test_classify_examples(case, triple):
    d = dimensionless(*triple, xi=0.1)
    assert classify(d) is case
    assert classify_by_range(*triple) is case


def test_zero_drift_is_boundary():
    label = classify(dimensionless(0.0, 1.0, 2 / 3, xi=0.1))
    assert label == Boundary("m'(0)=0")


@pytest.mark.parametrize("name", ["m'(1)=0", "m_M=0", "m(1)=0"])
def test_critical_drifts_are_boundary(name):
    eps = critical_eps(1.0, 2 / 3)[name]
    assert isinstance(classify(dimensionless(eps, 1.0, 2 / 3, xi=0.1)), Boundary)
    assert isinstance(classify_by_range(eps, 1.0, 2 / 3), Boundary)


def test_wellposedness_kinds():
    assert wellposedness(dimensionless(17.5, 6, 2 / 3, xi=1)).kind is WellPosednessKind.ILL_POSED
    assert wellposedness(dimensionless(-1, 1, 2, xi=1)).kind is WellPosednessKind.UNCONDITIONAL
    wp = wellposedness(dimensionless(13.5, 6, 2 / 3, xi=1))
    assert wp.kind is WellPosednessKind.CONDITIONAL
    assert wp.xi_threshold == pytest.approx(math.expm1(0.33877611081033765), rel=1e-12)
    assert not wp.admits(0.5 * wp.xi_threshold) and wp.admits(2 * wp.xi_threshold)


def test_wellposedness_rejects_boundary():
    with pytest.raises(BoundaryCase):
        wellposedness(dimensionless(0.0, 1.0, 2 / 3, xi=0.1))


def test_merton_reference():
    q, c = merton_reference(dimensionless(0.5, 1, 2 / 3, xi=0.1))
    assert q == 0.75 and c == pytest.approx(0.9375 ** (-2 / 3), rel=1e-15)
    q, c = merton_reference(dimensionless(1, 1, 2, xi=0.1))
    assert q == 0.5 and c == pytest.approx(1.25 ** -2, rel=1e-15)
    with pytest.raises(MertonIllPosed):
        merton_reference(dimensionless(13.5, 6, 2 / 3, xi=0.1))


def test_case_flags():
    assert Case.C1AbIii.singular and not Case.C1AbIIii.singular
    assert Case.C2B.leftward and not Case.C2AI.leftward
