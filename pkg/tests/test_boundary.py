import math

import numpy as np
import pytest

from wedge import (
    IllPosedAlways,
    IllPosedCurve,
    IllPosedForThisXi,
    NotSingularCase,
    OrderingUnsupported,
    Regime,
    RootsNotReal,
    BoundaryCase,
    closed_form_lambda_under,
    dimensionless,
    geometry,
    integrate_curve,
    lambda_at_singular,
    lambda_of,
    solve_boundaries,
    thresholds,
)
from wedge.boundary import lambda_by_quadrature, lambda_grid
from wedge.params import CASE_EXAMPLES, Case

from conftest import ALWAYS_ILL, BASE, CONDITIONAL, SINGULAR


def geo(triple):
    return geometry(dimensionless(*triple, xi=0.1))


def test_lambda_zero_at_merton_point():
    assert lambda_of(0.75, geo(BASE)) == 0.0


def test_lambda_grows_towards_origin():
    g = geo(BASE)
    l1, l2, l3 = (lambda_of(r, g) for r in (1e-1, 1e-2, 1e-3))
    assert l3 > l2 > l1
    # the growth is logarithmic: about 0.6 per decade here, reaching 1.53 at 1e-3
    assert l3 == pytest.approx(1.5346761088, abs=1e-8)


def test_lambda_pinned_by_two_quadratures(frozen):
    assert frozen["lambda_0.3_gk"] == pytest.approx(frozen["lambda_0.3_simpson"], abs=1e-9)
    assert lambda_of(0.3, geo(BASE)) == pytest.approx(frozen["lambda_0.3_gk"], abs=1e-9)


def test_lambda_strictly_decreasing_on_grid():
    g = geo(BASE)
    lam = lambda_grid(g, np.linspace(0.02, 0.74, 25))
    assert np.all(np.diff(lam) < 0)


def test_lambda_of_ill_posed_curve():
    with pytest.raises(IllPosedCurve):
        lambda_of(0.05, geo(ALWAYS_ILL))


@pytest.mark.parametrize("label", ["1AbIIi", "1AbIi", "1Bi"])
def test_closed_form_matches_quadrature(label, frozen):
    g = geo(CASE_EXAMPLES[Case(label)])
    assert closed_form_lambda_under(g) == pytest.approx(frozen[f"lambda_under_{label}"], abs=1e-8)


def test_closed_form_needs_real_roots():
    with pytest.raises(RootsNotReal):
        closed_form_lambda_under(geo(BASE))


def test_closed_form_ordering_gate():
    # R > 1 puts the roots of m outside every listed ordering
    g = geometry(dimensionless(1.0, 1.0, 2.0, xi=0.1))
    with pytest.raises(OrderingUnsupported):
        closed_form_lambda_under(g)


def test_lambda_at_singular(frozen):
    lam1 = lambda_at_singular(geo(SINGULAR))
    assert lam1 > 0
    assert lam1 == pytest.approx(frozen["lambda_1_1AbIii"], abs=1e-9)
    with pytest.raises(NotSingularCase):
        lambda_at_singular(geo(CASE_EXAMPLES[Case.C2AII]))


def test_thresholds_ordered_in_case_1abii():
    under, bar = thresholds(geo(CASE_EXAMPLES[Case.C1AbIi]))
    assert under is not None and bar is not None and under < bar


def test_thresholds_boundary():
    with pytest.raises(BoundaryCase):
        thresholds(geo((0.0, 1.0, 0.5)))


def test_solve_base_case():
    d = dimensionless(*BASE, xi=0.1)
    w = solve_boundaries(d)
    g = w.geometry
    assert 0 < w.q_star < 0.75 < w.q_upper < 1
    assert w.regime is Regime.INTERIOR
    assert math.expm1(w.lambda_value) == pytest.approx(0.1, rel=1e-9)
    assert (1 - g.R) * (g.m(w.q_star) - g.m(w.q_upper)) > 0
    assert w.curve.n[0] == pytest.approx(g.m(w.q_star), abs=1e-12)
    assert w.curve.n[-1] == pytest.approx(g.m(w.q_upper), abs=1e-10)


def test_solve_singular_regimes(frozen):
    g = geo(SINGULAR)
    xi_bar = math.expm1(lambda_at_singular(g))
    high = solve_boundaries(dimensionless(*SINGULAR, xi=2 * xi_bar))
    assert high.regime is Regime.CROSSES_SINGULARITY and high.q_star < 1
    assert high.q_upper == pytest.approx(frozen["zeta_1_1AbIii"], abs=1e-8)
    at = solve_boundaries(dimensionless(*SINGULAR, xi=xi_bar))
    assert at.regime is Regime.AT_SINGULAR_IVP and at.q_star == 1.0
    low = solve_boundaries(dimensionless(*SINGULAR, xi=0.5 * xi_bar))
    assert low.regime is Regime.INTERIOR and 1 < low.q_star < g.qM < low.q_upper


def test_solve_negative_drift_both_negative():
    w = solve_boundaries(dimensionless(-1.0, 1.0, 2 / 3, xi=0.1))
    assert w.q_star < w.geometry.qM < w.q_upper < 0


def test_ill_posed_gates():
    g = geo(CONDITIONAL)
    under, _ = thresholds(g)
    with pytest.raises(IllPosedForThisXi) as info:
        solve_boundaries(dimensionless(*CONDITIONAL, xi=0.5 * under))
    assert info.value.xi_under == pytest.approx(under)
    with pytest.raises(IllPosedAlways):
        solve_boundaries(dimensionless(*ALWAYS_ILL, xi=10.0))
    with pytest.raises(BoundaryCase):
        solve_boundaries(dimensionless(0.0, 1.0, 0.5, xi=0.1))


def test_conditional_case_solves_above_threshold():
    under, _ = thresholds(geo(CONDITIONAL))
    w = solve_boundaries(dimensionless(*CONDITIONAL, xi=2 * under))
    g = w.geometry
    assert 0 < w.q_star < g.q_minus and g.q_plus < w.q_upper < 1


@pytest.mark.parametrize("case", [c for c in CASE_EXAMPLES if c is not Case.C1Aa])
def test_lambda_representations_agree(case):
    w = solve_boundaries(dimensionless(*CASE_EXAMPLES[case], xi=1.0))
    ratio = lambda_by_quadrature(w.curve, "ratio")
    if not w.curve.crossed_singularity:
        diff = lambda_by_quadrature(w.curve, "difference")
        assert ratio == pytest.approx(diff, abs=1e-8)
    assert ratio == pytest.approx(w.lambda_value, abs=1e-8)


def test_every_case_solves_or_gates():
    for case, triple in CASE_EXAMPLES.items():
        d = dimensionless(*triple, xi=1.0)
        if case is Case.C1Aa:
            with pytest.raises(IllPosedAlways):
                solve_boundaries(d)
            continue
        w = solve_boundaries(d)
        assert w.case is case
        assert w.q_star < w.q_upper
        assert math.expm1(w.lambda_value) == pytest.approx(1.0, rel=1e-8)
