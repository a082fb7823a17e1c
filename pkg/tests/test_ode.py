import numpy as np
import pytest

from wedge import (
    DegenerateStart,
    HitZero,
    NotSingularCase,
    ToleranceOptions,
    continue_through_singularity,
    dimensionless,
    geometry,
    integrate_curve,
    ode_rhs,
    start_expansion,
    zeta,
)
from wedge.ode import lambda_one, second_derivative_at_start, singular_expansion

from conftest import ALWAYS_ILL, BASE, HIGH_R, NEG_DRIFT, SINGULAR


def geo(triple):
    return geometry(dimensionless(*triple, xi=0.1))


def test_rhs_vanishes_on_m_and_zero():
    g = geo(BASE)
    for q in (0.1, 0.4, 0.9, 1.3):
        assert ode_rhs(q, g.m(q), g) == 0.0
        assert ode_rhs(q, 0.0, g) == 0.0


def test_rhs_value(frozen):
    assert ode_rhs(0.5, 1.0, geo(BASE)) == pytest.approx(frozen["rhs_half_one"], rel=1e-13)


def test_second_derivative_at_start(frozen):
    # the correct composition gives -1.959..., half the figure printed alongside it
    assert second_derivative_at_start(0.3, geo(BASE)) == pytest.approx(frozen["n2_at_0.3"], rel=1e-14)


def test_start_expansion():
    g = geo(BASE)
    assert start_expansion(0.3, g, s=0) == (0.3, g.m(0.3))
    q1, n1 = start_expansion(0.3, g, s=1e-4)
    assert q1 == pytest.approx(0.3001)
    assert n1 == pytest.approx(g.m(0.3) + 0.5 * second_derivative_at_start(0.3, g) * 1e-8, rel=1e-13)
    with pytest.raises(DegenerateStart):
        start_expansion(0.75, g)


def test_degenerate_curve_at_merton_point():
    c = integrate_curve(0.75, geo(BASE))
    assert c.degenerate and c.zeta == 0.75 and c.lambda_total == 0.0
    assert zeta(0.75, geo(BASE)) == 0.75


def test_zeta_matches_independent_integrators(frozen):
    z = zeta(0.3, geo(BASE))
    assert z == pytest.approx(frozen["zeta_0.3_rk4"], abs=1e-9)
    assert z == pytest.approx(frozen["zeta_0.3_dop853"], abs=1e-9)
    assert 0.75 < z < 1


def test_zeta_decreasing():
    g = geo(BASE)
    z = [zeta(r, g) for r in (0.3, 0.5, 0.7)]
    assert z[0] > z[1] > z[2]


def test_curve_band_and_monotone():
    g = geo(BASE)
    c = integrate_curve(0.2, g)
    q, n = c.q[1:-1], c.n[1:-1]
    assert np.all(n - g.m(q) > 0)
    assert np.all(g.ell(q) - n > 0)
    assert np.all(np.diff(c.n) < 0)
    assert c.n[0] == pytest.approx(g.m(c.r), abs=1e-12)
    assert c.n[-1] == pytest.approx(g.m(c.zeta), abs=1e-10)


def test_chord_bound():
    g = geo(BASE)
    for r in (0.05, 0.3, 0.6):
        c = integrate_curve(r, g)
        q = c.q
        bound = 1 + (1 - g.R) * (0.5 * g.delta2 * g.R - g.eps) * q
        assert np.all(c.n <= bound + 1e-10)


def test_hit_zero_at_root_of_ell():
    g = geo(ALWAYS_ILL)
    with pytest.raises(HitZero) as info:
        integrate_curve(0.05, g)
    assert info.value.q == pytest.approx(g.p_plus, abs=1e-8)


def test_singular_restart(frozen):
    g = geo(SINGULAR)
    (q1, n1), exp = continue_through_singularity(g)
    assert exp.c2 == pytest.approx(frozen["c2_1.5"], rel=1e-14)
    assert q1 > 1 and n1 - g.m(q1) > 0
    assert n1 == pytest.approx(g.m(q1) + g.k * exp.c2 * (q1 - 1) ** 2, rel=1e-6)
    # the higher-order series agrees with its own half-offset evaluation
    assert max(abs(v) for v in exp.richardson) < 1e-9


def test_no_singular_continuation_in_case_two():
    with pytest.raises(NotSingularCase):
        continue_through_singularity(geo(BASE))
    with pytest.raises(NotSingularCase):
        singular_expansion(geo(HIGH_R))


def test_singular_independence(frozen):
    g = geo(SINGULAR)
    z1, lam1 = lambda_one(g)
    assert z1 == pytest.approx(frozen["zeta_1_1AbIii"], abs=1e-9)
    assert lam1 == pytest.approx(frozen["lambda_1_1AbIii"], abs=1e-9)
    for r in (0.2, 0.5, 0.8):
        c = integrate_curve(r, g)
        assert c.crossed_singularity
        assert c.zeta == pytest.approx(z1, abs=1e-6)


def test_leftward_curve():
    g = geo(NEG_DRIFT)
    r = 0.5 * g.qM
    c = integrate_curve(r, g)
    assert c.direction == -1
    assert g.qM < 0 and r < 0 and c.zeta < g.qM
    assert c.n[-1] == pytest.approx(g.m(c.zeta), abs=1e-10)


def test_tighter_tolerance_changes_little():
    g = geo(BASE)
    loose = zeta(0.3, g)
    tight = zeta(0.3, g, ToleranceOptions(rtol=1e-12, atol=1e-14))
    assert abs(loose - tight) < 1e-9


def test_non_crossing():
    g = geo(BASE)
    c1, c2 = integrate_curve(0.2, g), integrate_curve(0.4, g)
    q = np.linspace(0.41, min(c1.zeta, c2.zeta) - 1e-6, 200)
    assert np.all(c1.n_at(q) > c2.n_at(q))
