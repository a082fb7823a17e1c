import os
import subprocess
import sys

import numpy as np
import pytest

from wedge import _backend, _fallback, dimensionless, geometry
from wedge.ode import DEFAULT_OPTIONS, _coeffs, _launch

compiled = pytest.importorskip("wedge._kernels")


@pytest.mark.parametrize("triple, r", [
    ((0.5, 1.0, 2 / 3), 0.3), ((0.5, 1.0, 2 / 3), 1e-6), ((1.0, 1.0, 2.0), 0.2),
    ((-1.0, 1.0, 2 / 3), -0.3), ((17.5, 6.0, 2 / 3), 0.05),
])
def test_curve_kernels_identical(triple, r):
    g = geometry(dimensionless(*triple, xi=0.1))
    m1, m2, k, cr = _coeffs(g)
    o = DEFAULT_OPTIONS
    q1, e1, l1, d = _launch(r, g, o)
    end = 1.0 - 1e-12 if d > 0 else -50.0
    args = (q1, e1, l1, end, float(d), m1, m2, k, cr, o.rtol, o.atol, o.event_tol, o.max_steps)
    a, b = compiled.integrate_eta(*args), _fallback.integrate_eta(*args)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        np.testing.assert_allclose(np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                                   rtol=1e-13, atol=1e-15)


def test_env_forces_fallback():
    env = dict(os.environ, WEDGE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import wedge; print(wedge.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_default_is_compiled():
    if os.environ.get("WEDGE_PURE_PYTHON"):
        pytest.skip("fallback forced by environment")
    assert _backend.NAME == "compiled"
    assert _backend.kernels("python") is _fallback
    assert _backend.kernels("compiled") is compiled
