import math

import numpy as np
import pytest

from varstokes.quadrature import tet_rule, tri_rule, tri_rule_subdivided


def tet_monomial_exact(a, b, c):
    # int_T x^a y^b z^c = a! b! c! / (a+b+c+3)!
    return (
        math.factorial(a)
        * math.factorial(b)
        * math.factorial(c)
        / math.factorial(a + b + c + 3)
    )


def tri_monomial_exact(a, b):
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("degree", [1, 2, 4, 6])
def test_tet_rule_exact_for_monomials(degree):
    pts, wts = tet_rule(degree)
    assert wts.min() > 0.0
    assert abs(wts.sum() - 1.0 / 6.0) < 1e-14
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            for c in range(degree + 1 - a - b):
                val = np.sum(wts * pts[:, 0] ** a * pts[:, 1] ** b * pts[:, 2] ** c)
                assert val == pytest.approx(tet_monomial_exact(a, b, c), abs=1e-15, rel=1e-13)


@pytest.mark.parametrize("degree", [1, 2, 4, 8])
def test_tri_rule_exact_for_monomials(degree):
    pts, wts = tri_rule(degree)
    assert wts.min() > 0.0
    assert abs(wts.sum() - 0.5) < 1e-14
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            val = np.sum(wts * pts[:, 0] ** a * pts[:, 1] ** b)
            assert val == pytest.approx(tri_monomial_exact(a, b), abs=1e-15, rel=1e-13)


def test_subdivided_tri_rule_is_composite_and_consistent():
    pts0, wts0 = tri_rule_subdivided(4, 0)
    pts2, wts2 = tri_rule_subdivided(4, 2)
    assert len(wts2) == 16 * len(wts0)
    assert abs(wts2.sum() - 0.5) < 1e-13
    # exact on polynomials of the base degree
    val = np.sum(wts2 * pts2[:, 0] ** 2 * pts2[:, 1] ** 2)
    assert val == pytest.approx(tri_monomial_exact(2, 2), rel=1e-13)


def test_subdivided_tri_rule_converges_on_nonpolynomial():
    f = lambda p: np.exp(p[:, 0] * 3.1) * np.cos(2.0 * p[:, 1])
    vals = []
    for lev in range(4):
        pts, wts = tri_rule_subdivided(2, lev)
        vals.append(np.sum(wts * f(pts)))
    errs = [abs(v - vals[-1]) for v in vals[:-1]]
    assert errs[1] < errs[0] / 4
    assert errs[2] < errs[1] / 4
