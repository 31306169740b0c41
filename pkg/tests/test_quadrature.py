import math

import numpy as np
import pytest

from holeflow.quadrature import simplex_rule


def tri_monomial_exact(a, b):
    """integral of x^a y^b over the unit right triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_triangle_exactness(order):
    bary, w = simplex_rule(2, order)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    pts = bary @ corners
    for a in range(order + 1):
        for b in range(order + 1 - a):
            got = 0.5 * float(w @ (pts[:, 0] ** a * pts[:, 1] ** b))
            assert got == pytest.approx(tri_monomial_exact(a, b), abs=1e-14)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_segment_exactness(order):
    bary, w = simplex_rule(1, order)
    corners = np.array([[0.0], [1.0]])
    pts = bary @ corners
    for a in range(order + 1):
        got = float(w @ pts[:, 0] ** a)
        assert got == pytest.approx(1.0 / (a + 1), abs=1e-14)


@pytest.mark.parametrize("n,subdiv", [(1, 2), (2, 1), (2, 2)])
def test_subdivision_preserves_exactness(n, subdiv):
    bary, w = simplex_rule(n, 3, subdiv=subdiv)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    if n == 2:
        corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        pts = bary @ corners
        got = 0.5 * float(w @ (pts[:, 0] ** 2 * pts[:, 1]))
        assert got == pytest.approx(tri_monomial_exact(2, 1), abs=1e-12)


def test_unknown_rule():
    with pytest.raises(ValueError):
        simplex_rule(2, 4)
