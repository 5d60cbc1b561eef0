import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optdiscrim.lp import cone_membership, simplex


def vertex_oracle(c, A, b):
    """Best basic feasible solution by enumerating column subsets."""
    m, n = A.shape
    r = np.linalg.matrix_rank(A)
    rows = list(range(m))
    # keep an independent set of rows
    keep = []
    for i in rows:
        if np.linalg.matrix_rank(A[keep + [i]]) > len(keep):
            keep.append(i)
    A, b = A[keep], b[keep]
    best = None
    for cols in itertools.combinations(range(n), r):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xb = np.linalg.solve(B, b)
        if np.any(xb < -1e-9):
            continue
        val = float(c[list(cols)] @ xb)
        best = val if best is None else max(best, val)
    return best


def test_small_lp():
    # max x + y  s.t. x + 2y + s = 4, 3x + y + t = 6
    A = np.array([[1, 2, 1, 0], [3, 1, 0, 1]], dtype=float)
    res = simplex([1, 1, 0, 0], A, [4, 6])
    assert res.status == "optimal"
    assert res.value == pytest.approx(2.8, abs=1e-12)


def test_infeasible_and_unbounded():
    assert simplex([1, 0], [[1, 1]], [-1]).status == "infeasible"
    assert simplex([1, 0], [[1, -1]], [1]).status == "unbounded"


def test_redundant_rows():
    A = np.array([[1, 1, 1], [2, 2, 2], [1, 0, 0]], dtype=float)
    res = simplex([0, 1, 2], A, [1, 2, 0.25])
    assert res.status == "optimal"
    assert res.value == pytest.approx(1.5, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 3), st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_simplex_matches_vertex_oracle(m, n, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.1, 1.0, size=(m, n))  # positive rows keep the polytope bounded
    x0 = rng.uniform(0, 1, size=n)
    b = A @ x0
    c = rng.normal(size=n)
    res = simplex(c, A, b)
    assert res.status == "optimal"
    assert np.allclose(A @ res.x, b, atol=1e-9)
    assert np.all(res.x >= 0)
    assert res.value == pytest.approx(vertex_oracle(c, A, b), abs=1e-9)


def test_cone_membership():
    G = np.array([[1, 0], [0, 1]], dtype=float).T
    assert cone_membership(G, [0.3, 0.2])
    assert not cone_membership(G, [-0.1, 0.2])
    assert cone_membership(G, [0, 0])
