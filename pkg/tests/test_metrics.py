import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from gmsfem.errors import DegenerateInputError
from gmsfem.grid import build_grids
from gmsfem.metrics import (
    NormEvaluator, decay_series, error_lambda_correlation, relative_error, weighted_norms,
)

GRID = build_grids(6, 3)
KAPPA = np.linspace(1.0, 4.0, GRID.n_cells)
EVAL = NormEvaluator(GRID, KAPPA)

_finite = st.floats(-10, 10, allow_nan=False)
_fields = st.lists(_finite, min_size=GRID.n_nodes, max_size=GRID.n_nodes).map(np.array)


def test_norms_of_polynomials():
    # kappa = 2 everywhere: |1|_L2^2 = 2, |x|_H1^2 = 2
    g = build_grids(8, 2)
    x = g.node_coords[:, 0]
    l2, _ = weighted_norms(g, 2.0 * np.ones(g.n_cells), np.ones(g.n_nodes))
    _, h1 = weighted_norms(g, 2.0 * np.ones(g.n_cells), x)
    assert l2 == pytest.approx(np.sqrt(2.0), rel=1e-13)
    assert h1 == pytest.approx(np.sqrt(2.0), rel=1e-13)


def test_norm_of_bilinear_by_gauss_rule():
    # independent 2x2 Gauss evaluation of int kappa u^2 for u = xy (exact for Q1 squared)
    g = build_grids(4, 2)
    kappa = np.arange(1.0, 17.0)
    x, y = g.node_coords.T
    l2, h1 = weighted_norms(g, kappa, x * y)
    pts = 0.5 + np.array([-1, 1]) / (2 * np.sqrt(3))
    h = g.h
    sq, gr = 0.0, 0.0
    for c in range(g.n_cells):
        cx, cy = (c % 4) * h, (c // 4) * h
        for a in pts:
            for b in pts:
                px, py = cx + a * h, cy + b * h
                sq += kappa[c] * (px * py) ** 2 * h * h / 4
                gr += kappa[c] * (px ** 2 + py ** 2) * h * h / 4
    assert l2 == pytest.approx(np.sqrt(sq), rel=1e-12)
    assert h1 == pytest.approx(np.sqrt(gr), rel=1e-12)


def test_relative_error_percent():
    u = GRID.node_coords[:, 0] + 1.0
    e = relative_error(GRID, KAPPA, u, 0.9 * u)
    assert e.l2_pct == pytest.approx(10.0)
    assert e.h1_pct == pytest.approx(10.0)
    assert e.reference == "fine"
    with pytest.raises(DegenerateInputError):
        relative_error(GRID, KAPPA, np.ones(GRID.n_nodes), u)


@settings(max_examples=50, deadline=None)
@given(u=_fields, v=_fields, c=_finite)
def test_norm_homogeneity_and_triangle_inequality(u, v, c):
    nu, nv, nuv = EVAL.norms(u), EVAL.norms(v), EVAL.norms(u + v)
    ncu = EVAL.norms(c * u)
    for k in range(2):
        assert ncu[k] == pytest.approx(abs(c) * nu[k], rel=1e-9, abs=1e-9)
        assert nuv[k] <= nu[k] + nv[k] + 1e-9


def test_correlation_examples():
    lam = np.array([1.0, 4.0, 16.0, 64.0])
    assert error_lambda_correlation(lam, lam ** -0.5) == pytest.approx(1.0)
    assert error_lambda_correlation(lam, -lam ** -0.5) == pytest.approx(-1.0)
    with pytest.raises(DegenerateInputError):
        error_lambda_correlation([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(DegenerateInputError):
        error_lambda_correlation([1.0, 2.0, np.inf], [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateInputError):
        error_lambda_correlation([1.0, 2.0, 0.0], [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateInputError):
        error_lambda_correlation([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])
    with pytest.raises(DegenerateInputError):
        error_lambda_correlation([1.0, 2.0, 3.0], [5.0, 5.0])


@settings(max_examples=50, deadline=None)
@given(lam=st.lists(st.floats(1e-2, 1e4), min_size=3, max_size=10),
       err=st.lists(st.floats(0, 100), min_size=10, max_size=10),
       a=st.floats(0.1, 10), b=st.floats(-10, 10))
def test_correlation_affine_invariance(lam, err, a, b):
    err = np.array(err[:len(lam)])
    x = np.array(lam) ** -0.5
    assume(np.ptp(x) > 1e-6 * x.max() and np.ptp(err) > 1e-6)
    r = error_lambda_correlation(lam, err)
    assert -1 - 1e-12 <= r <= 1 + 1e-12
    assert error_lambda_correlation(lam, a * err + b) == pytest.approx(r, abs=1e-7)


def test_decay_series():
    rows = decay_series([0.0, 2.0, 4.0])
    assert rows == [(1, 0.0, np.inf), (2, 2.0, 0.5), (3, 4.0, 0.25)]
