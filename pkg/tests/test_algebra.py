"""Unit tests for the coupling-matrix operations."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from proxjacobi.algebra import (CouplingWorkspace, couple_apply,
                                couple_apply_except, r_matrix_eigencheck,
                                seminorm_sq, spectral_norm)

from conftest import build_qp


@pytest.fixture(scope="module")
def qp():
    return build_qp(2)[0]


def random_blocks(problem, seed):
    rng = np.random.default_rng(seed)
    return [rng.standard_normal(blk.n) for blk in problem.blocks]


def test_couple_apply_matches_dense(qp):
    x = random_blocks(qp, 0)
    dense = qp.stacked_coupling() @ np.concatenate(x)
    assert np.allclose(couple_apply(qp, x), dense, atol=1e-12)


@given(st.integers(0, 100))
def test_couple_apply_except_complement(qp, seed):
    x = random_blocks(qp, seed)
    full = couple_apply(qp, x)
    for t in range(qp.T):
        rest = couple_apply_except(qp, x, t) + qp.blocks[t].coupling @ x[t]
        assert np.allclose(rest, full, atol=1e-10)


def test_couple_apply_shape_check(qp):
    x = random_blocks(qp, 0)
    x[0] = np.zeros(qp.blocks[0].n + 1)
    with pytest.raises(ValueError):
        couple_apply(qp, x)


def test_couple_apply_except_index_check(qp):
    with pytest.raises(IndexError):
        couple_apply_except(qp, random_blocks(qp, 0), qp.T)


def test_seminorm_sq(qp):
    blk = qp.blocks[0]
    v = np.arange(blk.n, dtype=float)
    w = blk.coupling @ v
    assert seminorm_sq(blk.coupling, v) == pytest.approx(float(w @ w))
    with pytest.raises(ValueError):
        seminorm_sq(blk.coupling, np.zeros(blk.n + 2))


def test_spectral_norm_vs_svd():
    rng = np.random.default_rng(5)
    for _ in range(10):
        A = rng.standard_normal((4, 6))
        exact = np.linalg.svd(A, compute_uv=False)[0]
        assert spectral_norm(A) == pytest.approx(exact, rel=1e-9)


def test_spectral_norm_zero_matrix():
    assert spectral_norm(np.zeros((3, 3))) == 0.0


def test_eigencheck_closed_form():
    lo, hi = r_matrix_eigencheck(2.0, 5.0, 4, 3)
    assert lo == pytest.approx(2.0 + 5.0 - 2.0 * 4)
    assert hi == pytest.approx(7.0)


def test_eigencheck_validation():
    with pytest.raises(ValueError):
        r_matrix_eigencheck(1.0, 1.0, 0, 1)
    with pytest.raises(ValueError):
        r_matrix_eigencheck(1.0, 1.0, 100, 100)


def test_workspace_caches(qp):
    ws = CouplingWorkspace(qp)
    assert len(ws.spectral_norms) == qp.T
    for blk, cols, spec in zip(qp.blocks, ws.column_norms, ws.spectral_norms):
        dense = blk.coupling.toarray()
        assert np.allclose(cols, np.linalg.norm(dense, axis=0), atol=1e-12)
        assert spec == pytest.approx(
            np.linalg.svd(dense, compute_uv=False)[0], rel=1e-9)
