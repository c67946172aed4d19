"""Unit tests for the augmented Lagrangian, Lyapunov function and residuals."""

import numpy as np
import pytest

from proxjacobi import auglag, jacobi, problems
from proxjacobi.algebra import couple_apply
from proxjacobi.auglag import (BlockObjective, aug_lagrangian, dagger_norm_sq,
                               dual_residual, eta_pair, lyapunov,
                               penalty_residuals, theorem1_bounds,
                               theorem1_params)
from proxjacobi.jacobi import RunConfig
from proxjacobi.model import Params

from conftest import build_qp, default_start

PARAMS = Params(rho=2.0, theta=3.0, tau_x=1.5, tau_z=0.5)


@pytest.fixture(scope="module")
def qp():
    return build_qp(6)[0]


def finite_diff_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def random_point(problem, seed):
    rng = np.random.default_rng(seed)
    x = [rng.standard_normal(blk.n) for blk in problem.blocks]
    z = rng.standard_normal(problem.m)
    lam = rng.standard_normal(problem.m)
    return x, z, lam


def test_aug_lagrangian_formula(qp):
    x, z, lam = random_point(qp, 0)
    viol = couple_apply(qp, x) + z - qp.b
    expected = sum(blk.objective.value(xt) for blk, xt in zip(qp.blocks, x))
    expected += 0.5 * PARAMS.theta * z @ z + lam @ viol
    expected += 0.5 * PARAMS.rho * viol @ viol
    assert aug_lagrangian(qp, x, z, lam, PARAMS) == pytest.approx(expected)
    with pytest.raises(ValueError):
        aug_lagrangian(qp, x, np.zeros(qp.m + 1), lam, PARAMS)


def test_block_objective_gradient(qp):
    x, z, lam = random_point(qp, 1)
    anchor = x[0] + 0.1
    obj = BlockObjective(qp, 0, x, z, lam, PARAMS, anchor)
    pt = x[0] + 0.3
    fd = finite_diff_grad(obj.value, pt)
    assert np.allclose(obj.gradient(pt), fd, atol=1e-5)
    v = np.arange(qp.blocks[0].n, dtype=float)
    assert np.allclose(obj.hess_vec(v), obj.hessian(pt) @ v, atol=1e-9)


def test_block_objective_tracks_aug_lagrangian(qp):
    """Changing only block t moves the block objective and the augmented
    Lagrangian by the same amount (the prox anchor held at x_t)."""
    x, z, lam = random_point(qp, 2)
    obj = BlockObjective(qp, 1, x, z, lam, PARAMS, x[1])
    rng = np.random.default_rng(3)
    other = x[1] + rng.standard_normal(x[1].size)
    x_other = list(x)
    x_other[1] = other
    dL = (aug_lagrangian(qp, x_other, z, lam, PARAMS)
          - aug_lagrangian(qp, x, z, lam, PARAMS))
    d_obj = obj.value(other) - obj.value(x[1])
    dAx = qp.blocks[1].coupling @ (other - x[1])
    prox = 0.5 * PARAMS.tau_x * float(dAx @ dAx)
    assert d_obj == pytest.approx(dL + prox, rel=1e-9, abs=1e-9)


def test_lyapunov_adds_prox_terms(qp):
    x, z, lam = random_point(qp, 4)
    x_hat = [xt - 0.5 for xt in x]
    z_hat = z - 0.25
    base = aug_lagrangian(qp, x, z, lam, PARAMS)
    val = lyapunov(qp, x, z, lam, x_hat, z_hat, PARAMS)
    extra = 0.25 * PARAMS.tau_z * float((z - z_hat) @ (z - z_hat))
    for blk, xt, xh in zip(qp.blocks, x, x_hat):
        d = blk.coupling @ (xt - xh)
        extra += 0.25 * PARAMS.tau_x * float(d @ d)
    assert val == pytest.approx(base + extra)


class TestDualResidual:
    def test_unconstrained_is_gradient_norm(self, qp):
        x, _, lam = random_point(qp, 5)
        g = qp.blocks[0].objective.gradient(x[0]) \
            + qp.blocks[0].coupling.T @ lam
        assert dual_residual(qp, 0, x[0], lam) == pytest.approx(
            np.linalg.norm(g))

    def test_zero_at_oracle(self):
        prob, oracle = build_qp(11)
        for t in range(prob.T):
            assert dual_residual(prob, t, oracle.x_star[t],
                                 oracle.lambda_star) < 1e-9

    def test_box_normal_cone(self):
        # f(x) = (x - 2)^2 over [0, 1]: gradient points outward at x = 1
        import scipy.sparse as sp
        from proxjacobi.model import (BlockSpec, ConstraintSet, Problem,
                                      Quadratic)
        f = Quadratic(2.0 * sp.eye(1, format="csr"), np.array([-4.0]), 4.0)
        blk = BlockSpec(n=1, objective=f,
                        set=ConstraintSet(np.zeros(1), np.ones(1)),
                        coupling=sp.csr_matrix(np.ones((1, 1))))
        prob = Problem(m=1, b=np.zeros(1), blocks=[blk])
        lam = np.zeros(1)
        assert dual_residual(prob, 0, np.ones(1), lam) == 0.0
        # at the interior point 0.5 the raw gradient shows through
        assert dual_residual(prob, 0, np.array([0.5]), lam) == pytest.approx(3.0)

    def test_equality_multiplier_fit(self):
        prob = problems.gen_multiperiod_dispatch(3, 2, 0.2)
        oracle = problems.kkt_reference_solve(prob)
        for t in range(prob.T):
            assert dual_residual(prob, t, oracle.x_star[t],
                                 oracle.lambda_star) < 1e-8

    def test_off_set_raises(self, qp):
        prob = problems.gen_multiperiod_dispatch(3, 2, 0.2)
        bad = np.full(prob.blocks[0].n, 50.0)
        with pytest.raises(ValueError, match="off the set"):
            dual_residual(prob, 0, bad, np.zeros(prob.m))


def test_penalty_residuals_formulas(qp):
    params = theorem1_params(0.3, qp.T)
    state = jacobi.init_state(qp, *default_start(qp), params)
    cfg = RunConfig(record_timings=False)
    with pytest.raises(ValueError):
        penalty_residuals(qp, state, params)
    for _ in range(3):
        jacobi.iterate(qp, state, params, cfg)
    snap = penalty_residuals(qp, state, params, feas_tol=np.inf)
    p = couple_apply(qp, state.x) + state.z - qp.b
    assert np.allclose(snap.p, p, atol=1e-12)
    assert snap.pi == pytest.approx(
        np.linalg.norm(couple_apply(qp, state.x) - qp.b))
    assert np.allclose(snap.d_z, -params.tau_z * state.dz, atol=1e-12)
    dx = [xt - xp for xt, xp in zip(state.x, state.x_prev)]
    Adx = [blk.coupling @ d for blk, d in zip(qp.blocks, dx)]
    for t, blk in enumerate(qp.blocks):
        acc = sum(Adx[s] for s in range(qp.T) if s != t)
        d_t = params.rho * (blk.coupling.T @ (acc - state.dz)) \
            - params.tau_x * (blk.coupling.T @ Adx[t])
        assert np.allclose(snap.d_blocks[t], d_t, atol=1e-9)
    assert snap.delta_max == max(snap.delta)


def test_eta_pair_and_theorem_params():
    p = theorem1_params(0.1, 4)
    assert p.theta == pytest.approx(100.0)
    assert p.rho == pytest.approx(6400.0)
    assert p.tau_x == pytest.approx(256.0 * 3 * 100.0)
    assert p.tau_z == pytest.approx(200.0)
    etas = eta_pair(p, 4)
    assert etas.feasible
    assert etas.eta_x == pytest.approx(p.tau_x / 4 - 1.5 * p.rho)
    assert etas.eta_z == pytest.approx(
        p.tau_z / 4 - 2 * (p.theta + p.tau_z) ** 2 / p.rho)
    # T = 1 edge: no cross-block interference, eta_x = tau_x / 4
    one = eta_pair(Params(rho=5.0, theta=1.0, tau_x=2.0, tau_z=1.0), 1)
    assert one.eta_x == pytest.approx(0.5)
    with pytest.raises(ValueError):
        theorem1_params(1.5, 2)
    with pytest.raises(ValueError):
        theorem1_params(0.1, 0)


def test_theorem1_bounds_requires_feasible_eta():
    bad = Params(rho=1.0, theta=100.0, tau_x=1.0, tau_z=1.0)
    with pytest.raises(ValueError):
        theorem1_bounds(1.0, 0.0, 0.5, 10, bad, [1.0], 2)


def test_dagger_norm_matches_explicit_r(qp):
    params = PARAMS
    state = jacobi.init_state(qp, *default_start(qp), params)
    cfg = RunConfig(record_timings=False)
    for _ in range(2):
        jacobi.iterate(qp, state, params, cfg)
    ref_x, ref_z, ref_lam = random_point(qp, 9)
    val = dagger_norm_sq(qp, state, ref_x, ref_z, ref_lam, params)
    T, m = qp.T, qp.m
    dev = np.concatenate([blk.coupling @ (xt - rx) for blk, xt, rx
                          in zip(qp.blocks, state.x, ref_x)])
    EEt = np.kron(np.ones((T, T)), np.eye(m))
    R = (params.rho + params.tau_x) * np.eye(T * m) - params.rho * EEt
    expected = float(dev @ (R @ dev))
    expected += (params.rho + params.tau_z) * float(
        (state.z - ref_z) @ (state.z - ref_z))
    expected += float((state.lam - ref_lam) @ (state.lam - ref_lam)) / params.rho
    expected += params.tau_z * float(state.dz @ state.dz)
    assert val == pytest.approx(expected, rel=1e-10)
