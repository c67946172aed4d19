"""Unit tests for the problem generators and reference oracles."""

import numpy as np
import pytest

from proxjacobi import problems
from proxjacobi.algebra import couple_apply
from proxjacobi.model import Quadratic, save_problem, validate_problem
from proxjacobi.problems import (acopf_balance, acopf_balance_grad,
                                 acopf_block_layout, gen_acopf_toy,
                                 gen_coupled_qp, gen_multiperiod_dispatch,
                                 kkt_reference_solve, network_from_json,
                                 network_to_json, separable_lower_bound,
                                 toy_network, twin_generator_network)

from conftest import build_qp


def finite_diff_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


class TestCoupledQp:
    def test_deterministic(self):
        a, _ = gen_coupled_qp(7, 3, 2, 2)
        b, _ = gen_coupled_qp(7, 3, 2, 2)
        assert save_problem(a) == save_problem(b)

    def test_different_seeds_differ(self):
        a, _ = gen_coupled_qp(1, 3, 2, 2)
        b, _ = gen_coupled_qp(2, 3, 2, 2)
        assert save_problem(a) != save_problem(b)

    def test_oracle_kkt_conditions(self):
        for seed in range(5):
            prob, oracle = build_qp(seed)
            assert np.allclose(couple_apply(prob, oracle.x_star), prob.b,
                               atol=1e-9)
            A = prob.stacked_coupling()
            off = 0
            for blk, xt in zip(prob.blocks, oracle.x_star):
                g = blk.objective.gradient(xt) \
                    + A[:, off:off + blk.n].T @ oracle.lambda_star
                assert np.max(np.abs(g)) < 1e-9
                off += blk.n

    def test_m_exceeds_total(self):
        with pytest.raises(ValueError):
            gen_coupled_qp(0, 2, 2, 5)


class TestDispatch:
    def test_structure_and_oracle(self):
        prob = gen_multiperiod_dispatch(4, 3, 0.2)
        assert prob.T == 4
        assert prob.m == 3 * 3
        assert validate_problem(prob).ok
        oracle = kkt_reference_solve(prob)
        # ramping coupling and per-period demand balance both hold
        assert np.allclose(couple_apply(prob, oracle.x_star), prob.b,
                           atol=1e-9)
        for blk, xt in zip(prob.blocks, oracle.x_star):
            assert abs(blk.set.equalities[0].value(xt)) < 1e-9

    def test_validation(self):
        with pytest.raises(ValueError):
            gen_multiperiod_dispatch(1, 2, 0.2)
        with pytest.raises(ValueError):
            gen_multiperiod_dispatch(3, 0, 0.2)
        with pytest.raises(ValueError):
            gen_multiperiod_dispatch(3, 2, 1.5)

    def test_profile_override(self):
        prof = np.full(3, 0.5)
        prob = gen_multiperiod_dispatch(3, 2, 0.2, profile=prof)
        demand = 0.5 * float(np.sum([1.0, 1.25]))
        assert prob.blocks[0].set.equalities[0].c0 == pytest.approx(-demand)


class TestKktOracle:
    def test_rejects_active_bound(self):
        # pull the minimizer into a bound: oracle must refuse rather than
        # return a wrong certificate
        prob = gen_multiperiod_dispatch(3, 2, 0.2,
                                        profile=np.full(3, 0.999))
        with pytest.raises(ValueError, match="bound active"):
            kkt_reference_solve(prob)

    def test_residual_certificate(self):
        prob, oracle = build_qp(4)
        assert oracle.provenance == "kkt-linear-solve"


class TestLowerBound:
    def test_below_oracle_objective(self):
        for seed in (0, 3, 7):
            prob, oracle = build_qp(seed)
            assert separable_lower_bound(prob) <= oracle.objective + 1e-9

    def test_diagonal_box_closed_form(self):
        import scipy.sparse as sp
        from proxjacobi.model import (BlockSpec, ConstraintSet, Problem)
        # 0.5 * 2 x^2 - 2x over [0, 3] -> min at x = 1, value -1
        f = Quadratic(sp.csr_matrix(np.array([[2.0]])), np.array([-2.0]))
        blk = BlockSpec(n=1, objective=f,
                        set=ConstraintSet(np.zeros(1), np.full(1, 3.0)),
                        coupling=sp.csr_matrix((0, 1)))
        prob = Problem(m=0, b=np.zeros(0), blocks=[blk])
        assert separable_lower_bound(prob) == pytest.approx(-1.0)

    def test_concave_coordinate_needs_bounds(self):
        import scipy.sparse as sp
        from proxjacobi.model import (BlockSpec, ConstraintSet, Problem)
        f = Quadratic(sp.csr_matrix(np.array([[-2.0]])), np.zeros(1))
        blk = BlockSpec(n=1, objective=f,
                        set=ConstraintSet(np.array([-np.inf]),
                                          np.array([np.inf])),
                        coupling=sp.csr_matrix((0, 1)))
        prob = Problem(m=0, b=np.zeros(0), blocks=[blk])
        with pytest.raises(ValueError, match="unavailable"):
            separable_lower_bound(prob)
        # with a finite box the concave minimum sits at an endpoint
        blk.set = ConstraintSet(np.array([-2.0]), np.array([1.0]))
        assert separable_lower_bound(prob) == pytest.approx(-4.0)


class TestAcopfBalance:
    def test_matches_complex_arithmetic(self):
        net = toy_network(nbus=3, T=2)
        rng = np.random.default_rng(0)
        Y = net.y_re.toarray() + 1j * net.y_im.toarray()
        for _ in range(5):
            V = 1.0 + 0.1 * rng.uniform(-1, 1, net.nbus)
            th = 0.3 * rng.uniform(-1, 1, net.nbus)
            U = V * np.exp(1j * th)
            S = U * np.conj(Y @ U)
            for i in range(net.nbus):
                c_re, c_im = acopf_balance(i, V, th, net)
                assert c_re == pytest.approx(S[i].real, abs=1e-12)
                assert c_im == pytest.approx(S[i].imag, abs=1e-12)

    def test_gradients(self):
        net = toy_network(nbus=2, T=2)
        V = np.array([1.05, 0.98])
        th = np.array([0.0, -0.12])
        for i in range(net.nbus):
            dre_dV, dre_dth, dim_dV, dim_dth = acopf_balance_grad(i, V, th,
                                                                  net)
            fd_re_V = finite_diff_grad(
                lambda v: acopf_balance(i, v, th, net)[0], V.copy())
            fd_im_th = finite_diff_grad(
                lambda t: acopf_balance(i, V, t, net)[1], th.copy())
            assert np.allclose(dre_dV, fd_re_V, atol=1e-6)
            assert np.allclose(dim_dth, fd_im_th, atol=1e-6)

    def test_positive_voltage_required(self):
        net = toy_network(nbus=2, T=2)
        with pytest.raises(ValueError):
            acopf_balance(0, np.array([1.0, -1.0]), np.zeros(2), net)


class TestAcopfToy:
    def test_structure(self):
        net = toy_network(nbus=2, T=3)
        prob = gen_acopf_toy(net, 3)
        lay = acopf_block_layout(net)
        assert prob.T == 3
        assert prob.m == net.ngen * 2
        assert all(blk.n == lay["n"] for blk in prob.blocks)
        assert validate_problem(prob).ok
        for blk in prob.blocks:
            # reference angle pinned through equal bounds
            assert blk.set.lower[lay["theta"]] == blk.set.upper[lay["theta"]]
            assert len(blk.set.equalities) == 2 * net.nbus

    def test_single_period_has_no_coupling(self):
        net = toy_network(nbus=2, T=1)
        prob = gen_acopf_toy(net, 1)
        assert prob.m == 0 and prob.b.size == 0

    def test_balance_equalities_close_at_consistent_point(self):
        """A hand-built power flow solution satisfies the builtin equality
        functions: injections computed from the complex balance equal the
        generator coordinates."""
        net = twin_generator_network()
        prob = gen_acopf_toy(net, 2)
        lay = acopf_block_layout(net)
        V = np.array([1.02, 1.01])
        th = np.array([0.0, -0.05])
        Y = net.y_re.toarray() + 1j * net.y_im.toarray()
        U = V * np.exp(1j * th)
        S = U * np.conj(Y @ U)
        x = np.zeros(lay["n"])
        x[lay["v"]:lay["v"] + 2] = V
        x[lay["theta"]:lay["theta"] + 2] = th
        for g, bus in enumerate(net.gen_bus):
            x[g] = S[bus].real + net.pd[0, bus]
            x[lay["q"] + g] = S[bus].imag + net.qd[0, bus]
        for eq in prob.blocks[0].set.equalities:
            assert abs(eq.value(x)) < 1e-10

    def test_period_cap(self):
        net = toy_network(nbus=2, T=3)
        with pytest.raises(ValueError):
            gen_acopf_toy(net, 30)
        with pytest.raises(ValueError):
            gen_acopf_toy(net, 4)  # network only carries 3 load periods

    def test_cost_overrides(self):
        net = twin_generator_network()
        prob = gen_acopf_toy(net, 2, cost_a=[0.2, 0.25], cost_b=0.1)
        qdiag = prob.blocks[0].objective.Q.diagonal()
        assert qdiag[0] == pytest.approx(0.4)
        assert qdiag[1] == pytest.approx(0.5)
        assert np.allclose(prob.blocks[0].objective.c[:2], 0.1)


class TestNetworks:
    def test_toy_network_amplitude_cap(self):
        net = toy_network(nbus=2, T=6, load_amplitude=5.0, ramp=0.1)
        steps = np.abs(np.diff(net.pd[:, 1]))
        assert np.all(steps <= net.ramp[0] + 1e-12)

    def test_twin_generator_symmetry(self):
        net = twin_generator_network(T=4, load=0.7)
        assert net.ngen == 2 and net.gen_bus == [0, 1]
        assert net.nperiods == 4
        assert np.all(net.pd == 0.7)

    def test_neighbors(self):
        net = toy_network(nbus=3, T=2)
        nbrs, yre, yim = net.neighbors(1)
        assert nbrs == [0, 2]
        assert len(yre) == 2 and len(yim) == 2

    def test_json_round_trip(self):
        net = toy_network(nbus=3, T=4)
        net2 = network_from_json(network_to_json(net))
        assert network_to_json(net2) == network_to_json(net)
        assert np.allclose(net2.pd, net.pd)
