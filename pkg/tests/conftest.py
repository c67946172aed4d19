"""Shared instance builders for the test suite."""

import numpy as np
import pytest
import scipy.linalg

from proxjacobi import problems
from proxjacobi.cli import default_start
from proxjacobi.subsolver import BlockSolveResult, STATUS_CONVERGED

QP_SEEDS = list(range(20))


def qp_shapes(seed):
    """Deterministic (T, n_t, m) spread over T in {2..6}, n_t <= 5, m <= 4."""
    T = 2 + seed % 5
    n_t = 2 + (seed * 7) % 4
    m = 1 + (seed * 3) % 4
    return T, n_t, m


def build_qp(seed):
    T, n_t, m = qp_shapes(seed)
    return problems.gen_coupled_qp(seed, T, n_t, m)


def cached_exact_solvers(problem, params):
    """Per-block solver overrides with the Cholesky factor computed once.

    Equivalent to the quadratic-exact path for fixed parameters; used by the
    long fixed-parameter runs to keep the suite fast.
    """
    overrides = {}
    for t, blk in enumerate(problem.blocks):
        H = blk.objective.Q.toarray() + (params.rho + params.tau_x) * (
            blk.coupling.T @ blk.coupling).toarray()
        cho = scipy.linalg.cho_factor(H)

        def solve(req, cho=cho, n=blk.n):
            g0 = req.objective.gradient(np.zeros(n))
            x = scipy.linalg.cho_solve(cho, -g0)
            return BlockSolveResult(
                x=x, mu=np.empty(0), status=STATUS_CONVERGED,
                inner_iterations=1, grad_norm=0.0, solver="cached-exact")

        overrides[t] = solve
    return overrides


@pytest.fixture(scope="session")
def qp_suite():
    return [(seed,) + build_qp(seed) for seed in QP_SEEDS]


@pytest.fixture(scope="session")
def acopf_twin_problem():
    net = problems.twin_generator_network()
    return problems.gen_acopf_toy(net, 3, cost_a=[0.2, 0.25],
                                  cost_b=[0.1, 0.12])


__all__ = ["QP_SEEDS", "qp_shapes", "build_qp", "cached_exact_solvers",
           "default_start"]
