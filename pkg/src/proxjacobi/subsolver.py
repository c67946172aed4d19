"""Local solution of the block subproblems.

Three built-in solvers behind a deterministic dispatcher: an exact Newton
step for unconstrained quadratic blocks, projected gradient descent for box
constraints, and an inner augmented-Lagrangian loop for equality-described
sets.  All solvers are monotone: the returned objective value never exceeds
the warm start's.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .model import Quadratic

STATUS_CONVERGED = "converged"
STATUS_ITERATION_CAP = "iteration-cap"
STATUS_NUMERICAL_FAILURE = "numerical-failure"

ARMIJO_C = 1e-4
BB_STEP_MIN = 1e-8
BB_STEP_MAX = 1e8
ALM_SIGMA_INIT = 10.0
ALM_SIGMA_GROWTH = 10.0
ALM_SIGMA_CAP = 1e12
ALM_MAX_ROUNDS = 40


@dataclass
class BlockSolveRequest:
    """One block subproblem: objective callbacks, block set and warm start."""

    t: int
    objective: object          # exposes value(x) and gradient(x)
    set: object                # ConstraintSet
    warm_start: np.ndarray
    tol: float = 1e-9
    max_iter: int = 500

    def __post_init__(self):
        ws = np.asarray(self.warm_start, dtype=float)
        # clip tiny bound violations on entry
        self.warm_start = np.clip(ws, self.set.lower, self.set.upper)


@dataclass
class BlockSolveResult:
    x: np.ndarray
    mu: np.ndarray
    status: str
    inner_iterations: int
    grad_norm: float
    solver: str = ""

    @property
    def converged(self):
        return self.status == STATUS_CONVERGED


def project_box(x, lower, upper):
    """Coordinatewise clamp onto [lower, upper]."""
    return np.minimum(np.maximum(np.asarray(x, dtype=float), lower), upper)


def _quadratic_hessian(obj):
    """Dense Hessian Q + (rho + tau_x) A'A of the block subproblem."""
    Q = obj.f.Q.toarray()
    AtA = (obj.A.T @ obj.A).toarray()
    return Q + (obj.rho + obj.tau_x) * AtA


def solve_quadratic_exact(req):
    """Exact Newton step for an unconstrained quadratic block subproblem.

    Requires a positive definite subproblem Hessian; indefinite or singular
    systems report numerical failure so the caller can fall back to
    projected gradient.
    """
    obj = req.objective
    if not isinstance(obj.f, Quadratic):
        raise ValueError("quadratic-exact solver requires a quadratic objective")
    n = req.warm_start.shape[0]
    H = _quadratic_hessian(obj)
    g0 = obj.gradient(np.zeros(n))
    try:
        cho = scipy.linalg.cho_factor(H)
        x = scipy.linalg.cho_solve(cho, -g0)
    except scipy.linalg.LinAlgError:
        return BlockSolveResult(
            x=req.warm_start.copy(), mu=np.empty(0),
            status=STATUS_NUMERICAL_FAILURE, inner_iterations=0,
            grad_norm=float("inf"), solver="quadratic-exact")
    gn = float(np.linalg.norm(obj.gradient(x)))
    if not np.isfinite(gn) or gn > 1e-10 * (1.0 + float(np.linalg.norm(g0))):
        # refine once; Cholesky solves are accurate enough in practice
        x = x - scipy.linalg.cho_solve(cho, obj.gradient(x))
        gn = float(np.linalg.norm(obj.gradient(x)))
    return BlockSolveResult(
        x=x, mu=np.empty(0), status=STATUS_CONVERGED, inner_iterations=1,
        grad_norm=gn, solver="quadratic-exact")


def _linear_equalities(eqs):
    """The (gradient, rhs) rows of all-linear equality sets, else None."""
    rows = []
    for eq in eqs:
        if not isinstance(eq, Quadratic) or eq.Q.nnz:
            return None
        rows.append((eq.c, -eq.c0))
    return rows


def solve_quadratic_kkt(req):
    """Exact KKT solve for quadratic blocks with linear equalities and a box.

    Coordinates pinned by equal bounds are eliminated; the result is only
    accepted when every remaining bound is strictly satisfied, so the box
    multipliers are all zero and the KKT point is the constrained minimizer.
    Reports numerical failure otherwise so the caller can fall back.
    """
    obj = req.objective
    if not isinstance(obj.f, Quadratic):
        raise ValueError("quadratic-kkt solver requires a quadratic objective")
    rows = _linear_equalities(req.set.equalities)
    if rows is None:
        raise ValueError("quadratic-kkt solver requires linear equalities")
    n = req.warm_start.shape[0]
    lo, hi = req.set.lower, req.set.upper
    pinned = np.isfinite(lo) & (lo == hi)
    free = ~pinned
    nf = int(np.sum(free))
    H = _quadratic_hessian(obj)
    g0 = obj.gradient(np.zeros(n))
    x_pin = np.where(pinned, lo, 0.0)
    C = np.zeros((len(rows), n))
    rhs_eq = np.zeros(len(rows))
    for i, (coef, rhs) in enumerate(rows):
        C[i, : coef.shape[0]] = coef
        rhs_eq[i] = rhs
    r = len(rows)
    kkt = np.zeros((nf + r, nf + r))
    kkt[:nf, :nf] = H[np.ix_(free, free)]
    kkt[:nf, nf:] = C[:, free].T
    kkt[nf:, :nf] = C[:, free]
    rhs = np.concatenate([
        -(g0[free] + H[np.ix_(free, pinned)] @ x_pin[pinned]),
        rhs_eq - C[:, pinned] @ x_pin[pinned],
    ])
    fail = BlockSolveResult(
        x=req.warm_start.copy(), mu=np.empty(0),
        status=STATUS_NUMERICAL_FAILURE, inner_iterations=0,
        grad_norm=float("inf"), solver="quadratic-kkt")
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return fail
    if not np.all(np.isfinite(sol)):
        return fail
    x = x_pin.copy()
    x[free] = sol[:nf]
    mu = sol[nf:]
    if np.any(x[free] <= lo[free]) or np.any(x[free] >= hi[free]):
        return fail
    resid = float(np.max(np.abs(kkt @ sol - rhs), initial=0.0))
    if resid > 1e-8 * (1.0 + float(np.max(np.abs(rhs), initial=0.0))):
        return fail
    cvals = np.array([eq.value(x) for eq in req.set.equalities])
    gn = float(np.max(np.abs(cvals), initial=0.0))
    return BlockSolveResult(
        x=x, mu=mu, status=STATUS_CONVERGED, inner_iterations=1,
        grad_norm=gn, solver="quadratic-kkt")


def _pg_criticality(x, g, lower, upper):
    """Infinity norm of x - proj(x - g) (unit-step projected gradient)."""
    return float(np.max(np.abs(x - project_box(x - g, lower, upper)), initial=0.0))


def solve_box_pg(req, value=None, gradient=None):
    """Projected gradient descent over a box.

    The trial step is initialized from a Barzilai-Borwein estimate clamped
    to [1e-8, 1e8].  When the objective exposes a constant Hessian the step
    along the projected direction is an exact line search; otherwise Armijo
    backtracking is used.  Accepted steps never increase the objective, so
    the result's value is at most the warm start's.
    """
    obj = req.objective
    value = value or obj.value
    gradient = gradient or obj.gradient
    hess_vec = (obj.hess_vec
                if getattr(obj, "constant_hessian", False) else None)
    lo, hi = req.set.lower, req.set.upper
    x = project_box(req.warm_start, lo, hi)
    f = value(x)
    g = gradient(x)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        return BlockSolveResult(
            x=x, mu=np.empty(0), status=STATUS_NUMERICAL_FAILURE,
            inner_iterations=0, grad_norm=float("inf"), solver="box-pg")
    step = 1.0
    status = STATUS_ITERATION_CAP
    it = 0
    crit = _pg_criticality(x, g, lo, hi)
    for it in range(1, req.max_iter + 1):
        if crit <= req.tol:
            status = STATUS_CONVERGED
            break
        d = project_box(x - step * g, lo, hi) - x
        slope = float(g @ d)
        if slope >= 0.0:
            # degenerate direction; retry from a conservative step
            step = max(BB_STEP_MIN, step * 0.25)
            d = project_box(x - step * g, lo, hi) - x
            slope = float(g @ d)
            if slope >= 0.0:
                status = STATUS_CONVERGED if crit <= req.tol else STATUS_ITERATION_CAP
                break
        if hess_vec is not None:
            # exact line search along the projected direction
            curv = float(d @ hess_vec(d))
            alpha = 1.0 if curv <= 0 else min(1.0, -slope / curv)
            f_new = value(x + alpha * d)
            if not np.isfinite(f_new):
                return BlockSolveResult(
                    x=x, mu=np.empty(0), status=STATUS_NUMERICAL_FAILURE,
                    inner_iterations=it, grad_norm=crit, solver="box-pg")
        else:
            alpha = 1.0
            f_new = value(x + d)
            halvings = 0
            while f_new > f + ARMIJO_C * alpha * slope and halvings < 60:
                alpha *= 0.5
                halvings += 1
                f_new = value(x + alpha * d)
            if not np.isfinite(f_new):
                return BlockSolveResult(
                    x=x, mu=np.empty(0), status=STATUS_NUMERICAL_FAILURE,
                    inner_iterations=it, grad_norm=crit, solver="box-pg")
            if f_new > f:
                # no decrease found along d; declare stationarity at tolerance
                status = (STATUS_CONVERGED if crit <= req.tol
                          else STATUS_ITERATION_CAP)
                break
        x_new = x + alpha * d
        g_new = gradient(x_new)
        if not np.all(np.isfinite(g_new)):
            return BlockSolveResult(
                x=x_new, mu=np.empty(0), status=STATUS_NUMERICAL_FAILURE,
                inner_iterations=it, grad_norm=float("inf"), solver="box-pg")
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 0:
            step = min(max(float(s @ s) / sy, BB_STEP_MIN), BB_STEP_MAX)
        else:
            step = BB_STEP_MAX
        x, f, g = x_new, f_new, g_new
        crit = _pg_criticality(x, g, lo, hi)
        if crit <= req.tol:
            status = STATUS_CONVERGED
            break
    return BlockSolveResult(
        x=x, mu=np.empty(0), status=status, inner_iterations=it,
        grad_norm=crit, solver="box-pg")


def solve_box_newton(req, value=None, gradient=None, hessian=None):
    """Projected Newton over a box for objectives with analytic Hessians.

    Coordinates pressed against a bound by the gradient are frozen; the
    Newton system on the free set is regularized by an escalating ridge
    until it factors.  Backtracking uses the projected-arc Armijo rule with
    a machine-noise allowance so the final sharpening steps near the
    minimizer are not rejected.
    """
    obj = req.objective
    value = value or obj.value
    gradient = gradient or obj.gradient
    hessian = hessian or obj.hessian
    lo, hi = req.set.lower, req.set.upper
    x = project_box(req.warm_start, lo, hi)
    f = value(x)
    g = gradient(x)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        return BlockSolveResult(
            x=x, mu=np.empty(0), status=STATUS_NUMERICAL_FAILURE,
            inner_iterations=0, grad_norm=float("inf"), solver="box-newton")
    status = STATUS_ITERATION_CAP
    it = 0
    crit = _pg_criticality(x, g, lo, hi)
    best_crit = crit
    stall = 0
    for it in range(1, req.max_iter + 1):
        if crit <= req.tol:
            status = STATUS_CONVERGED
            break
        if crit >= 0.999 * best_crit:
            stall += 1
            if stall >= 20:
                break
        else:
            stall = 0
            best_crit = crit
        eps_a = min(1e-8, crit)
        active = (((x <= lo + eps_a) & (g > 0))
                  | ((x >= hi - eps_a) & (g < 0)))
        free = np.where(~active)[0]
        if free.size == 0:
            status = (STATUS_CONVERGED if crit <= req.tol
                      else STATUS_ITERATION_CAP)
            break
        H = hessian(x)
        Hff = H[np.ix_(free, free)]
        scale = max(float(np.max(np.abs(np.diag(Hff)))), 1.0)
        ridge = 0.0
        d_f = None
        while ridge < 1e12 * scale:
            try:
                cho = scipy.linalg.cho_factor(
                    Hff + ridge * np.eye(free.size), check_finite=False)
                d_f = scipy.linalg.cho_solve(cho, -g[free],
                                             check_finite=False)
                break
            except scipy.linalg.LinAlgError:
                ridge = max(10.0 * ridge, 1e-8 * scale)
        if d_f is None or not np.all(np.isfinite(d_f)):
            d_f = -g[free]
        d = np.zeros_like(x)
        d[free] = d_f
        alpha = 1.0
        moved = False
        for _ in range(40):
            x_new = project_box(x + alpha * d, lo, hi)
            step = x_new - x
            f_new = value(x_new)
            if np.isfinite(f_new) and f_new <= (
                    f + ARMIJO_C * float(g @ step)
                    + 1e-12 * (1.0 + abs(f))):
                moved = True
                break
            alpha *= 0.5
        if not moved or np.array_equal(x_new, x):
            status = (STATUS_CONVERGED if crit <= req.tol
                      else STATUS_ITERATION_CAP)
            break
        x, f = x_new, f_new
        g = gradient(x)
        if not np.all(np.isfinite(g)):
            return BlockSolveResult(
                x=x, mu=np.empty(0), status=STATUS_NUMERICAL_FAILURE,
                inner_iterations=it, grad_norm=float("inf"),
                solver="box-newton")
        crit = _pg_criticality(x, g, lo, hi)
        if crit <= req.tol:
            status = STATUS_CONVERGED
            break
    return BlockSolveResult(
        x=x, mu=np.empty(0), status=status, inner_iterations=it,
        grad_norm=crit, solver="box-newton")


class _PenalizedObjective:
    """obj + y'c + (sigma/2)||c||^2 over the box, for the inner ALM solves."""

    def __init__(self, obj, equalities, y, sigma):
        self.obj = obj
        self.equalities = equalities
        self.y = y
        self.sigma = sigma
        # linear equalities keep the penalized Hessian constant
        self.constant_hessian = (
            getattr(obj, "constant_hessian", False)
            and all(isinstance(eq, Quadratic) and eq.Q.nnz == 0
                    for eq in equalities))
        if self.constant_hessian:
            self._eq_grads = [eq.gradient(np.zeros(len(eq.c)))
                              for eq in equalities]

    def hess_vec(self, v):
        out = self.obj.hess_vec(v)
        for g in self._eq_grads:
            gv = np.zeros_like(v)
            gv[: g.shape[0]] = g
            out += self.sigma * float(gv @ v) * gv
        return out

    @property
    def has_hessian(self):
        return all(hasattr(eq, "hessian") for eq in self.equalities) and \
            hasattr(self.obj, "hessian")

    def hessian(self, x):
        H = self.obj.hessian(x)
        for i, eq in enumerate(self.equalities):
            ci = eq.value(x)
            g = eq.gradient(x)
            H += (self.y[i] + self.sigma * ci) * eq.hessian(x)
            H += self.sigma * np.outer(g, g)
        return H

    def _cvals(self, x):
        return np.array([eq.value(x) for eq in self.equalities])

    def value(self, x):
        c = self._cvals(x)
        return (self.obj.value(x) + float(self.y @ c)
                + 0.5 * self.sigma * float(c @ c))

    def gradient(self, x):
        g = self.obj.gradient(x)
        for i, eq in enumerate(self.equalities):
            ci = eq.value(x)
            g = g + (self.y[i] + self.sigma * ci) * eq.gradient(x)
        return g


def solve_equality_alm(req):
    """Inner augmented-Lagrangian loop for equality-described block sets.

    Multiplier estimates are updated as ``y <- y + sigma c``; the penalty
    grows tenfold whenever the equality violation fails to shrink by a
    factor of 4 in a round, up to the 1e12 cap.
    """
    eqs = req.set.equalities
    r = len(eqs)
    y = np.zeros(r)
    sigma = ALM_SIGMA_INIT
    x = req.warm_start.copy()
    total_inner = 0
    c_prev = float("inf")
    best = None
    x_last_round = None
    for _ in range(ALM_MAX_ROUNDS):
        pen = _PenalizedObjective(req.objective, eqs, y, sigma)
        inner_req = BlockSolveRequest(
            t=req.t, objective=pen, set=req.set, warm_start=x,
            tol=req.tol, max_iter=req.max_iter)
        if pen.has_hessian:
            inner = solve_box_newton(inner_req)
        else:
            inner = solve_box_pg(inner_req)
        total_inner += inner.inner_iterations
        if inner.status == STATUS_NUMERICAL_FAILURE:
            return BlockSolveResult(
                x=inner.x, mu=y, status=STATUS_NUMERICAL_FAILURE,
                inner_iterations=total_inner, grad_norm=inner.grad_norm,
                solver="equality-alm")
        x = inner.x
        c = pen._cvals(x)
        cn = float(np.max(np.abs(c), initial=0.0))
        y = y + sigma * c
        if best is None or cn < best[0]:
            best = (cn, x.copy(), y.copy(), inner.grad_norm)
        if cn <= req.tol and inner.grad_norm <= req.tol:
            return BlockSolveResult(
                x=x, mu=y, status=STATUS_CONVERGED,
                inner_iterations=total_inner, grad_norm=inner.grad_norm,
                solver="equality-alm")
        if x_last_round is not None:
            moved = float(np.max(np.abs(x - x_last_round), initial=0.0))
            if moved <= 1e-14 * (1.0 + float(np.max(np.abs(x), initial=0.0))):
                # iterates have stalled; further rounds cannot improve
                break
        x_last_round = x.copy()
        if cn > c_prev / 4.0:
            if sigma >= ALM_SIGMA_CAP:
                break
            sigma = min(sigma * ALM_SIGMA_GROWTH, ALM_SIGMA_CAP)
        c_prev = cn
    cn, xb, yb, gn = best
    return BlockSolveResult(
        x=xb, mu=yb, status=STATUS_ITERATION_CAP,
        inner_iterations=total_inner, grad_norm=gn, solver="equality-alm")


def dispatch(req):
    """Route a block solve to the applicable solver.

    Unconstrained quadratic blocks take the exact Newton path (falling back
    to projected gradient on an indefinite Hessian); equality-constrained
    sets take the inner ALM path; everything else is projected gradient over
    the box.
    """
    if req.set.equalities:
        if (isinstance(req.objective.f, Quadratic)
                and _linear_equalities(req.set.equalities) is not None):
            result = solve_quadratic_kkt(req)
            if result.status != STATUS_NUMERICAL_FAILURE:
                return result
        return solve_equality_alm(req)
    if not req.set.has_bounds and isinstance(req.objective.f, Quadratic):
        result = solve_quadratic_exact(req)
        if result.status != STATUS_NUMERICAL_FAILURE:
            return result
    return solve_box_pg(req)
