"""Primal-dual logarithmic-barrier interior-point method.

Solves ``min f(x)`` subject to ``h(x) = 0``, ``g(x) >= 0`` and box bounds,
where ``f`` is a separable convex quadratic and ``h``, ``g`` are the
constraint objects of a :class:`~opfrelax.model.ModelInstance`.  Inequality
iterates stay strictly feasible; equalities may start infeasible and are
driven to zero by the Newton steps.  Each Newton system is the
barrier-reduced KKT matrix with inertia correction.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

__all__ = ["SolveOptions", "SolveResult", "Duals", "solve", "solve_ac_heuristic", "kkt_residuals", "SolverError"]

log = logging.getLogger("opfrelax.solver")

NONCONVEX = ("ac-trigonometric", "cycle-polynomial")
STATUSES = ("optimal", "local-optimal", "max-iter", "infeasible-detected", "numerical-failure")


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveOptions:
    tol_kkt: float = 1e-6
    mu0: float = 1.0
    mu_shrink: float = 0.2
    max_outer: int = 100
    max_inner: int = 60
    max_iter: int = 1000
    ftb: float = 0.995
    reg: float = 1e-8
    reg_max: float = 1e10
    mu_final: float | None = None  # defaults to tol_kkt
    scale_objective: bool = True

    def __post_init__(self):
        if not 0 < self.mu_shrink < 1:
            raise ValueError("mu_shrink must lie in (0, 1)")
        if not 0 < self.ftb < 1:
            raise ValueError("ftb must lie in (0, 1)")
        if self.tol_kkt <= 0:
            raise ValueError("tol_kkt must be positive")
        if self.mu0 <= 0:
            raise ValueError("mu0 must be positive")


@dataclass
class Duals:
    """Multipliers in the convention ``grad f = J_h^T eq + J_g^T ineq + lower - upper``."""

    eq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ineq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None


@dataclass
class SolveResult:
    status: str
    objective: float
    x: np.ndarray
    point: dict
    kkt_residuals: tuple
    iterations: int
    wall_time: float
    duals: Duals | None = None
    mu: float = 0.0
    message: str = ""
    numerical_warning: bool = False

    @property
    def ok(self):
        return self.status in ("optimal", "local-optimal")


# ---------------------------------------------------------------------------
# problem assembly

class _Problem:
    """Dense evaluation of a model: objective, equalities (incl. fixed variables),
    and inequalities (general constraints, then lower bounds, then upper bounds)."""

    def __init__(self, model):
        self.model = model
        self.n = model.n
        lb, ub = model.registry.bounds()
        self.lb, self.ub = lb, ub
        fixed = np.flatnonzero(lb == ub)
        self.fixed = fixed
        free = lb < ub
        self.L = np.flatnonzero(free & np.isfinite(lb))
        self.U = np.flatnonzero(free & np.isfinite(ub))
        eqs = [c for c in model.constraints if c.sense == "eq"]
        ineqs = [c for c in model.constraints if c.sense == "ge"]
        self.lin_eq = [c for c in eqs if c.linear]
        self.nl_eq = [c for c in eqs if not c.linear]
        self.lin_ge = [c for c in ineqs if c.linear]
        self.nl_ge = [c for c in ineqs if not c.linear]
        self.eq_cons = self.lin_eq + self.nl_eq
        self.ge_cons = self.lin_ge + self.nl_ge
        n = self.n
        # linear parts as dense matrices
        self.A_eq, self.b_eq = self._stack(self.lin_eq)
        self.A_ge, self.b_ge = self._stack(self.lin_ge)
        nf = len(fixed)
        self.A_fix = np.zeros((nf, n))
        self.A_fix[np.arange(nf), fixed] = 1.0
        self.m = len(self.eq_cons) + nf
        self.p_gen = len(self.ge_cons)
        self.p = self.p_gen + len(self.L) + len(self.U)
        self.obj = model.objective
        self.hf = self.obj.hessian_diag(n) if self.obj is not None else np.zeros(n)

    def _stack(self, cons):
        A = np.zeros((len(cons), self.n))
        b = np.zeros(len(cons))
        for r, c in enumerate(cons):
            A[r, c.idx] = c.coefs
            b[r] = c.const
        return A, b

    def f(self, x):
        return self.obj.value(x) if self.obj is not None else 0.0

    def grad_f(self, x):
        return self.obj.gradient(x) if self.obj is not None else np.zeros(self.n)

    def h(self, x):
        out = [self.A_eq @ x + self.b_eq]
        out.append(np.array([c.value(x) for c in self.nl_eq]))
        out.append(x[self.fixed] - self.lb[self.fixed])
        return np.concatenate(out)

    def jac_h(self, x):
        J = np.zeros((self.m, self.n))
        k = len(self.lin_eq)
        J[:k] = self.A_eq
        for r, c in enumerate(self.nl_eq):
            J[k + r, c.idx] += c.gradient(x)
        J[k + len(self.nl_eq):] = self.A_fix
        return J

    def g(self, x):
        out = [self.A_ge @ x + self.b_ge]
        out.append(np.array([c.value(x) for c in self.nl_ge]))
        out.append(x[self.L] - self.lb[self.L])
        out.append(self.ub[self.U] - x[self.U])
        return np.concatenate(out)

    def g_general(self, x):
        return np.concatenate([self.A_ge @ x + self.b_ge, np.array([c.value(x) for c in self.nl_ge])])

    def jac_g(self, x):
        J = np.zeros((self.p, self.n))
        k = len(self.lin_ge)
        J[:k] = self.A_ge
        for r, c in enumerate(self.nl_ge):
            J[k + r, c.idx] += c.gradient(x)
        off = self.p_gen
        J[off + np.arange(len(self.L)), self.L] = 1.0
        off += len(self.L)
        J[off + np.arange(len(self.U)), self.U] = -1.0
        return J

    def hess_lag(self, x, s, lam, z):
        """``s * hess f - sum lam_j hess h_j - sum z_i hess g_i``."""
        H = np.diag(s * self.hf)
        k = len(self.lin_eq)
        for r, c in enumerate(self.nl_eq):
            if lam[k + r] != 0.0:
                H[np.ix_(c.idx, c.idx)] -= lam[k + r] * c.hessian(x)
        k = len(self.lin_ge)
        for r, c in enumerate(self.nl_ge):
            if z[k + r] != 0.0:
                H[np.ix_(c.idx, c.idx)] -= z[k + r] * c.hessian(x)
        return H

    def split_ineq(self, z):
        a = self.p_gen
        b = a + len(self.L)
        lower = np.zeros(self.n)
        upper = np.zeros(self.n)
        lower[self.L] = z[a:b]
        upper[self.U] = z[b:]
        return z[:a], lower, upper


# ---------------------------------------------------------------------------
# residuals

def _as_vector(model, point):
    if isinstance(point, dict):
        return model.vector(point)
    return np.asarray(point, dtype=float)


def _residual_scale(grad_inf, dual_l1, count):
    """Divisor for stationarity and complementarity.

    The objective part makes the residuals independent of the currency unit;
    the multiplier part (mean magnitude over 100, as in common interior-point
    codes) keeps degenerate constraints, whose multipliers diverge at the
    optimum, from masking a converged primal point.
    """
    mean_dual = dual_l1 / max(1, count)
    return max(1.0, grad_inf, mean_dual / 100.0)


def kkt_residuals(model, point, duals):
    """(stationarity, primal infeasibility, complementarity) at ``point``.

    Stationarity is ``|grad f - J_h^T eq - J_g^T ineq - lower + upper|_inf``
    and complementarity the largest ``|dual * slack|`` over inequalities and
    bounds, both divided by ``max(1, |grad f|_inf, mean|dual| / 100)``.  Primal infeasibility is the largest
    equality residual or inequality/bound violation.
    """
    prob = _Problem(model)
    x = _as_vector(model, point)
    if not isinstance(duals, Duals):
        duals = Duals(ineq=np.asarray(duals, dtype=float))
    n = prob.n
    lam = np.zeros(len(prob.eq_cons)) if duals.eq is None or len(duals.eq) == 0 else np.asarray(duals.eq, float)
    zg = np.zeros(prob.p_gen) if duals.ineq is None or len(duals.ineq) == 0 else np.asarray(duals.ineq, float)
    lower = np.zeros(n) if duals.lower is None else np.asarray(duals.lower, float)
    upper = np.zeros(n) if duals.upper is None else np.asarray(duals.upper, float)
    if len(lam) not in (len(prob.eq_cons), prob.m):
        raise ValueError(f"expected {len(prob.eq_cons)} equality duals, got {len(lam)}")
    if len(zg) != prob.p_gen:
        raise ValueError(f"expected {prob.p_gen} inequality duals, got {len(zg)}")
    lam_full = np.zeros(prob.m)
    lam_full[: len(lam)] = lam
    gf = prob.grad_f(x)
    Jh = prob.jac_h(x)
    Jg = prob.jac_g(x)[: prob.p_gen]
    r = gf - Jh.T @ lam_full - Jg.T @ zg - lower + upper
    if len(lam) == len(prob.eq_cons):
        # fixed variables carry whatever multiplier closes stationarity
        r[prob.fixed] = 0.0
    stat = float(np.abs(r).max(initial=0.0))
    h = prob.h(x)
    gg = prob.g_general(x)
    lo_slack = x - prob.lb
    up_slack = prob.ub - x
    viol = [np.abs(h).max(initial=0.0), (-gg).max(initial=0.0)]
    fin_l, fin_u = np.isfinite(prob.lb), np.isfinite(prob.ub)
    dual_l1 = np.abs(lam_full).sum() + np.abs(zg).sum() + np.abs(lower[fin_l]).sum() + np.abs(upper[fin_u]).sum()
    scale = _residual_scale(float(np.abs(gf).max(initial=0.0)), float(dual_l1), prob.m + prob.p)
    viol.append((-lo_slack[fin_l]).max(initial=0.0))
    viol.append((-up_slack[fin_u]).max(initial=0.0))
    primal = float(max(viol))
    comp = [np.abs(zg * gg).max(initial=0.0)]
    comp.append(np.abs(lower[fin_l] * lo_slack[fin_l]).max(initial=0.0))
    comp.append(np.abs(upper[fin_u] * up_slack[fin_u]).max(initial=0.0))
    return stat / scale, primal, float(max(comp)) / scale


# ---------------------------------------------------------------------------
# linear algebra

class _Factor:
    """Symmetric eigendecomposition of the equilibrated matrix: inertia and a solver in one pass.

    Equilibration is a congruence, so the inertia is unchanged.
    """

    def __init__(self, K):
        d = np.ones(K.shape[0])
        for _ in range(5):
            row = np.abs(K * d[:, None] * d[None, :]).max(axis=1)
            row[row == 0] = 1.0
            d /= np.sqrt(row)
        self.d = d
        self.vals, self.vecs = np.linalg.eigh(K * d[:, None] * d[None, :])
        self.zero_tol = 1e-13 * max(1.0, float(np.abs(self.vals).max(initial=0.0)))

    def inertia(self):
        v = self.vals
        return int((v > self.zero_tol).sum()), int((v < -self.zero_tol).sum()), int((np.abs(v) <= self.zero_tol).sum())

    def solve(self, rhs):
        return self.d * (self.vecs @ ((self.vecs.T @ (self.d * rhs)) / self.vals))


def _factor_kkt(W, J, reg, reg_max, state):
    """Regularize until the KKT matrix has inertia (n, m, 0)."""
    n, m = W.shape[0], J.shape[0]
    delta_c = 0.0
    delta = reg
    while True:
        K = np.zeros((n + m, n + m))
        K[:n, :n] = W + delta * np.eye(n)
        K[:n, n:] = J.T
        K[n:, :n] = J
        K[n:, n:] = -delta_c * np.eye(m)
        fac = _Factor(K)
        pos, neg, zero = fac.inertia()
        if pos == n and neg == m and zero == 0:
            state["delta"] = delta
            return fac
        if zero and delta_c == 0.0 and m:
            delta_c = 1e-8
            continue
        delta *= 10
        if delta > reg_max:
            return None


# ---------------------------------------------------------------------------
# main loop

def _strict_box(prob, x):
    lb, ub = prob.lb, prob.ub
    x = x.copy()
    x[prob.fixed] = lb[prob.fixed]
    free = lb < ub
    width = np.where(free, ub - lb, 0.0)
    push_l = np.minimum(1e-8 * np.maximum(1.0, np.abs(lb)), 1e-2 * width)
    push_u = np.minimum(1e-8 * np.maximum(1.0, np.abs(ub)), 1e-2 * width)
    with np.errstate(invalid="ignore"):
        lo = np.where(np.isfinite(lb), lb + push_l, -np.inf)
        hi = np.where(np.isfinite(ub), ub - push_u, np.inf)
    x[free] = np.clip(x[free], lo[free], hi[free])
    return x


def _objective_scale(prob, x, opts):
    if not opts.scale_objective:
        return 1.0
    gmax = float(np.abs(prob.grad_f(x)).max(initial=0.0))
    return min(1.0, 100.0 / gmax) if gmax > 0 else 1.0


def _merit(prob, x, s, mu, nu):
    g = prob.g(x)
    if np.any(g <= 0):
        return math.inf
    return s * prob.f(x) - mu * float(np.log(g).sum()) + nu * float(np.abs(prob.h(x)).sum())


def _max_step(prob, x, dx, g0, tau, g_is_lin):
    """Largest alpha in (0, 1] (by halving) with g(x + alpha dx) >= (1 - tau) g(x)."""
    alpha = 1.0
    # exact ratio test for the linear rows and bounds
    Jg = prob._lin_ge_jac if g_is_lin is None else g_is_lin
    lin_rows = prob._lin_rows
    if len(lin_rows):
        dg = Jg @ dx
        g_lin = g0[lin_rows]
        neg = dg < 0
        if np.any(neg):
            alpha = min(alpha, float(np.min(-tau * g_lin[neg] / dg[neg])))
    nl = prob._nl_rows
    if len(nl):
        for _ in range(60):
            gt = prob.g(x + alpha * dx)[nl]
            if np.all(gt >= (1 - tau) * g0[nl]):
                break
            alpha *= 0.5
        else:
            return 0.0
    return alpha


def _prepare_rows(prob):
    k = len(prob.lin_ge)
    nl = np.arange(k, prob.p_gen)
    lin = np.concatenate([np.arange(k), np.arange(prob.p_gen, prob.p)]).astype(int)
    J = np.zeros((len(lin), prob.n))
    J[:k] = prob.A_ge
    J[k + np.arange(len(prob.L)), prob.L] = 1.0
    J[k + len(prob.L) + np.arange(len(prob.U)), prob.U] = -1.0
    prob._lin_rows = lin
    prob._nl_rows = nl
    prob._lin_ge_jac = J


def _interior(prob, x, opts):
    """A point strictly inside every inequality, via a shifted phase-1 problem if needed."""
    x = _strict_box(prob, x)
    gg = prob.g_general(x)
    if np.all(gg > 0):
        return x, None
    return _phase_one(prob, x, opts)


def _phase_one(prob, x, opts):
    """min t  s.t.  g(x) + t >= 0,  t >= -1,  h(x) = 0, bounds; stop as soon as g(x) > 0."""
    from .model import ModelInstance, QuadraticObjective

    model = prob.model
    reg = model.registry.copy()
    t_idx = len(reg)
    gg = prob.g_general(x)
    t0 = float(-gg.min()) + 1.0
    reg.add(("phase1-shift",), -1.0, math.inf, start=t0)
    cons = []
    for c in model.constraints:
        if c.sense == "ge":
            cons.append(_Shifted(c, t_idx))
        else:
            cons.append(c)
    start = np.append(x, t0)
    reg.start = list(start)
    aux = ModelInstance(reg, cons, QuadraticObjective([t_idx], [1.0], [0.0]), tier="phase-1")
    sub = _Problem(aux)

    def done(xx):
        return xx[t_idx] < 0 and np.all(prob.g_general(xx[:t_idx]) > 0)

    res = _run(sub, start, SolveOptions(tol_kkt=opts.tol_kkt, reg=opts.reg), stop=done)
    xx = res.x
    if done(xx):
        return xx[:t_idx], None
    if res.status == "optimal" and xx[t_idx] > opts.tol_kkt:
        return None, "infeasible-detected"
    return None, "numerical-failure"


class _Shifted:
    """Wrap ``c(x) >= 0`` as ``c(x) + t >= 0``."""

    linear = False
    sense = "ge"
    kind = "phase-1"

    def __init__(self, c, t_idx):
        self.c = c
        self.idx = np.append(c.idx, t_idx)
        self.tag = c.tag

    def value(self, x):
        return self.c.value(x) + x[self.idx[-1]]

    def gradient(self, x):
        return np.append(self.c.gradient(x), 1.0)

    def hessian(self, x):
        k = len(self.idx)
        H = np.zeros((k, k))
        H[:-1, :-1] = self.c.hessian(x)
        return H


def _run(prob, x0, opts, mu=None, stop=None, local=False):
    t_start = time.perf_counter()
    _prepare_rows(prob)
    n, m, p = prob.n, prob.m, prob.p
    x = x0.copy()
    s = _objective_scale(prob, x, opts)
    mu = opts.mu0 if mu is None else mu
    # Determinant barriers near low-rank points shrink like mu^(k-1); going much
    # below tol_kkt pushes them under double-precision resolution.
    mu_final = opts.mu_final if opts.mu_final is not None else opts.tol_kkt * 1e-3
    tau = opts.ftb
    g = prob.g(x)
    if np.any(g <= 0):
        raise SolverError("start point is not strictly feasible")
    z = mu / g
    lam = np.zeros(m)
    nu = 1.0
    it = 0
    outer = 0
    inner = 0
    status = "max-iter"
    message = ""
    warn = False
    state = {"delta": 0.0}
    stalls = 0
    blocked = 0

    while it < opts.max_iter:
        if stop is not None and stop(x):
            status = "optimal"
            break
        gf = s * prob.grad_f(x)
        h = prob.h(x)
        Jh = prob.jac_h(x)
        Jg = prob.jac_g(x)
        g = prob.g(x)
        grad_lag = gf - Jh.T @ lam - Jg.T @ z
        sd = max(100.0, (np.abs(lam).sum() + np.abs(z).sum()) / max(1, m + p)) / 100.0
        err_mu = max(
            np.abs(grad_lag).max(initial=0.0) / sd,
            np.abs(h).max(initial=0.0),
            np.abs(g * z - mu).max(initial=0.0) / sd,
        )
        gf_raw = float(np.abs(gf).max(initial=0.0)) / s
        scale = _residual_scale(gf_raw, (np.abs(lam[: len(prob.eq_cons)]).sum() + np.abs(z).sum()) / s, m + p)
        stat_raw = float(np.abs(grad_lag).max(initial=0.0)) / s / scale
        comp_raw = float(np.abs(g * z).max(initial=0.0)) / s / scale
        done = max(stat_raw, comp_raw, float(np.abs(h).max(initial=0.0))) <= opts.tol_kkt
        if done and (mu <= mu_final * 1.0000001 or blocked >= 5):
            if blocked >= 5:
                log.debug("blocked at mu %.1e", mu)
                warn = True
                message = "steps blocked by a nearly singular constraint; stopped at a point meeting the tolerances"
            status = "local-optimal" if local else "optimal"
            break
        # the floor lets mu keep falling once the barrier subproblem is solved
        # to the accuracy double precision allows
        if err_mu <= max(10 * mu, 0.1 * opts.tol_kkt) or inner >= opts.max_inner:
            if inner >= opts.max_inner and not done:
                warn = True
            if mu > mu_final:
                mu = max(mu_final, opts.mu_shrink * mu)
                outer += 1
                inner = 0
                z = np.clip(z, mu / (1e10 * g), 1e10 * mu / g)
                if outer > opts.max_outer:
                    break
                continue
            if inner >= opts.max_inner:
                break

        D = z / g
        W = prob.hess_lag(x, s, lam, z) + Jg.T @ (D[:, None] * Jg)
        fac = _factor_kkt(W, Jh, opts.reg, opts.reg_max, state)
        if fac is None:
            status = "numerical-failure"
            message = "KKT matrix stayed singular after regularization"
            break
        rhs = np.concatenate([-(gf - Jg.T @ (mu / g)), -h])
        sol = fac.solve(rhs)
        dx = sol[:n]
        lam_new = -sol[n:]
        if not np.all(np.isfinite(dx)):
            status = "numerical-failure"
            message = "non-finite Newton step"
            break
        dz = mu / g - z - D * (Jg @ dx)

        alpha_max = _max_step(prob, x, dx, g, tau, None)
        if alpha_max <= 0:
            status = "numerical-failure"
            message = "no step keeps the iterate interior"
            break
        blocked = blocked + 1 if alpha_max < 1e-6 else 0
        if blocked >= 30:
            status = "numerical-failure"
            message = "steps blocked by a nearly singular constraint"
            break
        neg = dz < 0
        alpha_z = min(1.0, float(np.min(-tau * z[neg] / dz[neg]))) if np.any(neg) else 1.0

        # merit penalty and directional derivative
        lam_inf = float(np.abs(lam_new).max(initial=0.0))
        if nu < lam_inf + 1e-6:
            nu = max(1.5 * nu, lam_inf + 1.0)
        h1 = float(np.abs(h).sum())
        dphi = float((gf - Jg.T @ (mu / g)) @ dx) - nu * h1
        phi0 = s * prob.f(x) - mu * float(np.log(g).sum()) + nu * h1
        alpha = alpha_max
        accepted = False
        soc_tried = False
        for _ in range(40):
            xt = x + alpha * dx
            phi = _merit(prob, xt, s, mu, nu)
            if phi <= phi0 + 1e-4 * alpha * min(dphi, 0.0) + 1e-14 * abs(phi0):
                accepted = True
                break
            if not soc_tried and alpha == alpha_max and m:
                soc_tried = True
                c_soc = alpha * h + prob.h(xt)
                sol2 = fac.solve(np.concatenate([rhs[:n], -c_soc]))
                dx2 = sol2[:n]
                a2 = _max_step(prob, x, dx2, g, tau, None)
                if a2 >= 1.0 - 1e-12:
                    xt2 = x + dx2
                    if _merit(prob, xt2, s, mu, nu) <= phi0 + 1e-4 * alpha * min(dphi, 0.0):
                        dx, xt, alpha, accepted = dx2, xt2, 1.0, True
                        dz = mu / g - z - D * (Jg @ dx)
                        neg = dz < 0
                        alpha_z = min(1.0, float(np.min(-tau * z[neg] / dz[neg]))) if np.any(neg) else 1.0
                        break
            alpha *= 0.5
        if not accepted:
            # tiny step along the Newton direction; repeated stalls abort
            stalls += 1
            alpha = min(alpha_max, 1e-3)
            xt = x + alpha * dx
            while np.any(prob.g(xt) <= 0) and alpha > 1e-16:
                alpha *= 0.5
                xt = x + alpha * dx
            if stalls > 10:
                status = "numerical-failure"
                message = "line search stalled"
                break
        else:
            stalls = 0
        x = xt
        g = prob.g(x)
        lam = lam + alpha * (lam_new - lam)
        z = z + alpha_z * dz
        z = np.clip(z, mu / (1e10 * g), 1e10 * mu / g)
        it += 1
        inner += 1
        log.debug(
            "it %3d  mu %.1e  obj %.8e  inf_pr %.1e  err %.1e  stat %.1e  comp %.1e  alpha %.2e  delta %.1e",
            it, mu, prob.f(x), np.abs(prob.h(x)).max(initial=0.0), err_mu, stat_raw, comp_raw, alpha, state["delta"],
        )
        if np.any(prob.g(x) <= 0):
            raise SolverError("iterate left the strict interior")

    if status == "max-iter" and it < opts.max_iter and not message:
        message = "barrier iteration cap reached"
    if status == "max-iter":
        h_inf = float(np.abs(prob.h(x)).max(initial=0.0))
        if h_inf > 1e3 * opts.tol_kkt and stalls:
            status = "infeasible-detected"
    zg, lower, upper = prob.split_ineq(z / s)
    neq = len(prob.eq_cons)
    duals = Duals(eq=lam[:neq] / s, ineq=zg, lower=lower, upper=upper)
    return SolveResult(
        status=status,
        objective=prob.f(x),
        x=x,
        point=prob.model.point(x),
        kkt_residuals=(),
        iterations=it,
        wall_time=time.perf_counter() - t_start,
        duals=duals,
        mu=mu,
        message=message,
        numerical_warning=warn,
    )


def solve(model, options=None, warm_start=None, mu_init=None):
    """Solve ``model`` with the barrier method.

    ``warm_start`` (vector or mapping) replaces the model's start point;
    ``mu_init`` overrides the initial barrier weight (used for re-centering
    after cuts are added).
    """
    opts = options or SolveOptions()
    t0 = time.perf_counter()
    prob = _Problem(model)
    if warm_start is not None:
        x = _as_vector(model, warm_start)
    elif model.center is not None:
        x = np.asarray(model.center, dtype=float)
    else:
        x = model.start()
    x, failure = _interior(prob, x, opts)
    if failure is not None:
        xs = model.start()
        return SolveResult(
            status=failure,
            objective=model.objective_value(xs),
            x=xs,
            point=model.point(xs),
            kkt_residuals=kkt_residuals(model, xs, Duals()),
            iterations=0,
            wall_time=time.perf_counter() - t0,
            message="no strictly feasible point for the inequalities",
        )
    local = any(c.kind in NONCONVEX for c in model.constraints)
    res = _run(prob, x, opts, mu=mu_init, local=local)
    res.kkt_residuals = kkt_residuals(model, res.x, res.duals)
    res.wall_time = time.perf_counter() - t0
    if res.ok:
        stat, primal, comp = res.kkt_residuals
        gmin = float(prob.g(res.x).min(initial=1.0))
        if max(stat, primal, comp) > opts.tol_kkt or gmin < -opts.tol_kkt:
            res.numerical_warning = True
            res.message = res.message or f"reported residuals {res.kkt_residuals} exceed tolerance"
            if max(stat, primal, comp) > 100 * opts.tol_kkt:
                res.status = "max-iter"
    return res


def solve_ac_heuristic(model, options=None, warm_start=None):
    """Local solve of the polar AC model from its flat start (or ``warm_start``)."""
    if model.tier != "ac":
        raise ValueError("solve_ac_heuristic expects a model built by build_ac")
    return solve(model, options, warm_start=warm_start)
