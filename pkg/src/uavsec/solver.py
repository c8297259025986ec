"""Log-barrier interior-point solver for smooth convex subproblems.

Problems are expressed as sums of *term blocks*: a block carries an index
matrix ``idx`` of shape (m, k) selecting k variables for each of m rows, and
a function evaluating per-row values, gradients, and (optionally) Hessians
on the gathered coordinates.  Objective blocks are summed into the scalar
objective; constraint blocks contribute one inequality ``row <= 0`` each.
This keeps assembly O(rows) and lets slot-structured problems declare a
banded Hessian (``band_halfwidth``), solved with a banded Cholesky.

The barrier parameter follows a mu -> mu/10 schedule with the inner Newton
tolerance tied to mu; a converged report certifies the KKT stationarity
residual and constraint feasibility at the stated tolerances.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
NUMERICAL_FAILURE = "numerical_failure"

_ARMIJO = 1e-4
_NEWTON_CAP_PER_STAGE = 400
_TOTAL_NEWTON_CAP = 8000


@dataclass
class TermBlock:
    """m smooth rows over k-variable supports.

    ``func(x_sub)`` takes the gathered coordinates, shape (m, k), and returns
    ``(vals, grads, hesses)`` with shapes (m,), (m, k), (m, k, k); ``hesses``
    may be None for affine rows.  Rows must be deterministic and finite on
    the open feasible set.
    """

    idx: np.ndarray
    func: Callable
    name: str = "block"

    def __post_init__(self):
        self.idx = np.ascontiguousarray(np.atleast_2d(self.idx), dtype=np.int64)

    @property
    def m(self) -> int:
        return self.idx.shape[0]


def affine_block(idx, coeffs, consts, name="affine") -> TermBlock:
    """Rows `sum_j coeffs[i, j] * x[idx[i, j]] + consts[i]`."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
    consts = np.atleast_1d(np.asarray(consts, dtype=float))

    def func(xs):
        return (xs * coeffs).sum(axis=1) + consts, np.broadcast_to(
            coeffs, xs.shape).copy(), None

    return TermBlock(idx=idx, func=func, name=name)


@dataclass
class ConvexProblem:
    """A smooth convex minimization with inequality/box/equality constraints."""

    dim: int
    objective_blocks: list
    constraint_blocks: list = field(default_factory=list)
    lb: Optional[np.ndarray] = None            # box lower bounds (-inf allowed)
    ub: Optional[np.ndarray] = None            # box upper bounds (+inf allowed)
    a_eq: Optional[np.ndarray] = None          # linear equalities a_eq @ x = b_eq
    b_eq: Optional[np.ndarray] = None
    x0: Optional[np.ndarray] = None            # strictly feasible start
    objective_offset: float = 0.0
    band_halfwidth: Optional[int] = None       # banded Hessian hint
    var_scale: Optional[np.ndarray] = None     # diagonal preconditioner

    def __post_init__(self):
        if self.lb is not None:
            self.lb = np.asarray(self.lb, dtype=float)
        if self.ub is not None:
            self.ub = np.asarray(self.ub, dtype=float)
        if self.x0 is not None:
            self.x0 = np.asarray(self.x0, dtype=float)
        if self.var_scale is None:
            self.var_scale = np.ones(self.dim)
        else:
            self.var_scale = np.asarray(self.var_scale, dtype=float)
        if self.a_eq is not None:
            self.a_eq = np.atleast_2d(np.asarray(self.a_eq, dtype=float))
            self.b_eq = np.atleast_1d(np.asarray(self.b_eq, dtype=float))
            if self.band_halfwidth is not None:
                raise ValueError("banded mode does not support equality constraints")

    def has_inequalities(self) -> bool:
        if self.constraint_blocks:
            return True
        if self.lb is not None and np.isfinite(self.lb).any():
            return True
        if self.ub is not None and np.isfinite(self.ub).any():
            return True
        return False


@dataclass
class SolveReport:
    x: np.ndarray
    objective: float
    kkt_residual: float          # stationarity residual, max-norm
    max_violation: float         # worst inequality/equality violation
    comp_residual: float         # complementary-slackness residual (= final mu)
    iterations: int              # Newton steps taken
    status: str
    message: str = ""


class _Evaluator:
    """Caches block evaluation and scatter plans for one problem."""

    def __init__(self, p: ConvexProblem):
        self.p = p
        dim = p.dim
        self.lb = p.lb if p.lb is not None else np.full(dim, -np.inf)
        self.ub = p.ub if p.ub is not None else np.full(dim, np.inf)
        self.lb_mask = np.isfinite(self.lb)
        self.ub_mask = np.isfinite(self.ub)
        # Small systems take the exact dense path; the banded factorization
        # plus low-rank corrections only pays off (and only stays accurate)
        # when the dimension is genuinely large.
        self.banded = p.band_halfwidth is not None and dim >= 128
        self._plan = {}
        self._wide = set()
        for b in p.objective_blocks + p.constraint_blocks:
            self._plan[id(b)] = self._make_plan(b)

    def _make_plan(self, b: TermBlock):
        idx = b.idx
        m, k = idx.shape
        if self.banded:
            hw = self.p.band_halfwidth
            span = idx.max(axis=1) - idx.min(axis=1) if m else np.zeros(0)
            if m and span.max(initial=0) > hw:
                # Wide constraint rows (e.g. budget sums) are kept out of the
                # band and folded in as low-rank Woodbury corrections.
                if any(b is blk for blk in self.p.objective_blocks):
                    raise ValueError(f"objective block {b.name!r} exceeds band "
                                     f"halfwidth {hw}")
                self._wide.add(id(b))
                return {"grad_idx": idx.ravel()}
        big_i = np.repeat(idx[:, :, None], k, axis=2)
        big_j = np.repeat(idx[:, None, :], k, axis=1)
        if self.banded:
            diff = big_i - big_j
            sel = (diff >= 0).ravel()
            pos = diff.ravel()[sel] * self.p.dim + big_j.ravel()[sel]
            return {"grad_idx": idx.ravel(), "sel": sel, "pos": pos}
        pos = (big_i * self.p.dim + big_j).ravel()
        return {"grad_idx": idx.ravel(), "pos": pos}

    # -- values ------------------------------------------------------------

    def objective_value(self, x) -> float:
        total = self.p.objective_offset
        for b in self.p.objective_blocks:
            vals = b.func(x[b.idx])[0]
            total += float(vals.sum())
        return total

    def constraint_values(self, x):
        return [b.func(x[b.idx])[0] for b in self.p.constraint_blocks]

    def strictly_feasible(self, x) -> bool:
        if not (np.all(x > self.lb) and np.all(x < self.ub)):
            return False
        for vals in self.constraint_values(x):
            if not np.all(np.isfinite(vals)) or vals.max(initial=-np.inf) >= 0.0:
                return False
        return True

    def barrier_value(self, x, mu) -> float:
        """phi = f0 - mu * sum log(slacks); +inf when not strictly feasible."""
        f0 = self.objective_value(x)
        if not np.isfinite(f0):
            return np.inf
        total = f0
        for vals in self.constraint_values(x):
            if not np.all(np.isfinite(vals)) or vals.max(initial=-np.inf) >= 0.0:
                return np.inf
            total -= mu * float(np.log(-vals).sum())
        slack_lo = x[self.lb_mask] - self.lb[self.lb_mask]
        slack_hi = self.ub[self.ub_mask] - x[self.ub_mask]
        if (slack_lo <= 0.0).any() or (slack_hi <= 0.0).any():
            return np.inf
        total -= mu * (float(np.log(slack_lo).sum()) + float(np.log(slack_hi).sum()))
        return total

    # -- derivatives ---------------------------------------------------------

    def assemble(self, x, mu):
        """Barrier value terms plus gradient and Hessian storage at x.

        Returns (f0, phi, grad_f0, grad_phi, hess_storage, wide) where
        hess_storage is dense (dim, dim) or lower-banded (hw+1, dim), and
        wide lists (idx, grads, coef) triples of low-rank corrections kept
        out of the band.
        """
        p, dim = self.p, self.p.dim
        if self.banded:
            hess = np.zeros((p.band_halfwidth + 1) * dim)
        else:
            hess = np.zeros(dim * dim)
        g_f0 = np.zeros(dim)
        g_bar = np.zeros(dim)
        f0 = p.objective_offset
        log_sum = 0.0
        wide = []

        for b in p.objective_blocks:
            plan = self._plan[id(b)]
            vals, grads, hesses = b.func(x[b.idx])
            f0 += float(vals.sum())
            g_f0 += np.bincount(plan["grad_idx"], weights=grads.ravel(), minlength=dim)
            if hesses is not None:
                self._scatter_hess(hess, plan, hesses)

        for b in p.constraint_blocks:
            plan = self._plan[id(b)]
            vals, grads, hesses = b.func(x[b.idx])
            if vals.max(initial=-np.inf) >= 0.0 or not np.all(np.isfinite(vals)):
                return f0, np.inf, g_f0, g_bar, hess, wide
            lam = mu / (-vals)
            log_sum += float(np.log(-vals).sum())
            g_bar += np.bincount(plan["grad_idx"],
                                 weights=(grads * lam[:, None]).ravel(), minlength=dim)
            if id(b) in self._wide:
                if hesses is not None:
                    raise ValueError(f"wide block {b.name!r} must be affine")
                wide.append((b.idx, grads, lam * lam / mu))
                continue
            outer = np.einsum("m,mi,mj->mij", lam * lam / mu, grads, grads)
            if hesses is not None:
                outer += lam[:, None, None] * hesses
            self._scatter_hess(hess, plan, outer)

        slack_lo = np.where(self.lb_mask, x - self.lb, 1.0)
        slack_hi = np.where(self.ub_mask, self.ub - x, 1.0)
        g_bar -= np.where(self.lb_mask, mu / slack_lo, 0.0)
        g_bar += np.where(self.ub_mask, mu / slack_hi, 0.0)
        diag_add = (np.where(self.lb_mask, mu / slack_lo ** 2, 0.0)
                    + np.where(self.ub_mask, mu / slack_hi ** 2, 0.0))
        log_sum += float(np.log(slack_lo[self.lb_mask]).sum()
                         + np.log(slack_hi[self.ub_mask]).sum())
        phi = f0 - mu * log_sum
        if self.banded:
            hess[:dim] += diag_add
            return (f0, phi, g_f0, g_f0 + g_bar,
                    hess.reshape(p.band_halfwidth + 1, dim), wide)
        hmat = hess.reshape(dim, dim)
        hmat[np.diag_indices(dim)] += diag_add
        return f0, phi, g_f0, g_f0 + g_bar, hmat, wide

    def _scatter_hess(self, storage, plan, blocks):
        flat = blocks.ravel()
        if self.banded:
            storage += np.bincount(plan["pos"], weights=flat[plan["sel"]],
                                   minlength=storage.shape[0])
        else:
            storage += np.bincount(plan["pos"], weights=flat,
                                   minlength=storage.shape[0])

    # -- diagnostics -----------------------------------------------------------

    def projected_residual(self, g_phi) -> float:
        """Max-norm stationarity; equality multipliers fitted by least squares."""
        if self.p.a_eq is not None:
            a = self.p.a_eq
            nu, *_ = np.linalg.lstsq(a.T, -g_phi, rcond=None)
            g_phi = g_phi + a.T @ nu
        return float(np.abs(g_phi).max())

    def stationarity_residual(self, x, mu) -> float:
        """Max-norm KKT stationarity with barrier multipliers mu / slack."""
        _, phi, _, g_phi, _, _ = self.assemble(x, mu)
        if not np.isfinite(phi):
            return np.inf
        return self.projected_residual(g_phi)

    def max_violation(self, x) -> float:
        worst = 0.0
        for vals in self.constraint_values(x):
            worst = max(worst, float(vals.max(initial=-np.inf)))
        if self.lb_mask.any():
            worst = max(worst, float((self.lb - x)[self.lb_mask].max()))
        if self.ub_mask.any():
            worst = max(worst, float((x - self.ub)[self.ub_mask].max()))
        if self.p.a_eq is not None:
            worst = max(worst, float(np.abs(self.p.a_eq @ x - self.p.b_eq).max()))
        return max(worst, 0.0)


def _box_step_cap(ev: _Evaluator, x, step) -> float:
    """Fraction-to-boundary cap against the box bounds (cheap, closed form)."""
    alpha = 1.0
    neg = ev.lb_mask & (step < 0.0)
    if neg.any():
        alpha = min(alpha, float((0.995 * (ev.lb[neg] - x[neg]) / step[neg]).min()))
    pos = ev.ub_mask & (step > 0.0)
    if pos.any():
        alpha = min(alpha, float((0.995 * (ev.ub[pos] - x[pos]) / step[pos]).min()))
    return max(alpha, 1e-16)


def _newton_direction(ev: _Evaluator, hess, grad, wide=()):
    """Solve H d = -g with diagonal preconditioning and escalation on failure.

    In banded mode, wide affine rows enter as low-rank corrections via the
    Woodbury identity: H = B + U^T C U with B banded and C > 0 diagonal.
    """
    p = ev.p
    sc = p.var_scale
    rhs = -(grad * sc)
    if ev.banded:
        dim = p.dim
        band = hess.copy()
        for r in range(band.shape[0]):
            band[r, :dim - r] *= sc[r:] * sc[:dim - r] if r else sc * sc
        u_rows = []
        coefs = []
        for idx, grads, coef in wide:
            for row in range(idx.shape[0]):
                u = np.zeros(dim)
                np.add.at(u, idx[row], grads[row])
                u_rows.append(u * sc)
                coefs.append(coef[row])
        reg = 0.0
        base = max(band[0].max(), 1.0)
        for _ in range(12):
            try:
                bandr = band.copy()
                bandr[0] += reg
                cb = scipy.linalg.cholesky_banded(bandr, lower=True)
                y = scipy.linalg.cho_solve_banded((cb, True), rhs)
                if u_rows:
                    u_mat = np.asarray(u_rows)            # (r, dim), scaled
                    c_vec = np.asarray(coefs)
                    binv_ut = scipy.linalg.cho_solve_banded((cb, True), u_mat.T)
                    cap = np.diag(1.0 / c_vec) + u_mat @ binv_ut
                    y = y - binv_ut @ np.linalg.solve(cap, u_mat @ y)
                return y * sc
            except np.linalg.LinAlgError:
                reg = max(reg * 100.0, base * 1e-14)
            except scipy.linalg.LinAlgError:
                reg = max(reg * 100.0, base * 1e-14)
        return None
    hs = hess * np.outer(sc, sc)
    if p.a_eq is not None:
        a_s = p.a_eq * sc[None, :]
        n_eq = a_s.shape[0]
        kkt = np.zeros((p.dim + n_eq, p.dim + n_eq))
        rhs_full = np.concatenate([rhs, np.zeros(n_eq)])
        reg = 0.0
        base = max(np.abs(np.diag(hs)).max(), 1.0)
        for _ in range(12):
            kkt[:p.dim, :p.dim] = hs + reg * np.eye(p.dim)
            kkt[:p.dim, p.dim:] = a_s.T
            kkt[p.dim:, :p.dim] = a_s
            try:
                sol = scipy.linalg.solve(kkt, rhs_full, assume_a="sym")
                if np.all(np.isfinite(sol)):
                    return sol[:p.dim] * sc
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
                pass
            reg = max(reg * 100.0, base * 1e-14)
        return None
    reg = 0.0
    base = max(np.abs(np.diag(hs)).max(), 1.0)
    for _ in range(12):
        try:
            cf = scipy.linalg.cho_factor(hs + reg * np.eye(p.dim), check_finite=False)
            y = scipy.linalg.cho_solve(cf, rhs, check_finite=False)
            if np.all(np.isfinite(y)):
                return y * sc
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
            pass
        reg = max(reg * 100.0, base * 1e-14)
    return None


def _run_barrier(p: ConvexProblem, tol_kkt, tol_feas, max_outer, mu0, keep_best):
    ev = _Evaluator(p)
    if p.x0 is None:
        raise ValueError("ConvexProblem.x0 is required")
    x = p.x0.astype(float).copy()
    if not ev.strictly_feasible(x):
        return SolveReport(x=x, objective=np.nan, kkt_residual=np.inf,
                           max_violation=ev.max_violation(x), comp_residual=np.inf,
                           iterations=0, status=NUMERICAL_FAILURE,
                           message="initial point is not strictly feasible")
    if p.a_eq is not None and np.abs(p.a_eq @ x - p.b_eq).max() > tol_feas:
        return SolveReport(x=x, objective=ev.objective_value(x), kkt_residual=np.inf,
                           max_violation=ev.max_violation(x), comp_residual=np.inf,
                           iterations=0, status=NUMERICAL_FAILURE,
                           message="initial point violates equality constraints")

    f_start = ev.objective_value(x)
    if not np.isfinite(f_start):
        return SolveReport(x=x, objective=f_start, kkt_residual=np.inf,
                           max_violation=0.0, comp_residual=np.inf, iterations=0,
                           status=NUMERICAL_FAILURE,
                           message="objective not finite at the initial point")
    scale = max(1.0, abs(f_start))
    mu_target = tol_kkt * scale
    has_ineq = p.has_inequalities()
    if mu0 is None:
        # Keep the total barrier mass (constraint count times mu) comparable
        # to the objective so the first stage does not wander off toward the
        # analytic center.
        m_total = sum(b.m for b in p.constraint_blocks)
        m_total += int(ev.lb_mask.sum()) + int(ev.ub_mask.sum())
        mu0 = 0.1 * scale / max(m_total, 1)
    mu = mu_target if not has_ineq else max(mu0, mu_target)

    best_x, best_f = x.copy(), f_start
    iterations = 0
    message = ""
    status = CONVERGED
    for _stage in range(max_outer):
        final_stage = mu <= mu_target * (1.0 + 1e-12)
        inner_tol = min(0.1 * mu, tol_kkt) if final_stage else 0.5 * mu
        newton_cap = _NEWTON_CAP_PER_STAGE if final_stage else 60
        stage_ok = False
        stalled = False
        for _ in range(newton_cap):
            f0, phi, g_f0, g_phi, hess, wide = ev.assemble(x, mu)
            if not np.isfinite(phi):
                status, message = NUMERICAL_FAILURE, "barrier not finite at iterate"
                break
            resid = ev.projected_residual(g_phi)
            if resid <= inner_tol:
                stage_ok = True
                break
            if iterations >= _TOTAL_NEWTON_CAP:
                status, message = MAX_ITERATIONS, "Newton step budget exhausted"
                break
            step = _newton_direction(ev, hess, g_phi, wide)
            if step is None:
                status, message = NUMERICAL_FAILURE, "Newton system could not be factorized"
                break
            slope = float(g_phi @ step)
            if slope >= 0.0:
                # factorization too inaccurate for a descent direction
                stalled = True
                break
            alpha, accepted = _box_step_cap(ev, x, step), False
            # decreases near machine precision are accepted rather than
            # treated as failures; imperfect centering is fine between stages
            fuzz = 1e-14 * max(1.0, abs(phi))
            for _ls in range(60):
                cand = x + alpha * step
                phi_c = ev.barrier_value(cand, mu)
                if np.isfinite(phi_c) and phi_c <= phi + _ARMIJO * alpha * slope + fuzz:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                stalled = True
                break
            x = x + alpha * step
            iterations += 1
            f_here = ev.objective_value(x)
            if f_here < best_f:
                best_x, best_f = x.copy(), f_here
        if status != CONVERGED:
            break
        if final_stage:
            if not stage_ok:
                status = MAX_ITERATIONS
                message = ("line search stalled before certification" if stalled
                           else "inner Newton cap reached")
            break
        mu = max(mu / 10.0, mu_target)
    else:
        status, message = MAX_ITERATIONS, "barrier stage budget exhausted"

    if status != CONVERGED and keep_best and ev.strictly_feasible(best_x):
        x = best_x
        if status == NUMERICAL_FAILURE:
            status, message = MAX_ITERATIONS, message + " (best feasible iterate returned)"
    f_final = ev.objective_value(x)
    kkt = ev.stationarity_residual(x, mu)
    violation = ev.max_violation(x)
    comp = mu if has_ineq else 0.0
    if status == CONVERGED and (kkt > tol_kkt or violation > tol_feas):
        status, message = MAX_ITERATIONS, "tolerances not certified at exit"
    return SolveReport(x=x, objective=f_final, kkt_residual=kkt,
                       max_violation=violation, comp_residual=comp,
                       iterations=iterations, status=status, message=message)


def solve(p: ConvexProblem, tol_kkt: float = 1e-6, tol_feas: float = 1e-8,
          max_outer: int = 200, mu0: Optional[float] = None) -> SolveReport:
    """Minimize the problem to certified KKT tolerances."""
    return _run_barrier(p, tol_kkt, tol_feas, max_outer, mu0, keep_best=False)


def solve_descent_only(p: ConvexProblem, tol_kkt: float = 1e-6,
                       tol_feas: float = 1e-8, max_outer: int = 200,
                       mu0: Optional[float] = None) -> SolveReport:
    """Like solve(), but degrades to the best feasible iterate instead of
    failing when tight tolerances are unreachable; the returned objective
    never exceeds the initial one."""
    return _run_barrier(p, tol_kkt, tol_feas, max_outer, mu0, keep_best=True)


def check_gradients(p: ConvexProblem, point=None, h: float = 1e-6) -> float:
    """Worst relative error of analytic gradients vs central differences."""
    x = np.asarray(point if point is not None else p.x0, dtype=float)
    worst = 0.0
    for b in p.objective_blocks + p.constraint_blocks:
        xs = x[b.idx].astype(float)
        _, grads, _ = b.func(xs)
        for col in range(xs.shape[1]):
            xp = xs.copy()
            xp[:, col] += h
            xm = xs.copy()
            xm[:, col] -= h
            fd = (b.func(xp)[0] - b.func(xm)[0]) / (2.0 * h)
            denom = np.maximum(1.0, np.maximum(np.abs(fd), np.abs(grads[:, col])))
            err = np.abs(fd - grads[:, col]) / denom
            if err.size:
                worst = max(worst, float(err.max()))
    return worst


def convexity_check(p: ConvexProblem, rng: np.random.Generator,
                    n_pairs: int = 32, radius: float = 0.5,
                    slack: float = 1e-9) -> float:
    """Debug guard: sampled midpoint convexity of every registered row.

    Draws strictly feasible pairs near x0 and returns the worst violation of
    f((x+y)/2) <= (f(x)+f(y))/2 + slack over all objective and constraint
    rows (0.0 means no violation found).
    """
    ev = _Evaluator(p)
    x0 = np.asarray(p.x0, dtype=float)
    span = radius * np.maximum(np.abs(x0), 1.0)
    samples = []
    for _ in range(200 * n_pairs):
        cand = x0 + span * rng.uniform(-1.0, 1.0, size=p.dim)
        if ev.strictly_feasible(cand) and np.isfinite(ev.objective_value(cand)):
            samples.append(cand)
            if len(samples) >= 2 * n_pairs:
                break
    worst = 0.0
    for i in range(len(samples) // 2):
        xa, xb = samples[2 * i], samples[2 * i + 1]
        mid = 0.5 * (xa + xb)
        for b in p.objective_blocks + p.constraint_blocks:
            va = b.func(xa[b.idx])[0]
            vb = b.func(xb[b.idx])[0]
            vm = b.func(mid[b.idx])[0]
            gap = vm - 0.5 * (va + vb) - slack
            if gap.size:
                worst = max(worst, float(gap.max()))
    return max(worst, 0.0)
