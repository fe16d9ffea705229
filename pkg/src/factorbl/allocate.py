"""Portfolio weight allocation schemes.

Closed-form solutions where they exist (global minimum variance, tangency,
mean-variance with a risk-aversion penalty, implied-beta reversal) and a
projected-gradient solver for the box-and-budget constrained variants
{w : 0 <= w <= 1, sum(w) = 1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import CovEstimate, MomentEstimate
from .errors import (
    BadInput,
    DegenerateSeries,
    DegenerateTangency,
    SingularCovariance,
)
from .marketdata import MarketCapWeights, ReturnPanel

_COND_LIMIT = 1e12
_BOUND_TOL = 1e-8

SCHEMES = ("equal", "market_cap", "implied_beta", "gmv", "max_sharpe", "markowitz", "black_litterman")


@dataclass(frozen=True)
class WeightVector:
    weights: np.ndarray
    scheme: str
    constrained: bool
    aversion: float | None = None  # risk-aversion parameter for markowitz / black_litterman

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise BadInput("weights must be a vector")
        if self.constrained:
            if np.any(w < -_BOUND_TOL) or np.any(w > 1 + _BOUND_TOL):
                raise BadInput("constrained weights must lie in [0, 1]")
            if abs(w.sum() - 1.0) > _BOUND_TOL:
                raise BadInput("constrained weights must sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    final_gradient_norm: float
    converged: bool


def _inverse_apply(sigma: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if np.linalg.cond(sigma) > _COND_LIMIT:
        raise SingularCovariance("covariance condition number exceeds 1e12")
    return np.linalg.solve(sigma, rhs)


def equal_weights(n: int) -> WeightVector:
    if n < 1:
        raise BadInput("need at least one factor")
    return WeightVector(np.full(n, 1.0 / n), "equal", constrained=True)


def market_cap_weights(caps: MarketCapWeights) -> WeightVector:
    return WeightVector(caps.weights.copy(), "market_cap", constrained=True)


def gmv_closed_form(sigma: CovEstimate) -> WeightVector:
    """w = Sigma^-1 1 / (1' Sigma^-1 1), the fully invested minimum-variance point."""
    ones = np.ones(sigma.n)
    x = _inverse_apply(sigma.sigma, ones)
    return WeightVector(x / (ones @ x), "gmv", constrained=False)


def max_sharpe_closed_form(sigma: CovEstimate, mu: MomentEstimate) -> WeightVector:
    """Tangency portfolio w = Sigma^-1 mu / (1' Sigma^-1 mu).

    The normalisation is only meaningful when 1' Sigma^-1 mu > 0; otherwise the
    rescaled point is not the Sharpe maximiser and the call fails instead of
    silently flipping sign.
    """
    x = _inverse_apply(sigma.sigma, mu.mu)
    denom = float(x.sum())
    if denom < 1e-12:
        raise DegenerateTangency("1' Sigma^-1 mu must be positive")
    return WeightVector(x / denom, "max_sharpe", constrained=False)


def markowitz_closed_form(sigma: CovEstimate, mu: MomentEstimate, aversion: float) -> WeightVector:
    """Maximise w'mu - aversion * w'Sigma'w subject to full investment.

    First-order conditions give w = (1/2L) Sigma^-1 (mu - v 1) with the
    multiplier v = (1' Sigma^-1 mu - 2L) / (1' Sigma^-1 1); the budget holds by
    construction.
    """
    if aversion <= 0:
        raise BadInput("risk aversion must be positive")
    ones = np.ones(sigma.n)
    x_mu = _inverse_apply(sigma.sigma, mu.mu)
    x_one = _inverse_apply(sigma.sigma, ones)
    v = (x_mu.sum() - 2.0 * aversion) / x_one.sum()
    w = (x_mu - v * x_one) / (2.0 * aversion)
    return WeightVector(w, "markowitz", constrained=False, aversion=aversion)


def implied_beta_weights(sigma: CovEstimate, panel: ReturnPanel, window=None) -> WeightVector:
    """Invert beta = Sigma w / (w' Sigma w) for the weights that imply the
    regression betas of each factor against the benchmark.

    Betas come from excess returns; the implied variance is
    sigma^2 = 1 / (beta' Sigma^-1 beta) and w = sigma^2 Sigma^-1 beta.
    No constraints apply, so weights may be negative and need not sum to 1.
    """
    lo, hi = panel.window_rows(window)
    rf = panel.riskfree_returns()[lo:hi]
    bench = panel.benchmark_returns()[lo:hi] - rf
    factors = panel.factor_matrix()[lo:hi] - rf[:, None]
    var_b = bench.var(ddof=1)
    if var_b <= 0:
        raise DegenerateSeries("benchmark variance is zero over the window")
    centered_b = bench - bench.mean()
    centered_f = factors - factors.mean(axis=0, keepdims=True)
    betas = centered_f.T @ centered_b / (len(bench) - 1) / var_b
    y = _inverse_apply(sigma.sigma, betas)
    implied_var = 1.0 / float(betas @ y)
    return WeightVector(implied_var * y, "implied_beta", constrained=False)


def project_capped_simplex(v, total: float = 1.0, cap: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {x : 0 <= x <= cap, sum(x) = total}.

    Exact O(n log n) sweep over the breakpoints of the piecewise-linear map
    theta -> sum(clip(v - theta, 0, cap)), which decreases from n*cap to 0.
    """
    v = np.asarray(v, dtype=float)
    n = v.size
    if n == 0 or total < -1e-12 or total > n * cap + 1e-12:
        raise BadInput("projection target is infeasible")

    thetas = np.concatenate([v - cap, v])
    # kind 0: component leaves the cap; kind 1: component reaches zero
    kinds = np.concatenate([np.zeros(n, dtype=np.int64), np.ones(n, dtype=np.int64)])
    order = np.argsort(thetas, kind="stable")

    n_cap = n
    n_lin = 0
    s_lin = 0.0
    prev = -np.inf
    for idx in order:
        t = float(thetas[idx])
        if t > prev:
            if n_lin > 0:
                theta = (s_lin + cap * n_cap - total) / n_lin
                if prev <= theta <= t:
                    return np.clip(v - theta, 0.0, cap)
            elif abs(cap * n_cap - total) <= 1e-12 * max(1.0, abs(total)):
                theta = t if prev == -np.inf else prev
                return np.clip(v - theta, 0.0, cap)
            prev = t
        i = idx % n
        if kinds[idx] == 0:
            n_cap -= 1
            n_lin += 1
            s_lin += v[i]
        else:
            n_lin -= 1
            s_lin -= v[i]
    if abs(total) <= 1e-12:
        return np.zeros(n)
    # numerically ambiguous breakpoint ties: bisect as a fallback
    lo, hi = float(v.min()) - cap - 1.0, float(v.max()) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.clip(v - mid, 0.0, cap).sum() > total:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi), 0.0, cap)


def _check_psd(sigma: np.ndarray) -> float:
    eigs = np.linalg.eigvalsh(sigma)
    if eigs[0] < -1e-10 * max(1.0, eigs[-1]):
        raise BadInput("covariance must be positive semidefinite")
    return float(eigs[-1])


def _kkt_residual(grad: np.ndarray, w: np.ndarray, sense: int) -> float:
    """Stationarity violation over the capped simplex; 0 at an exact optimum.

    sense=+1 for minimisation (zero-weight assets may have larger gradient),
    sense=-1 for maximisation. The budget multiplier is pinned by the free
    gradients when any weight is interior; at a corner it may float inside the
    interval the bound multipliers allow.
    """
    g = sense * grad
    free = (w > 1e-9) & (w < 1 - 1e-9)
    at_zero = w <= 1e-9
    at_cap = w >= 1 - 1e-9
    if free.any():
        nu = float(g[free].mean())
        res = float(np.abs(g[free] - nu).max())
        if at_zero.any():
            res = max(res, float(np.maximum(nu - g[at_zero], 0.0).max()))
        if at_cap.any():
            res = max(res, float(np.maximum(g[at_cap] - nu, 0.0).max()))
        return res
    lo = float(g[at_cap].max()) if at_cap.any() else -np.inf
    hi = float(g[at_zero].min()) if at_zero.any() else np.inf
    return max(0.0, lo - hi)


def _polish_quadratic(q_mat: np.ndarray, c_vec: np.ndarray, w: np.ndarray) -> np.ndarray | None:
    """Solve the equality-constrained QP on the active set implied by w.

    min 1/2 w'Qw + c'w over the capped simplex, with zeros/caps fixed where w
    sits on a bound. Returns the candidate when it is feasible and passes the
    KKT sign checks, else None.
    """
    n = w.size
    at_cap = w >= 1 - 1e-7
    free = (w > 1e-7) & ~at_cap
    budget = 1.0 - float(at_cap.sum())
    cand = np.where(at_cap, 1.0, 0.0)
    if free.any():
        qff = q_mat[np.ix_(free, free)]
        rhs_fixed = q_mat[np.ix_(free, at_cap)] @ np.ones(int(at_cap.sum())) if at_cap.any() else 0.0
        try:
            y1 = np.linalg.solve(qff, np.ones(int(free.sum())))
            y2 = np.linalg.solve(qff, -c_vec[free] - rhs_fixed)
        except np.linalg.LinAlgError:
            return None
        denom = float(y1.sum())
        if abs(denom) < 1e-14:
            return None
        nu = (budget - y2.sum()) / denom
        wf = y2 + nu * y1
        if np.any(wf < -1e-12) or np.any(wf > 1 + 1e-12):
            return None
        cand[free] = np.clip(wf, 0.0, 1.0)
    if abs(cand.sum() - 1.0) > 1e-9:
        return None
    grad = q_mat @ cand + c_vec
    if _kkt_residual(grad, cand, sense=+1) > 1e-7 * max(1.0, float(np.abs(grad).max())):
        return None
    return cand


def _pgd_quadratic(q_mat: np.ndarray, c_vec: np.ndarray, w0: np.ndarray, tol: float, max_iter: int):
    """Projected gradient descent for min 1/2 w'Qw + c'w over the capped simplex."""
    eig_max = _check_psd(q_mat)
    step = 1.0 / max(eig_max, 1e-300)
    w = w0
    pg_norm = np.inf
    iters = 0
    for iters in range(1, max_iter + 1):
        grad = q_mat @ w + c_vec
        w_next = project_capped_simplex(w - step * grad)
        pg_norm = float(np.linalg.norm(w - w_next) / step)
        w = w_next
        if pg_norm <= tol:
            break
    polished = _polish_quadratic(q_mat, c_vec, w)
    if polished is not None:
        obj_old = 0.5 * w @ q_mat @ w + c_vec @ w
        obj_new = 0.5 * polished @ q_mat @ polished + c_vec @ polished
        if obj_new <= obj_old + 1e-15:
            w = polished
            grad = q_mat @ w + c_vec
            pg_norm = float(np.linalg.norm(w - project_capped_simplex(w - step * grad)) / step)
    return w, iters, pg_norm


def _sharpe(w: np.ndarray, sigma: np.ndarray, mu: np.ndarray) -> float:
    var = float(w @ sigma @ w)
    if var <= 0:
        return -np.inf
    return float(w @ mu) / np.sqrt(var)


def _sharpe_grad(w: np.ndarray, sigma: np.ndarray, mu: np.ndarray) -> np.ndarray:
    var = float(w @ sigma @ w)
    vol = np.sqrt(var)
    return mu / vol - float(w @ mu) * (sigma @ w) / (vol * var)


def _solve_max_sharpe(sigma: np.ndarray, mu: np.ndarray, tol: float, max_iter: int):
    """Maximise w'mu / sqrt(w'Sigma w) by projected normalised-gradient ascent.

    Steps move along the unit gradient direction with a doubling/halving line
    search; an active-set polish (restricted tangency portfolio) snaps the
    iterate onto the exact optimum once the right support is found.
    """
    _check_psd(sigma)
    n = mu.size
    candidates = [np.full(n, 1.0 / n)]
    try:
        x = np.linalg.solve(sigma, mu)
        if x.sum() > 1e-12:
            candidates.append(project_capped_simplex(x / x.sum()))
    except np.linalg.LinAlgError:
        pass
    w = max(candidates, key=lambda c: _sharpe(c, sigma, mu))

    step = 0.1
    iters = 0
    for iters in range(1, max_iter + 1):
        grad = _sharpe_grad(w, sigma, mu)
        norm = float(np.linalg.norm(grad))
        if norm == 0.0:
            break
        direction = grad / norm
        base = _sharpe(w, sigma, mu)
        moved = False
        while step > 1e-15:
            cand = project_capped_simplex(w + step * direction)
            if _sharpe(cand, sigma, mu) > base:
                w = cand
                moved = True
                step = min(step * 2.0, 1.0)
                break
            step *= 0.5
        if not moved:
            break

    # restricted tangency on the support the ascent settled on
    free = w > 1e-7
    if free.any():
        try:
            xf = np.linalg.solve(sigma[np.ix_(free, free)], mu[free])
            if xf.sum() > 1e-12:
                cand = np.zeros(n)
                cand[free] = xf / xf.sum()
                if np.all(cand >= -1e-12) and _sharpe(cand, sigma, mu) >= _sharpe(w, sigma, mu):
                    w = np.clip(cand, 0.0, 1.0)
                    w = w / w.sum()
        except np.linalg.LinAlgError:
            pass
    grad = _sharpe_grad(w, sigma, mu)
    residual = _kkt_residual(grad, w, sense=-1)
    return w, iters, residual


def solve_constrained(
    objective: str,
    sigma: CovEstimate,
    mu: MomentEstimate | None = None,
    aversion: float | None = None,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> tuple[WeightVector, SolverReport]:
    """Solve a scheme's objective over {w : 0 <= w <= 1, sum(w) = 1}.

    gmv       minimise w'Sigma w
    markowitz minimise aversion * w'Sigma w - w'mu
    max_sharpe maximise w'mu / sqrt(w'Sigma w) (direct ascent, no bisection)

    Returns the best iterate with converged=False when the tolerance is not
    reached within max_iter steps.
    """
    n = sigma.n
    s_mat = sigma.sigma
    if objective == "gmv":
        w, iters, gnorm = _pgd_quadratic(2.0 * s_mat, np.zeros(n), np.full(n, 1.0 / n), tol, max_iter)
        vec = WeightVector(w, "gmv", constrained=True)
    elif objective == "markowitz":
        if mu is None or aversion is None:
            raise BadInput("markowitz objective needs mu and aversion")
        if aversion <= 0:
            raise BadInput("risk aversion must be positive")
        w, iters, gnorm = _pgd_quadratic(
            2.0 * aversion * s_mat, -mu.mu, np.full(n, 1.0 / n), tol, max_iter
        )
        vec = WeightVector(w, "markowitz", constrained=True, aversion=aversion)
    elif objective == "max_sharpe":
        if mu is None:
            raise BadInput("max_sharpe objective needs mu")
        w, iters, gnorm = _solve_max_sharpe(s_mat, mu.mu, tol, max_iter)
        vec = WeightVector(w, "max_sharpe", constrained=True)
    else:
        raise BadInput(f"unknown objective {objective!r}")
    report = SolverReport(iterations=iters, final_gradient_norm=gnorm, converged=gnorm <= tol)
    return vec, report
