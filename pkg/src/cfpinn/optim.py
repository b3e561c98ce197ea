"""Adam and L-BFGS (strong Wolfe) minimizers over flat parameter vectors.

Both optimizers are pure sequential float computations: identical objective,
start, and config reproduce the iterate sequence bitwise.  The training
schedule built on top (L-BFGS from initialization for forward problems, Adam
then L-BFGS for inverse ones) lives in the harness; this module only knows
about objectives `theta -> (value, gradient)`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradientError(Exception):
    pass


class NonFiniteObjectiveError(Exception):
    pass


# ----------------------------------------------------------------------- Adam


@dataclass(frozen=True)
class AdamState:
    """Moment estimates and hyperparameters; advanced functionally."""

    step: int
    m: np.ndarray
    v: np.ndarray
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.step < 0:
            raise ValueError("step must be >= 0")
        if self.m.shape != self.v.shape:
            raise ValueError("moment vectors must have equal size")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")

    @classmethod
    def fresh(cls, n_params: int, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(0, np.zeros(n_params), np.zeros(n_params), lr, beta1,
                   beta2, eps)


def adam_step(state: AdamState, params, grad):
    """One bias-corrected Adam update; returns (new state, new params)."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.shape or params.shape != state.m.shape:
        raise ValueError("params/grad size mismatch with state")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError("gradient contains non-finite entries")
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** step)
    v_hat = v / (1.0 - state.beta2 ** step)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    new_state = AdamState(step, m, v, state.lr, state.beta1, state.beta2,
                          state.eps)
    return new_state, new_params


def adam_minimize(objective, params0, steps: int, lr: float = 1e-3,
                  beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """Run `steps` Adam updates; returns (params, history).

    History rows are (iter, value, inf-norm of gradient, lr), starting with
    the untouched initial point as iteration 0.
    """
    x = np.array(params0, dtype=np.float64)
    state = AdamState.fresh(len(x), lr, beta1, beta2, eps)
    f, g = objective(x)
    history = [(0, float(f), float(np.max(np.abs(g))) if len(g) else 0.0, 0.0)]
    for it in range(1, steps + 1):
        state, x = adam_step(state, x, g)
        f, g = objective(x)
        history.append((it, float(f), float(np.max(np.abs(g))), lr))
    return x, history


# --------------------------------------------------------------------- L-BFGS


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 50
    max_iters: int = 50000
    grad_tol: float = 1e-8
    f_rel_tol: float = 10.0 * np.finfo(np.float64).eps
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9

    def __post_init__(self):
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if not (0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0):
            raise ValueError("need 0 < c1 < c2 < 1")


@dataclass
class LbfgsResult:
    """Unpacks as (params, history); flags qualify how the run ended."""

    params: np.ndarray
    history: list
    converged: bool
    line_search_failed: bool
    f: float
    grad_inf: float
    n_iters: int
    stop_reason: str = ""

    def __iter__(self):
        return iter((self.params, self.history))


def _two_loop(grad, s_list, y_list, rho_list):
    """Implicit product H·grad from the stored curvature pairs."""
    q = grad.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if y_list:
        s, y = s_list[-1], y_list[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
        b = rho * (y @ q)
        q += s * (a - b)
    return q


def _finite(f, g):
    return np.isfinite(f) and np.all(np.isfinite(g))


def _strong_wolfe(objective, x, f0, g0, d, c1, c2, max_brackets=20,
                  max_zoom=40):
    """Line search satisfying the strong Wolfe conditions (trial step 1).

    Returns (step, f, g, n_evals, ok).  Bracketing doubles the step; zoom
    bisects, which keeps the whole search a pure deterministic function of
    the objective.  Non-finite trial values are treated as overshoot.
    """
    dg0 = float(g0 @ d)
    evals = 0

    def phi(a):
        nonlocal evals
        fa, ga = objective(x + a * d)
        evals += 1
        return float(fa), np.asarray(ga, dtype=np.float64)

    def zoom(a_lo, f_lo, dg_lo, a_hi):
        nonlocal evals
        for _ in range(max_zoom):
            a = 0.5 * (a_lo + a_hi)
            fa, ga = phi(a)
            dga = float(ga @ d) if _finite(fa, ga) else np.inf
            if (not _finite(fa, ga) or fa > f0 + c1 * a * dg0 or fa >= f_lo):
                a_hi = a
            else:
                if abs(dga) <= -c2 * dg0:
                    return a, fa, ga, True
                if dga * (a_hi - a_lo) >= 0.0:
                    a_hi = a_lo
                a_lo, f_lo, dg_lo = a, fa, dga
            if abs(a_hi - a_lo) <= 1e-18 * max(1.0, abs(a_lo)):
                break
        # interval collapsed: settle for plain decrease if we found one
        if f_lo < f0 and a_lo > 0.0:
            fa, ga = phi(a_lo)
            return a_lo, fa, ga, True
        return 0.0, f0, g0, False

    a_prev, f_prev, dg_prev = 0.0, f0, dg0
    a = 1.0
    for it in range(max_brackets):
        fa, ga = phi(a)
        if not _finite(fa, ga) or fa > f0 + c1 * a * dg0 or (it > 0 and fa >= f_prev):
            za, zf, zg, ok = zoom(a_prev, f_prev, dg_prev, a)
            return za, zf, zg, evals, ok
        dga = float(ga @ d)
        if abs(dga) <= -c2 * dg0:
            return a, fa, ga, evals, True
        if dga >= 0.0:
            za, zf, zg, ok = zoom(a, fa, dga, a_prev)
            return za, zf, zg, evals, ok
        a_prev, f_prev, dg_prev = a, fa, dga
        a *= 2.0
    return 0.0, f0, g0, evals, False


def lbfgs_minimize(objective, params0, config: LbfgsConfig | None = None,
                   callback=None) -> LbfgsResult:
    """Two-loop-recursion L-BFGS with a strong-Wolfe line search.

    Stops when the gradient inf-norm falls to grad_tol, the relative
    objective decrease over a step falls to f_rel_tol, max_iters is reached,
    or the line search fails (best-so-far returned with the flag set).
    History rows are (iter, value, grad inf-norm, accepted step length).
    """
    cfg = config if config is not None else LbfgsConfig()
    x = np.array(params0, dtype=np.float64)
    f, g = objective(x)
    f = float(f)
    g = np.asarray(g, dtype=np.float64)
    if not _finite(f, g):
        raise NonFiniteObjectiveError("objective non-finite at the start point")

    grad_inf = float(np.max(np.abs(g))) if len(g) else 0.0
    history = [(0, f, grad_inf, 0.0)]
    result = LbfgsResult(x, history, False, False, f, grad_inf, 0)
    if grad_inf <= cfg.grad_tol:
        result.converged = True
        result.stop_reason = "grad_tol"
        return result

    s_list: list = []
    y_list: list = []
    rho_list: list = []

    for it in range(1, cfg.max_iters + 1):
        d = -_two_loop(g, s_list, y_list, rho_list)
        if float(d @ g) >= 0.0:
            # direction lost descent property: drop history, fall back to
            # steepest descent
            s_list, y_list, rho_list = [], [], []
            d = -g
        step, f_new, g_new, _, ok = _strong_wolfe(
            objective, x, f, g, d, cfg.wolfe_c1, cfg.wolfe_c2)
        if not ok:
            result.line_search_failed = True
            result.stop_reason = "line_search"
            break
        x_new = x + step * d
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > cfg.memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        f_old, x, f, g = f, x_new, float(f_new), g_new
        grad_inf = float(np.max(np.abs(g)))
        history.append((it, f, grad_inf, step))
        result.params, result.f, result.grad_inf, result.n_iters = x, f, grad_inf, it
        if callback is not None:
            callback(it, x, f, grad_inf)
        if grad_inf <= cfg.grad_tol:
            result.converged = True
            result.stop_reason = "grad_tol"
            break
        if abs(f_old - f) <= cfg.f_rel_tol * max(abs(f_old), abs(f), 1.0):
            result.converged = True
            result.stop_reason = "f_rel_tol"
            break
    else:
        result.stop_reason = "max_iters"

    return result
