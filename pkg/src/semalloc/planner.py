"""Outer optimisers: ratio enumeration, CRRA, CRRAUS and the FCR/FRA/MSR baselines.

Every optimiser works on the smooth surrogate g of the success probability
and reports the objective both with g and with the exact Q-function form.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .allocator import sca_allocate
from .barrier import barrier_minimize
from .errors import DomainError, InfeasibleError
from .link import g_term_arrays, success_prob_arrays
from .selection import SelectionInstance, branch_and_bound, value as selection_value
from .task_perf import eta

FCR_RATIO = 0.8


@dataclass
class Solution:
    o: np.ndarray
    beta: np.ndarray
    B: np.ndarray
    P: np.ndarray
    phi_per_user: np.ndarray
    phi_total: float
    phi_surrogate_per_user: np.ndarray
    phi_surrogate: float
    iterations: int = 0
    history: list = field(default_factory=list)
    algo: str = ""
    evaluated_with: str = "exact"


def ratio_grid(step=0.01):
    """Interior grid step, 2*step, ..., 1-step."""
    n = int(round(1.0 / step))
    if n < 2 or abs(n * step - 1.0) > 1e-9:
        raise DomainError("grid step must divide 1 into at least two intervals")
    return np.arange(1, n) / n


def _link_arrays(s, B, P):
    B = np.asarray(B, dtype=float)
    P = np.asarray(P, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return s.load / B, s.snr_coef * P / B


def phi_user(s, model, B, P, o, i, surrogate=False):
    """eta(o_i) times the success (or surrogate) probability of user ``i``."""
    a, snr = _link_arrays(s, [B[i]], [P[i]])
    o_i = np.asarray([o[i]], dtype=float)
    t = g_term_arrays(a, snr, o_i) if surrogate else success_prob_arrays(a, snr, o_i)
    return float(eta(model, o[i]) * t[0])


def _per_user(s, model, B, P, o, beta):
    a, snr = _link_arrays(s, B, P)
    on = np.asarray(beta) > 0
    exact = np.zeros(s.U)
    sur = np.zeros(s.U)
    if np.any(on):
        et = eta(model, np.asarray(o)[on])
        exact[on] = et * success_prob_arrays(a[on], snr[on], np.asarray(o)[on])
        sur[on] = et * g_term_arrays(a[on], snr[on], np.asarray(o)[on])
    return exact, sur


def phi_total(s, sol):
    """sum_i beta_i * w_i * Phi_i (exact form)."""
    r = s.assignment
    if np.any(np.abs(r.sum(axis=1) - 1) > 0):
        raise DomainError("each user must belong to exactly one service level")
    return float(np.sum(sol.beta * s.weights * sol.phi_per_user))


def make_solution(s, model, o, beta, B, P, iterations=0, history=None, algo=""):
    o = np.asarray(o, dtype=float)
    beta = np.asarray(beta, dtype=int)
    B = np.where(beta > 0, np.asarray(B, dtype=float), 0.0)
    P = np.where(beta > 0, np.asarray(P, dtype=float), 0.0)
    exact, sur = _per_user(s, model, B, P, o, beta)
    w = s.weights
    return Solution(
        o, beta, B, P, exact, float(np.sum(beta * w * exact)), sur, float(np.sum(beta * w * sur)),
        iterations, list(history or []), algo,
    )


def optimal_ratios(s, model, B, P, grid_step=0.01):
    """Per-user grid argmax of eta(o) * g(o); ties go to the smaller ratio."""
    grid = ratio_grid(grid_step)
    a, snr = _link_arrays(s, B, P)
    idx, _ = kernels.ratio_scores_argmax(
        np.ascontiguousarray(a), np.ascontiguousarray(snr), np.asarray(model.zeta, dtype=float), grid
    )
    return grid[idx]


def _weighted_surrogate(s, model, B, P, o, w):
    a, snr = _link_arrays(s, B, P)
    return float(np.sum(w * eta(model, o) * g_term_arrays(a, snr, o)))


def crra(s, model, tol=1e-6, max_rounds=50, weights=None, grid_step=0.01, sca_kw=None):
    """Alternate ratio enumeration and SCA allocation with every user selected.

    ``weights`` defaults to the scenario's service-level weights; pass ones to
    weigh users equally.
    """
    w = s.weights if weights is None else np.asarray(weights, dtype=float)
    sca_kw = dict(sca_kw or {})
    B, P = s.equal_split()
    if s.U * s.B_min > s.B_max * (1 + 1e-12) or s.U * s.P_min > s.P_max * (1 + 1e-12):
        raise InfeasibleError("caps cannot serve every user; use crraus")
    cur = -math.inf
    history = []
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        o = optimal_ratios(s, model, B, P, grid_step)
        alpha = w * eta(model, o)
        alloc = sca_allocate(s, o, alpha, start=(B, P), **sca_kw)
        B, P = alloc.B, alloc.P
        val = _weighted_surrogate(s, model, B, P, o, w)
        history.append(val)
        if abs(val - cur) <= tol:
            break
        cur = val
    sol = make_solution(s, model, o, np.ones(s.U), B, P, rounds, history, "crra")
    return sol


def _fits_all(s):
    return s.U * s.B_min <= s.B_max * (1 + 1e-12) and s.U * s.P_min <= s.P_max * (1 + 1e-12)


def crraus(s, model, tol=1e-6, max_rounds=50, grid_step=0.01, sca_kw=None):
    """CRRA with a branch-and-bound user-selection block between ratios and allocation.

    The first selection maximises the summed service weights of users that
    fit at their minimum resources (everyone, when the caps allow it). Each
    round then picks ratios, re-selects with each user valued at its
    weighted surrogate probability and charged its current resources
    (minimum resources for unselected users), and reallocates among the
    selected users by SCA. A new selection is adopted only if it strictly
    improves the objective, so ties keep the incumbent.
    """
    sca_kw = dict(sca_kw or {})
    w = s.weights
    U = s.U
    B = np.full(U, s.B_min)
    P = np.full(U, s.P_min)
    if _fits_all(s):
        beta = np.ones(U, dtype=int)
    else:
        inst = SelectionInstance(w, np.full(U, s.B_min), np.full(U, s.P_min), s.B_max, s.P_max)
        beta = branch_and_bound(inst)
        if not beta.any():
            raise InfeasibleError("no user fits within the caps")
    sel = np.nonzero(beta)[0]
    B[sel] = s.B_max / sel.size
    P[sel] = s.P_max / sel.size
    cur = -math.inf
    history = []
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        o = optimal_ratios(s, model, B, P, grid_step)
        # selection block
        a, snr = _link_arrays(s, B, P)
        vals = w * eta(model, o) * g_term_arrays(a, snr, o)
        inst = SelectionInstance(vals, B, P, s.B_max, s.P_max)
        cand = branch_and_bound(inst)
        if selection_value(inst, cand) > selection_value(inst, beta):
            beta = cand
            off = beta == 0
            B[off], P[off] = s.B_min, s.P_min
            o = optimal_ratios(s, model, B, P, grid_step)
        sel = np.nonzero(beta)[0]
        # allocation block among selected users
        sub = s.subset(sel)
        alpha = w[sel] * eta(model, o[sel])
        alloc = sca_allocate(sub, o[sel], alpha, start=(B[sel], P[sel]), **sca_kw)
        B[sel], P[sel] = alloc.B, alloc.P
        val = _weighted_surrogate(sub, model, alloc.B, alloc.P, o[sel], w[sel])
        history.append(val)
        if abs(val - cur) <= tol:
            break
        cur = val
    return make_solution(s, model, o, beta, B, P, rounds, history, "crraus")


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def _require_all(s, name):
    if not _fits_all(s):
        raise InfeasibleError(f"{name} serves every user but the caps cannot")


def baseline_fcr(s, model, sca_kw=None):
    """Fixed compression ratio 0.8 for everyone, SCA allocation."""
    _require_all(s, "fcr")
    o = np.full(s.U, FCR_RATIO)
    alpha = s.weights * eta(model, o)
    alloc = sca_allocate(s, o, alpha, **dict(sca_kw or {}))
    return make_solution(s, model, o, np.ones(s.U), alloc.B, alloc.P, alloc.rounds,
                         alloc.history, "fcr")


def baseline_fra(s, model, grid_step=0.01):
    """Equal split of both caps, enumerated ratios."""
    _require_all(s, "fra")
    B, P = s.equal_split()
    o = optimal_ratios(s, model, B, P, grid_step)
    return make_solution(s, model, o, np.ones(s.U), B, P, 1, [], "fra")


def sum_rate_allocation(s, tol=1e-9):
    """Maximise sum_i B_i log2(1 + hbar_i P_i / (N0 B_i)) with hbar_i = delta_i sqrt(2/pi)."""
    U = s.U
    b_ref, p_ref = s.B_max / U, s.P_max / U
    nu = s.snr_coef * math.sqrt(2.0 / math.pi) * p_ref / b_ref
    lows = (s.B_min / b_ref, s.P_min / p_ref)
    # a resource whose minimum shares exhaust its cap is pinned at the minimum
    free_blocks = [k for k in (0, 1) if lows[k] < 1 - 1e-9]
    free = np.concatenate([k * U + np.arange(U) for k in free_blocks]) if free_blocks else np.zeros(0, int)
    ii = np.arange(U)
    ln2 = math.log(2.0)

    def evaluate(vr):
        v = np.ones(2 * U)
        v[free] = vr
        B, P = v[:U], v[U:]
        y = P / B
        t = nu * y
        lt = np.log1p(t)
        f0 = -float(np.sum(B * lt)) / ln2
        grad = -np.concatenate([lt - t / (1 + t), nu / (1 + t)]) / ln2
        c = nu**2 / (1 + t) ** 2 / B / ln2
        H = np.zeros((2 * U, 2 * U))
        H[ii, ii] = c * y * y
        H[U + ii, U + ii] = c
        H[ii, U + ii] = H[U + ii, ii] = -c * y
        g, rows = [], []
        for k in free_blocks:
            vals = v[k * U:(k + 1) * U]
            Jk = np.zeros((U + 1, 2 * U))
            Jk[ii, k * U + ii] = -1.0
            Jk[U, k * U:(k + 1) * U] = 1.0
            rows.append(Jk[:, free])
            g.append(np.concatenate([lows[k] - vals, [vals.sum() - U]]))
        n = free.size
        return (f0, grad[free], H[np.ix_(free, free)], np.concatenate(g), np.vstack(rows),
                lambda w_: np.zeros((n, n)))

    if free.size:
        # start just inside the equal split
        v0 = np.concatenate([np.full(U, 1.0 - 1e-3 * (1.0 - lows[k])) for k in free_blocks])
        vr = barrier_minimize(evaluate, v0, tol=tol).v
    else:
        vr = np.zeros(0)
    v = np.ones(2 * U)
    v[free] = vr
    return v[:U] * b_ref, v[U:] * p_ref


def baseline_msr(s, model, grid_step=0.01):
    """Sum-rate allocation with mean gain magnitudes, enumerated ratios."""
    _require_all(s, "msr")
    B, P = sum_rate_allocation(s)
    o = optimal_ratios(s, model, B, P, grid_step)
    return make_solution(s, model, o, np.ones(s.U), B, P, 1, [], "msr")


ALGORITHMS = {
    "crra": crra,
    "crraus": crraus,
    "fcr": baseline_fcr,
    "fra": baseline_fra,
    "msr": baseline_msr,
}
