"""Two-resource 0-1 user selection: LP relaxation and best-first branch and bound."""
from dataclasses import dataclass
import heapq
import itertools

import numpy as np
from scipy.optimize import linprog

from .errors import DomainError

INT_TOL = 1e-9
LP_TOL = 1e-7


@dataclass(frozen=True)
class SelectionInstance:
    """maximise values @ beta  s.t.  b_cost @ beta <= b_cap,  p_cost @ beta <= p_cap."""
    values: np.ndarray
    b_cost: np.ndarray
    p_cost: np.ndarray
    b_cap: float
    p_cap: float

    def __post_init__(self):
        arrs = [np.asarray(getattr(self, k), dtype=float).ravel() for k in ("values", "b_cost", "p_cost")]
        if len({a.size for a in arrs}) != 1:
            raise DomainError("values and costs must have equal length")
        if any(np.any(~(a >= 0)) or not np.all(np.isfinite(a)) for a in arrs):
            raise DomainError("values and costs must be finite and >= 0")
        if not (self.b_cap >= 0 and self.p_cap >= 0):
            raise DomainError("caps must be >= 0")
        for k, a in zip(("values", "b_cost", "p_cost"), arrs):
            object.__setattr__(self, k, a)

    def __len__(self):
        return self.values.size


def fits(inst, beta):
    """Whether a 0-1 vector respects both caps (relative slack 1e-12)."""
    beta = np.asarray(beta, dtype=float)
    return (inst.b_cost @ beta <= inst.b_cap * (1 + 1e-12) + 1e-300
            and inst.p_cost @ beta <= inst.p_cap * (1 + 1e-12) + 1e-300)


def value(inst, beta):
    return float(inst.values @ np.asarray(beta, dtype=float))


def _lp(inst, lo, hi):
    n = len(inst)
    if n == 0:
        return np.zeros(0), 0.0
    res = linprog(
        -inst.values,
        A_ub=np.vstack([inst.b_cost, inst.p_cost]),
        b_ub=[inst.b_cap, inst.p_cap],
        bounds=list(zip(lo, hi)),
        method="highs",
    )
    if res.status == 2:
        return None, -np.inf
    if res.status != 0:
        raise RuntimeError(f"LP relaxation failed: {res.message}")
    beta = np.clip(res.x, 0.0, 1.0)
    return beta, float(inst.values @ beta)


def lp_relaxation(inst):
    """Optimal fractional selection and its value (an upper bound on the 0-1 optimum)."""
    n = len(inst)
    return _lp(inst, np.zeros(n), np.ones(n))


def _fractional(beta):
    frac = beta - np.floor(beta + INT_TOL)
    return np.nonzero((frac > INT_TOL) & (frac < 1 - INT_TOL))[0], frac


def _promising(bound, incumbent):
    # LP bounds carry solver round-off (HiGHS works to ~1e-7); prune only
    # when the bound falls clearly short of the incumbent
    return bound > incumbent - LP_TOL * (1.0 + abs(incumbent))


def branch_and_bound(inst, return_stats=False):
    """Exact 0-1 optimum by best-bound-first branch and bound.

    Each node solves the LP relaxation with some variables fixed. The
    variable with the greatest fractional part is branched on (lowest index
    on ties); the floor of every node's LP solution is offered as an
    incumbent. Nodes whose bound cannot beat the incumbent are pruned.
    """
    n = len(inst)
    lo, hi = np.zeros(n), np.ones(n)
    best = np.zeros(n)
    best_val = 0.0
    beta, bound = _lp(inst, lo, hi)
    counter = itertools.count()
    heap = []
    if beta is not None:
        heap.append((-bound, next(counter), lo, hi, beta))
    nodes = 0
    while heap:
        neg_bound, _, lo, hi, beta = heapq.heappop(heap)
        nodes += 1
        if not _promising(-neg_bound, best_val):
            continue
        cand = np.floor(beta + INT_TOL)
        if fits(inst, cand):
            v = value(inst, cand)
            if v > best_val:
                best, best_val = cand, v
        idx, frac = _fractional(beta)
        if idx.size == 0:
            continue
        j = idx[np.argmax(frac[idx])]
        for fixed in (1.0, 0.0):
            lo2, hi2 = lo.copy(), hi.copy()
            lo2[j] = hi2[j] = fixed
            b2, v2 = _lp(inst, lo2, hi2)
            if b2 is not None and _promising(v2, best_val):
                heapq.heappush(heap, (-v2, next(counter), lo2, hi2, b2))
    best = best.astype(int)
    if return_stats:
        return best, {"nodes": nodes, "value": best_val}
    return best


def exhaustive(inst):
    """Reference optimum by enumerating all 2**n subsets (first maximiser wins)."""
    n = len(inst)
    best = np.zeros(n, dtype=int)
    best_val = 0.0
    for mask in range(1 << n):
        beta = np.array([(mask >> k) & 1 for k in range(n)], dtype=int)
        if fits(inst, beta):
            v = value(inst, beta)
            if v > best_val:
                best, best_val = beta, v
    return best, best_val
