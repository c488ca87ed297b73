"""Successive convex approximation of the bandwidth/power allocation.

Per user the success surrogate is g = exp(-x**2/2) with
x = (2**q - 1) * B / (k * P) and q = c * (1 - o) / B. Slack variables turn
this into

    f <= exp(l),  l <= -x**2/2,  m >= 2**q - 1,  q >= c(1-o)/B,
    z >= B*m,     x*P >= z/k,

and the two nonconvex couplings (z >= B*m and x*P >= z/k) plus the
exponential bound on f are replaced by convex inner approximations around
the previous iterate. Internally B and P are divided by B_max/U and P_max/U
so every variable is of order one.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .barrier import barrier_minimize
from .errors import InfeasibleError, NonConvergenceError
from .link import g_term_arrays

LN2 = math.log(2.0)
# f may fall this many multiples of exp(l_j) below zero; keeps f bounded
F_FLOOR = 50.0
# users whose surrogate log-probability is below -L_PASSIVE contribute nothing
# measurable and are carried with their resource box only
L_PASSIVE = 60.0
# share of the way each start point is pulled toward the box centre
PULL = 1e-3
MARGIN = 1e-6


@dataclass
class SlackState:
    """Allocation plus slack variables; B in Hz (or units), P in W (or units), z = B*m."""
    B: np.ndarray
    P: np.ndarray
    f: np.ndarray
    l: np.ndarray
    x: np.ndarray
    m: np.ndarray
    q: np.ndarray
    z: np.ndarray

    def copy(self):
        return SlackState(*(getattr(self, k).copy() for k in SlackState.__dataclass_fields__))


@dataclass
class Allocation:
    B: np.ndarray
    P: np.ndarray
    history: list = field(default_factory=list)
    state: SlackState = None
    rounds: int = 0


@dataclass
class _Problem:
    """Scenario constants in scaled units."""
    U: int
    b_ref: float
    p_ref: float
    b_lo: float
    b_hi: float
    p_lo: float
    p_hi: float
    chat: np.ndarray   # q = chat / B
    kappa: np.ndarray  # x = kappa * z / P
    alpha: np.ndarray
    fix_b: bool
    fix_p: bool


def _problem(s, o, alpha):
    o = np.asarray(o, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if o.shape != (s.U,) or np.any(~((o > 0) & (o < 1))):
        raise ValueError("ratios must hold U values in (0, 1)")
    if alpha.shape != (s.U,) or np.any(~(alpha >= 0)):
        raise ValueError("weights must hold U values >= 0")
    U = s.U
    if U * s.B_min > s.B_max * (1 + 1e-12) or U * s.P_min > s.P_max * (1 + 1e-12):
        raise InfeasibleError("caps cannot cover every user's minimum bandwidth and power")
    b_ref, p_ref = s.B_max / U, s.P_max / U
    b_lo, p_lo = s.B_min / b_ref, s.P_min / p_ref
    return _Problem(
        U, b_ref, p_ref, b_lo, float(U), p_lo, float(U),
        chat=s.load * (1.0 - o) / b_ref,
        kappa=b_ref / (s.snr_coef * p_ref),
        alpha=alpha,
        fix_b=U * b_lo >= U * (1 - 1e-9),
        fix_p=U * p_lo >= U * (1 - 1e-9),
    )


def _chain(pr, B, P):
    """Tight slack values (scaled) for a scaled allocation."""
    with np.errstate(over="ignore", invalid="ignore"):
        q = pr.chat / B
        m = np.expm1(q * LN2)
        z = B * m
        x = pr.kappa * z / P
        l = -0.5 * x * x
        f = np.exp(l)
    return q, m, z, x, l, f


def surrogate(s, o, alpha, B, P):
    """Weighted surrogate sum_i alpha_i * g_i(B_i, P_i) in physical units."""
    pr = _problem(s, o, alpha)
    return _surrogate(pr, np.asarray(B) / pr.b_ref, np.asarray(P) / pr.p_ref)


def _surrogate(pr, B, P):
    q = pr.chat / B
    snr = P / (B * pr.kappa)
    # g_term_arrays takes (a, b*delta, o); pass the payload as a with o = 0
    return float(np.dot(pr.alpha, g_term_arrays(q, snr, 0.0)))


def _to_state(pr, B, P, f, l, x, m, q, z):
    return SlackState(B * pr.b_ref, P * pr.p_ref, f, l, x, m, q, z * pr.b_ref)


def tighten(s, o, alpha, state):
    """Squeeze the slacks of ``state`` onto their tight values at its (B, P)."""
    pr = _problem(s, o, alpha)
    B, P = state.B / pr.b_ref, state.P / pr.p_ref
    q, m, z, x, l, f = _chain(pr, B, P)
    return _to_state(pr, B, P, f, l, x, m, q, z)


def init_feasible(s, o, alpha):
    """Equal split of both caps with tight slack variables."""
    pr = _problem(s, o, alpha)
    B = np.ones(pr.U)
    P = np.ones(pr.U)
    q, m, z, x, l, f = _chain(pr, B, P)
    return _to_state(pr, B, P, f, l, x, m, q, z)


# ---------------------------------------------------------------------------
# Convex subproblem
# ---------------------------------------------------------------------------

class _Layout:
    def __init__(self, U, active):
        self.U = U
        self.active = active
        nA = active.size
        self.nA = nA
        self.iB = np.arange(U)
        self.iP = U + np.arange(U)
        base = 2 * U
        self.iF, self.iL, self.iX, self.iM, self.iQ, self.iZ = (
            base + k * nA + np.arange(nA) for k in range(6)
        )
        self.n = base + 6 * nA

    def unpack(self, v):
        return (v[self.iB], v[self.iP], v[self.iF], v[self.iL], v[self.iX], v[self.iM],
                v[self.iQ], v[self.iZ])


def _evaluator(pr, lay, lin):
    """Objective and constraints of the convexified subproblem around ``lin``."""
    A = lay.active
    nA = lay.nA
    U = lay.U
    chat, kappa = pr.chat[A], pr.kappa[A]
    lj, gam, dj, rho, s_lin = lin
    E = np.exp(lj)
    n = lay.n
    grad0 = np.zeros(n)
    grad0[lay.iF] = -pr.alpha[A]
    rows_user = 7 * nA
    n_rows = rows_user + (0 if pr.fix_b else U + 1) + (0 if pr.fix_p else U + 1)
    r = np.arange(nA)

    def evaluate(v):
        B, P, f, l, x, m, q, z = lay.unpack(v)
        Ba, Pa = B[A], P[A]
        g = np.empty(n_rows)
        J = np.zeros((n_rows, n))
        # f below the tangent of exp at l_j
        g[0:nA] = f - E * (1.0 + l - lj)
        J[r, lay.iF] = 1.0
        J[r, lay.iL] = -E
        # f bounded below
        g[nA:2 * nA] = -f - F_FLOOR * E
        J[nA + r, lay.iF] = -1.0
        # l <= -x^2/2
        g[2 * nA:3 * nA] = l + 0.5 * x * x
        J[2 * nA + r, lay.iL] = 1.0
        J[2 * nA + r, lay.iX] = x
        # m >= 2^q - 1, in log form
        g[3 * nA:4 * nA] = q * LN2 - np.log1p(m)
        J[3 * nA + r, lay.iQ] = LN2
        J[3 * nA + r, lay.iM] = -1.0 / (1.0 + m)
        # q >= payload / B
        g[4 * nA:5 * nA] = chat / Ba - q
        J[4 * nA + r, A] = -chat / Ba**2
        J[4 * nA + r, lay.iQ] = -1.0
        # z >= B*m via 4Bm = (gB + m/g)^2 - (gB - m/g)^2, second square linearised
        u = gam * Ba + m / gam
        g[5 * nA:6 * nA] = 0.25 * (u * u - 2.0 * (gam * Ba - m / gam) * dj + dj**2) - z
        J[5 * nA + r, A] = 0.5 * gam * (u - dj)
        J[5 * nA + r, lay.iM] = 0.5 * (u + dj) / gam
        J[5 * nA + r, lay.iZ] = -1.0
        # x*P >= kappa*z via 4xP = (x/h + hP)^2 - (x/h - hP)^2, first square linearised
        d = x / rho - rho * Pa
        g[6 * nA:7 * nA] = 4.0 * kappa * z - 2.0 * (x / rho + rho * Pa) * s_lin + s_lin**2 + d * d
        J[6 * nA + r, lay.iZ] = 4.0 * kappa
        J[6 * nA + r, lay.iX] = 2.0 * (d - s_lin) / rho
        J[6 * nA + r, U + A] = -2.0 * (s_lin + d) * rho
        k = rows_user
        if not pr.fix_b:
            g[k:k + U] = pr.b_lo - B
            J[k + np.arange(U), lay.iB] = -1.0
            g[k + U] = B.sum() - pr.b_hi
            J[k + U, lay.iB] = 1.0
            k += U + 1
        if not pr.fix_p:
            g[k:k + U] = pr.p_lo - P
            J[k + np.arange(U), lay.iP] = -1.0
            g[k + U] = P.sum() - pr.p_hi
            J[k + U, lay.iP] = 1.0

        def curv(w):
            H = np.zeros((n, n))
            w3 = w[2 * nA:3 * nA]
            w4 = w[3 * nA:4 * nA]
            w5 = w[4 * nA:5 * nA]
            w6 = w[5 * nA:6 * nA]
            w7 = w[6 * nA:7 * nA]
            H[lay.iX, lay.iX] += w3 + 2.0 * w7 / rho**2
            H[lay.iM, lay.iM] += w4 / (1.0 + m) ** 2 + 0.5 * w6 / gam**2
            H[A, A] += w5 * 2.0 * chat / Ba**3 + 0.5 * w6 * gam**2
            H[A, lay.iM] += 0.5 * w6
            H[lay.iM, A] += 0.5 * w6
            H[U + A, U + A] += 2.0 * w7 * rho**2
            H[lay.iX, U + A] -= 2.0 * w7
            H[U + A, lay.iX] -= 2.0 * w7
            return H

        f0 = float(grad0 @ v)
        return f0, grad0, None, g, J, curv

    return evaluate


def _reduce(evaluate, free, full0):
    """Restrict ``evaluate`` to the coordinates in ``free``, others held at ``full0``."""
    def ev(vr):
        v = full0.copy()
        v[free] = vr
        f0, g0, H0, g, J, curv = evaluate(v)
        return f0, g0[free], None, g, J[:, free], lambda w: curv(w)[np.ix_(free, free)]
    return ev


def _interior_start(pr, lay, B, P, lin):
    """Strictly feasible point for the subproblem near the allocation (B, P)."""
    A = lay.active
    bc = 0.5 * (pr.b_lo + pr.b_hi / pr.U)
    pc = 0.5 * (pr.p_lo + pr.p_hi / pr.U)
    B = B if pr.fix_b else (1 - PULL) * B + PULL * bc
    P = P if pr.fix_p else (1 - PULL) * P + PULL * pc
    lj, gam, dj, rho, s_lin = lin
    Ba, Pa = B[A], P[A]
    chat, kappa = pr.chat[A], pr.kappa[A]
    q = chat / Ba * (1 + MARGIN)
    m = np.expm1(q * LN2) * (1 + MARGIN) + MARGIN
    u = gam * Ba + m / gam
    z = 0.25 * (u * u - 2.0 * (gam * Ba - m / gam) * dj + dj**2) * (1 + MARGIN) + MARGIN
    # the coupling row is a quadratic in x/h; start just above its smaller root
    disc = rho * Pa * s_lin - kappa * z
    if np.any(disc <= 0):
        return None
    root = 2.0 * np.sqrt(disc)
    x = rho * (s_lin + rho * Pa - root + MARGIN * 2.0 * root)
    l = -0.5 * x * x - MARGIN * (1.0 + 0.5 * x * x)
    E = np.exp(lj)
    upper = E * (1.0 + l - lj)
    width = upper + F_FLOOR * E
    if np.any(width <= 0):
        return None
    f = upper - MARGIN * width
    v = np.zeros(lay.n)
    v[lay.iB], v[lay.iP] = B, P
    v[lay.iF], v[lay.iL], v[lay.iX] = f, l, x
    v[lay.iM], v[lay.iQ], v[lay.iZ] = m, q, z
    return v


def _active_users(pr, l):
    return np.nonzero((pr.alpha > 0) & (l > -L_PASSIVE))[0]


def _linearisation(pr, B, P, l, m, x, balance):
    """Expansion data for the two product couplings.

    With ``balance`` each product is rescaled per user so both factors are
    equal at the expansion point; the linearised square then vanishes there
    and the inner approximation is as tight as possible around it. Without
    it the factors enter unscaled.
    """
    if balance:
        gam = np.sqrt(np.clip(m / B, 1e-4, 1e4))
        rho = np.sqrt(np.clip(x / P, 1e-4, 1e4))
    else:
        gam = np.ones_like(B)
        rho = np.ones_like(B)
    return l, gam, gam * B - m / gam, rho, x / rho + rho * P


def _step(pr, B, P, tol, balance=True, max_newton=2000):
    """One convexified solve from scaled (B, P); returns scaled (B, P, slacks-or-None)."""
    q, m, z, x, l, f = _chain(pr, B, P)
    active = _active_users(pr, l)
    lay = _Layout(pr.U, active)
    lin = _linearisation(pr, B[active], P[active], l[active], m[active], x[active], balance)
    v0 = _interior_start(pr, lay, B, P, lin)
    if v0 is None:
        return B, P, None
    free = np.ones(lay.n, dtype=bool)
    if pr.fix_b:
        free[lay.iB] = False
    if pr.fix_p:
        free[lay.iP] = False
    free = np.nonzero(free)[0]
    v = _solve_subproblem(pr, lay, lin, v0, free, tol, max_newton)
    return v[lay.iB], v[lay.iP], (lay, v)


def _solve_subproblem(pr, lay, lin, v0, free, tol, max_newton, use_kernel=None):
    """Barrier solve; the compiled kernel when available, else the generic solver."""
    use_kernel = kernels.HAVE_NUMBA if use_kernel is None else use_kernel
    if use_kernel:
        A = lay.active
        lj, gam, dj, rho, s_lin = lin
        v, _, _ = kernels.sca_barrier_nb(
            v0, free, pr.U, A.astype(np.int64), pr.chat[A], pr.kappa[A], pr.alpha[A],
            lj, gam, dj, rho, s_lin, pr.b_lo, pr.b_hi, pr.p_lo, pr.p_hi, pr.fix_b, pr.fix_p,
            tol, 1.0, 0.2, 1e-10, max_newton,
        )
        return v
    ev = _reduce(_evaluator(pr, lay, lin), free, v0)
    try:
        vr = barrier_minimize(ev, v0[free], tol=tol, max_newton=max_newton).v
    except NonConvergenceError as e:
        vr = e.best
    v = v0.copy()
    v[free] = vr
    return v


def convex_step(s, o, alpha, prev, tol=1e-8, balance=True):
    """Solve the convexified subproblem linearised at ``prev``.

    Returns the raw solution: active users carry the solver's slack values,
    which satisfy the original couplings conservatively; passive users (zero
    weight or negligible surrogate) carry tight slacks. If the solve does not
    improve the weighted surrogate, the tightened ``prev`` is returned.
    """
    pr = _problem(s, o, alpha)
    B0, P0 = prev.B / pr.b_ref, prev.P / pr.p_ref
    base = _surrogate(pr, B0, P0)
    B, P, raw = _step(pr, B0, P0, tol, balance)
    if raw is None or _surrogate(pr, B, P) < base:
        return tighten(s, o, alpha, prev)
    lay, v = raw
    q, m, z, x, l, f = _chain(pr, B, P)
    A = lay.active
    _, _, f[A], l[A], x[A], m[A], q[A], z[A] = lay.unpack(v)
    return _to_state(pr, B, P, f, l, x, m, q, z)


def sca_allocate(s, o, alpha, tol=1e-6, max_outer=50, inner_tol=1e-8, start=None, balance=True):
    """Iterate convex steps until the weighted surrogate changes by at most ``tol``.

    ``start`` is an optional (B, P) warm start in physical units; the default
    is the equal split. ``history`` lists the surrogate after each outer
    iteration, beginning with the start value.
    """
    pr = _problem(s, o, alpha)
    if start is None:
        B, P = np.ones(pr.U), np.ones(pr.U)
    else:
        B = np.asarray(start[0], dtype=float) / pr.b_ref
        P = np.asarray(start[1], dtype=float) / pr.p_ref
        if (np.any(B < pr.b_lo * (1 - 1e-12)) or B.sum() > pr.b_hi * (1 + 1e-12)
                or np.any(P < pr.p_lo * (1 - 1e-12)) or P.sum() > pr.p_hi * (1 + 1e-12)):
            raise InfeasibleError("warm start violates the resource constraints")
    cur = _surrogate(pr, B, P)
    history = [cur]
    rounds = 0
    for rounds in range(1, max_outer + 1):
        Bn, Pn, raw = _step(pr, B, P, inner_tol, balance)
        val = _surrogate(pr, Bn, Pn) if raw is not None else -np.inf
        if val < cur:
            history.append(cur)
            break
        B, P = Bn, Pn
        history.append(val)
        done = abs(val - cur) <= tol
        cur = val
        if done:
            break
    q, m, z, x, l, f = _chain(pr, B, P)
    state = _to_state(pr, B, P, f, l, x, m, q, z)
    return Allocation(B * pr.b_ref, P * pr.p_ref, history, state, rounds)


def coupling_residuals(s, state):
    """Scaled violations of z >= B*m and x*P >= z/k (positive means violated).

    Each violation is divided by max(1, size of its terms): users pushed to
    zero success carry slacks near 1e18, where one ulp already exceeds 1e-6.
    """
    b_ref, p_ref = s.B_max / s.U, s.P_max / s.U
    B, P, z = state.B / b_ref, state.P / p_ref, state.z / b_ref
    kappa = b_ref / (s.snr_coef * p_ref)
    with np.errstate(invalid="ignore", over="ignore"):
        r1 = (B * state.m - z) / np.maximum(1.0, np.abs(z))
        r2 = (kappa * z - state.x * P) / np.maximum(1.0, np.abs(kappa * z))
    return np.nan_to_num(r1, nan=0.0), np.nan_to_num(r2, nan=0.0)


def resource_residuals(s, B, P):
    """Scaled violations of the four resource constraints (max over users)."""
    b_ref, p_ref = s.B_max / s.U, s.P_max / s.U
    B, P = np.asarray(B) / b_ref, np.asarray(P) / p_ref
    return {
        "bandwidth_sum": float(B.sum() - s.B_max / b_ref),
        "bandwidth_min": float(np.max(s.B_min / b_ref - B)) if B.size else 0.0,
        "power_sum": float(P.sum() - s.P_max / p_ref),
        "power_min": float(np.max(s.P_min / p_ref - P)) if P.size else 0.0,
    }
