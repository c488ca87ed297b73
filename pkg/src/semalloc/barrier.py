"""Log-barrier interior-point method with damped Newton centering.

Solves  min f0(v)  s.t.  g_k(v) <= 0  for smooth convex f0, g_k, starting from
a strictly feasible point. The barrier weight mu starts at ``mu0`` and shrinks
geometrically until the duality measure m*mu drops below ``tol``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergenceError


@dataclass
class BarrierResult:
    v: np.ndarray
    objective: float
    gap: float
    newton_steps: int
    stationarity: float
    duals: np.ndarray = field(repr=False)


def _solve(H, rhs):
    d = np.sqrt(np.abs(np.diag(H)))
    d[d == 0] = 1.0
    Hs = H / d[:, None] / d[None, :]
    try:
        x = np.linalg.solve(Hs, rhs / d)
    except np.linalg.LinAlgError:
        x = np.linalg.lstsq(Hs, rhs / d, rcond=None)[0]
    return x / d


def barrier_minimize(evaluate, v0, tol=1e-8, mu0=1.0, shrink=0.2, newton_eps=1e-10,
                     max_newton=2000):
    """Minimise with a log barrier.

    ``evaluate(v)`` returns ``(f0, grad0, hess0, g, J, curv)`` where ``g`` holds
    the constraint values, ``J`` their Jacobian, and ``curv(w)`` returns
    sum_k w_k * Hessian(g_k). ``hess0`` may be None for linear objectives.
    """
    v = np.array(v0, dtype=float)
    f0, g0, H0, g, J, curv = evaluate(v)
    if not np.all(g < 0):
        raise ValueError("starting point is not strictly feasible")
    m = g.size
    mu = mu0
    steps = 0

    def phi(f0_, g_):
        return f0_ - mu * np.sum(np.log(-g_))

    while True:
        # centering
        while True:
            inv = 1.0 / (-g)
            grad = g0 + mu * (J.T @ inv)
            H = mu * (J.T * inv**2) @ J + curv(mu * inv)
            if H0 is not None:
                H = H + H0
            dv = _solve(H, -grad)
            lam2 = float(-grad @ dv)
            if lam2 / 2.0 <= newton_eps:
                break
            if steps >= max_newton:
                raise NonConvergenceError("barrier Newton iteration cap reached", best=v)
            cur = phi(f0, g)
            slope = float(grad @ dv)
            step = 1.0
            while True:
                vt = v + step * dv
                with np.errstate(all="ignore"):
                    ft, g0t, H0t, gt, Jt, curvt = evaluate(vt)
                if np.all(gt < 0) and np.isfinite(ft) and phi(ft, gt) <= cur + 0.25 * step * slope:
                    break
                step *= 0.5
                if step < 1e-14:
                    break
            steps += 1
            if step < 1e-14:
                break
            v, f0, g0, H0, g, J, curv = vt, ft, g0t, H0t, gt, Jt, curvt
        if m * mu <= tol:
            break
        mu *= shrink
    duals = mu / (-g)
    stat = float(np.max(np.abs(g0 + J.T @ duals))) if v.size else 0.0
    return BarrierResult(v, float(f0), m * mu, steps, stat, duals)
