"""Hot inner loops, each with a numba kernel and a pure-numpy twin.

The public names at the bottom of the module (``count_at_least``,
``ratio_scores_argmax``, ``fit_exp2``) dispatch on ``_accel.HAVE_NUMBA``.
Both variants are importable directly (``*_nb`` / ``*_np``) so tests and the
benchmark can compare them.
"""
import math

import numpy as np

from ._accel import HAVE_NUMBA, njit

LN2 = math.log(2.0)
# exp(-LOG_UNDERFLOW) is the smallest probability we keep; below it values clamp to 0
LOG_UNDERFLOW = 690.0


# ---------------------------------------------------------------------------
# Monte-Carlo success counting
# ---------------------------------------------------------------------------

@njit
def count_at_least_nb(h, threshold):
    n = 0
    for k in range(h.shape[0]):
        if abs(h[k]) >= threshold:
            n += 1
    return n


def count_at_least_np(h, threshold):
    return int(np.count_nonzero(np.abs(h) >= threshold))


# ---------------------------------------------------------------------------
# Compression-ratio grid enumeration
# ---------------------------------------------------------------------------

@njit
def _log_arg_scalar(expo_bits, snr):
    # log((2**expo_bits - 1) / snr), -inf when expo_bits == 0
    if expo_bits <= 0.0:
        return -np.inf
    y = expo_bits * LN2
    if y > 700.0:
        return y + math.log1p(-math.exp(-y)) - math.log(snr)
    return math.log(math.expm1(y)) - math.log(snr)


@njit
def ratio_scores_argmax_nb(a, snr, zeta, grid):
    """Per-user argmax over ``grid`` of log(eta(o)) - arg(o)**2 / 2.

    ``a`` is the load factor and ``snr`` the product b*delta of each user.
    Returns (best index per user, best log-score per user). The first index
    wins ties, i.e. the smallest ratio.
    """
    n_users = a.shape[0]
    n_grid = grid.shape[0]
    best_idx = np.zeros(n_users, dtype=np.int64)
    best_val = np.full(n_users, -np.inf)
    z1, z2, z3, z4 = zeta[0], zeta[1], zeta[2], zeta[3]
    for i in range(n_users):
        for k in range(n_grid):
            o = grid[k]
            eta = z1 * math.exp(z2 * o) + z3 * math.exp(z4 * o)
            if eta > 1.0:
                eta = 1.0
            if eta <= 0.0:
                score = -np.inf
            else:
                la = _log_arg_scalar(a[i] * (1.0 - o), snr[i])
                if la == -np.inf:
                    score = math.log(eta)
                elif la > 354.0:
                    score = -np.inf
                else:
                    score = math.log(eta) - 0.5 * math.exp(2.0 * la)
            if k == 0 or score > best_val[i]:
                best_val[i] = score
                best_idx[i] = k
    return best_idx, best_val


def ratio_score_matrix_np(a, snr, zeta, grid):
    a = np.asarray(a, dtype=float)[:, None]
    snr = np.asarray(snr, dtype=float)[:, None]
    o = np.asarray(grid, dtype=float)[None, :]
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        eta = np.minimum(zeta[0] * np.exp(zeta[1] * o) + zeta[2] * np.exp(zeta[3] * o), 1.0)
        log_eta = np.where(eta > 0.0, np.log(np.where(eta > 0.0, eta, 1.0)), -np.inf)
        y = a * (1.0 - o) * LN2
        small = y <= 700.0
        log_arg = np.where(
            small,
            np.log(np.expm1(np.where(small, y, 0.0))),
            y + np.log1p(-np.exp(-y)),
        ) - np.log(snr)
        log_arg = np.where(y <= 0.0, -np.inf, log_arg)
        penalty = np.where(log_arg > 354.0, np.inf, 0.5 * np.exp(2.0 * np.minimum(log_arg, 354.0)))
        score = np.where(np.isfinite(log_eta), log_eta - penalty, -np.inf)
    return np.broadcast_to(score, (a.shape[0], o.shape[1]))


def ratio_scores_argmax_np(a, snr, zeta, grid):
    score = ratio_score_matrix_np(a, snr, zeta, grid)
    idx = np.argmax(score, axis=1)
    return idx.astype(np.int64), score[np.arange(score.shape[0]), idx]


# ---------------------------------------------------------------------------
# Two-exponential fit: scaled gradient descent
# ---------------------------------------------------------------------------
# Parameters are carried as theta = (log|z1| + z2*oc, z2, z3, z4), oc = max(o),
# with the sign of z1 frozen: z1 spans ~16 orders of magnitude, so it is
# stepped in log-magnitude, and centring the exponent at oc decouples it from
# z2. Each coordinate's step is divided by the mean squared sensitivity of the
# model to that coordinate; the step length grows on success and halves on
# failure, so the loss never increases.

Z2_BOUND = 500.0


@njit
def _fit_eval_nb(o, y, sign1, oc, theta, grad, scale):
    n = o.shape[0]
    loss = 0.0
    for k in range(4):
        grad[k] = 0.0
        scale[k] = 0.0
    for d in range(n):
        e1 = sign1 * math.exp(theta[0] + theta[1] * (o[d] - oc))
        e2 = math.exp(theta[3] * o[d])
        j0 = e1
        j1 = e1 * (o[d] - oc)
        j2 = e2
        j3 = theta[2] * e2 * o[d]
        r = e1 + theta[2] * e2 - y[d]
        loss += r * r
        grad[0] += r * j0
        grad[1] += r * j1
        grad[2] += r * j2
        grad[3] += r * j3
        scale[0] += j0 * j0
        scale[1] += j1 * j1
        scale[2] += j2 * j2
        scale[3] += j3 * j3
    for k in range(4):
        grad[k] /= n
        scale[k] = scale[k] / n + 1e-30
    return loss / (2.0 * n)


@njit
def fit_exp2_nb(o, y, sign1, oc, theta0, step, loss_threshold, max_iters):
    theta = theta0.copy()
    trial = theta0.copy()
    grad = np.zeros(4)
    scale = np.zeros(4)
    tgrad = np.zeros(4)
    tscale = np.zeros(4)
    loss0 = _fit_eval_nb(o, y, sign1, oc, theta, grad, scale)
    loss = loss0
    lr = step
    it = 0
    diverged = not math.isfinite(loss0)
    while it < max_iters and not diverged:
        if loss <= loss_threshold or lr < 1e-14:
            break
        for k in range(4):
            trial[k] = theta[k] - lr * grad[k] / scale[k]
        trial[1] = min(max(trial[1], -Z2_BOUND), Z2_BOUND)
        tl = _fit_eval_nb(o, y, sign1, oc, trial, tgrad, tscale)
        it += 1
        if math.isfinite(tl) and tl <= loss:
            for k in range(4):
                theta[k] = trial[k]
                grad[k] = tgrad[k]
                scale[k] = tscale[k]
            loss = tl
            lr = min(lr * 1.2, 1.0)
        else:
            lr *= 0.5
        if loss > 1e6 * loss0:
            diverged = True
    return theta, loss, it, diverged


def _fit_eval_np(o, y, sign1, oc, theta):
    e1 = sign1 * np.exp(theta[0] + theta[1] * (o - oc))
    e2 = np.exp(theta[3] * o)
    jac = np.stack([e1, e1 * (o - oc), e2, theta[2] * e2 * o], axis=1)
    r = e1 + theta[2] * e2 - y
    n = o.shape[0]
    return float(np.dot(r, r)) / (2.0 * n), jac.T @ r / n, (jac * jac).sum(axis=0) / n + 1e-30


def fit_exp2_np(o, y, sign1, oc, theta0, step, loss_threshold, max_iters):
    theta = np.array(theta0, dtype=float)
    loss0, grad, scale = _fit_eval_np(o, y, sign1, oc, theta)
    loss = loss0
    lr = step
    it = 0
    diverged = not math.isfinite(loss0)
    while it < max_iters and not diverged:
        if loss <= loss_threshold or lr < 1e-14:
            break
        trial = theta - lr * grad / scale
        trial[1] = min(max(trial[1], -Z2_BOUND), Z2_BOUND)
        with np.errstate(over="ignore", invalid="ignore"):
            tl, tg, ts = _fit_eval_np(o, y, sign1, oc, trial)
        it += 1
        if math.isfinite(tl) and tl <= loss:
            theta, loss, grad, scale = trial, tl, tg, ts
            lr = min(lr * 1.2, 1.0)
        else:
            lr *= 0.5
        if loss > 1e6 * loss0:
            diverged = True
    return theta, loss, it, diverged


# ---------------------------------------------------------------------------
# Convexified allocation subproblem: log-barrier Newton loop
# ---------------------------------------------------------------------------
# Variables: B[U], P[U], then per active user blocks f, l, x, m, q, z.
# Constraint rows are stored sparsely (column and value per nonzero); only the
# two cap rows have more than three nonzeros. The numpy twin of this kernel is
# the generic barrier solver driven by the allocator's evaluator.

F_FLOOR = 50.0


@njit
def _sca_rows(v, U, act, chat, kappa, alpha, lj, E, gam, dj, rho, s_lin,
              b_lo, b_hi, p_lo, p_hi, fix_b, fix_p, g, cols, vals, nnz):
    nA = act.shape[0]
    base = 2 * U
    for j in range(nA):
        i = act[j]
        iB = i
        iP = U + i
        iF = base + j
        iL = base + nA + j
        iX = base + 2 * nA + j
        iM = base + 3 * nA + j
        iQ = base + 4 * nA + j
        iZ = base + 5 * nA + j
        B = v[iB]
        P = v[iP]
        f = v[iF]
        l = v[iL]
        x = v[iX]
        m = v[iM]
        q = v[iQ]
        z = v[iZ]
        r = j
        g[r] = f - E[j] * (1.0 + l - lj[j])
        nnz[r] = 2
        cols[r, 0] = iF
        vals[r, 0] = 1.0
        cols[r, 1] = iL
        vals[r, 1] = -E[j]
        r = nA + j
        g[r] = -f - F_FLOOR * E[j]
        nnz[r] = 1
        cols[r, 0] = iF
        vals[r, 0] = -1.0
        r = 2 * nA + j
        g[r] = l + 0.5 * x * x
        nnz[r] = 2
        cols[r, 0] = iL
        vals[r, 0] = 1.0
        cols[r, 1] = iX
        vals[r, 1] = x
        r = 3 * nA + j
        g[r] = q * LN2 - math.log1p(m)
        nnz[r] = 2
        cols[r, 0] = iQ
        vals[r, 0] = LN2
        cols[r, 1] = iM
        vals[r, 1] = -1.0 / (1.0 + m)
        r = 4 * nA + j
        g[r] = chat[j] / B - q
        nnz[r] = 2
        cols[r, 0] = iB
        vals[r, 0] = -chat[j] / (B * B)
        cols[r, 1] = iQ
        vals[r, 1] = -1.0
        r = 5 * nA + j
        u = gam[j] * B + m / gam[j]
        g[r] = 0.25 * (u * u - 2.0 * (gam[j] * B - m / gam[j]) * dj[j] + dj[j] * dj[j]) - z
        nnz[r] = 3
        cols[r, 0] = iB
        vals[r, 0] = 0.5 * gam[j] * (u - dj[j])
        cols[r, 1] = iM
        vals[r, 1] = 0.5 * (u + dj[j]) / gam[j]
        cols[r, 2] = iZ
        vals[r, 2] = -1.0
        r = 6 * nA + j
        d = x / rho[j] - rho[j] * P
        g[r] = 4.0 * kappa[j] * z - 2.0 * (x / rho[j] + rho[j] * P) * s_lin[j] + s_lin[j] ** 2 + d * d
        nnz[r] = 3
        cols[r, 0] = iZ
        vals[r, 0] = 4.0 * kappa[j]
        cols[r, 1] = iX
        vals[r, 1] = 2.0 * (d - s_lin[j]) / rho[j]
        cols[r, 2] = iP
        vals[r, 2] = -2.0 * (s_lin[j] + d) * rho[j]
    r = 7 * nA
    for blk in range(2):
        if (blk == 0 and fix_b) or (blk == 1 and fix_p):
            continue
        lo = b_lo if blk == 0 else p_lo
        hi = b_hi if blk == 0 else p_hi
        tot = 0.0
        for k in range(U):
            val = v[blk * U + k]
            tot += val
            g[r] = lo - val
            nnz[r] = 1
            cols[r, 0] = blk * U + k
            vals[r, 0] = -1.0
            r += 1
        g[r] = tot - hi
        nnz[r] = U
        for k in range(U):
            cols[r, k] = blk * U + k
            vals[r, k] = 1.0
        r += 1
    f0 = 0.0
    for j in range(nA):
        f0 -= alpha[j] * v[base + j]
    return f0


@njit
def _sca_hessian(v, U, act, chat, gam, rho, mu, g, cols, vals, nnz, H):
    nA = act.shape[0]
    base = 2 * U
    n = v.shape[0]
    for a in range(n):
        for b in range(n):
            H[a, b] = 0.0
    for r in range(g.shape[0]):
        w = mu / (g[r] * g[r])
        for a in range(nnz[r]):
            ca = cols[r, a]
            va = vals[r, a] * w
            for b in range(nnz[r]):
                H[ca, cols[r, b]] += va * vals[r, b]
    # constraint curvature weighted by mu / (-g)
    for j in range(nA):
        i = act[j]
        iX = base + 2 * nA + j
        iM = base + 3 * nA + j
        w3 = mu / -g[2 * nA + j]
        w4 = mu / -g[3 * nA + j]
        w5 = mu / -g[4 * nA + j]
        w6 = mu / -g[5 * nA + j]
        w7 = mu / -g[6 * nA + j]
        m = v[iM]
        B = v[i]
        H[iX, iX] += w3 + 2.0 * w7 / (rho[j] * rho[j])
        H[iM, iM] += w4 / ((1.0 + m) * (1.0 + m)) + 0.5 * w6 / (gam[j] * gam[j])
        H[i, i] += w5 * 2.0 * chat[j] / (B * B * B) + 0.5 * w6 * gam[j] * gam[j]
        H[i, iM] += 0.5 * w6
        H[iM, i] += 0.5 * w6
        H[U + i, U + i] += 2.0 * w7 * rho[j] * rho[j]
        H[iX, U + i] -= 2.0 * w7
        H[U + i, iX] -= 2.0 * w7


@njit
def _barrier_value(f0, g, mu):
    s = 0.0
    for r in range(g.shape[0]):
        s += math.log(-g[r])
    return f0 - mu * s


@njit
def sca_barrier_nb(v0, free, U, act, chat, kappa, alpha, lj, gam, dj, rho, s_lin,
                   b_lo, b_hi, p_lo, p_hi, fix_b, fix_p, tol, mu0, shrink, newton_eps, max_newton):
    """Log-barrier Newton solve of the convexified allocation subproblem.

    Returns (v, newton steps, status): status 0 converged, 1 step cap hit,
    2 infeasible start.
    """
    nA = act.shape[0]
    n = v0.shape[0]
    n_rows = 7 * nA + (0 if fix_b else U + 1) + (0 if fix_p else U + 1)
    width = max(3, U)
    E = np.exp(lj)
    g = np.empty(n_rows)
    cols = np.zeros((n_rows, width), dtype=np.int64)
    vals = np.zeros((n_rows, width))
    nnz = np.zeros(n_rows, dtype=np.int64)
    gt = np.empty(n_rows)
    colst = np.zeros((n_rows, width), dtype=np.int64)
    valst = np.zeros((n_rows, width))
    nnzt = np.zeros(n_rows, dtype=np.int64)
    H = np.zeros((n, n))
    nf = free.shape[0]
    v = v0.copy()
    f0 = _sca_rows(v, U, act, chat, kappa, alpha, lj, E, gam, dj, rho, s_lin,
                   b_lo, b_hi, p_lo, p_hi, fix_b, fix_p, g, cols, vals, nnz)
    for r in range(n_rows):
        if not g[r] < 0.0:
            return v, 0, 2
    mu = mu0
    steps = 0
    grad = np.zeros(n)
    Hr = np.zeros((nf, nf))
    rhs = np.zeros(nf)
    dsc = np.zeros(nf)
    vt = v.copy()
    while True:
        while True:
            for a in range(n):
                grad[a] = 0.0
            for j in range(nA):
                grad[2 * U + j] = -alpha[j]
            for r in range(n_rows):
                w = mu / -g[r]
                for a in range(nnz[r]):
                    grad[cols[r, a]] += w * vals[r, a]
            _sca_hessian(v, U, act, chat, gam, rho, mu, g, cols, vals, nnz, H)
            for a in range(nf):
                d = math.sqrt(abs(H[free[a], free[a]]))
                dsc[a] = d if d > 0.0 else 1.0
            for a in range(nf):
                rhs[a] = -grad[free[a]] / dsc[a]
                for b in range(nf):
                    Hr[a, b] = H[free[a], free[b]] / (dsc[a] * dsc[b])
                Hr[a, a] += 1e-13
            dv = np.linalg.solve(Hr, rhs)
            lam2 = 0.0
            slope = 0.0
            for a in range(nf):
                dv[a] /= dsc[a]
                lam2 -= grad[free[a]] * dv[a]
                slope += grad[free[a]] * dv[a]
            if lam2 / 2.0 <= newton_eps:
                break
            if steps >= max_newton:
                return v, steps, 1
            cur = _barrier_value(f0, g, mu)
            step = 1.0
            ok = False
            ft = 0.0
            while True:
                for a in range(n):
                    vt[a] = v[a]
                for a in range(nf):
                    vt[free[a]] = v[free[a]] + step * dv[a]
                ft = _sca_rows(vt, U, act, chat, kappa, alpha, lj, E, gam, dj, rho, s_lin,
                               b_lo, b_hi, p_lo, p_hi, fix_b, fix_p, gt, colst, valst, nnzt)
                feas = True
                for r in range(n_rows):
                    if not gt[r] < 0.0:
                        feas = False
                        break
                if feas and math.isfinite(ft) and _barrier_value(ft, gt, mu) <= cur + 0.25 * step * slope:
                    ok = True
                    break
                step *= 0.5
                if step < 1e-14:
                    break
            steps += 1
            if not ok:
                break
            v[:] = vt
            f0 = ft
            g[:] = gt
            cols[:, :] = colst
            vals[:, :] = valst
            nnz[:] = nnzt
        if n_rows * mu <= tol:
            break
        mu *= shrink
    return v, steps, 0


if HAVE_NUMBA:
    count_at_least = count_at_least_nb
    ratio_scores_argmax = ratio_scores_argmax_nb
    fit_exp2 = fit_exp2_nb
else:
    count_at_least = count_at_least_np
    ratio_scores_argmax = ratio_scores_argmax_np
    fit_exp2 = fit_exp2_np
