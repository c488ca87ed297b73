"""Link model: Shannon rate, delay, and deadline success probability.

The channel gain is Gaussian, h ~ N(0, delta^2), and the rate uses its
magnitude |h|. A payload of d0*(1-o) bits meets the deadline t0 iff

    |h| >= (2**(a*(1-o)) - 1) / b,    a = d0/(B*t0),  b = P/(N0*B),

so the success probability is 2*Q((2**(a*(1-o)) - 1) / (b*delta)).
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import erfc

from . import kernels
from .errors import DomainError
from .kernels import LN2, LOG_UNDERFLOW

PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class LinkParams:
    """Dimensionless link description: load ``a``, SNR factor ``b``, gain spread ``delta``."""

    a: float
    b: float
    delta: float

    def __post_init__(self):
        for name in ("a", "b", "delta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class UserLink:
    """Physical description of one user's uplink."""

    bandwidth: float
    power: float
    gain_spread: float
    data_bits: float

    def __post_init__(self):
        if not self.bandwidth > 0 or not self.power > 0:
            raise DomainError("bandwidth and power must be > 0")
        if self.data_bits < 0:
            raise DomainError("data_bits must be >= 0")

    def params(self, N0, t0, o):
        """LinkParams such that a*(1-o) reproduces ``data_bits`` at ratio ``o``."""
        if not 0 <= o < 1:
            raise DomainError("o must lie in [0, 1) to recover the raw payload")
        d0 = self.data_bits / (1.0 - o)
        return LinkParams(d0 / (self.bandwidth * t0), self.power / (N0 * self.bandwidth), self.gain_spread)


def transmission_rate(B, P, h, N0):
    """Achievable rate B*log2(1 + h*P/(N0*B)) in bits/s."""
    if not (math.isfinite(B) and B > 0) or not (math.isfinite(N0) and N0 > 0):
        raise DomainError("B and N0 must be finite and > 0")
    if P < 0 or h < 0:
        raise DomainError("P and h must be >= 0")
    snr = h * P / (N0 * B)
    if snr == 0:
        return 0.0
    return B * math.log1p(snr) / LN2


def transmission_delay(d, R):
    """Delay d/R; infinite when the rate is zero and there is something to send."""
    if d < 0 or R < 0:
        raise DomainError("d and R must be >= 0")
    if d == 0:
        return 0.0
    if R == 0:
        return math.inf
    return d / R


def q_exact(x):
    """Standard normal tail probability Q(x)."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))
    return out if np.ndim(x) else float(out)


def q_approx(x):
    """Tail bound Q(x) ~ exp(-x**2/2)/2, valid for x >= 0."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(np.isnan(xa)):
        raise DomainError("q_approx requires x >= 0")
    out = 0.5 * np.exp(-0.5 * xa * xa)
    return out if np.ndim(x) else float(out)


def outage_log_arg(a, snr, o):
    """log((2**(a*(1-o)) - 1) / snr), elementwise; -inf for a zero payload.

    ``snr`` is the product b*delta. Works in the log domain so exponents far
    beyond the double range stay finite.
    """
    a, snr, o = np.broadcast_arrays(np.asarray(a, float), np.asarray(snr, float), np.asarray(o, float))
    y = a * (1.0 - o) * LN2
    out = np.full(y.shape, -np.inf)
    pos = y > 0
    small = pos & (y <= 700.0)
    big = pos & (y > 700.0)
    out[small] = np.log(np.expm1(y[small]))
    out[big] = y[big] + np.log1p(-np.exp(-y[big]))
    out[pos] -= np.log(snr[pos])
    return out


def _check_ratio(o):
    oa = np.asarray(o, dtype=float)
    if np.any(~(oa > 0)) or np.any(oa > 1):
        raise DomainError("compression ratio must lie in (0, 1]")


def success_prob_arrays(a, snr, o):
    """Vectorised 2*Q(arg) with the log-domain overflow guard."""
    log_arg = outage_log_arg(a, snr, o)
    out = np.zeros(log_arg.shape)
    ok = log_arg < math.log(40.0)  # 2*Q(40) is far below PROB_FLOOR
    arg = np.exp(log_arg[ok])
    out[ok] = np.clip(erfc(arg / math.sqrt(2.0)), 0.0, 1.0)
    out[out < PROB_FLOOR] = 0.0
    return out


def g_term_arrays(a, snr, o):
    """Vectorised exp(-arg**2/2), the smooth surrogate of the success probability."""
    log_arg = outage_log_arg(a, snr, o)
    half_sq = np.where(log_arg < 354.0, 0.5 * np.exp(2.0 * np.minimum(log_arg, 354.0)), np.inf)
    out = np.where(half_sq < LOG_UNDERFLOW, np.exp(-np.minimum(half_sq, LOG_UNDERFLOW)), 0.0)
    return out


def success_prob(p: LinkParams, o):
    """Probability that the compressed payload meets the deadline (exact Q)."""
    _check_ratio(o)
    v = success_prob_arrays(p.a, p.b * p.delta, o)
    return float(v) if np.ndim(o) == 0 else v


def g_term(p: LinkParams, o):
    """Surrogate success factor exp(-arg**2/2) = 2*q_approx(arg)."""
    _check_ratio(o)
    v = g_term_arrays(p.a, p.b * p.delta, o)
    return float(v) if np.ndim(o) == 0 else v


def gain_threshold(p: LinkParams, o):
    """Smallest |h| that meets the deadline, (2**(a(1-o)) - 1)/b."""
    y = p.a * (1.0 - o) * LN2
    if y > 700.0:
        return math.inf
    return math.expm1(y) / p.b


def monte_carlo_success(p: LinkParams, o, trials, seed, chunk=1 << 20):
    """Fraction of Gaussian-gain draws whose delay meets the deadline.

    Draws h ~ N(0, delta^2) from ``numpy.random.default_rng(seed)`` in chunks
    of ``chunk`` samples. Deterministic for a fixed seed.
    """
    trials = int(trials)
    if trials < 1:
        raise DomainError("trials must be >= 1")
    _check_ratio(o)
    thr = gain_threshold(p, o)
    rng = np.random.default_rng(seed)
    hits = 0
    left = trials
    while left > 0:
        n = min(chunk, left)
        h = rng.normal(0.0, p.delta, size=n)
        hits += kernels.count_at_least(h, thr)
        left -= n
    return hits / trials
