"""System scenario: users, caps, channel spreads and service levels.

Two modes share one type. ``physical`` carries d0 (bits), t0 (s), N0 (W/Hz)
and caps in Hz / W. ``normalized`` carries per-user load and SNR factors
``a_i``, ``b_i`` defined at one unit of bandwidth and power, so that with an
allocation (B, P) in those units

    a_i(B) = a_i / B,    b_i(B, P) = b_i * P / B.
"""
from dataclasses import dataclass, replace
import json
import math

import numpy as np

from .errors import DomainError
from .link import LinkParams

MB_BITS = 8e6


class ScenarioError(DomainError):
    """Scenario failed validation; ``problems`` lists every violated rule."""

    def __init__(self, problems):
        super().__init__("invalid scenario:\n  " + "\n  ".join(problems))
        self.problems = problems


def dbm_to_w(dbm):
    return 10.0 ** (dbm / 10.0) * 1e-3


def round_robin(U, N):
    r = np.zeros((U, N))
    r[np.arange(U), np.arange(U) % N] = 1.0
    return r


@dataclass(frozen=True, eq=False)
class Scenario:
    U: int
    B_min: float
    B_max: float
    P_min: float
    P_max: float
    delta: np.ndarray
    level_weights: np.ndarray
    assignment: np.ndarray
    mode: str = "normalized"
    d0: float = math.nan
    t0: float = math.nan
    N0: float = math.nan
    a: np.ndarray = None
    b: np.ndarray = None
    user_selection: bool = False
    name: str = "scenario"

    def __post_init__(self):
        U = int(self.U)
        object.__setattr__(self, "U", U)
        for name in ("delta", "level_weights", "assignment", "a", "b"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v, dtype=float))
        if self.delta.ndim == 0:
            object.__setattr__(self, "delta", np.full(U, float(self.delta)))
        problems = self.problems()
        if problems:
            raise ScenarioError(problems)

    # -- validation ---------------------------------------------------------
    def problems(self):
        out = []
        U = self.U
        if U < 1:
            out.append("U must be >= 1")
            return out
        if self.mode not in ("physical", "normalized"):
            out.append(f"mode must be 'physical' or 'normalized', got {self.mode!r}")
        for name in ("B_min", "B_max", "P_min", "P_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                out.append(f"{name} must be finite and > 0")
        if self.user_selection:
            if self.B_min > self.B_max:
                out.append("bandwidth: B_min > B_max admits no user")
            if self.P_min > self.P_max:
                out.append("power: P_min > P_max admits no user")
        else:
            if U * self.B_min > self.B_max * (1 + 1e-12):
                out.append(f"bandwidth: U*B_min = {U * self.B_min:g} exceeds B_max = {self.B_max:g}")
            if U * self.P_min > self.P_max * (1 + 1e-12):
                out.append(f"power: U*P_min = {U * self.P_min:g} exceeds P_max = {self.P_max:g}")
        if self.delta.shape != (U,) or np.any(~(self.delta > 0)):
            out.append("delta must hold U positive gain spreads")
        eps = self.level_weights
        if eps.ndim != 1 or eps.size == 0 or np.any(~((eps > 0) & (eps <= 1))):
            out.append("level weights must lie in (0, 1]")
        r = self.assignment
        if r.shape != (U, eps.size):
            out.append(f"assignment must be U x N = {U} x {eps.size}, got {r.shape}")
        elif np.any((r != 0) & (r != 1)) or np.any(r.sum(axis=1) != 1):
            out.append("each user must belong to exactly one service level")
        if self.mode == "physical":
            for name in ("d0", "t0", "N0"):
                v = getattr(self, name)
                if not (math.isfinite(v) and v > 0):
                    out.append(f"{name} must be finite and > 0 in physical mode")
        elif self.mode == "normalized":
            for name in ("a", "b"):
                v = getattr(self, name)
                if v is None or v.shape != (U,) or np.any(~(v > 0)) or not np.all(np.isfinite(v)):
                    out.append(f"{name} must hold U positive finite values in normalized mode")
        return out

    # -- derived quantities -------------------------------------------------
    @property
    def weights(self):
        """Per-user importance weight w_i = sum_n eps_n r_in."""
        return self.assignment @ self.level_weights

    @property
    def load(self):
        """Per-user c_i with a_i(B) = c_i / B."""
        if self.mode == "physical":
            return np.full(self.U, self.d0 / self.t0)
        return self.a.copy()

    @property
    def snr_coef(self):
        """Per-user k_i with b_i(B, P) * delta_i = k_i * P / B."""
        if self.mode == "physical":
            return self.delta / self.N0
        return self.b * self.delta

    def link_params(self, i, B, P):
        if self.mode == "physical":
            return LinkParams(self.d0 / (B * self.t0), P / (self.N0 * B), float(self.delta[i]))
        return LinkParams(float(self.a[i]) / B, float(self.b[i]) * P / B, float(self.delta[i]))

    def equal_split(self, n=None):
        n = self.U if n is None else n
        return np.full(n, self.B_max / n), np.full(n, self.P_max / n)

    def subset(self, idx):
        """Scenario restricted to the users ``idx`` (same caps)."""
        idx = np.asarray(idx, dtype=int)
        return replace(
            self,
            U=idx.size,
            delta=self.delta[idx],
            assignment=self.assignment[idx],
            a=None if self.a is None else self.a[idx],
            b=None if self.b is None else self.b[idx],
            user_selection=True,
        )

    def with_caps(self, **kw):
        return replace(self, **kw)

    def resized(self, U):
        """Same scenario with ``U`` users; per-user data repeat cyclically."""
        idx = np.arange(U) % self.U
        kw = dict(U=U, delta=self.delta[idx], assignment=round_robin(U, self.level_weights.size))
        if self.a is not None:
            kw.update(a=self.a[idx], b=self.b[idx])
        return replace(self, **kw)

    def to_dict(self):
        d = {
            "name": self.name,
            "mode": self.mode,
            "users": self.U,
            "delta": self.delta.tolist(),
            "level_weights": self.level_weights.tolist(),
            "assignment": self.assignment.astype(int).tolist(),
            "user_selection": self.user_selection,
        }
        if self.mode == "physical":
            d.update(
                d0_bits=self.d0, t0_s=self.t0, N0_w_per_hz=self.N0,
                B_min_hz=self.B_min, B_max_hz=self.B_max, P_min_w=self.P_min, P_max_w=self.P_max,
            )
        else:
            d.update(a=self.a.tolist(), b=self.b.tolist(),
                     B_min=self.B_min, B_max=self.B_max, P_min=self.P_min, P_max=self.P_max)
        return d


def paper_preset(**overrides):
    """Simulation constants of the reference setup (10 users, 20 MHz, 1 W, 10 ms)."""
    U = overrides.pop("U", 10)
    eps = np.array(overrides.pop("level_weights", [0.2, 0.4, 0.6, 0.8]))
    kw = dict(
        U=U,
        d0=24.5 * MB_BITS,
        t0=10e-3,
        N0=dbm_to_w(-174.0),
        B_min=0.01e6,
        B_max=20e6,
        P_min=dbm_to_w(-20.0),
        P_max=1.0,
        delta=np.ones(U),
        level_weights=eps,
        assignment=round_robin(U, eps.size),
        mode="physical",
        name="paper",
    )
    kw.update(overrides)
    return Scenario(**kw)


def desk_preset(**overrides):
    """Small normalized scenario whose optimal ratios are interior."""
    U = overrides.pop("U", 4)
    eps = np.array(overrides.pop("level_weights", [0.2, 0.4, 0.6, 0.8]))
    kw = dict(
        U=U,
        a=np.full(U, 20.0),
        b=np.full(U, 100.0),
        delta=np.linspace(1.0, 0.5, U),
        B_min=0.05,
        B_max=float(U),
        P_min=0.05,
        P_max=float(U),
        level_weights=eps,
        assignment=round_robin(U, eps.size),
        mode="normalized",
        name="desk",
    )
    kw.update(overrides)
    return Scenario(**kw)


def random_scenario(rng, U=None, weighted=True):
    """Random feasible normalized scenario drawn from ``rng``.

    Loads and SNR factors are drawn so that links range from comfortable to
    tight at the equal split.
    """
    U = int(rng.integers(2, 6)) if U is None else U
    eps = np.array([0.2, 0.4, 0.6, 0.8])
    if weighted:
        r = np.zeros((U, eps.size))
        r[np.arange(U), rng.integers(0, eps.size, U)] = 1.0
    else:
        eps = np.array([1.0])
        r = np.ones((U, 1))
    return Scenario(
        U=U,
        a=rng.uniform(5.0, 30.0, U),
        b=np.exp(rng.uniform(np.log(20.0), np.log(500.0), U)),
        delta=rng.uniform(0.3, 1.5, U),
        B_min=float(rng.uniform(0.02, 0.2)),
        B_max=float(U),
        P_min=float(rng.uniform(0.02, 0.2)),
        P_max=float(U),
        level_weights=eps,
        assignment=r,
        mode="normalized",
        name="random",
    )


PRESETS = {"paper": paper_preset, "desk": desk_preset}


def scenario_from_dict(d):
    d = dict(d)
    preset = d.pop("preset", None)
    mapping = {
        "users": "U", "d0_bits": "d0", "t0_s": "t0", "N0_w_per_hz": "N0",
        "B_min_hz": "B_min", "B_max_hz": "B_max", "P_min_w": "P_min", "P_max_w": "P_max",
    }
    kw = {mapping.get(k, k): v for k, v in d.items()}
    if "levels" in kw:
        levels = np.asarray(kw.pop("levels"), dtype=int)
        N = len(kw.get("level_weights", [0.2, 0.4, 0.6, 0.8]))
        r = np.zeros((levels.size, N))
        r[np.arange(levels.size), levels] = 1.0
        kw["assignment"] = r
    if preset is not None:
        if preset not in PRESETS:
            raise DomainError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        return PRESETS[preset](**kw)
    U = int(kw["U"])
    eps = kw.setdefault("level_weights", [1.0])
    kw.setdefault("assignment", round_robin(U, len(eps)))
    kw.setdefault("delta", np.ones(U))
    if kw.get("mode", "normalized") == "normalized":
        for key in ("a", "b"):
            if np.ndim(kw.get(key)) == 0 and key in kw:
                kw[key] = np.full(U, float(kw[key]))
    unknown = set(kw) - set(Scenario.__dataclass_fields__)
    if unknown:
        raise DomainError(f"unknown scenario fields: {sorted(unknown)}")
    return Scenario(**kw)


def load_scenario(path_or_preset, seed=0):
    """Load a scenario from a JSON file, a preset name (``paper``, ``desk``),
    or ``random`` / ``random:U`` drawn from ``seed``."""
    if path_or_preset in PRESETS:
        return PRESETS[path_or_preset]()
    if path_or_preset.startswith("random"):
        _, _, u = path_or_preset.partition(":")
        return random_scenario(np.random.default_rng(seed), int(u) if u else None)
    with open(path_or_preset) as fh:
        return scenario_from_dict(json.load(fh))


def save_scenario(s, path):
    with open(path, "w") as fh:
        json.dump(s.to_dict(), fh, indent=2)
        fh.write("\n")
