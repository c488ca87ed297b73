"""Run configuration, sweeps, algorithm comparison, Monte-Carlo checks and CSV output."""
import csv
from dataclasses import dataclass, field, replace
import math
import os
import time

import numpy as np

from .allocator import sca_allocate
from .errors import DomainError
from .link import LinkParams, monte_carlo_success, success_prob
from .planner import ALGORITHMS, make_solution, sum_rate_allocation
from .scenario import PRESETS, load_scenario
from .task_perf import FIXTURES, eta, fixture, load_model

AXES = ("B_max", "P_max", "U", "o")
HEADER = ["scenario", "algo", "axis", "axis_value", "phi_exact", "phi_surrogate", "rounds", "wall_ms"]
PER_USER = ("o", "B", "P", "beta")


@dataclass
class RunConfig:
    scenario: str = "desk"
    algos: tuple = ("crra",)
    model: str = "resnet0dB"
    seed: int = 0
    trials: int = 1_000_000
    axis: str = None
    range: tuple = None
    out: str = None
    timing: bool = False
    grid_step: float = 0.01

    def check(self):
        problems = []
        sc = self.scenario
        if sc not in PRESETS and not sc.startswith("random") and not os.path.exists(sc):
            problems.append(f"scenario file not found: {sc}")
        if self.model not in FIXTURES and not os.path.exists(self.model):
            problems.append(f"model is neither a fixture {sorted(FIXTURES)} nor a file: {self.model}")
        for a in self.algos:
            if a not in ALGORITHMS:
                problems.append(f"unknown algorithm {a!r}; choose from {sorted(ALGORITHMS)}")
        if (self.axis is None) != (self.range is None):
            problems.append("axis and range go together")
        if self.axis is not None and self.axis not in AXES:
            problems.append(f"unknown axis {self.axis!r}; choose from {AXES}")
        if self.range is not None:
            lo, hi, step = self.range
            if not (hi >= lo and step > 0):
                problems.append(f"range {lo}:{hi}:{step} is not well ordered")
        if problems:
            raise DomainError("; ".join(problems))
        return self


@dataclass
class ResultRow:
    scenario: str
    algo: str
    axis: str
    axis_value: float
    phi_exact: float
    phi_surrogate: float
    rounds: int
    wall_ms: float
    o: np.ndarray = field(default_factory=lambda: np.zeros(0))
    B: np.ndarray = field(default_factory=lambda: np.zeros(0))
    P: np.ndarray = field(default_factory=lambda: np.zeros(0))
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    error: str = ""


def parse_range(text):
    """``lo:hi:step`` -> (lo, hi, step)."""
    parts = text.split(":")
    if len(parts) != 3:
        raise DomainError(f"range must look like lo:hi:step, got {text!r}")
    return tuple(float(p) for p in parts)


def axis_values(rng):
    lo, hi, step = rng
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def resolve_model(spec):
    return fixture(spec) if spec in FIXTURES else load_model(spec)


def apply_axis(s, axis, value):
    """Scenario for one sweep point, plus the pinned ratio on the ``o`` axis."""
    if axis is None:
        return s, None
    if axis == "B_max":
        return replace(s, B_max=float(value)), None
    if axis == "P_max":
        return replace(s, P_max=float(value)), None
    if axis == "U":
        return s.resized(int(round(value))), None
    return s, float(value)


def solve_fixed_ratio(s, model, algo, o_val):
    """Allocation block of ``algo`` with every ratio pinned to ``o_val``."""
    o = np.full(s.U, o_val)
    if algo == "fra":
        B, P = s.equal_split()
        rounds = 1
    elif algo == "msr":
        B, P = sum_rate_allocation(s)
        rounds = 1
    else:
        alloc = sca_allocate(s, o, s.weights * eta(model, o))
        B, P, rounds = alloc.B, alloc.P, alloc.rounds
    return make_solution(s, model, o, np.ones(s.U), B, P, rounds, [], algo)


def run(config):
    """Execute every algorithm at every sweep point; failures become rows with an error."""
    config.check()
    base = load_scenario(config.scenario, config.seed)
    model = resolve_model(config.model)
    points = [None] if config.axis is None else list(axis_values(config.range))
    rows = []
    for value in points:
        for algo in config.algos:
            t0 = time.perf_counter()
            try:
                s, o_val = apply_axis(base, config.axis, value)
                if o_val is None:
                    kw = {} if algo == "fcr" else {"grid_step": config.grid_step}
                    sol = ALGORITHMS[algo](s, model, **kw)
                else:
                    sol = solve_fixed_ratio(s, model, algo, o_val)
                ms = (time.perf_counter() - t0) * 1e3 if config.timing else math.nan
                rows.append(ResultRow(
                    base.name, algo, config.axis or "", math.nan if value is None else float(value),
                    sol.phi_total, sol.phi_surrogate, sol.iterations, ms,
                    sol.o, sol.B, sol.P, sol.beta,
                ))
            except (ValueError, RuntimeError, ArithmeticError) as e:
                ms = (time.perf_counter() - t0) * 1e3 if config.timing else math.nan
                rows.append(ResultRow(
                    base.name, algo, config.axis or "", math.nan if value is None else float(value),
                    math.nan, math.nan, 0, ms, error=f"{type(e).__name__}: {e}",
                ))
    if config.out:
        emit_csv(rows, config.out)
    return rows


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def emit_csv(rows, path):
    width = max((r.o.size for r in rows), default=0)
    header = HEADER + [f"{k}_{i}" for i in range(1, width + 1) for k in PER_USER] + ["error"]
    try:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(header)
            for r in rows:
                cells = [r.scenario, r.algo, r.axis, _fmt(r.axis_value), _fmt(r.phi_exact),
                         _fmt(r.phi_surrogate), str(r.rounds), _fmt(r.wall_ms)]
                for i in range(width):
                    if i < r.o.size:
                        cells += [_fmt(float(r.o[i])), _fmt(float(r.B[i])), _fmt(float(r.P[i])), str(int(r.beta[i]))]
                    else:
                        cells += ["", "", "", ""]
                cells.append(r.error)
                out.writerow(cells)
    except OSError as e:
        raise OSError(f"cannot write results to {path}: {e.strerror}") from e


def _num(v):
    return float(v) if v != "" else math.nan


def read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:len(HEADER)] != HEADER:
            raise DomainError(f"{path}: unexpected header")
        width = (len(header) - len(HEADER) - 1) // len(PER_USER)
        rows = []
        for cells in reader:
            per = cells[len(HEADER):len(HEADER) + width * 4]
            n = sum(1 for i in range(width) if per[4 * i] != "")
            vals = [[per[4 * i + k] for i in range(n)] for k in range(4)]
            rows.append(ResultRow(
                cells[0], cells[1], cells[2], _num(cells[3]), _num(cells[4]), _num(cells[5]),
                int(cells[6]), _num(cells[7]),
                np.array([float(v) for v in vals[0]]), np.array([float(v) for v in vals[1]]),
                np.array([float(v) for v in vals[2]]), np.array([int(v) for v in vals[3]], dtype=int),
                cells[-1],
            ))
    return rows


# ---------------------------------------------------------------------------
# Monte-Carlo check of the closed-form success probability
# ---------------------------------------------------------------------------

@dataclass
class MonteCarloReport:
    closed_form: float
    empirical: float
    std_error: float
    trials: int
    passed: bool

    def lines(self):
        return [
            f"closed_form {self.closed_form!r}",
            f"monte_carlo {self.empirical!r}",
            f"std_error {self.std_error!r}",
            f"trials {self.trials}",
            f"result {'PASS' if self.passed else 'FAIL'} (3 sigma)",
        ]


def verify_lemma1(params, o, trials=1_000_000, seed=0):
    """Compare the closed-form success probability with a seeded Monte-Carlo estimate."""
    trials = int(trials)
    if trials < 10_000:
        raise DomainError("trials must be >= 1e4")
    if not isinstance(params, LinkParams):
        params = LinkParams(*params)
    p = success_prob(params, o)
    emp = monte_carlo_success(params, o, trials, seed)
    se = math.sqrt(p * (1.0 - p) / trials)
    ok = abs(emp - p) <= 3.0 * se if se > 0 else emp == p
    return MonteCarloReport(p, emp, se, trials, bool(ok))
