"""Task-performance model eta(o) = z1*exp(z2*o) + z3*exp(z4*o) and its fitter."""
import csv
from dataclasses import dataclass, field
import json
import math

import numpy as np

from . import kernels
from .errors import DomainError, NonConvergenceError


@dataclass(frozen=True)
class TaskPerfModel:
    zeta: tuple
    rmse: float = float("nan")

    def __post_init__(self):
        z = tuple(float(v) for v in self.zeta)
        if len(z) != 4 or not all(math.isfinite(v) for v in z):
            raise DomainError("zeta must hold four finite reals")
        object.__setattr__(self, "zeta", z)

    def __call__(self, o):
        return eta(self, o)

    def to_dict(self):
        z1, z2, z3, z4 = self.zeta
        d = {"zeta1": z1, "zeta2": z2, "zeta3": z3, "zeta4": z4}
        if math.isfinite(self.rmse):
            d["rmse"] = self.rmse
        return d

    @classmethod
    def from_dict(cls, d):
        return cls((d["zeta1"], d["zeta2"], d["zeta3"], d["zeta4"]), float(d.get("rmse", float("nan"))))


# Fitted parameters per backbone and channel SNR, with the reported RMSE.
FIXTURES = {
    "vgg-5dB": TaskPerfModel((-9.503e-17, 36.77, 0.9044, -0.01869), 0.0449),
    "vgg0dB": TaskPerfModel((-2.202e-16, 35.94, 0.9137, -0.02349), 0.0488),
    "vgg5dB": TaskPerfModel((-2.76e-18, 40.33, 0.9205, -0.02257), 0.0510),
    "resnet-5dB": TaskPerfModel((-6.205e-08, 16.45, 0.9228, -0.06917), 0.0272),
    "resnet0dB": TaskPerfModel((-2.893e-16, 35.68, 0.9482, -0.04151), 0.0282),
    "resnet5dB": TaskPerfModel((-8.875e-16, 34.54, 0.9458, 0.007934), 0.0491),
}


def fixture(name):
    try:
        return FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown model fixture {name!r}; choose from {sorted(FIXTURES)}") from None


def _raw_eta(zeta, o):
    z1, z2, z3, z4 = zeta
    return z1 * np.exp(z2 * o) + z3 * np.exp(z4 * o)


def eta(model, o):
    """Task success probability at compression ratio ``o``, clamped to [0, 1]."""
    oa = np.asarray(o, dtype=float)
    if np.any(oa < 0) or np.any(oa > 1) or np.any(np.isnan(oa)):
        raise DomainError("o must lie in [0, 1]")
    v = np.clip(_raw_eta(model.zeta, oa), 0.0, 1.0)
    return float(v) if np.ndim(o) == 0 else v


@dataclass(frozen=True)
class PerfPointSet:
    o: np.ndarray
    eta_star: np.ndarray = field(repr=False)

    def __post_init__(self):
        o = np.asarray(self.o, dtype=float).ravel()
        y = np.asarray(self.eta_star, dtype=float).ravel()
        if o.shape != y.shape or o.size == 0:
            raise DomainError("point set needs matching, non-empty o and eta columns")
        if np.any((o < 0) | (o > 1)) or np.any((y < 0) | (y > 1)):
            raise DomainError("point coordinates must lie in [0, 1]")
        object.__setattr__(self, "o", o)
        object.__setattr__(self, "eta_star", y)

    def __len__(self):
        return self.o.size


def fit_loss(model, D):
    """Half mean squared residual, (1/2D) * sum (eta(o_d) - eta*_d)**2 (unclamped eta)."""
    r = _raw_eta(model.zeta, D.o) - D.eta_star
    return float(np.dot(r, r) / (2.0 * len(D)))


def fit_loss_grad(model, D):
    """Analytic gradient of ``fit_loss`` with respect to (z1, z2, z3, z4)."""
    z1, z2, z3, z4 = model.zeta
    e2 = np.exp(z2 * D.o)
    e4 = np.exp(z4 * D.o)
    r = z1 * e2 + z3 * e4 - D.eta_star
    n = len(D)
    return np.array([
        np.dot(r, e2), np.dot(r, z1 * D.o * e2), np.dot(r, e4), np.dot(r, z3 * D.o * e4)
    ]) / n


def default_init(D):
    return TaskPerfModel((-1e-12, 30.0, float(np.max(D.eta_star)), -0.05))


def rmse(model, D):
    return math.sqrt(2.0 * fit_loss(model, D))


def fit_perf_model(D, init=None, step=1.0, loss_threshold=1e-14, max_iters=200_000):
    """Gradient-descent fit of the two-exponential model to ``D``.

    Each coordinate's gradient is divided by the mean squared sensitivity of
    eta to that coordinate, and z1 is stepped in log-magnitude with its sign
    held fixed. ``step`` is the initial step length; it adapts so the loss is
    non-increasing. Stops once the loss reaches ``loss_threshold``, the step
    collapses, or ``max_iters`` updates have run.
    """
    if step <= 0 or loss_threshold < 0:
        raise DomainError("step must be > 0 and loss_threshold >= 0")
    init = default_init(D) if init is None else init
    z1, z2, z3, z4 = init.zeta
    sign1 = -1.0 if z1 < 0 else 1.0
    oc = float(np.max(D.o))
    mag1 = abs(z1) if z1 != 0 else 1e-300
    theta0 = np.array([math.log(mag1) + z2 * oc, z2, z3, z4])
    theta, _, _, diverged = kernels.fit_exp2(
        D.o, D.eta_star, sign1, oc, theta0, float(step), float(loss_threshold), int(max_iters)
    )
    zeta = (sign1 * math.exp(theta[0] - theta[1] * oc), theta[1], theta[2], theta[3])
    model = TaskPerfModel(zeta)
    model = TaskPerfModel(zeta, rmse(model, D))
    if diverged:
        raise NonConvergenceError("fit diverged (loss grew beyond 1e6 x initial)", best=model)
    return model


def read_points_csv(path):
    """Load a point set from a CSV with header ``o,eta``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and not {"o", "eta"} <= set(rows[0]):
        raise DomainError(f"{path}: expected header 'o,eta'")
    return PerfPointSet([float(r["o"]) for r in rows], [float(r["eta"]) for r in rows])


def write_points_csv(D, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["o", "eta"])
        for o, y in zip(D.o, D.eta_star):
            w.writerow([repr(float(o)), repr(float(y))])


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh, indent=2)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return TaskPerfModel.from_dict(json.load(fh))
