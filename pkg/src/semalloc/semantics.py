"""Importance pooling, importance-threshold compression, and discrete MI bounds.

Mutual-information quantities are in nats.
"""
import csv
from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class ImportanceWeights:
    omega: np.ndarray
    concept: int = 0

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float).ravel()
        if w.size == 0 or not np.all(np.isfinite(w)):
            raise DomainError("weights must be a non-empty finite vector")
        object.__setattr__(self, "omega", w)

    def __len__(self):
        return self.omega.size


def _stack(values, name):
    a = np.asarray(values, dtype=float)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3 or 0 in a.shape:
        raise DomainError(f"{name} must be a non-empty K x W x H tensor")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} has non-finite entries")
    return a


def importance_weights(grads, concept=0):
    """Global-average-pool each gradient map: omega_k = mean_ij grads[k, i, j]."""
    g = _stack(grads, "gradient stack")
    return ImportanceWeights(g.mean(axis=(1, 2)), concept)


def achieved_ratio(w, threshold):
    """Fraction of features whose weight falls below ``threshold``."""
    return float(np.count_nonzero(w.omega < threshold)) / len(w)


def threshold_for_ratio(w, o):
    """Smallest threshold that drops at least a fraction ``o`` of features.

    Features with weight equal to the threshold are kept, so the realised
    ratio is the smallest one achievable on the K-feature grid that is >= o
    (ties in the weights can push it higher).
    """
    if not 0 <= o < 1:
        raise DomainError("o must lie in [0, 1)")
    srt = np.sort(w.omega)
    if o == 0:
        return float(srt[0])
    k = len(w)
    n_drop = math.ceil(o * k - 1e-12)
    # thresholding at a distinct value v drops exactly the features below v
    values, first = np.unique(srt, return_index=True)
    ok = np.nonzero(first >= n_drop)[0]
    if ok.size == 0:
        # every candidate would drop the whole top tie group; keep it
        return float(values[-1])
    return float(values[ok[0]])


def asc_compress(features, w, threshold):
    """Zero every feature map whose importance is below ``threshold``."""
    f = _stack(features, "feature stack")
    if f.shape[0] != len(w):
        raise DomainError(f"feature count {f.shape[0]} != weight count {len(w)}")
    keep = w.omega >= threshold
    return np.where(keep[:, None, None], f, 0.0)


# ---------------------------------------------------------------------------
# Discrete mutual information and its upper bound
# ---------------------------------------------------------------------------

def _joint(p):
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.size == 0:
        raise DomainError("joint must be a non-empty 2-D matrix")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise DomainError("joint entries must be finite and >= 0")
    if abs(p.sum() - 1.0) > 1e-12:
        raise DomainError(f"joint sums to {p.sum()!r}, not 1")
    return p


def mutual_information(p):
    """I(X;Y) = sum p(x,y) ln(p(x,y) / (p(x)p(y))), with 0 ln 0 = 0."""
    p = _joint(p)
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    val = float(np.sum(p[nz] * np.log(p[nz] / (px @ py)[nz])))
    return max(val, 0.0)


def mi_upper_bound(p):
    """E_{p(x,y)}[ln p(y|x)] - E_{p(x)}E_{p(y)}[ln p(y|x)].

    Returns ``inf`` when some (x, y) with p(x)p(y) > 0 has p(y|x) = 0.
    """
    p = _joint(p)
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    rows = px > 0
    cond = np.zeros_like(p)
    cond[rows] = p[rows] / px[rows, None]
    nz = p > 0
    first = float(np.sum(p[nz] * np.log(cond[nz])))
    prod = np.outer(px, py)
    wt = prod > 0
    if np.any(cond[wt] == 0):
        return math.inf
    second = float(np.sum(prod[wt] * np.log(cond[wt])))
    return first - second


def mi_gap(p):
    """Non-negative gap between the upper bound and the true MI."""
    up = mi_upper_bound(p)
    if math.isinf(up):
        return math.inf
    return up - mutual_information(p)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def read_tensor(path):
    """Read a K x W x H tensor.

    ``.npy`` files load directly. ``.bin`` files hold three little-endian
    int64 dims followed by float64 values in C order. Anything else is text:
    a first line ``K,W,H`` then the values, comma or newline separated.
    """
    path = str(path)
    if path.endswith(".npy"):
        return _stack(np.load(path), "tensor")
    if path.endswith(".bin"):
        raw = np.fromfile(path, dtype="<i8", count=3)
        if raw.size != 3:
            raise DomainError(f"{path}: missing 3-integer shape header")
        vals = np.fromfile(path, dtype="<f8", offset=24)
        return _stack(vals.reshape(tuple(int(v) for v in raw)), "tensor")
    with open(path) as fh:
        shape = tuple(int(v) for v in fh.readline().replace(",", " ").split())
        vals = np.array(fh.read().replace(",", " ").split(), dtype=float)
    if len(shape) != 3 or vals.size != np.prod(shape):
        raise DomainError(f"{path}: shape header {shape} does not match {vals.size} values")
    return _stack(vals.reshape(shape), "tensor")


def write_tensor(a, path):
    a = _stack(a, "tensor")
    path = str(path)
    if path.endswith(".bin"):
        with open(path, "wb") as fh:
            np.asarray(a.shape, dtype="<i8").tofile(fh)
            np.ascontiguousarray(a, dtype="<f8").tofile(fh)
        return
    with open(path, "w") as fh:
        fh.write(",".join(str(d) for d in a.shape) + "\n")
        for v in a.ravel():
            fh.write(repr(float(v)) + "\n")


def write_weights_csv(w, path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["k", "omega"])
        for k, v in enumerate(w.omega):
            out.writerow([k, repr(float(v))])


def read_weights_csv(path, concept=0):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and not {"k", "omega"} <= set(rows[0]):
        raise DomainError(f"{path}: expected header 'k,omega'")
    rows.sort(key=lambda r: int(r["k"]))
    return ImportanceWeights([float(r["omega"]) for r in rows], concept)
