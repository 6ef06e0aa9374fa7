"""Fixed-design regression datasets.

Designs live in the unit cube ``[0, 1]^p``. Simulated datasets carry the
true regression function values and the realised noise so that oracle
quantities (projections of the truth, efficient centerings, the LAN
decomposition) can be evaluated exactly.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    LengthMismatch,
    NonSquareGrid,
    UnknownTruthFamily,
    UnknownWeightFamily,
)

__all__ = [
    "Dataset",
    "SimulationTruth",
    "FunctionalWeight",
    "RegularityVerdict",
    "TRUTH_FAMILIES",
    "WEIGHT_FAMILIES",
    "make_grid_design",
    "truth_values",
    "generate_responses",
    "make_weight",
    "check_design_regularity",
    "spawn_rng",
    "save_json",
    "load_json",
    "to_csv",
]


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def spawn_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``.

    Replications and chains use ``spawn_rng(seed, rep)`` so that parallel
    execution order never changes the streams.
    """
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``x`` (n, p) and responses ``y`` (n,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or y.ndim != 1:
            raise ValueError("x must be (n, p) and y must be (n,)")
        if y.shape[0] != x.shape[0]:
            raise LengthMismatch(f"y has length {y.shape[0]}, expected {x.shape[0]}")
        if x.shape[0] < 2:
            raise ValueError("a dataset needs at least two points")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        if np.any(x < 0) or np.any(x > 1):
            raise ValueError("design coordinates must lie in [0, 1]")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class SimulationTruth:
    """True function values, realised noise and the assumed Hölder exponent."""

    f0_values: np.ndarray
    eps: np.ndarray
    f0_id: str
    alpha: float
    seed: int | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        f0 = _frozen(self.f0_values)
        eps = _frozen(self.eps)
        if f0.shape != eps.shape or f0.ndim != 1:
            raise LengthMismatch("f0_values and eps must be vectors of equal length")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        object.__setattr__(self, "f0_values", f0)
        object.__setattr__(self, "eps", eps)

    @property
    def n(self) -> int:
        return self.f0_values.shape[0]


@dataclass(frozen=True)
class FunctionalWeight:
    """Values of the weight ``a`` at the design points.

    ``sup_bound`` is a strict upper bound on ``|a|``.
    """

    a_values: np.ndarray
    gamma: float = 1.0
    sup_bound: float = 2.0
    family: str = "custom"

    def __post_init__(self):
        a = _frozen(self.a_values)
        if a.ndim != 1:
            raise ValueError("a_values must be a vector")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0,1]")
        if not np.max(np.abs(a)) < self.sup_bound:
            raise ValueError(f"max |a| = {np.max(np.abs(a))} is not below sup_bound {self.sup_bound}")
        object.__setattr__(self, "a_values", a)

    @property
    def is_constant_one(self) -> bool:
        return bool(np.all(self.a_values == 1.0))


# ---------------------------------------------------------------------------
# designs


def make_grid_design(n: int, p: int = 1) -> np.ndarray:
    """Regular grid: ``x_i = i/n`` for ``p = 1``, else the tensor grid of ``i/m``, ``m = n**(1/p)``.

    Rows are ordered with the last coordinate varying fastest.
    """
    if n < 2 or p < 1:
        raise ValueError("need n >= 2 and p >= 1")
    if p == 1:
        return _frozen(np.arange(1, n + 1, dtype=float)[:, None] / n)
    m = int(round(n ** (1.0 / p)))
    for cand in (m - 1, m, m + 1):
        if cand >= 1 and cand**p == n:
            m = cand
            break
    else:
        raise NonSquareGrid(f"n={n} has no integer {p}-th root")
    axis = np.arange(1, m + 1, dtype=float) / m
    pts = np.array(list(itertools.product(axis, repeat=p)), dtype=float)
    return _frozen(pts)


# ---------------------------------------------------------------------------
# truth and weight catalogs


def _f0_const(x, alpha, c=0.0):
    return np.full(x.shape[0], float(c))


def _f0_lipschitz(x, alpha):
    return 0.5 * np.sin(2 * np.pi * x[:, 0])


def _f0_holder(x, alpha):
    # rescaled by sqrt(p) so that the sup-norm stays <= 1 for every p
    r = np.sqrt(np.sum(x**2, axis=1) / x.shape[1])
    return r**alpha


def _f0_flat_half(x, alpha):
    inside = np.all(x <= 0.5, axis=1)
    return np.where(inside, 0.0, 0.5 * np.sin(2 * np.pi * (x[:, 0] - 0.5)))


TRUTH_FAMILIES = {
    "const": _f0_const,
    "lipschitz": _f0_lipschitz,
    "holder": _f0_holder,
    "flat_half": _f0_flat_half,
}


def truth_values(design, family: str, alpha: float = 1.0, **params) -> np.ndarray:
    """Evaluate a catalog truth at the design points."""
    family = family.removeprefix("f0_")
    try:
        fn = TRUTH_FAMILIES[family]
    except KeyError:
        raise UnknownTruthFamily(family) from None
    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if family == "holder" and not 0.5 < alpha <= 1:
        raise ValueError("the holder truth needs alpha in (1/2, 1]")
    return fn(x, alpha, **params)


def generate_responses(design, truth_family: str, alpha: float, seed: int, **params):
    """Simulate ``y = f0(x) + eps`` with standard normal noise.

    Returns ``(Dataset, SimulationTruth)``. The noise is drawn from a
    generator keyed by ``seed`` alone, so repeated calls are bit-identical.
    """
    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    f0 = truth_values(x, truth_family, alpha, **params)
    eps = np.random.default_rng(int(seed) & (2**64 - 1)).standard_normal(x.shape[0])
    y = f0 + eps
    truth = SimulationTruth(f0, eps, truth_family.removeprefix("f0_"), float(alpha), int(seed), dict(params))
    return Dataset(x, y), truth


def _a_one(x, gamma):
    return np.ones(x.shape[0])


def _a_linear(x, gamma):
    return x[:, 0].copy()


def _a_cusp(x, gamma):
    return np.abs(x[:, 0] - 0.5) ** gamma


WEIGHT_FAMILIES = {"one": _a_one, "linear": _a_linear, "cusp": _a_cusp}


def make_weight(design, family: str = "one", gamma: float = 1.0, sup_bound: float = 2.0) -> FunctionalWeight:
    """Catalog weights: ``one`` (a = 1), ``linear`` (a = x_1), ``cusp`` (a = |x_1 - 1/2|**gamma)."""
    try:
        fn = WEIGHT_FAMILIES[family]
    except KeyError:
        raise UnknownWeightFamily(family) from None
    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if family != "cusp":
        gamma = 1.0
    return FunctionalWeight(fn(x, gamma), gamma, sup_bound, family)


# ---------------------------------------------------------------------------
# design regularity


@dataclass(frozen=True)
class RegularityVerdict:
    regular: bool
    first_failure: int | None
    # one row per depth: (s, max diameter, mu-weighted mean diameter, passed)
    checks: tuple = ()
    skipped: tuple = ()


def check_design_regularity(design, max_depth_s: int, M: float) -> RegularityVerdict:
    """Check ``max_k diam < M * sum_k mu_k diam_k`` on the k-d trees of depth ``s = 1..max_depth_s``.

    Depths needing more leaves than there are points are reported in
    ``skipped``. A k-d tree whose cells all have zero diameter counts as
    regular.
    """
    from .partition import build_kd_tree, diameter

    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise ValueError("empty design")
    n, p = x.shape
    checks, skipped = [], []
    first = None
    for s in range(1, max_depth_s + 1):
        if n < 2 ** (s * p):
            skipped.append(s)
            continue
        summary = diameter(build_kd_tree(x, s))
        dmax = float(summary.per_cell.max())
        typical = float(np.dot(summary.mu, summary.per_cell))
        ok = dmax == 0.0 or dmax < M * typical
        checks.append((s, dmax, typical, ok))
        if not ok and first is None:
            first = s
    return RegularityVerdict(first is None, first, tuple(checks), tuple(skipped))


# ---------------------------------------------------------------------------
# persistence


def _as_document(data: Dataset, truth: SimulationTruth | None) -> dict:
    doc = {
        "n": data.n,
        "p": data.p,
        "x": data.x.ravel(order="C").tolist(),
        "y": data.y.tolist(),
        "f0": None,
        "eps": None,
        "seed": None,
        "family": None,
        "alpha": None,
    }
    if truth is not None:
        doc.update(
            f0=truth.f0_values.tolist(),
            eps=truth.eps.tolist(),
            seed=truth.seed,
            family=truth.f0_id,
            alpha=truth.alpha,
        )
    return doc


def save_json(path, data: Dataset, truth: SimulationTruth | None = None) -> None:
    Path(path).write_text(json.dumps(_as_document(data, truth)))


def load_json(path):
    """Inverse of :func:`save_json`; returns ``(Dataset, SimulationTruth | None)``."""
    doc = json.loads(Path(path).read_text())
    x = np.asarray(doc["x"], dtype=float).reshape(doc["n"], doc["p"])
    data = Dataset(x, np.asarray(doc["y"], dtype=float))
    truth = None
    if doc.get("f0") is not None:
        truth = SimulationTruth(
            np.asarray(doc["f0"], dtype=float),
            np.asarray(doc["eps"], dtype=float),
            doc["family"],
            doc["alpha"],
            doc["seed"],
        )
    return data, truth


def to_csv(data: Dataset, truth: SimulationTruth | None = None, path=None) -> str:
    """CSV with header ``x_1..x_p, y, f0, eps`` (truth columns left empty without a truth)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x_{j + 1}" for j in range(data.p)] + ["y", "f0", "eps"])
    for i in range(data.n):
        row = [repr(float(v)) for v in data.x[i]] + [repr(float(data.y[i]))]
        if truth is None:
            row += ["", ""]
        else:
            row += [repr(float(truth.f0_values[i])), repr(float(truth.eps[i]))]
        w.writerow(row)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
