"""Empirical-norm geometry over the design points.

Everything here is evaluated at the design points only: the norm is the
root mean square over the ``n`` points, and projecting onto a partition
replaces each value by its cell mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import FunctionalWeight, SimulationTruth
from .errors import LengthMismatch, MissingTruth
from .partition import CellPartition, Ensemble, build_kd_tree, diameter
from .priors import GaltonWatsonPrior, sample_gw_tree

__all__ = [
    "StepFunction",
    "ForestFunction",
    "Projection",
    "SelfSimCertificate",
    "empirical_norm",
    "inner_product",
    "project_onto_partition",
    "psi",
    "w_n",
    "lan_decomposition",
    "centering_estimators",
    "no_bias_value",
    "local_variance",
    "approximation_error",
    "selfsim_ratio",
    "self_similarity_certificate",
    "equivalent_blocks_labels",
    "kn_fixed",
    "kn_lemma1",
    "eps_n",
]


def _vec(v, n=None, name="values"):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise LengthMismatch(f"{name} must be a vector")
    if n is not None and v.shape[0] != n:
        raise LengthMismatch(f"{name} has length {v.shape[0]}, expected {n}")
    return v


def _weight_values(weight):
    if isinstance(weight, FunctionalWeight):
        return weight.a_values
    return np.asarray(weight, dtype=float)


def _require_truth(truth):
    if not isinstance(truth, SimulationTruth):
        raise MissingTruth("this quantity needs the simulated truth and noise")
    return truth


# ---------------------------------------------------------------------------
# step functions


@dataclass(frozen=True)
class StepFunction:
    partition: CellPartition
    beta: np.ndarray

    def __post_init__(self):
        if len(self.beta) != self.partition.K:
            raise LengthMismatch("beta length must equal the number of cells")

    def values(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=float)[self.partition.labels]


@dataclass(frozen=True)
class ForestFunction:
    """Sum of step functions, one leaf vector per tree of ``ensemble``."""

    ensemble: Ensemble
    betas: tuple

    def __post_init__(self):
        betas = tuple(np.asarray(b, dtype=float) for b in self.betas)
        if len(betas) != self.ensemble.T:
            raise LengthMismatch("one leaf vector per tree is required")
        for tree, beta in zip(self.ensemble.trees, betas):
            if len(beta) != tree.K:
                raise LengthMismatch("leaf vector length must equal the tree's leaf count")
        object.__setattr__(self, "betas", betas)

    @property
    def T(self) -> int:
        return self.ensemble.T

    def tree_values(self, t: int) -> np.ndarray:
        return self.betas[t][self.ensemble.trees[t].labels]

    def values(self) -> np.ndarray:
        out = self.tree_values(0).copy()
        for t in range(1, self.T):
            out += self.tree_values(t)
        return out


@dataclass(frozen=True)
class Projection:
    values: np.ndarray
    per_cell_means: np.ndarray


def empirical_norm(values_f, values_g=None) -> float:
    """``sqrt(mean((f - g)**2))`` over the design points."""
    f = _vec(values_f)
    if values_g is None:
        return float(math.sqrt(np.mean(f * f)))
    g = _vec(values_g, f.shape[0])
    d = f - g
    return float(math.sqrt(np.mean(d * d)))


def inner_product(values_f, values_g) -> float:
    f = _vec(values_f)
    g = _vec(values_g, f.shape[0])
    return float(np.mean(f * g))


def project_onto_partition(values, partition) -> Projection:
    """Cell means, i.e. the least-squares step function on ``partition``."""
    labels = partition.labels
    v = _vec(values, labels.shape[0])
    counts = np.bincount(labels, minlength=partition.K)
    means = np.bincount(labels, weights=v, minlength=partition.K) / counts
    return Projection(means[labels], means)


def psi(values_f, weight) -> float:
    """``(1/n) sum_i a(x_i) f(x_i)``."""
    a = _weight_values(weight)
    f = _vec(values_f, a.shape[0])
    return float(np.dot(a, f) / a.shape[0])


def w_n(values_h, eps) -> float:
    """``(1/sqrt(n)) sum_i eps_i h(x_i)``."""
    h = _vec(values_h)
    e = _vec(eps, h.shape[0], "eps")
    return float(np.dot(e, h) / math.sqrt(h.shape[0]))


def lan_decomposition(values_f, truth: SimulationTruth):
    """``(delta_n, quad_term, stoch_term)`` with ``delta_n = l_n(f) - l_n(f0)``.

    ``delta_n`` is computed from the Gaussian log-likelihood itself; the two
    terms are ``-(n/2)||f - f0||_L**2`` and ``sqrt(n) W_n(f - f0)``.
    """
    truth = _require_truth(truth)
    f0, eps = truth.f0_values, truth.eps
    f = _vec(values_f, f0.shape[0])
    n = f.shape[0]
    y = f0 + eps

    def loglik(g):
        r = y - g
        return -0.5 * n * math.log(2 * math.pi) - 0.5 * float(np.dot(r, r))

    h = f - f0
    delta = loglik(f) - loglik(f0)
    quad = -0.5 * n * float(np.mean(h * h))
    stoch = math.sqrt(n) * w_n(h, eps)
    return delta, quad, stoch


def centering_estimators(partition, truth: SimulationTruth, weight):
    """``(psi_hat_T, psi_n)``.

    ``psi_hat_T = Psi(f0_T) + W_n(a_T)/sqrt(n)`` with both projections taken
    on ``partition``; ``psi_n = Psi(f0) + W_n(a)/sqrt(n)``.
    """
    truth = _require_truth(truth)
    a = _weight_values(weight)
    n = a.shape[0]
    f0_T = project_onto_partition(truth.f0_values, partition).values
    a_T = project_onto_partition(a, partition).values
    psi_hat = psi(f0_T, a) + w_n(a_T, truth.eps) / math.sqrt(n)
    psi_n = psi(truth.f0_values, a) + w_n(a, truth.eps) / math.sqrt(n)
    return psi_hat, psi_n


def no_bias_value(partition, truth: SimulationTruth, weight) -> float:
    """``sqrt(n) <a - a_T, f0 - f0_T>_L``."""
    truth = _require_truth(truth)
    a = _weight_values(weight)
    f0 = truth.f0_values
    da = a - project_onto_partition(a, partition).values
    df = f0 - project_onto_partition(f0, partition).values
    return math.sqrt(a.shape[0]) * inner_product(da, df)


def local_variance(values_f0, partition) -> np.ndarray:
    """Per-cell mean squared deviation from the cell mean (divisor ``n(Omega_k)``)."""
    v = _vec(values_f0, partition.labels.shape[0])
    proj = project_onto_partition(v, partition)
    d = v - proj.values
    counts = np.bincount(partition.labels, minlength=partition.K)
    return np.bincount(partition.labels, weights=d * d, minlength=partition.K) / counts


def approximation_error(values_f0, partition) -> float:
    """``||f0_T - f0||_L**2``."""
    v = _vec(values_f0)
    d = v - project_onto_partition(v, partition).values
    return float(np.mean(d * d))


def selfsim_ratio(values_f0, partition, alpha: float) -> float:
    """``||f0_T - f0||_L**2 / diam(T)**(2 alpha)``; ``nan`` when the diameter is zero."""
    dia = diameter(partition).total
    if dia == 0:
        return math.nan
    return approximation_error(values_f0, partition) / dia ** (2 * alpha)


# ---------------------------------------------------------------------------
# partition sizes


def eps_n(n: int, alpha: float, p: int = 1) -> float:
    """``n**(-alpha/(2 alpha + p)) * sqrt(log n)``."""
    return n ** (-alpha / (2 * alpha + p)) * math.sqrt(math.log(n))


def kn_fixed(n: int, alpha: float) -> int:
    """``floor((n / log n)**(1/(2 alpha + 1)))``, the fixed-``K`` choice for ``p = 1``."""
    return max(1, int(math.floor((n / math.log(n)) ** (1 / (2 * alpha + 1)))))


def kn_lemma1(n: int, alpha: float, p: int = 1, M2: float = 1.0) -> int:
    """``floor(M2 * n * eps_n**2 / log n)``."""
    return int(math.floor(M2 * n * eps_n(n, alpha, p) ** 2 / math.log(n)))


def equivalent_blocks_labels(design, K: int) -> CellPartition:
    """Equivalent-blocks cells as a label partition (no tree is built)."""
    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    order = np.lexsort((np.arange(n), x[:, 0]))
    sizes = np.full(K, n // K)
    sizes[: n % K] += 1
    labels = np.empty(n, dtype=np.intp)
    labels[order] = np.repeat(np.arange(K), sizes)
    return CellPartition(labels, x)


# ---------------------------------------------------------------------------
# self-similarity


@dataclass(frozen=True)
class SelfSimCertificate:
    """Outcome of testing ``||f0_T - f0||_L**2 >= M diam(T)**(2 alpha)`` over a finite family.

    ``family_counts`` records how many partitions of each kind passed the
    ``diam(T) <= D`` filter; ``worst`` describes the minimising partition.
    """

    alpha: float
    M: float
    D: float
    tested_partitions: int
    min_ratio: float
    verdict: bool
    family_counts: dict = field(default_factory=dict)
    worst: str = ""


def self_similarity_certificate(truth: SimulationTruth, design, alpha: float, M: float, D: float,
                                partition_budget: int, rng, gw_prior=None, max_depth: int = 12) -> SelfSimCertificate:
    """Falsification test of self-similarity over k-d trees, equivalent blocks and sampled trees.

    The tested family is: every k-d tree, every equivalent-blocks partition
    (``p = 1``) and ``partition_budget`` partitions drawn from ``gw_prior``,
    each kept only when ``0 < diam(T) <= D``. ``gw_prior`` defaults to the
    sampler's default Galton-Watson prior.
    """
    truth = _require_truth(truth)
    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, p = x.shape
    f0 = truth.f0_values
    if partition_budget < 1:
        raise ValueError("partition_budget must be at least 1")
    if gw_prior is None:
        gw_prior = GaltonWatsonPrior()

    best = (math.inf, "")
    counts = {"kd": 0, "equivalent_blocks": 0, "gw": 0}

    def consider(part, family, label):
        nonlocal best
        dia = diameter(part).total
        if not 0 < dia <= D:
            return
        counts[family] += 1
        r = approximation_error(f0, part) / dia ** (2 * alpha)
        if r < best[0]:
            best = (r, f"{family}:{label}")

    s = 1
    while n >= 2 ** (s * p):
        consider(build_kd_tree(x, s), "kd", f"s={s}")
        s += 1
    if p == 1:
        for K in range(1, n + 1):
            consider(equivalent_blocks_labels(x, K), "equivalent_blocks", f"K={K}")
    for b in range(partition_budget):
        consider(sample_gw_tree(gw_prior, x, rng, max_depth), "gw", f"draw={b}")

    tested = sum(counts.values())
    min_ratio = best[0]
    return SelfSimCertificate(alpha, M, D, tested, min_ratio, bool(min_ratio >= M), counts, best[1])
