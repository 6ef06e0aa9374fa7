"""Priors on tree size, tree topology and leaf values.

Two tree priors are available: the Galton-Watson branching prior, where a
node at depth ``l`` splits with probability ``alpha / (1 + l)**delta``
(``chipman``) or ``alpha**l`` (``geometric``), and the conditionally uniform
prior, a zero-truncated Poisson on the number of leaves combined with a
uniform draw among the topologies with that many leaves.

Leaf values are Gaussian (any covariance, or ``K * I`` in ensemble mode) or
independent Laplace (rate ``lam``, or ``c_lambda / sqrt(K)`` in ensemble mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DimensionMismatch, EnumerationCapExceeded, InvalidPrior
from .partition import Node, TreePartition, _walk, route

__all__ = [
    "TreeSizePrior",
    "GaltonWatsonPrior",
    "UniformTopologyPrior",
    "GaussianLeafPrior",
    "GaussianScaledLeafPrior",
    "LaplaceLeafPrior",
    "LaplaceScaledLeafPrior",
    "log_prior_tree_size",
    "count_topologies",
    "log_prior_topology_uniform",
    "gw_split_probability",
    "sample_gw_tree",
    "gw_expected_leaves",
    "log_leaf_prior",
    "gaussian_change_of_measure_residual",
    "laplace_change_of_measure_bound",
    "DEFAULT_ENUMERATION_CAP",
]

DEFAULT_ENUMERATION_CAP = 5000
LOG_2PI = math.log(2 * math.pi)


# ---------------------------------------------------------------------------
# tree size


def log_prior_tree_size(K: int, lam: float) -> float:
    """``log(lam**K / ((exp(lam) - 1) K!))`` for ``K >= 1``."""
    if K < 1:
        return -math.inf
    return K * math.log(lam) - math.log(math.expm1(lam)) - float(gammaln(K + 1))


@dataclass(frozen=True)
class TreeSizePrior:
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidPrior("the tree-size intensity must be positive")

    def log_pmf(self, K: int) -> float:
        return log_prior_tree_size(K, self.lam)


# ---------------------------------------------------------------------------
# topology enumeration


class _Budget(Exception):
    pass


def count_topologies(design, K_max: int, max_depth: int | None = None, cap: int = DEFAULT_ENUMERATION_CAP):
    """Exact ``|V^K|`` for ``K = 0..K_max`` by memoised recursion over cells.

    Two topologies count as distinct whenever their split rules differ, even
    if they induce the same cells. Returns a list of Python ints (entry 0 is
    0), or ``None`` when more than ``cap`` distinct ``(cell, depth)`` states
    would be needed.
    """
    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, p = x.shape
    if max_depth is None:
        max_depth = n
    if n > cap:
        return None
    memo: dict = {}

    def count(idx, depth):
        key = (idx.tobytes(), depth)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if len(memo) >= cap:
            raise _Budget
        out = [0] * (K_max + 1)
        out[1] = 1
        if depth < max_depth:
            for j in range(p):
                for c in np.unique(x[idx, j])[:-1]:
                    left, right = route(x, idx, j, c)
                    cl, cr = count(left, depth + 1), count(right, depth + 1)
                    for a in range(1, K_max):
                        if cl[a]:
                            for b in range(1, K_max + 1 - a):
                                if cr[b]:
                                    out[a + b] += cl[a] * cr[b]
        memo[key] = out
        return out

    try:
        return count(np.arange(n), 0)
    except _Budget:
        return None


def log_prior_topology_uniform(partition: TreePartition, max_depth: int | None = None,
                               cap: int = DEFAULT_ENUMERATION_CAP, require_normalized: bool = False) -> float:
    """``-log |V^K|`` for the partition's leaf count ``K``.

    Above the enumeration cap the unnormalised value 0 is returned (equal
    mass within each ``K``), unless ``require_normalized`` is set, in which
    case :class:`EnumerationCapExceeded` is raised.
    """
    K = partition.K
    counts = count_topologies(partition.x, K, max_depth, cap)
    if counts is None:
        if require_normalized:
            raise EnumerationCapExceeded(f"|V^{K}| needs more than {cap} enumeration states")
        return 0.0
    return -math.log(counts[K])


class UniformTopologyPrior:
    """Zero-truncated Poisson leaf count with uniform topology given the count.

    ``normalized`` reports, per ``(design, max_depth)``, whether ``|V^K|``
    could be enumerated; otherwise the prior is applied with the
    topology-count factor dropped.
    """

    kind = "uniform"

    def __init__(self, lam: float = 1.0, cap: int = DEFAULT_ENUMERATION_CAP):
        self.size = TreeSizePrior(lam)
        self.cap = cap
        self._counts = {}

    @property
    def lam(self):
        return self.size.lam

    def _log_counts(self, x, max_depth):
        key = (id(x), max_depth)
        entry = self._counts.get(key)
        if entry is None or entry[0] is not x:
            n = x.shape[0]
            k_max = n if max_depth is None else min(n, 2**min(max_depth, 30))
            counts = count_topologies(x, k_max, max_depth, self.cap)
            logs = None if counts is None else [(-math.inf if v == 0 else math.log(v)) for v in counts]
            entry = (x, logs)
            self._counts[key] = entry
        return entry[1]

    def normalized(self, x, max_depth=None) -> bool:
        return self._log_counts(x, max_depth) is not None

    def log_prior(self, tree: TreePartition, max_depth: int | None = None) -> float:
        K = tree.K
        if max_depth is not None and tree.depth > max_depth:
            return -math.inf
        logs = self._log_counts(tree.x, max_depth)
        out = self.size.log_pmf(K)
        if logs is not None:
            out -= logs[K]
        return out

    def to_dict(self):
        return {"kind": "uniform", "lambda": self.lam}


# ---------------------------------------------------------------------------
# Galton-Watson


def gw_split_probability(l: int, prior: "GaltonWatsonPrior") -> float:
    """Split probability at layer ``l``: ``alpha/(1+l)**delta`` or ``alpha**l``."""
    if prior.variant == "chipman":
        return prior.alpha / (1.0 + l) ** prior.delta
    return prior.alpha**l


@dataclass(frozen=True)
class GaltonWatsonPrior:
    """Branching-process tree prior.

    A node at depth ``>= max_depth``, or whose cell admits no split, is a
    leaf with probability one. The split coordinate is uniform over the
    coordinates that admit at least one split, and the split value is uniform
    over that coordinate's admissible observed values.
    """

    variant: str = "chipman"
    alpha: float = 0.95
    delta: float = 2.0
    kind = "gw"

    def __post_init__(self):
        if self.variant not in ("chipman", "geometric"):
            raise InvalidPrior(f"unknown Galton-Watson variant {self.variant!r}")
        if not 0 < self.alpha < 1:
            raise InvalidPrior("alpha must lie in (0, 1)")
        if self.variant == "chipman" and not self.delta > 0:
            raise InvalidPrior("delta must be positive")

    def split_probability(self, l: int) -> float:
        return gw_split_probability(l, self)

    def _node_term(self, node: Node, x, max_depth) -> float:
        nc = node.n_candidates(x)
        avail = sum(1 for v in nc if v > 0)
        ps = self.split_probability(node.depth) if (avail and (max_depth is None or node.depth < max_depth)) else 0.0
        if node.is_leaf:
            return math.log1p(-ps) if ps < 1 else -math.inf
        if ps == 0 or nc[node.j] == 0:
            return -math.inf
        return math.log(ps) - math.log(avail) - math.log(nc[node.j])

    def log_prior(self, tree: TreePartition, max_depth: int | None = None) -> float:
        x = tree.x
        return sum(self._node_term(node, x, max_depth) for node, _ in _walk(tree.root))

    def sample(self, design, rng, max_depth: int = 20) -> TreePartition:
        return sample_gw_tree(self, design, rng, max_depth)

    def to_dict(self):
        return {"kind": "gw", "variant": self.variant, "alpha": self.alpha, "delta": self.delta}


def sample_gw_tree(prior: GaltonWatsonPrior, design, rng, max_depth: int = 20) -> TreePartition:
    """Draw a partition from the Galton-Watson prior, forcing leaves at ``max_depth``."""
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    x = np.asarray(design, dtype=float)
    if x.ndim == 1:
        x = x[:, None]

    def grow(idx, depth):
        node = Node(idx, depth)
        if depth >= max_depth or rng.random() >= prior.split_probability(depth):
            return node
        avail = [j for j, v in enumerate(node.n_candidates(x)) if v > 0]
        if not avail:
            return node
        j = avail[rng.integers(len(avail))] if len(avail) > 1 else avail[0]
        cands = node.candidates(x, j)
        c = cands[rng.integers(len(cands))]
        left, right = route(x, idx, j, c)
        node.j, node.c = j, float(c)
        node.left, node.right = grow(left, depth + 1), grow(right, depth + 1)
        return node

    return TreePartition(grow(np.arange(x.shape[0]), 0), x)


def gw_expected_leaves(prior: GaltonWatsonPrior, max_depth: int) -> float:
    """Mean leaf count of the branching recursion truncated at ``max_depth`` (no data constraints)."""
    e = 1.0
    for l in range(max_depth - 1, -1, -1):
        ps = prior.split_probability(l)
        e = (1 - ps) + ps * 2 * e
    return e


# ---------------------------------------------------------------------------
# leaf priors


class _LeafPrior:
    gaussian = False
    scaled = False

    def log_density(self, beta) -> float:
        raise NotImplementedError


class GaussianLeafPrior(_LeafPrior):
    """``beta | K ~ N_K(0, Sigma)``.

    ``cov`` may be ``None`` (``sigma2 * I``), a fixed ``K x K`` matrix or a
    callable ``K -> Sigma``. Every covariance handed out is checked against
    ``lambda_min > eig_floor`` and, when ``n`` is known, ``lambda_max <= c2 * n``.
    """

    gaussian = True
    kind = "gaussian"

    def __init__(self, sigma2: float = 1.0, cov=None, eig_floor: float = 1e-8, c2: float = 1.0, n: int | None = None):
        if not sigma2 > 0:
            raise InvalidPrior("sigma2 must be positive")
        self.sigma2 = float(sigma2)
        self.cov = cov
        self.eig_floor = eig_floor
        self.c2 = c2
        self.n = n
        if cov is not None and not callable(cov):
            self._check(np.asarray(cov, dtype=float))

    def _check(self, S):
        if S.ndim != 2 or S.shape[0] != S.shape[1] or not np.allclose(S, S.T):
            raise InvalidPrior("covariance must be a symmetric square matrix")
        ev = np.linalg.eigvalsh(S)
        if not ev[0] > self.eig_floor:
            raise InvalidPrior(f"lambda_min(Sigma) = {ev[0]:.3g} is not above {self.eig_floor}")
        if self.n is not None and ev[-1] > self.c2 * self.n:
            raise InvalidPrior(f"lambda_max(Sigma) = {ev[-1]:.3g} exceeds c2 * n = {self.c2 * self.n}")

    def diag_variance(self, K: int):
        """Common variance when the covariance is a multiple of the identity, else ``None``."""
        if self.cov is None:
            return self.sigma2
        return None

    def covariance(self, K: int) -> np.ndarray:
        if self.cov is None:
            S = self.sigma2 * np.eye(K)
        elif callable(self.cov):
            S = np.asarray(self.cov(K), dtype=float)
            self._check(S)
        else:
            S = np.asarray(self.cov, dtype=float)
        if S.shape != (K, K):
            raise DimensionMismatch(f"covariance is {S.shape}, expected ({K}, {K})")
        return S

    def log_density(self, beta) -> float:
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        K = beta.shape[0]
        v = self.diag_variance(K)
        if v is not None:
            return float(-0.5 * K * (LOG_2PI + math.log(v)) - 0.5 * beta @ beta / v)
        L = np.linalg.cholesky(self.covariance(K))
        z = np.linalg.solve(L, beta)
        return float(-0.5 * K * LOG_2PI - np.sum(np.log(np.diag(L))) - 0.5 * z @ z)

    def to_dict(self):
        if self.cov is not None:
            return {"kind": "gaussian", "cov": "custom"}
        return {"kind": "gaussian", "sigma2": self.sigma2}


class GaussianScaledLeafPrior(GaussianLeafPrior):
    """``beta | K ~ N_K(0, K I)``: leaf variance grows with the number of leaves."""

    scaled = True
    kind = "gaussian_scaled"

    def __init__(self):
        super().__init__(1.0)

    def diag_variance(self, K: int):
        return float(K)

    def covariance(self, K: int) -> np.ndarray:
        return K * np.eye(K)

    def to_dict(self):
        return {"kind": "gaussian_scaled"}


class LaplaceLeafPrior(_LeafPrior):
    """Independent ``(lam/2) exp(-lam |beta_k|)`` on every leaf."""

    kind = "laplace"

    def __init__(self, lam: float = 1.0):
        if not lam > 0:
            raise InvalidPrior("the Laplace rate must be positive")
        self.lam = float(lam)

    def rate(self, K: int) -> float:
        return self.lam

    def log_density(self, beta) -> float:
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        lam = self.rate(beta.shape[0])
        return float(beta.shape[0] * math.log(lam / 2) - lam * np.abs(beta).sum())

    def to_dict(self):
        return {"kind": "laplace", "lambda": self.lam}


class LaplaceScaledLeafPrior(LaplaceLeafPrior):
    """Laplace leaves with rate ``c_lambda / sqrt(K)``."""

    scaled = True
    kind = "laplace_scaled"

    def __init__(self, c_lambda: float = 1.0):
        if not c_lambda > 0:
            raise InvalidPrior("c_lambda must be positive")
        self.c_lambda = float(c_lambda)
        self.lam = self.c_lambda

    def rate(self, K: int) -> float:
        return self.c_lambda / math.sqrt(K)

    def to_dict(self):
        return {"kind": "laplace_scaled", "c_lambda": self.c_lambda}


def log_leaf_prior(beta, leaf_prior) -> float:
    """Log density of the leaf vector under ``leaf_prior``."""
    return leaf_prior.log_density(beta)


# ---------------------------------------------------------------------------
# change of measure


def gaussian_change_of_measure_residual(beta, a_proj, t: float, Sigma, n: int) -> float:
    """Residual of ``log pi(beta) - log pi(beta_t) = t**2/(2n) a'S^-1 a - t/sqrt(n) a'S^-1 beta``.

    ``beta_t = beta - t a / sqrt(n)`` and ``pi = N(0, Sigma)``. Zero up to
    rounding.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    a = np.atleast_1d(np.asarray(a_proj, dtype=float))
    S = np.atleast_2d(np.asarray(Sigma, dtype=float))
    if not (beta.shape == a.shape and S.shape == (beta.shape[0],) * 2):
        raise DimensionMismatch("beta, a_proj and Sigma disagree in dimension")
    L = np.linalg.cholesky(S)
    shift = t * a / math.sqrt(n)

    def quad(v):
        z = np.linalg.solve(L, v)
        return z @ z

    # the normalising constants cancel
    log_ratio = -0.5 * quad(beta) + 0.5 * quad(beta - shift)
    za = np.linalg.solve(L, a)
    zb = np.linalg.solve(L, beta)
    expected = t * t / (2 * n) * (za @ za) - t / math.sqrt(n) * (za @ zb)
    return float(log_ratio - expected)


def laplace_change_of_measure_bound(beta, a_proj, t: float, lambda_leaf: float, n: int):
    """Exact ``log pi(beta) - log pi(beta_t)`` and its bound ``|t| lam ||a||_1 / sqrt(n)``."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    a = np.atleast_1d(np.asarray(a_proj, dtype=float))
    if beta.shape != a.shape:
        raise DimensionMismatch("beta and a_proj disagree in dimension")
    beta_t = beta - t * a / math.sqrt(n)
    log_ratio = lambda_leaf * (np.abs(beta_t).sum() - np.abs(beta).sum())
    bound = abs(t) * lambda_leaf * np.abs(a).sum() / math.sqrt(n)
    return float(log_ratio), float(bound)
