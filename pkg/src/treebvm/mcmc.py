"""Posterior samplers for tree and sum-of-trees regression.

Bayesian CART runs Metropolis-Hastings over tree structures with the leaf
values integrated out, then redraws the leaves exactly from their full
conditional. BART cycles the same update over ``T`` trees, each fitted to
the partial residuals of the others (Bayesian backfitting). The noise
variance is fixed at one.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import log_ndtr, ndtr, ndtri, ndtri_exp

from .approx import ForestFunction
from .dataset import Dataset, FunctionalWeight, spawn_rng
from .errors import ConfigInvalid, NumericalFailure, WrongWeight
from .partition import Ensemble, Node, TreePartition, replace_subtree, route
from .priors import GaltonWatsonPrior, UniformTopologyPrior

__all__ = [
    "SamplerConfig",
    "TreeState",
    "PosteriorDraw",
    "ChainDiagnostics",
    "NumericalWarning",
    "leaf_marginal_loglik",
    "leaf_stats",
    "sample_leaf_values",
    "grow_proposal",
    "prune_proposal",
    "change_proposal",
    "log_acceptance_ratio",
    "mh_step",
    "run_chain",
    "effective_sample_size",
    "ensemble_shift_check",
    "log_joint_posterior",
    "write_draws_csv",
    "write_forests_jsonl",
]

MOVES = ("grow", "prune", "change")
LOG_2PI = math.log(2 * math.pi)


class NumericalWarning(RuntimeWarning):
    """A covariance needed diagonal jitter before it could be factorised."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SamplerConfig:
    """Everything a chain needs besides the data.

    ``iterations`` counts all sweeps including the ``burn_in`` ones; draws
    are kept at sweeps ``burn_in, burn_in + thin, ...``.
    """

    tree_prior: object
    leaf_prior: object
    n_trees: int = 1
    move_weights: tuple = (0.4, 0.4, 0.2)
    iterations: int = 2000
    burn_in: int = 500
    thin: int = 1
    seed: int = 0
    max_depth: int = 12

    def __post_init__(self):
        object.__setattr__(self, "move_weights", tuple(float(w) for w in self.move_weights))
        problems = self.problems()
        if problems:
            raise ConfigInvalid(problems)

    def problems(self) -> list:
        out = []
        if not isinstance(self.tree_prior, (GaltonWatsonPrior, UniformTopologyPrior)):
            out.append("tree_prior: must be a Galton-Watson or uniform-topology prior")
        if not hasattr(self.leaf_prior, "log_density"):
            out.append("leaf_prior: not a leaf prior")
        if not (isinstance(self.n_trees, int) and self.n_trees >= 1):
            out.append("n_trees: must be a positive integer")
        w = self.move_weights
        if len(w) != 3 or any(not v >= 0 for v in w) or abs(sum(w) - 1) > 1e-12:
            out.append("move_weights: need three nonnegative probabilities summing to 1")
        if self.burn_in < 0 or self.iterations < 0:
            out.append("iterations: counts must be nonnegative")
        if self.iterations < self.burn_in:
            out.append("iterations: must be at least burn_in")
        if self.thin < 1:
            out.append("thin: must be at least 1")
        if self.max_depth < 0:
            out.append("max_depth: must be nonnegative")
        return out


# ---------------------------------------------------------------------------
# leaf integrals


def _cholesky(S, what="covariance"):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        pass
    scale = max(1.0, float(np.mean(np.diag(S))))
    jitter = 1e-10 * scale
    eye = np.eye(S.shape[0])
    for _ in range(6):
        try:
            L = np.linalg.cholesky(S + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= 10
            continue
        warnings.warn(f"{what} needed jitter {jitter:.1e} to factorise", NumericalWarning, stacklevel=3)
        return L
    raise NumericalFailure(f"{what} is not positive definite even with jitter {jitter:.1e}")


def leaf_stats(partition, residuals):
    """Per-leaf counts ``m`` and residual sums ``b``."""
    K = partition.K
    m = np.bincount(partition.labels, minlength=K).astype(float)
    b = np.bincount(partition.labels, weights=residuals, minlength=K)
    return m, b


def _marginal_from_stats(m, b, leaf_prior) -> float:
    """Structure-dependent part of the leaf marginal; omits ``-n/2 log 2 pi - 1/2 sum r**2``."""
    K = m.shape[0]
    if leaf_prior.gaussian:
        v = leaf_prior.diag_variance(K)
        if v is not None:
            prec = m + 1.0 / v
            return float(0.5 * np.sum(b * b / prec) - 0.5 * np.sum(np.log1p(v * m)))
        S = leaf_prior.covariance(K)
        LS = _cholesky(S, "leaf covariance")
        P = cho_solve((LS, True), np.eye(K)) + np.diag(m)
        LP = _cholesky(P, "leaf posterior precision")
        z = solve_triangular(LP, b, lower=True)
        return float(0.5 * z @ z - np.sum(np.log(np.diag(LS))) - np.sum(np.log(np.diag(LP))))
    lam = leaf_prior.rate(K)
    sm = np.sqrt(m)
    u = b - lam
    w = b + lam
    lp = u * u / (2 * m) + log_ndtr(u / sm)
    ln = w * w / (2 * m) + log_ndtr(-w / sm)
    return float(np.sum(math.log(lam / 2) + 0.5 * np.log(2 * np.pi / m) + np.logaddexp(lp, ln)))


def leaf_marginal_loglik(partition, residuals, leaf_prior) -> float:
    """``log int prod_i N(r_i | beta_cell(i), 1) pi(beta) d beta`` in closed form.

    Gaussian leaves use a ``K x K`` Cholesky solve (diagonal shortcut when
    the covariance is a multiple of the identity). Laplace leaves factor
    over cells; each cell integral is a two-sided Gaussian tail written with
    ``log_ndtr``.
    """
    r = np.asarray(residuals, dtype=float)
    m, b = leaf_stats(partition, r)
    return -0.5 * r.shape[0] * LOG_2PI - 0.5 * float(r @ r) + _marginal_from_stats(m, b, leaf_prior)


def _truncnorm_above(a, rng):
    """Standard normals conditioned on ``t > a`` by exact inversion."""
    a = np.asarray(a, dtype=float)
    U = rng.random(a.shape)
    out = np.empty_like(a)
    neg = a < 0
    an = a[neg]
    out[neg] = ndtri(ndtr(an) + U[neg] * ndtr(-an))
    ap = a[~neg]
    # far tail: invert the survival function in log space
    out[~neg] = -ndtri_exp(np.log1p(-U[~neg]) + log_ndtr(-ap))
    return np.maximum(out, a)


def sample_leaf_values(m, b, leaf_prior, rng) -> np.ndarray:
    """Exact draw from the leaf full conditional given counts ``m`` and residual sums ``b``."""
    K = m.shape[0]
    if leaf_prior.gaussian:
        v = leaf_prior.diag_variance(K)
        if v is not None:
            prec = m + 1.0 / v
            return b / prec + rng.standard_normal(K) / np.sqrt(prec)
        S = leaf_prior.covariance(K)
        LS = _cholesky(S, "leaf covariance")
        P = cho_solve((LS, True), np.eye(K)) + np.diag(m)
        LP = _cholesky(P, "leaf posterior precision")
        mean = cho_solve((LP, True), b)
        return mean + solve_triangular(LP.T, rng.standard_normal(K), lower=False)
    # two-piece truncated normal mixture
    lam = leaf_prior.rate(K)
    sm = np.sqrt(m)
    u = b - lam
    w = b + lam
    lp = u * u / (2 * m) + log_ndtr(u / sm)
    ln = w * w / (2 * m) + log_ndtr(-w / sm)
    p_pos = np.exp(lp - np.logaddexp(lp, ln))
    pos = rng.random(K) < p_pos
    t_pos = _truncnorm_above(-u / sm, rng)
    t_neg = _truncnorm_above(w / sm, rng)
    return np.where(pos, u / m + t_pos / sm, w / m - t_neg / sm)


# ---------------------------------------------------------------------------
# tree state and proposals


@dataclass
class TreeState:
    """One tree with its leaf values and cached structure prior."""

    tree: TreePartition
    beta: np.ndarray
    log_tree_prior: float

    @property
    def K(self) -> int:
        return self.tree.K


def _nog_nodes(tree):
    return [(node, path) for node, path in tree.internal_nodes() if node.left.is_leaf and node.right.is_leaf]


def grow_proposal(tree: TreePartition, leaf_index: int, j: int, c: float, move_weights, max_depth):
    """Split leaf ``leaf_index`` with rule ``(j, c)``; returns ``(tree', log q_rev - log q_fwd)`` or ``None``."""
    x = tree.x
    p = x.shape[1]
    leaf, path = tree.leaf_paths()[leaf_index]
    if leaf.depth >= max_depth:
        return None
    V = len(leaf.candidates(x, j))
    if V == 0:
        return None
    left, right = route(x, leaf.idx, j, c)
    if len(left) == 0 or len(right) == 0:
        return None
    node = Node(leaf.idx, leaf.depth, j, float(c), None, Node(left, leaf.depth + 1), Node(right, leaf.depth + 1))
    node._cands = leaf._cands
    new = TreePartition(replace_subtree(tree.root, path, node), x)
    pg, pp, _ = move_weights
    log_fwd = math.log(pg) - math.log(tree.K) - math.log(p) - math.log(V)
    log_rev = math.log(pp) - math.log(len(_nog_nodes(new))) if pp > 0 else -math.inf
    return new, log_rev - log_fwd


def prune_proposal(tree: TreePartition, nog_index: int, move_weights):
    """Collapse the ``nog_index``-th internal node whose children are both leaves."""
    nogs = _nog_nodes(tree)
    if not nogs:
        return None
    node, path = nogs[nog_index]
    x = tree.x
    leaf = Node(node.idx, node.depth)
    leaf._cands = node._cands
    new = TreePartition(replace_subtree(tree.root, path, leaf), x)
    pg, pp, _ = move_weights
    V = len(node.candidates(x, node.j))
    log_fwd = math.log(pp) - math.log(len(nogs))
    log_rev = (math.log(pg) - math.log(new.K) - math.log(x.shape[1]) - math.log(V)) if pg > 0 else -math.inf
    return new, log_rev - log_fwd


def _rebuild(x, idx, depth, j, c, old_left, old_right):
    """Re-route a subtree under a new top rule, keeping descendant rules; ``None`` if any cell empties."""
    left, right = route(x, idx, j, c)
    if len(left) == 0 or len(right) == 0:
        return None
    kids = []
    for old, sub in ((old_left, left), (old_right, right)):
        if old.is_leaf:
            kids.append(Node(sub, depth + 1))
            continue
        cands = Node(sub, depth + 1).candidates(x, old.j)
        pos = np.searchsorted(cands, old.c)
        if pos >= len(cands) or cands[pos] != old.c:
            return None  # the kept rule is no longer an admissible value of this cell
        child = _rebuild(x, sub, depth + 1, old.j, old.c, old.left, old.right)
        if child is None:
            return None
        kids.append(child)
    return Node(idx, depth, j, float(c), None, kids[0], kids[1])


def change_proposal(tree: TreePartition, internal_index: int, j: int, c: float):
    """Replace the rule of one internal node; descendants keep their rules."""
    node, path = tree.internal_nodes()[internal_index]
    x = tree.x
    V_new = len(node.candidates(x, j))
    if V_new == 0:
        return None
    sub = _rebuild(x, node.idx, node.depth, j, c, node.left, node.right)
    if sub is None:
        return None
    sub._cands = node._cands
    new = TreePartition(replace_subtree(tree.root, path, sub), x)
    V_old = len(node.candidates(x, node.j))
    return new, math.log(V_new) - math.log(V_old)


def log_acceptance_ratio(current: TreePartition, proposed: TreePartition, log_q_ratio: float,
                         residuals, config: SamplerConfig, current_terms=None):
    """Log MH ratio and the proposed ``(log prior, log marginal)`` pair.

    ``current_terms`` may carry the already known ``(log prior, log marginal)``
    of ``current`` under the same residuals.
    """
    if current_terms is None:
        m, b = leaf_stats(current, residuals)
        current_terms = (config.tree_prior.log_prior(current, config.max_depth),
                         _marginal_from_stats(m, b, config.leaf_prior))
    prior_new = config.tree_prior.log_prior(proposed, config.max_depth)
    if prior_new == -math.inf:
        return -math.inf, (prior_new, -math.inf)
    m, b = leaf_stats(proposed, residuals)
    lik_new = _marginal_from_stats(m, b, config.leaf_prior)
    ratio = (prior_new - current_terms[0]) + (lik_new - current_terms[1]) + log_q_ratio
    return ratio, (prior_new, lik_new)


def _propose(tree, move, config, rng):
    x = tree.x
    p = x.shape[1]
    if move == "grow":
        k = int(rng.integers(tree.K))
        leaf = tree.leaves[k]
        if leaf.depth >= config.max_depth:
            return None
        j = int(rng.integers(p))
        cands = leaf.candidates(x, j)
        if len(cands) == 0:
            return None
        c = cands[rng.integers(len(cands))]
        return grow_proposal(tree, k, j, c, config.move_weights, config.max_depth)
    if move == "prune":
        if tree.K == 1:
            return None
        nogs = _nog_nodes(tree)
        return prune_proposal(tree, int(rng.integers(len(nogs))), config.move_weights)
    internal = tree.internal_nodes()
    if not internal:
        return None
    i = int(rng.integers(len(internal)))
    node = internal[i][0]
    j = int(rng.integers(p))
    cands = node.candidates(x, j)
    if len(cands) == 0:
        return None
    c = cands[rng.integers(len(cands))]
    return change_proposal(tree, i, j, c)


def mh_step(state: TreeState, config: SamplerConfig, data: Dataset, rng, residuals=None, stats=None):
    """One grow/prune/change update followed by an exact leaf redraw.

    ``residuals`` defaults to ``data.y``. Returns ``(state', move, accepted)``.
    Impossible proposals count as rejections of the chosen move.
    """
    r = data.y if residuals is None else residuals
    tree = state.tree
    m, b = leaf_stats(tree, r)
    current = (state.log_tree_prior, _marginal_from_stats(m, b, config.leaf_prior))
    u = rng.random()
    pg, pp, _ = config.move_weights
    move = "grow" if u < pg else ("prune" if u < pg + pp else "change")
    prop = _propose(tree, move, config, rng)
    accepted = False
    prior = state.log_tree_prior
    if prop is not None:
        new_tree, log_q = prop
        log_ratio, (prior_new, _) = log_acceptance_ratio(tree, new_tree, log_q, r, config, current)
        if log_ratio >= 0 or math.log(rng.random()) < log_ratio:
            tree, prior, accepted = new_tree, prior_new, True
            m, b = leaf_stats(tree, r)
    beta = sample_leaf_values(m, b, config.leaf_prior, rng)
    if stats is not None:
        stats[move][0] += 1
        stats[move][1] += accepted
    return TreeState(tree, beta, prior), move, accepted


# ---------------------------------------------------------------------------
# chains


@dataclass(frozen=True)
class PosteriorDraw:
    """One retained sweep.

    ``forest`` and ``fitted_values`` are ``None`` when the chain was run with
    ``keep="summary"``; ``extras`` holds whatever the chain callback returned.
    """

    iteration: int
    forest: ForestFunction | None
    fitted_values: np.ndarray | None
    log_posterior_unnorm: float
    psi_value: float | None
    leaf_counts: tuple
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ChainDiagnostics:
    acceptance_rates: dict
    proposals: dict
    effective_sample_size: float | None
    leaf_count_summary: dict
    n_draws: int


def _init_tree(config, x, rng):
    tree = TreePartition(Node(np.arange(x.shape[0]), 0), x)
    lp = config.tree_prior.log_prior(tree, config.max_depth)
    tries = 0
    while lp == -math.inf:
        # the root cannot stay a leaf under this prior: start from a prior draw
        if not isinstance(config.tree_prior, GaltonWatsonPrior) or tries > 100:
            raise ConfigInvalid(["tree_prior: no valid initial tree"])
        tree = config.tree_prior.sample(x, rng, max(1, config.max_depth))
        lp = config.tree_prior.log_prior(tree, config.max_depth)
        tries += 1
    return tree, lp


def log_joint_posterior(trees, betas, y, config: SamplerConfig, fitted=None) -> float:
    """Unnormalised log density of ``(trees, leaf values)`` given ``y``."""
    if fitted is None:
        fitted = sum(np.asarray(bt)[t.labels] for t, bt in zip(trees, betas))
    r = y - fitted
    out = -0.5 * y.shape[0] * LOG_2PI - 0.5 * float(r @ r)
    for t, bt in zip(trees, betas):
        out += config.tree_prior.log_prior(t, config.max_depth) + config.leaf_prior.log_density(bt)
    return out


def run_chain(config: SamplerConfig, data: Dataset, weight: FunctionalWeight | None = None, *,
              chain: int = 0, callback=None, keep: str = "full", audit: bool = False):
    """Run one chain; returns ``(draws, diagnostics)``.

    With one tree this is plain Metropolis-Hastings. With ``T > 1`` every
    sweep updates the trees in turn against the partial residuals
    ``y - sum_{t' != t} f_t'``. The stream is ``spawn_rng(config.seed, chain)``,
    so results are bit-identical for a given ``(config, chain)``.

    ``callback(trees, betas, fitted)`` is called on every retained sweep and
    its return value stored in ``PosteriorDraw.extras``. ``keep="summary"``
    drops the forest and fitted values from the draws. ``audit`` recomputes
    the residual vector after each tree update and raises if the maintained
    copy has drifted by more than ``1e-10``.
    """
    if keep not in ("full", "summary"):
        raise ConfigInvalid([f"keep: unknown value {keep!r}"])
    if weight is not None and weight.a_values.shape[0] != data.n:
        raise ConfigInvalid(["weight: length does not match the data"])
    rng = spawn_rng(config.seed, chain)
    x, y = data.x, data.y
    T = config.n_trees
    states = []
    for _ in range(T):
        tree, lp = _init_tree(config, x, rng)
        states.append(TreeState(tree, np.zeros(tree.K), lp))
    fits = [np.zeros(data.n) for _ in range(T)]
    resid = y.copy()  # y minus the current total fit
    stats = {mv: [0, 0] for mv in MOVES}
    a = None if weight is None else weight.a_values
    draws = []
    for it in range(config.iterations):
        for t in range(T):
            partial = resid + fits[t]
            states[t], _, _ = mh_step(states[t], config, data, rng, partial, stats)
            new_fit = states[t].beta[states[t].tree.labels]
            resid = partial - new_fit
            fits[t] = new_fit
            if audit:
                check = y - sum(fits)
                if np.max(np.abs(check - resid)) > 1e-10:
                    raise NumericalFailure("maintained residuals drifted from y - sum of trees")
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            fitted = fits[0].copy()
            for f in fits[1:]:
                fitted += f
            trees = tuple(s.tree for s in states)
            betas = tuple(s.beta for s in states)
            lpost = -0.5 * data.n * LOG_2PI - 0.5 * float(resid @ resid)
            for s in states:
                lpost += s.log_tree_prior + config.leaf_prior.log_density(s.beta)
            psi_value = None if a is None else float(a @ fitted / data.n)
            extras = callback(trees, betas, fitted) if callback is not None else {}
            forest = ForestFunction(Ensemble(trees), betas) if keep == "full" else None
            draws.append(PosteriorDraw(
                it, forest, fitted if keep == "full" else None, lpost, psi_value,
                tuple(s.K for s in states), extras if extras is not None else {},
            ))
        if T > 1 and it % 50 == 49:
            # refresh to keep rounding from accumulating in the running residual
            resid = y - sum(fits)
    rates = {mv: (stats[mv][1] / stats[mv][0] if stats[mv][0] else 0.0) for mv in MOVES}
    proposals = {mv: stats[mv][0] for mv in MOVES}
    ks = np.array([sum(d.leaf_counts) for d in draws], dtype=float)
    if ks.size:
        summary = {
            "mean": float(ks.mean()),
            "min": int(ks.min()),
            "max": int(ks.max()),
            "q05": float(np.quantile(ks, 0.05)),
            "q50": float(np.quantile(ks, 0.5)),
            "q95": float(np.quantile(ks, 0.95)),
        }
    else:
        summary = {}
    ess = None
    if a is not None and draws:
        ess = effective_sample_size([d.psi_value for d in draws])
    return draws, ChainDiagnostics(rates, proposals, ess, summary, len(draws))


# ---------------------------------------------------------------------------
# diagnostics


def effective_sample_size(chain) -> float:
    """ESS via Geyer's initial monotone positive-sequence estimator.

    Autocovariances come from an FFT. A constant chain returns its length.
    """
    z = np.asarray(chain, dtype=float)
    n = z.shape[0]
    if n < 4:
        return float(n)
    z = z - z.mean()
    if not np.any(z):
        return float(n)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(z, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    rho = acov / acov[0]
    n_pairs = n // 2
    pairs = rho[: 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    # initial positive sequence, then enforce monotonicity
    neg = np.nonzero(pairs <= 0)[0]
    stop = neg[0] if neg.size else n_pairs
    gamma = np.minimum.accumulate(pairs[:stop])
    tau = -1.0 + 2.0 * gamma.sum()
    tau = max(tau, 1.0 / math.log10(max(n, 10)))
    return float(n / tau)


def ensemble_shift_check(draw: PosteriorDraw, s: float, weight, leaf_prior) -> float:
    """Shift every leaf by ``-delta``, ``delta = s/(T sqrt(n))``, and compare the prior change with its closed form.

    Gaussian leaves with isotropic variance ``v_t`` per tree: returns
    ``[log pi(B) - log pi(B_s)] - sum_t (K_t delta**2 - 2 delta sum_k beta_tk) / (2 v_t)``,
    zero up to rounding. Laplace leaves: returns
    ``delta * sum_t lam_t K_t - |log pi(B) - log pi(B_s)|``, nonnegative when
    the bound holds.
    """
    a = weight.a_values if isinstance(weight, FunctionalWeight) else np.asarray(weight, dtype=float)
    if not np.all(a == 1.0):
        raise WrongWeight("the ensemble shift needs the constant weight a = 1")
    if draw.forest is None:
        raise ValueError("the draw carries no forest")
    n = a.shape[0]
    betas = draw.forest.betas
    T = len(betas)
    delta = s / (T * math.sqrt(n))
    log_ratio = 0.0
    for bt in betas:
        log_ratio += leaf_prior.log_density(bt) - leaf_prior.log_density(bt - delta)
    if leaf_prior.gaussian:
        closed = 0.0
        for bt in betas:
            K = bt.shape[0]
            v = leaf_prior.diag_variance(K)
            if v is None:
                raise ValueError("the closed form needs an isotropic leaf covariance")
            closed += K * delta * delta / (2 * v) - delta * float(np.sum(bt)) / v
        return float(log_ratio - closed)
    bound = abs(delta) * sum(leaf_prior.rate(bt.shape[0]) * bt.shape[0] for bt in betas)
    return float(bound - abs(log_ratio))


# ---------------------------------------------------------------------------
# output


def write_draws_csv(draws, path) -> None:
    """``iteration, K_1..K_T, psi_value, log_posterior_unnorm`` per draw."""
    T = len(draws[0].leaf_counts) if draws else 1
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration"] + [f"K_{t + 1}" for t in range(T)] + ["psi_value", "log_posterior_unnorm"])
        for d in draws:
            psi_txt = "" if d.psi_value is None else repr(d.psi_value)
            w.writerow([d.iteration, *d.leaf_counts, psi_txt, repr(d.log_posterior_unnorm)])


def write_forests_jsonl(draws, path) -> None:
    """One JSON object per draw with every tree's topology and leaf values."""
    with Path(path).open("w") as fh:
        for d in draws:
            if d.forest is None:
                raise ValueError("draws were kept without forests")
            trees = [
                {"topology": t.to_dict(), "beta": b.tolist()}
                for t, b in zip(d.forest.ensemble.trees, d.forest.betas)
            ]
            fh.write(json.dumps({"iteration": d.iteration, "trees": trees}) + "\n")
