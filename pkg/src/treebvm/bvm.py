"""Bernstein-von Mises experiments for tree posteriors.

A posterior draw ``f`` is mapped to ``tau = sqrt(n) (Psi(f) - center)`` and
the draws are compared with ``N(0, V0)``, ``V0 = ||a||_L**2``, through the
Kolmogorov-Smirnov distance and the exact one-dimensional Wasserstein-1
distance. Coverage runs repeat the whole pipeline over fresh noise.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from .approx import (
    centering_estimators,
    empirical_norm,
    eps_n,
    kn_lemma1,
    project_onto_partition,
    psi,
)
from .dataset import (
    Dataset,
    FunctionalWeight,
    SimulationTruth,
    generate_responses,
    make_grid_design,
    make_weight,
    truth_values,
)
from .errors import ConfigInvalid, MissingTruth, TooFewDraws
from .mcmc import SamplerConfig, effective_sample_size, run_chain
from .partition import diameter, merge_labels, threshold_dn

__all__ = [
    "CENTERING_MODES",
    "ESS_GATE",
    "BvmReport",
    "CoverageResult",
    "ConcentrationSummary",
    "ExperimentSetup",
    "DrawSummarizer",
    "centered_draws",
    "distance_to_gaussian",
    "lemma1_concentration",
    "bvm_experiment",
    "coverage_experiment",
    "equal_tailed_interval",
    "laplace_concentration_check",
    "replication_seeds",
    "write_tau_csv",
    "write_tau_svg",
]

CENTERING_MODES = ("per_partition_psi_hat_T", "global_psi_n", "posterior_mean")
ESS_GATE = 400.0


# ---------------------------------------------------------------------------
# result types


@dataclass(frozen=True)
class BvmReport:
    n: int
    alpha: float
    gamma: float
    V0: float
    tau_draws: np.ndarray
    ks_stat: float
    w1_stat: float
    centering_mode: str
    concentration: dict = field(default_factory=dict)
    ess: float | None = None
    inconclusive: bool = False
    acceptance_rates: dict = field(default_factory=dict)

    def to_dict(self, include_draws: bool = False) -> dict:
        out = {
            "n": self.n,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "V0": self.V0,
            "ks_stat": self.ks_stat,
            "w1_stat": self.w1_stat,
            "w1_over_sd": self.w1_stat / math.sqrt(self.V0),
            "centering_mode": self.centering_mode,
            "n_draws": int(self.tau_draws.shape[0]),
            "tau_mean": float(np.mean(self.tau_draws)),
            "tau_var": float(np.var(self.tau_draws)),
            "ess": self.ess,
            "inconclusive": self.inconclusive,
            "concentration": self.concentration,
            "acceptance_rates": self.acceptance_rates,
        }
        if include_draws:
            out["tau_draws"] = self.tau_draws.tolist()
        return out


@dataclass(frozen=True)
class CoverageResult:
    nominal_level: float
    n_reps: int
    hits: int
    empirical_coverage: float
    interval_widths: dict
    min_ess: float | None = None
    inconclusive: bool = False

    def __post_init__(self):
        if not 0 <= self.hits <= self.n_reps:
            raise ValueError("hits must lie in [0, n_reps]")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ConcentrationSummary:
    """Fractions of draws with regular and small merged partitions.

    ``frac_both`` counts draws that are simultaneously n-regular and have at
    most ``K_n`` merged cells.
    """

    frac_regular: float
    frac_small_K: float
    frac_both: float
    K_n: int
    d_n: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ExperimentSetup:
    """Simulation setting shared by the BvM, coverage and concentration runs.

    The design is the regular grid of ``n`` points in ``[0, 1]**p``.
    ``noiseless`` replaces the noise by zeros.
    """

    n: int
    sampler: SamplerConfig
    p: int = 1
    truth_family: str = "lipschitz"
    alpha: float = 1.0
    truth_params: dict = field(default_factory=dict)
    weight_family: str = "one"
    gamma: float = 1.0
    seed: int = 0
    noiseless: bool = False

    def simulate(self, seed=None):
        """``(Dataset, SimulationTruth, FunctionalWeight)`` for noise seed ``seed``."""
        seed = self.seed if seed is None else seed
        x = make_grid_design(self.n, self.p)
        if self.noiseless:
            f0 = truth_values(x, self.truth_family, self.alpha, **self.truth_params)
            truth = SimulationTruth(f0, np.zeros(self.n), self.truth_family.removeprefix("f0_"),
                                    self.alpha, seed, dict(self.truth_params))
            data = Dataset(x, f0.copy())
        else:
            data, truth = generate_responses(x, self.truth_family, self.alpha, seed, **self.truth_params)
        return data, truth, make_weight(x, self.weight_family, self.gamma)


def replication_seeds(seed: int, rep: int):
    """``(noise seed, chain seed)`` for replication ``rep``."""
    s = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(int(rep),)).generate_state(2, dtype=np.uint64)
    return int(s[0] >> np.uint64(1)), int(s[1] >> np.uint64(1))


# ---------------------------------------------------------------------------
# per-draw summaries


class DrawSummarizer:
    """Chain callback computing oracle quantities on every retained draw.

    Stores ``psi_hat_T`` (centering on the draw's merged partition),
    ``merged_K`` and, when requested, the merged partition's diameter and
    ``||f - f0||_L``. Results are cached while the trees stay the same.
    """

    def __init__(self, truth: SimulationTruth | None, weight: FunctionalWeight | None, x,
                 psi_hat: bool = True, regularity: bool = False, error: bool = False):
        if (psi_hat or error) and truth is None:
            raise MissingTruth("oracle summaries need the simulated truth")
        self.truth = truth
        self.weight = weight
        self.x = np.asarray(x, dtype=float)
        self.psi_hat = psi_hat and weight is not None
        self.regularity = regularity
        self.error = error
        self._last = None
        self._cached = {}

    def __call__(self, trees, betas, fitted) -> dict:
        if self._last is None or len(self._last) != len(trees) or any(a is not b for a, b in zip(self._last, trees)):
            self._last = trees
            self._cached = self._structure(trees)
        out = dict(self._cached)
        if self.error:
            out["l2_error"] = empirical_norm(fitted, self.truth.f0_values)
        return out

    def _structure(self, trees) -> dict:
        part = trees[0] if len(trees) == 1 else merge_labels([t.labels for t in trees], self.x)
        out = {"merged_K": int(part.K)}
        if self.psi_hat:
            out["psi_hat_T"] = centering_estimators(part, self.truth, self.weight)[0]
        if self.regularity:
            out["diam"] = diameter(part).total
        return out


def _merged(draw):
    trees = draw.forest.ensemble.trees
    return trees[0] if len(trees) == 1 else draw.forest.ensemble.merged()


# ---------------------------------------------------------------------------
# operations


def centered_draws(draws, truth: SimulationTruth | None, weight: FunctionalWeight, mode: str) -> np.ndarray:
    """``tau = sqrt(n) (Psi(f) - center)`` per draw.

    ``per_partition_psi_hat_T`` centres each draw at ``Psi_hat_T`` of its own
    merged partition, ``global_psi_n`` at ``Psi_n`` and ``posterior_mean`` at
    the mean of the ``Psi`` draws.
    """
    if mode not in CENTERING_MODES:
        raise ConfigInvalid([f"centering_mode: unknown mode {mode!r}"])
    if len(draws) == 0:
        raise TooFewDraws("no draws to centre")
    a = weight.a_values
    n = a.shape[0]
    vals = np.array([d.psi_value if d.psi_value is not None else psi(d.fitted_values, a) for d in draws])
    if mode == "posterior_mean":
        return math.sqrt(n) * (vals - vals.mean())
    if not isinstance(truth, SimulationTruth):
        raise MissingTruth(f"centering mode {mode} needs the simulated truth")
    if mode == "global_psi_n":
        center = psi(truth.f0_values, a) + float(truth.eps @ a) / n
        return math.sqrt(n) * (vals - center)
    centers = np.empty(len(draws))
    for i, d in enumerate(draws):
        if "psi_hat_T" in d.extras:
            centers[i] = d.extras["psi_hat_T"]
        else:
            centers[i] = centering_estimators(_merged(d), truth, weight)[0]
    return math.sqrt(n) * (vals - centers)


def _antideriv_cdf(x, sd):
    """``int_{-inf}^x Phi(t/sd) dt``."""
    z = x / sd
    return x * ndtr(z) + sd * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)


def distance_to_gaussian(tau_draws, V0: float):
    """``(ks, w1)`` between the empirical law of ``tau_draws`` and ``N(0, V0)``.

    The Wasserstein-1 distance ``int |F_emp - Phi|`` is integrated exactly:
    between consecutive order statistics the empirical CDF is flat, and each
    such interval is split where the Gaussian CDF crosses that level.
    """
    z = np.sort(np.asarray(tau_draws, dtype=float))
    m = z.shape[0]
    if m < 100:
        raise TooFewDraws(f"need at least 100 draws, got {m}")
    if not V0 > 0:
        raise ValueError("V0 must be positive")
    sd = math.sqrt(V0)
    F = ndtr(z / sd)
    i = np.arange(1, m + 1)
    ks = float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))
    G = _antideriv_cdf(z, sd)
    w1 = float(G[0] + _antideriv_cdf(-z[-1], sd))
    lo, hi = z[:-1], z[1:]
    h = i[:-1] / m
    cross = np.clip(sd * ndtri(h), lo, hi)
    Gc = _antideriv_cdf(cross, sd)
    below = h * (cross - lo) - (Gc - G[:-1])
    above = (G[1:] - Gc) - h * (hi - cross)
    w1 += float(np.sum(below + above))
    return ks, w1


def lemma1_concentration(draws, alpha: float, n: int, p: int = 1, M: float = 1.0,
                         M_n: float | None = None, M2: float = 1.0) -> ConcentrationSummary:
    """Share of draws with ``diam(T) <= d_n(alpha)`` and with at most ``K_n`` merged cells.

    ``M_n`` defaults to ``sqrt(log n)``; ``K_n = floor(M2 n eps_n**2 / log n)``.
    Draws may carry ``merged_K``/``diam`` extras; otherwise the forest is used.
    """
    if M_n is None:
        M_n = math.sqrt(math.log(n))
    K_n = kn_lemma1(n, alpha, p, M2)
    d_n = threshold_dn(alpha, n, p, M, M_n)
    reg = small = both = 0
    for d in draws:
        if "merged_K" in d.extras and "diam" in d.extras:
            K, dia = d.extras["merged_K"], d.extras["diam"]
        else:
            part = _merged(d)
            K, dia = part.K, diameter(part).total
        r, s = dia <= d_n, K <= K_n
        reg += r
        small += s
        both += r and s
    total = max(len(draws), 1)
    return ConcentrationSummary(reg / total, small / total, both / total, K_n, d_n)


def equal_tailed_interval(values, level: float):
    """Central ``level`` interval of the empirical distribution."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    lo, hi = np.quantile(np.asarray(values, dtype=float), [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def bvm_experiment(setup: ExperimentSetup, centering_mode: str = "per_partition_psi_hat_T",
                   M: float = 1.0, M_n: float | None = None, M2: float = 1.0,
                   regularity: bool = True) -> BvmReport:
    """Simulate one dataset, run the chain and compare the ``tau`` draws with ``N(0, V0)``."""
    data, truth, weight = setup.simulate()
    want_reg = regularity and setup.p == 1
    summarizer = DrawSummarizer(truth, weight, data.x, psi_hat=centering_mode == "per_partition_psi_hat_T",
                                regularity=want_reg)
    draws, diag = run_chain(setup.sampler, data, weight, callback=summarizer, keep="summary")
    tau = centered_draws(draws, truth, weight, centering_mode)
    V0 = float(np.mean(weight.a_values**2))
    ks, w1 = distance_to_gaussian(tau, V0)
    conc = {}
    if want_reg:
        conc = lemma1_concentration(draws, setup.alpha, setup.n, setup.p, M, M_n, M2).to_dict()
    ess = diag.effective_sample_size
    return BvmReport(setup.n, setup.alpha, weight.gamma, V0, tau, ks, w1, centering_mode, conc, ess,
                     bool(ess is None or ess < ESS_GATE), diag.acceptance_rates)


def _coverage_rep(setup: ExperimentSetup, rep: int, level: float, sampler_fn=None):
    noise_seed, chain_seed = replication_seeds(setup.seed, rep)
    data, truth, weight = setup.simulate(noise_seed)
    if sampler_fn is not None:
        values = np.asarray(sampler_fn(data, truth, weight, chain_seed), dtype=float)
        ess = None
    else:
        cfg = dataclasses.replace(setup.sampler, seed=chain_seed)
        draws, diag = run_chain(cfg, data, weight, keep="summary")
        values = np.array([d.psi_value for d in draws])
        ess = diag.effective_sample_size
    lo, hi = equal_tailed_interval(values, level)
    target = psi(truth.f0_values, weight)
    return bool(lo <= target <= hi), hi - lo, ess


def coverage_experiment(setup: ExperimentSetup, nominal_level: float = 0.9, n_reps: int = 200,
                        rng=None, threads: int = 1, sampler_fn=None) -> CoverageResult:
    """Frequentist coverage of the equal-tailed credible interval for ``Psi(f)``.

    Each replication draws fresh noise and runs a fresh chain, with seeds
    derived from ``(seed, rep)`` so the result does not depend on
    ``threads``. When ``rng`` is given, the base seed is drawn from it.
    ``sampler_fn(data, truth, weight, seed)`` may replace the chain and
    return ``Psi`` draws directly.
    """
    if n_reps < 1:
        raise ConfigInvalid(["n_reps: must be at least 1"])
    if not 0 < nominal_level < 1:
        raise ConfigInvalid(["nominal_level: must lie in (0, 1)"])
    if rng is not None:
        setup = dataclasses.replace(setup, seed=int(rng.integers(2**63)))
    args = [(setup, rep, nominal_level, sampler_fn) for rep in range(n_reps)]
    if threads > 1 and sampler_fn is None:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_coverage_rep, *zip(*args)))
    else:
        results = [_coverage_rep(*a) for a in args]
    hits = sum(r[0] for r in results)
    widths = np.array([r[1] for r in results])
    esses = [r[2] for r in results if r[2] is not None]
    min_ess = float(min(esses)) if esses else None
    summary = {
        "mean": float(widths.mean()),
        "median": float(np.median(widths)),
        "min": float(widths.min()),
        "max": float(widths.max()),
    }
    return CoverageResult(nominal_level, n_reps, int(hits), hits / n_reps, summary, min_ess,
                          bool(min_ess is not None and min_ess < ESS_GATE))


def laplace_concentration_check(grid_of_n, setup: ExperimentSetup, n_datasets: int = 1):
    """Posterior mean of ``||f - f0||_L`` and its ratio to ``eps_n`` for each ``n``.

    Returns one dict per ``n`` with keys ``n, mean_error, eps_n, ratio, ess``.
    Errors are averaged over ``n_datasets`` noise replications.
    """
    rows = []
    for n in grid_of_n:
        errs, esses = [], []
        for rep in range(n_datasets):
            noise_seed, chain_seed = replication_seeds(setup.seed + int(n), rep)
            local = dataclasses.replace(setup, n=int(n), sampler=dataclasses.replace(setup.sampler, seed=chain_seed))
            data, truth, weight = local.simulate(noise_seed)
            summarizer = DrawSummarizer(truth, None, data.x, psi_hat=False, error=True)
            draws, _ = run_chain(local.sampler, data, None, callback=summarizer, keep="summary")
            e = np.array([d.extras["l2_error"] for d in draws])
            errs.append(float(e.mean()))
            esses.append(effective_sample_size(e))
        en = eps_n(int(n), setup.alpha, setup.p)
        err = float(np.mean(errs))
        rows.append({"n": int(n), "mean_error": err, "eps_n": en, "ratio": err / en, "ess": float(min(esses))})
    return rows


# ---------------------------------------------------------------------------
# plot data


def write_tau_csv(tau_draws, V0: float, hist_path, qq_path, bins: int = 40) -> None:
    """Histogram (with the ``N(0, V0)`` density) and QQ-against-Gaussian data as CSV."""
    z = np.sort(np.asarray(tau_draws, dtype=float))
    sd = math.sqrt(V0)
    counts, edges = np.histogram(z, bins=bins, density=True)
    mids = 0.5 * (edges[:-1] + edges[1:])
    dens = np.exp(-0.5 * (mids / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
    with open(hist_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "density", "gaussian_density"])
        for row in zip(edges[:-1], edges[1:], counts, dens):
            w.writerow([repr(float(v)) for v in row])
    m = z.shape[0]
    theo = sd * ndtri((np.arange(1, m + 1) - 0.5) / m)
    with open(qq_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gaussian_quantile", "sample_quantile"])
        for row in zip(theo, z):
            w.writerow([repr(float(v)) for v in row])


def write_tau_svg(tau_draws, V0: float, path) -> None:
    """Histogram and QQ panels as a self-contained SVG (needs matplotlib)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    z = np.sort(np.asarray(tau_draws, dtype=float))
    sd = math.sqrt(V0)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.hist(z, bins=40, density=True, color="0.7")
    grid = np.linspace(z[0], z[-1], 200)
    ax1.plot(grid, np.exp(-0.5 * (grid / sd) ** 2) / (sd * math.sqrt(2 * math.pi)), "k-")
    ax1.set_xlabel("tau")
    m = z.shape[0]
    theo = sd * ndtri((np.arange(1, m + 1) - 0.5) / m)
    ax2.plot(theo, z, ".", ms=2)
    ax2.plot(theo, theo, "k-", lw=0.8)
    ax2.set_xlabel("N(0, V0) quantile")
    ax2.set_ylabel("tau quantile")
    fig.tight_layout()
    fig.savefig(Path(path), format="svg", metadata={"Date": None})
    plt.close(fig)
