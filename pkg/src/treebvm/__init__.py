"""Bayesian regression trees with semiparametric Bernstein-von Mises diagnostics."""

__version__ = "0.1.0"

from . import approx, bvm, config, dataset, errors, mcmc, partition, priors  # noqa: E402

__all__ = ["approx", "bvm", "config", "dataset", "errors", "mcmc", "partition", "priors", "__version__"]
