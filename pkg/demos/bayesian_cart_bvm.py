"""
Bernstein-von Mises for a single Bayesian CART tree
===================================================

Simulate y = f0(x) + noise with f0(x) = sin(2 pi x)/2, sample single-tree
posteriors by Metropolis-Hastings, and look at the centred and scaled
functional draws tau = sqrt(n) (Psi(f) - Psi_hat_T) for the weight a(x) = x.
Their law should be close to N(0, ||a||^2).
"""

# %%
import numpy as np

from treebvm.bvm import DrawSummarizer, ExperimentSetup, centered_draws, distance_to_gaussian, equal_tailed_interval
from treebvm.mcmc import SamplerConfig, run_chain
from treebvm.priors import GaltonWatsonPrior, GaussianLeafPrior

# %%
config = SamplerConfig(GaltonWatsonPrior(), GaussianLeafPrior(), iterations=30_000, burn_in=3_000, seed=1)
setup = ExperimentSetup(n=1024, sampler=config, weight_family="linear", seed=2)
data, truth, weight = setup.simulate()

# %%
# The callback stores the centring Psi_hat_T of each draw's own partition.
draws, diag = run_chain(config, data, weight, callback=DrawSummarizer(truth, weight, data.x), keep="summary")
print("acceptance:", {k: round(v, 3) for k, v in diag.acceptance_rates.items()})
print("leaf counts:", diag.leaf_count_summary)
print("ESS of Psi:", round(diag.effective_sample_size))

# %%
tau = centered_draws(draws, truth, weight, "per_partition_psi_hat_T")
V0 = float(np.mean(weight.a_values**2))
ks, w1 = distance_to_gaussian(tau, V0)
print(f"V0={V0:.4f}  mean(tau)={tau.mean():+.4f}  var(tau)={tau.var():.4f}")
print(f"KS={ks:.4f}  W1={w1:.4f}")

# %%
# A 90% credible interval for Psi(f), next to the true value.
psi_draws = np.array([d.psi_value for d in draws])
lo, hi = equal_tailed_interval(psi_draws, 0.9)
print(f"interval [{lo:.4f}, {hi:.4f}], truth {np.mean(weight.a_values * truth.f0_values):.4f}")

# %%
# Optional figure (needs matplotlib).
try:
    from treebvm.bvm import write_tau_svg

    write_tau_svg(tau, V0, "tau_cart.svg")
    print("wrote tau_cart.svg")
except ImportError:
    pass
