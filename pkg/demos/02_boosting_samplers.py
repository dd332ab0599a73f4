"""The boosting samplers and the surrogate gradient they estimate."""

# %%
import numpy as np

from dosm.evaluation import ks_statistic
from dosm.rewards import (
    Z_cdf,
    Zprime_cdf,
    boosted_grad_nonmonotone,
    grad_F_numeric,
    make_sequence,
    sample_Z,
    sample_Zprime,
)

rng = np.random.default_rng(1)

# %% Both samplers against their closed-form CDFs
z = sample_Z(rng, 100_000)
zp = sample_Zprime(rng, 100_000)
print(f"KS(Z)={ks_statistic(z, Z_cdf):.4f} KS(Z')={ks_statistic(zp, Zprime_cdf):.4f}")

# %% One stochastic surrogate gradient vs quadrature
f = make_sequence(seed=2, T=1, n=1, d=3).local(0, 0)
x_hat = np.array([0.2, 0.5, 0.1])
x_inf = np.zeros(3)
draws = np.array([boosted_grad_nonmonotone(f, x_hat, x_inf, sample_Z(rng), rng) for _ in range(20_000)])
print("MC mean   ", draws.mean(axis=0).round(4))
print("quadrature", grad_F_numeric(f, x_hat, "nonmonotone", x_inf).round(4))
