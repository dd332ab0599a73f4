"""Mixing matrices, spectral gaps and what they cost in gossip rounds."""

# %%
import numpy as np

from dosm.network import (
    build_lazy_metropolis,
    chebyshev_gossip_step,
    consensus_error,
    gossip_step,
    make_topology,
    spectral,
)
from dosm.seeding import Streams

rng = Streams(0).rng("net")

# %% Spectral profile of a few topologies
for spec in ({"kind": "path", "n": 3}, {"kind": "ring", "n": 8}, {"kind": "star", "n": 8}, {"kind": "complete", "n": 8}):
    A = build_lazy_metropolis(make_topology(spec, rng))
    p = spectral(A)
    print(f"{spec['kind']:>8} n={p.n}: sigma2={p.sigma2:.4f} rho={p.rho:.4f} C={p.C} theta={p.theta:.4f}")

# %% Plain vs accelerated gossip on a 16-node ring
A = build_lazy_metropolis(make_topology({"kind": "ring", "n": 16}))
p = spectral(A)
X0 = rng.standard_normal((16, 4))
plain, z_prev, z = X0.copy(), X0.copy(), X0.copy()
for k in range(1, 41):
    plain = gossip_step(A, plain)
    z, z_prev = chebyshev_gossip_step(A, p.theta, z, z_prev), z
    if k % 10 == 0:
        print(f"k={k:2d} plain={consensus_error(plain).max:.2e} accelerated={consensus_error(z).max:.2e}")

# the network average never moves
print(np.allclose(plain.mean(axis=0), X0.mean(axis=0)), np.allclose(z.mean(axis=0), X0.mean(axis=0)))
