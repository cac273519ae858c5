"""Random communication topologies and mean connectivity.

Convergence needs the *mean* Laplacian to have a spectral gap, not any
individual sample.  The starkest case is single-edge gossip: every
sampled graph is disconnected, yet the averaged topology is connected.
"""

import numpy as np

from adle.cli import example1_graph
from adle.network import (
    TopologyModel,
    fiedler_value,
    laplacian_of,
    mean_laplacian,
    sample_laplacian,
    validate_mean_connectivity,
)

pentagon = example1_graph()
print("pentagon edges:", pentagon.edges)
print("pentagon Laplacian:\n", laplacian_of(pentagon).astype(int))
print("pentagon Fiedler value:", round(fiedler_value(laplacian_of(pentagon)), 4))

for law, kwargs in (("static", {}), ("bernoulli", {"p": 0.5}), ("gossip", {})):
    top = TopologyModel(pentagon, law, **kwargs)
    value = validate_mean_connectivity(top)
    print(f"\n{law:>9}: Fiedler value of the mean Laplacian = {value:.4f}")
    rng = np.random.default_rng(7)
    sampled = [fiedler_value(sample_laplacian(top, rng)) for _ in range(200)]
    connected = sum(v > 1e-10 for v in sampled)
    print(f"           {connected}/200 sampled graphs connected")

# the gossip mean is exact, not an estimate
top = TopologyModel(pentagon, "gossip")
rng = np.random.default_rng(1)
empirical = sum(sample_laplacian(top, rng) for _ in range(20_000)) / 20_000
print("\ngossip: max |empirical mean - exact mean| over 20k draws:",
      f"{np.abs(empirical - mean_laplacian(top)).max():.4f}")
