"""Watching the innovation gains being learned online.

No agent knows any noise covariance.  Each keeps a running sample
covariance of its own observations and a consensus-learned estimate of
the network Grammian; together they produce gains that converge to the
optimal fusion weights a centralized designer would have chosen.
"""

import numpy as np

from adle.cli import example1_graph, example1_model
from adle.estimator import initial_network_state, step
from adle.model import validate_observation_model
from adle.network import TopologyModel
from adle.schedule import WeightSchedule

model = example1_model()
summary = validate_observation_model(model)
top = TopologyModel(example1_graph(), "bernoulli", 0.5)
schedule = WeightSchedule(b=0.5)

optimal_norm = max(np.linalg.norm(k) for k in summary.optimal_gains)
print(f"largest optimal gain norm: {optimal_norm:.3f}")
print(f"{'step':>7} {'max err':>9} {'disagree':>9} {'gain gap':>9} {'grammian gap':>13}")

rng = np.random.default_rng(3)
net = initial_network_state(model)
marks = {10, 100, 1_000, 10_000, 50_000}
for t in range(50_000):
    _, diag = step(net, model, top, schedule, rng, want_diagnostics=(t + 1) in marks)
    if diag is not None:
        print(f"{t + 1:>7} {diag.error_norms.max():>9.4f} {diag.disagreement:>9.5f} "
              f"{diag.gain_gap:>9.4f} {diag.grammian_gap:>13.4f}")

from adle.estimator import network_gains

learned = network_gains(net, model, schedule).gains[0][:, 0]
print("\nlearned gain of agent 0: ", np.round(learned, 3))
print("optimal gain of agent 0: ", np.round(summary.optimal_gains[0][:, 0], 3))
