"""Coordinate-descent weight fit on a 1-D toy problem.

Two sensors hold different Gaussian-mixture parameterizations whose PHDs
disagree.  The fit revises only the component weights of each sensor so
that its PHD approaches the arithmetic average, and this script prints the
ISD to the average after every iteration so you can watch the consensus
form (and see the learning rate fade).
"""

import numpy as np

from rfsfuse.filters import FilterState
from rfsfuse.fusion import build_cross_terms, build_snapshot, fit_objective, sweep, uniform_config
from rfsfuse.gm import GaussianMixture

# sensor 1 sees two targets clearly; sensor 2 found a spurious third peak
# and underweights the second target
gm_a = GaussianMixture([0.9, 0.8], [[-2.0], [3.0]], [[[1.0]], [[1.5]]])
gm_b = GaussianMixture([0.8, 0.3, 0.5], [[-2.2], [2.8], [7.0]], [[[1.2]], [[1.4]], [[1.0]]])

states = [FilterState("phd", gm_a), FilterState("phd", gm_b)]
config = uniform_config(2, alpha1=0.4, beta=0.6, t_max=6, conv_threshold=0.0)

snapshot = build_snapshot(states)
table = build_cross_terms(snapshot)
frozen = [u.gm.weights.copy() for u in snapshot.unified]
fitted = [w.copy() for w in frozen]

print("initial weights:")
for i, w in enumerate(fitted):
    print(f"  sensor {i}: {np.round(w, 4)}")

alpha = config.alpha1
for t in range(1, config.t_max + 1):
    line = [f"t={t} alpha={alpha:.3f}"]
    for i in range(2):
        current = list(frozen)
        current[i] = fitted[i]
        fitted[i] = sweep(snapshot, i, config, table, t, alpha, current)
        current[i] = fitted[i]
        isd = fit_objective(snapshot, i, current, config, table)
        line.append(f"ISD_{i}={isd:.3e}")
    print("  ".join(line))
    alpha *= config.beta

print("fitted weights:")
for i, w in enumerate(fitted):
    print(f"  sensor {i}: {np.round(w, 4)}")
print("note: the spurious peak at x=7 is driven toward the weight floor,")
print("while means, covariances, and component counts never change")
