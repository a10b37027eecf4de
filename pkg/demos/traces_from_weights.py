"""
From network weights to activation traces
=========================================

Activation traces can come from files or straight from MLP weights and a
shared set of reference states. Here a small random MLP is perturbed to make a
second checkpoint, both see the same states, and the units are aligned.
"""

import numpy as np

from selfcore.matching import match_traces
from selfcore.traces import DenseLayer, MlpWeights, mlp_forward_collect, sample_reference_states, zscore_normalize

rng = np.random.default_rng(0)
dims = [12, 32, 32, 4]
layers = [DenseLayer(rng.standard_normal((o, i)) / np.sqrt(i), np.zeros(o), "elu") for i, o in zip(dims, dims[1:])]
before = MlpWeights(dims[0], layers)

# shuffle hidden layer 1 and nudge every weight
perm = rng.permutation(32)
l0, l1, l2 = layers
after = MlpWeights(dims[0], [
    DenseLayer(l0.w[perm] + 0.05 * rng.standard_normal(l0.w.shape), l0.b[perm], "elu"),
    DenseLayer(l1.w[:, perm] + 0.05 * rng.standard_normal(l1.w.shape), l1.b, "elu"),
    l2,
])

pools = [rng.standard_normal((400, 12)) for _ in range(3)]
refs = sample_reference_states(pools, T=300, seed=1)

a = mlp_forward_collect(before, refs, checkpoint_id="before")
b = mlp_forward_collect(after, refs, checkpoint_id="after")
print("recorded hidden layers:", [t.layer for t in a])

m = match_traces(zscore_normalize(a[0]), zscore_normalize(b[0]))
found = np.array([m.perm[i] for i in range(32)])
print("units of layer 1 re-identified:", int((perm[found] == np.arange(32)).sum()), "/ 32")
