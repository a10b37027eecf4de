"""Activation traces, MLP weights and reference-state sampling.

An :class:`ActivationTrace` holds the hidden-unit activations of one layer of
one checkpoint, evaluated on a shared set of ``T`` reference states. Rows are
neurons, columns are states.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, NonFiniteValue, PoolTooSmall

BEHAVIORS = ("walk", "wiggle", "bob")
DEFAULT_DEAD_STD = 1e-6


@dataclass
class ActivationTrace:
    checkpoint_id: str
    run_id: str
    cycle: int
    behavior: str
    layer: int
    values: np.ndarray
    # not stored in .actv files; only compared when both sides set it
    reference_id: str | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DimensionMismatch(f"trace values must be 2-D, got shape {self.values.shape}")
        H, T = self.values.shape
        if H < 1 or T < 2:
            raise DimensionMismatch(f"need H > 0 and T > 1, got H={H}, T={T}")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteValue(f"trace {self.checkpoint_id!r} contains non-finite activations")
        if self.cycle < 0 or self.layer < 0:
            raise ValueError("cycle and layer must be non-negative")

    @property
    def H(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]


@dataclass
class NormalizedTrace:
    """Per-row z-scored trace. Dead rows are kept (as zeros) so indices stay stable."""

    base: ActivationTrace
    values: np.ndarray
    alive_mask: np.ndarray

    @property
    def H(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    @property
    def alive(self) -> np.ndarray:
        """Indices of alive units, ascending."""
        return np.flatnonzero(self.alive_mask)

    @property
    def n_alive(self) -> int:
        return int(self.alive_mask.sum())

    @property
    def checkpoint_id(self) -> str:
        return self.base.checkpoint_id


@dataclass
class DenseLayer:
    w: np.ndarray  # out x in
    b: np.ndarray
    act: str = "relu"

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.act not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.act!r}")
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[0],):
            raise DimensionMismatch("bias length must equal weight rows")


@dataclass
class MlpWeights:
    input_dim: int
    layers: list[DenseLayer]

    def __post_init__(self):
        fan_in = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.w.shape[1] != fan_in:
                raise DimensionMismatch(
                    f"layer {i} expects {layer.w.shape[1]} inputs, previous layer gives {fan_in}"
                )
            if not (np.all(np.isfinite(layer.w)) and np.all(np.isfinite(layer.b))):
                raise NonFiniteValue(f"layer {i} has non-finite parameters")
            fan_in = layer.w.shape[0]


@dataclass
class ReferenceSet:
    states: np.ndarray  # T x D
    source_ids: list[str] = field(default_factory=list)
    reference_id: str | None = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim != 2 or self.states.shape[0] < 2:
            raise DimensionMismatch("reference set needs a T x D matrix with T > 1")
        if not np.all(np.isfinite(self.states)):
            raise NonFiniteValue("reference states contain non-finite values")

    @property
    def T(self) -> int:
        return self.states.shape[0]

    @property
    def D(self) -> int:
        return self.states.shape[1]


def _elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


ACTIVATIONS = {
    "relu": lambda x: np.maximum(x, 0.0),
    "tanh": np.tanh,
    "elu": _elu,
}


def zscore_normalize(trace, dead_std_threshold: float = DEFAULT_DEAD_STD) -> NormalizedTrace:
    """Z-score every row with the population standard deviation.

    Rows whose raw std falls below ``dead_std_threshold`` are zeroed and marked
    dead. Passing an already normalized trace normalizes its values again, which
    leaves alive rows unchanged up to rounding.
    """
    if dead_std_threshold <= 0:
        raise ValueError("dead_std_threshold must be positive")
    if isinstance(trace, NormalizedTrace):
        base = trace.base
        x = trace.values
        prior_alive = trace.alive_mask
    else:
        base = trace
        x = trace.values
        prior_alive = np.ones(x.shape[0], dtype=bool)

    mean = x.mean(axis=1, keepdims=True)
    centered = x - mean
    std = np.sqrt(np.mean(centered**2, axis=1))
    alive = (std >= dead_std_threshold) & prior_alive
    out = np.zeros_like(x)
    out[alive] = centered[alive] / std[alive, None]
    # second centering pass removes the O(eps) residual mean left by the division
    out[alive] -= out[alive].mean(axis=1, keepdims=True)
    return NormalizedTrace(base=base, values=out, alive_mask=alive)


def mlp_forward_collect(
    weights: MlpWeights,
    refs: ReferenceSet,
    *,
    checkpoint_id: str = "",
    run_id: str = "",
    cycle: int = 0,
    behavior: str = "other",
) -> list[ActivationTrace]:
    """Forward the reference states and record each hidden layer's post-nonlinearity output.

    The last layer of ``weights`` is treated as the output layer and is not recorded.
    """
    if refs.D != weights.input_dim:
        raise DimensionMismatch(f"reference states have D={refs.D}, network expects {weights.input_dim}")
    h = refs.states
    traces = []
    for idx, layer in enumerate(weights.layers[:-1]):
        h = ACTIVATIONS[layer.act](h @ layer.w.T + layer.b)
        traces.append(
            ActivationTrace(
                checkpoint_id=checkpoint_id,
                run_id=run_id,
                cycle=cycle,
                behavior=behavior,
                layer=idx + 1,
                values=h.T.copy(),
                reference_id=refs.reference_id,
            )
        )
    return traces


def sample_reference_states(pools: Sequence[np.ndarray], T: int, seed: int) -> ReferenceSet:
    """Uniformly sample ``T`` states without replacement from the concatenated pools."""
    pools = [np.atleast_2d(np.asarray(p, dtype=np.float64)) for p in pools]
    if not pools:
        raise PoolTooSmall("no pools given")
    dims = {p.shape[1] for p in pools}
    if len(dims) != 1:
        raise DimensionMismatch(f"pools disagree on state dimension: {sorted(dims)}")
    stacked = np.concatenate(pools, axis=0)
    if stacked.shape[0] < T:
        raise PoolTooSmall(f"pooled {stacked.shape[0]} states, need {T}")
    ids = [f"pool{i}:{r}" for i, p in enumerate(pools) for r in range(p.shape[0])]
    rng = np.random.default_rng(seed)
    pick = rng.choice(stacked.shape[0], size=T, replace=False)
    states = stacked[pick]
    return ReferenceSet(
        states=states,
        source_ids=[ids[k] for k in pick],
        reference_id=hashlib.sha1(states.tobytes()).hexdigest()[:16],
    )
