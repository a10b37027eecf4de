"""Planted-structure activation chains and brute-force oracles.

Each module ``m`` owns a latent direction ``z_m``; a neuron in that module has
the unit-norm activation ``sqrt(w) z_m + sqrt(1-w) e_i`` with private noise
``e_i``, so two neurons of the same module have cosine close to ``w``
(``within_corr``). Latents share a common direction ``g`` with weight chosen so
that neurons of different modules have cosine close to ``cross_corr``. All
latent directions are exactly orthonormal and noise vectors are projected off
them, which keeps realised similarities within a few ``1/sqrt(T)`` noise units
of the targets.

Between consecutive checkpoints, stable modules keep their vectors, while the
latent and noise vectors of plastic modules are blended with fresh ones:
``sqrt(1-f) old + sqrt(f) new`` for ``f = plastic_noise``. Units are then
shuffled by a random permutation, which the ground truth records.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .coactivation import StrengthGraph, _sort_groups, cosine_matrix
from .errors import InfeasibleSpec, TooLarge
from .traces import ActivationTrace, NormalizedTrace, zscore_normalize

LEVEL_TOL = 0.03
BEHAVIOR_CYCLE = ("walk", "wiggle", "bob")


@dataclass
class PlantedSpec:
    H: int = 150
    T: int = 1000
    module_sizes: tuple[int, ...] = (80, 40, 30)
    within_corr: float = 0.95
    cross_corr: float = 0.10
    stable_modules: tuple[int, ...] = (0,)
    plastic_noise: float = 1.0
    chain_length: int = 3
    permute: bool = True
    n_dead: int = 0
    seed: int = 0
    run_id: str = "planted"
    layer: int = 1
    first_cycle: int = 0

    def validate(self):
        sizes = list(self.module_sizes)
        if any(s < 1 for s in sizes):
            raise InfeasibleSpec("module sizes must be positive")
        if sum(sizes) + self.n_dead > self.H:
            raise InfeasibleSpec(f"modules ({sum(sizes)}) plus dead units ({self.n_dead}) exceed H={self.H}")
        if not (0.0 <= self.cross_corr < self.within_corr <= 1.0):
            raise InfeasibleSpec("need 0 <= cross_corr < within_corr <= 1")
        if not (0.0 <= self.plastic_noise <= 1.0):
            raise InfeasibleSpec("plastic_noise must lie in [0, 1]")
        if self.chain_length < 1 or self.T < 2:
            raise InfeasibleSpec("chain_length >= 1 and T >= 2 required")
        if any(m < 0 or m >= len(sizes) for m in self.stable_modules):
            raise InfeasibleSpec("stable_modules refers to a missing module")
        # realised levels must resolve: the two tolerance bands may not overlap and
        # pairwise noise (about (1 - within)/sqrt(T) per pair) must fit in one band
        if self.within_corr - self.cross_corr <= 2 * LEVEL_TOL:
            raise InfeasibleSpec("within_corr and cross_corr closer than the realisation tolerance")
        if 4.0 * (1.0 - self.within_corr) / math.sqrt(self.T) > LEVEL_TOL:
            raise InfeasibleSpec(f"T={self.T} too small to realise within_corr={self.within_corr}")
        if self._n_latent() >= self.T - 1:
            raise InfeasibleSpec(f"T={self.T} too small for {self._n_latent()} latent directions")

    def _n_latent(self) -> int:
        K = len(self.module_sizes)
        n_plastic = K - len(set(self.stable_modules))
        return 1 + K + n_plastic * max(self.chain_length - 1, 0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["module_sizes"] = list(self.module_sizes)
        d["stable_modules"] = list(self.stable_modules)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlantedSpec":
        d = dict(d)
        for key in ("module_sizes", "stable_modules"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class PlantedChain:
    spec: PlantedSpec
    raw: list[ActivationTrace]
    traces: list[NormalizedTrace]
    # module id per unit at each checkpoint: -1 free singleton, -2 dead
    modules: list[np.ndarray]
    # permutations[c][i] = unit at checkpoint c+1 carrying unit i of checkpoint c
    permutations: list[np.ndarray] = field(default_factory=list)

    def partition(self, c: int = -1) -> list[list[int]]:
        """Ground-truth subnetworks at checkpoint ``c`` (free units as singletons)."""
        lab = self.modules[c]
        groups = [np.flatnonzero(lab == m).tolist() for m in range(len(self.spec.module_sizes))]
        groups += [[int(u)] for u in np.flatnonzero(lab == -1)]
        return _sort_groups(groups)

    def stable_units(self, c: int = -1) -> list[int]:
        lab = self.modules[c]
        return sorted(int(u) for u in np.flatnonzero(np.isin(lab, list(self.spec.stable_modules))))

    def composed_permutation(self, start: int = 0, stop: int = -1) -> np.ndarray:
        stop = stop % len(self.traces)
        out = np.arange(self.spec.H)
        for c in range(start, stop):
            out = self.permutations[c][out]
        return out

    def ground_truth(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "checkpoints": [t.checkpoint_id for t in self.raw],
            "partitions": [self.partition(c) for c in range(len(self.raw))],
            "stable_units": [self.stable_units(c) for c in range(len(self.raw))],
            "permutations": [p.tolist() for p in self.permutations],
        }


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def planted_traces(spec: PlantedSpec) -> PlantedChain:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    H, T = spec.H, spec.T
    sizes = list(spec.module_sizes)
    K = len(sizes)
    stable = set(spec.stable_modules)

    basis = rng.standard_normal((T, spec._n_latent()))
    basis -= basis.mean(axis=0)
    basis, _ = np.linalg.qr(basis)
    basis = basis.T  # rows: orthonormal, zero-mean directions
    next_dir = iter(range(1 + K, basis.shape[0]))

    def fresh_noise():
        e = rng.standard_normal(T)
        e -= e.mean()
        e -= basis.T @ (basis @ e)
        return _unit(e)

    w = spec.within_corr
    rho = spec.cross_corr / w  # latent-latent correlation
    a, b = math.sqrt(w), math.sqrt(1.0 - w)
    g = basis[0]
    private = [basis[1 + m].copy() for m in range(K)]

    # logical neuron layout before any shuffling: modules, then free units, then dead units
    module_of = np.full(H, -1, dtype=int)
    start = 0
    for m, s in enumerate(sizes):
        module_of[start : start + s] = m
        start += s
    n_free = H - sum(sizes) - spec.n_dead
    module_of[start + n_free :] = -2
    noise = [fresh_noise() if module_of[i] != -2 else None for i in range(H)]
    scale = rng.uniform(0.5, 2.0, H)
    offset = rng.uniform(-1.0, 1.0, H)

    position = np.arange(H)  # logical neuron -> unit index at current checkpoint
    raw, traces, modules, perms = [], [], [], []
    for c in range(spec.chain_length):
        if c > 0:
            f = spec.plastic_noise
            if f > 0:
                for m in range(K):
                    if m not in stable:
                        private[m] = math.sqrt(1 - f) * private[m] + math.sqrt(f) * basis[next(next_dir)]
                for i in range(H):
                    if module_of[i] == -2 or module_of[i] in stable:
                        continue
                    noise[i] = _unit(math.sqrt(1 - f) * noise[i] + math.sqrt(f) * fresh_noise())
            pi = rng.permutation(H) if spec.permute else np.arange(H)
            perms.append(pi)
            position = pi[position]

        latents = [math.sqrt(rho) * g + math.sqrt(1 - rho) * private[m] for m in range(K)]
        vals = np.empty((H, T))
        lab = np.empty(H, dtype=int)
        for i in range(H):
            m = module_of[i]
            if m == -2:
                x = np.zeros(T)
            elif m == -1:
                x = noise[i]
            else:
                x = a * latents[m] + b * noise[i]
            vals[position[i]] = scale[i] * math.sqrt(T) * x + offset[i]
            lab[position[i]] = m
        cycle = spec.first_cycle + c // 3
        trace = ActivationTrace(
            checkpoint_id=f"{spec.run_id}-L{spec.layer}-c{c:03d}",
            run_id=spec.run_id,
            cycle=cycle,
            behavior=BEHAVIOR_CYCLE[c % 3],
            layer=spec.layer,
            values=vals,
            reference_id=f"planted-{spec.seed}",
        )
        raw.append(trace)
        traces.append(zscore_normalize(trace))
        modules.append(lab)
    return PlantedChain(spec=spec, raw=raw, traces=traces, modules=modules, permutations=perms)


def realized_levels(chain: PlantedChain, c: int = 0) -> tuple[float, float]:
    """(smallest within-module |cos|, largest cross-module |cos|) at checkpoint ``c``."""
    lab = chain.modules[c]
    inmod = lab >= 0
    R = np.abs(cosine_matrix(chain.traces[c].values[inmod]))
    l = lab[inmod]
    same = l[:, None] == l[None, :]
    np.fill_diagonal(same, False)
    diff = l[:, None] != l[None, :]
    lo = float(R[same].min()) if same.any() else float("nan")
    hi = float(R[diff].max()) if diff.any() else float("nan")
    return lo, hi


def brute_force_assignment(sim: np.ndarray):
    """Exhaustive maximum over all permutations (first maximum in lexicographic order)."""
    sim = np.asarray(sim, dtype=np.float64)
    n = sim.shape[0]
    if sim.shape != (n, n):
        raise ValueError("brute force needs a square matrix")
    if n > 9:
        raise TooLarge(f"n={n} exceeds the 9x9 enumeration limit")
    best, best_val = None, -math.inf
    for p in itertools.permutations(range(n)):
        val = math.fsum(sim[i, p[i]] for i in range(n))
        if val > best_val:
            best, best_val = p, val
    return list(best), best_val


def brute_force_components(adjacency, n_max: int = 64) -> list[list[int]]:
    """Connected components by repeated boolean squaring of the reachability matrix.

    Accepts a dense boolean matrix or a :class:`StrengthGraph` (dead units skipped).
    """
    alive = None
    if isinstance(adjacency, StrengthGraph):
        alive = adjacency.alive_mask
        adjacency = adjacency.adjacency.toarray()
    A = np.asarray(adjacency, dtype=bool)
    n = A.shape[0]
    if n > n_max:
        raise TooLarge(f"n={n} exceeds {n_max}")
    reach = A | A.T | np.eye(n, dtype=bool)
    while True:
        nxt = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    keep = np.ones(n, dtype=bool) if alive is None else alive
    groups = {tuple(np.flatnonzero(reach[i] & keep)) for i in range(n) if keep[i]}
    return _sort_groups(groups)
