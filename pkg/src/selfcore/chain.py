"""Run every per-chain analysis stage on an ordered list of normalized traces."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .coactivation import (
    DEFAULT_TAU,
    NeuronOrdering,
    SimilarityMatrix,
    SubnetworkPartition,
    block_layout,
    coactivation_matrix,
    connected_components,
    threshold_graph,
)
from .matching import FamilySet, build_families
from .persistence import PersistenceRecord, SubnetworkStats, aggregate_by_subnetwork, persistence_scores
from .traces import NormalizedTrace


@dataclass
class ChainFamilies:
    """Threshold-independent part of a chain analysis (matrices, families, scores)."""

    traces: list[NormalizedTrace]
    sims: list[SimilarityMatrix]
    families: FamilySet
    records: list[PersistenceRecord]


@dataclass
class ChainResult:
    base: ChainFamilies
    tau: float
    membership: int
    partitions: list[SubnetworkPartition]
    orderings: list[NeuronOrdering]
    stats: SubnetworkStats

    @property
    def traces(self):
        return self.base.traces

    @property
    def families(self):
        return self.base.families

    @property
    def records(self):
        return self.base.records


def prepare_chain(traces: Sequence[NormalizedTrace]) -> ChainFamilies:
    traces = list(traces)
    sims = [coactivation_matrix(t) for t in traces]
    families = build_families(traces)
    records = persistence_scores(families, traces)
    return ChainFamilies(traces=traces, sims=sims, families=families, records=records)


def partition_chain(prepared: ChainFamilies, tau: float = DEFAULT_TAU, membership: int = -1) -> ChainResult:
    partitions, orderings = [], []
    for sim in prepared.sims:
        graph = threshold_graph(sim, tau)
        part = connected_components(graph)
        partitions.append(part)
        orderings.append(block_layout(part, graph))
    anchor = prepared.traces[membership].base
    stats = aggregate_by_subnetwork(
        prepared.records, partitions[membership], membership, layer=anchor.layer, cycle=anchor.cycle
    )
    return ChainResult(prepared, tau, membership, partitions, orderings, stats)


def analyze_chain(traces: Sequence[NormalizedTrace], tau: float = DEFAULT_TAU, membership: int = -1) -> ChainResult:
    return partition_chain(prepare_chain(traces), tau, membership)
