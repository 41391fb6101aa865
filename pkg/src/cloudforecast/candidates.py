"""Expansion of workflows into per-(region, metric) candidate graphs.

Every data-flow edge (u, v) is split into two legs routed through the
candidate region's orchestrator: u -> region and region -> v, so each
candidate graph is a star around the region.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .geo import Region, RegionCatalog
from .workflow import WorkflowEdge, WorkflowSpec

Pair = tuple[str, str]


class Metric(str, Enum):
    DISTANCE = "distance"
    PING = "ping"
    HTTP_RTT = "http_rtt"


METRIC_ORDER: tuple[Metric, ...] = (Metric.DISTANCE, Metric.PING, Metric.HTTP_RTT)


class Leg(str, Enum):
    TO_ORCHESTRATOR = "to_orchestrator"
    FROM_ORCHESTRATOR = "from_orchestrator"


@dataclass(frozen=True)
class CandidateEdge:
    src: str
    dst: str
    origin: WorkflowEdge
    leg: Leg

    @property
    def pair(self) -> Pair:
        return (self.src, self.dst)


@dataclass(frozen=True)
class CandidateGraph:
    region: Region
    metric: Metric
    edges: tuple[CandidateEdge, ...]


def build_candidate_graph(spec: WorkflowSpec, region: Region, metric: Metric) -> CandidateGraph:
    """Route every workflow edge through the region's orchestrator."""
    hub = region.probe_host
    endpoint = {node.id: node.endpoint for node in spec.nodes}
    edges = []
    for origin in spec.edges:
        edges.append(CandidateEdge(endpoint[origin.src], hub, origin, Leg.TO_ORCHESTRATOR))
        edges.append(CandidateEdge(hub, endpoint[origin.dst], origin, Leg.FROM_ORCHESTRATOR))
    return CandidateGraph(region=region, metric=metric, edges=tuple(edges))


def enumerate_candidates(
    spec: WorkflowSpec,
    catalog: RegionCatalog,
    metrics: Sequence[Metric],
) -> list[CandidateGraph]:
    """One candidate graph per (region, metric), in catalog then metric order."""
    if not metrics:
        raise ValueError("metrics must be non-empty")
    seen = set()
    for metric in metrics:
        if metric in seen:
            raise ValueError(f"duplicate metric: {metric.value}")
        seen.add(metric)
    ordered = [m for m in METRIC_ORDER if m in seen]
    return [
        build_candidate_graph(spec, region, metric)
        for region in catalog.regions
        for metric in ordered
    ]


def measurement_pairs(graph: CandidateGraph) -> list[Pair]:
    """Unique ordered endpoint pairs covering every candidate edge (first-seen order)."""
    pairs: list[Pair] = []
    seen: set[Pair] = set()
    for edge in graph.edges:
        if edge.pair not in seen:
            seen.add(edge.pair)
            pairs.append(edge.pair)
    return pairs


def dump_graph(graph: CandidateGraph) -> str:
    """Debug edge-list dump, one `src -> dst [leg, origin]` record per line."""
    lines = [f"# region={graph.region.id} metric={graph.metric.value}"]
    for edge in graph.edges:
        lines.append(
            f"{edge.src} -> {edge.dst} [{edge.leg.value}, {edge.origin.src}->{edge.origin.dst}]"
        )
    return "\n".join(lines) + "\n"
