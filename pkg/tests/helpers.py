"""Independent oracles and small utilities shared by the test modules.

Everything here is deliberately implemented differently from the package so
that tests cross-check rather than mirror the production code paths.
"""

import itertools
import math

from cloudforecast import Coordinate, Metric, WorkflowSpec
from cloudforecast.candidates import Pair
from cloudforecast.measurement import Measurement

EARTH_RADIUS_KM = 6371.0


def slc_km(a: Coordinate, b: Coordinate) -> float:
    """Spherical law of cosines distance (oracle for the haversine implementation)."""
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dl = math.radians(b.lon - a.lon)
    cosine = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return EARTH_RADIUS_KM * math.acos(max(-1.0, min(1.0, cosine)))


def all_topological_orders(node_ids: list[str], edges: list[tuple[str, str]]) -> list[list[str]]:
    """Brute-force enumeration of every topological order (small graphs only)."""
    orders = []
    for perm in itertools.permutations(node_ids):
        position = {nid: i for i, nid in enumerate(perm)}
        if all(position[u] < position[v] for u, v in edges):
            orders.append(list(perm))
    return orders


def longest_path_ms(spec: WorkflowSpec) -> float:
    """Independent critical-path service-time sum via path enumeration."""
    service = {n.id: n.service_time_ms for n in spec.nodes}
    children: dict[str, list[str]] = {n.id: [] for n in spec.nodes}
    for e in spec.edges:
        children[e.src].append(e.dst)

    def best_from(nid: str) -> float:
        if not children[nid]:
            return service[nid]
        return service[nid] + max(best_from(c) for c in children[nid])

    return max((best_from(n.id) for n in spec.nodes), default=0.0)


def fixed_value_provider(
    metric: Metric,
    values: dict[Pair, float],
    failures: set[Pair] | None = None,
    call_log: list | None = None,
):
    """Provider that serves prescribed per-pair values (unknown pairs fail)."""
    failures = failures or set()
    unit = "km" if metric is Metric.DISTANCE else "ms"

    def provider(pair: Pair) -> Measurement:
        if call_log is not None:
            call_log.append((pair, metric))
        ok = pair in values and pair not in failures
        return Measurement(
            src=pair[0],
            dst=pair[1],
            metric=metric,
            value=values.get(pair, 0.0) if ok else 0.0,
            unit=unit,
            samples=1,
            success=ok,
            taken_at=1.0e9,
            note="fixture",
        )

    return provider


def per_region_edge_providers(catalog, edge_values: dict[str, dict[Metric, float]]):
    """Providers where every candidate edge of region R under metric M weighs
    edge_values[R][M]; lets tests dial exact per-region scores."""
    by_host = {r.probe_host: r.id for r in catalog.regions}

    def make(metric: Metric):
        def provider(pair: Pair) -> Measurement:
            region_id = by_host.get(pair[0]) or by_host.get(pair[1])
            value = edge_values[region_id][metric]
            return Measurement(
                src=pair[0],
                dst=pair[1],
                metric=metric,
                value=value,
                unit="km" if metric is Metric.DISTANCE else "ms",
                samples=1,
                success=True,
                taken_at=1.0e9,
                note="fixture",
            )

        return provider

    return {metric: make(metric) for metric in Metric}


def average_ranks(values: list[float]) -> list[float]:
    """Ranks 1..n with ties sharing their average rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(xs: list[float], ys: list[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    rx, ry = average_ranks(xs), average_ranks(ys)
    n = len(rx)
    mx, my = sum(rx) / n, sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = math.sqrt(sum((a - mx) ** 2 for a in rx))
    vy = math.sqrt(sum((b - my) ** 2 for b in ry))
    if vx == 0 or vy == 0:
        return 1.0 if rx == ry else 0.0
    return cov / (vx * vy)
