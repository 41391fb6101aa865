"""Scoring of candidate graphs, distance shortlisting, and the ranked region report."""

import csv
import io
import json
import time
from dataclasses import dataclass, field
from typing import Mapping

from .candidates import (
    CandidateGraph,
    Metric,
    Pair,
    build_candidate_graph,
    measurement_pairs,
)
from .errors import MissingMeasurementError
from .geo import RegionCatalog
from .measurement import (
    Measurement,
    MeasurementStore,
    PairProvider,
    collect_measurements,
)
from .workflow import WorkflowSpec

DEFAULT_FAILURE_PENALTY = 1.0e8


@dataclass(frozen=True)
class GraphScore:
    region: str
    metric: Metric
    value: float
    failed_edges: int = 0


@dataclass(frozen=True)
class ScoringConfig:
    shortlist_n: int | None = None  # None = whole catalog
    weight_ping: float = 1.0
    weight_http: float = 1.0
    failure_penalty: float = DEFAULT_FAILURE_PENALTY

    def __post_init__(self):
        if self.shortlist_n is not None and self.shortlist_n < 1:
            raise ValueError("shortlist_n must be >= 1")
        if self.weight_ping < 0 or self.weight_http < 0:
            raise ValueError("metric weights must be non-negative")
        if self.weight_ping + self.weight_http <= 0:
            raise ValueError("weight_ping + weight_http must be positive")
        if self.failure_penalty < 0:
            raise ValueError("failure_penalty must be non-negative")


@dataclass(frozen=True)
class RankingEntry:
    region: str
    final_score: float
    shortlisted: bool
    rank: int
    distance_score: GraphScore | None = None
    ping_score: GraphScore | None = None
    http_score: GraphScore | None = None


@dataclass(frozen=True)
class RankingReport:
    workflow: str
    entries: tuple[RankingEntry, ...]
    config: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    generated_at: float | None = None


def score_graph(
    graph: CandidateGraph,
    measurements: Mapping[Pair, Measurement],
    failure_penalty: float = DEFAULT_FAILURE_PENALTY,
) -> GraphScore:
    """Sum edge weights over the candidate graph; failed edges cost the penalty."""
    total = 0.0
    failed = 0
    for edge in graph.edges:
        measurement = measurements.get(edge.pair)
        if measurement is None:
            raise MissingMeasurementError(
                f"no measurement for pair {edge.src} -> {edge.dst} ({graph.metric.value})"
            )
        if measurement.success:
            total += measurement.value
        else:
            total += failure_penalty
            failed += 1
    return GraphScore(region=graph.region.id, metric=graph.metric, value=total, failed_edges=failed)


def shortlist_by_distance(
    distance_scores: list[GraphScore],
    n: int,
) -> tuple[list[str], list[str]]:
    """The n distance-smallest region ids, then the rest, both in distance order."""
    if n < 1:
        raise ValueError("shortlist size must be >= 1")
    ordered = sorted(distance_scores, key=lambda s: (s.value, s.region))
    ids = [s.region for s in ordered]
    return ids[:n], ids[n:]


def final_score(ping: GraphScore, http: GraphScore, config: ScoringConfig) -> float:
    """Weighted combination of the ping and HTTP sums (penalties already folded in)."""
    if ping.region != http.region:
        raise ValueError(f"region mismatch: {ping.region} vs {http.region}")
    return config.weight_ping * ping.value + config.weight_http * http.value


def rank_regions(
    spec: WorkflowSpec,
    catalog: RegionCatalog,
    store: MeasurementStore,
    providers: Mapping[Metric, PairProvider],
    config: ScoringConfig,
    max_parallel: int = 1,
) -> RankingReport:
    """Distance-shortlist, then score shortlisted regions by ping+HTTP.

    The providers mapping decides which metrics are evaluated; distance is
    mandatory because shortlisting is built on it. Non-shortlisted regions
    are ranked after shortlisted ones by their distance score.
    """
    if Metric.DISTANCE not in providers:
        raise ValueError("a distance provider is required for shortlisting")

    def scored(metric: Metric, region_ids: list[str]) -> dict[str, GraphScore]:
        scores = {}
        for region_id in region_ids:
            graph = build_candidate_graph(spec, catalog.by_id(region_id), metric)
            measured = collect_measurements(
                store, measurement_pairs(graph), metric, providers[metric], max_parallel
            )
            scores[region_id] = score_graph(graph, measured, config.failure_penalty)
        return scores

    all_ids = catalog.ids
    distance_scores = scored(Metric.DISTANCE, all_ids)
    n = len(all_ids) if config.shortlist_n is None else min(config.shortlist_n, len(all_ids))
    shortlisted_ids, remainder_ids = shortlist_by_distance(list(distance_scores.values()), n)

    ping_scores = (
        scored(Metric.PING, shortlisted_ids) if Metric.PING in providers else {}
    )
    http_scores = (
        scored(Metric.HTTP_RTT, shortlisted_ids) if Metric.HTTP_RTT in providers else {}
    )

    def combined(region_id: str) -> float:
        ping = ping_scores.get(region_id)
        http = http_scores.get(region_id)
        if ping is not None and http is not None:
            return final_score(ping, http, config)
        if ping is not None:
            return config.weight_ping * ping.value
        if http is not None:
            return config.weight_http * http.value
        return distance_scores[region_id].value  # distance-only analysis

    ranked: list[tuple[bool, float, str]] = [
        (True, combined(region_id), region_id) for region_id in shortlisted_ids
    ] + [
        (False, distance_scores[region_id].value, region_id) for region_id in remainder_ids
    ]
    ranked.sort(key=lambda row: (not row[0], row[1], row[2]))

    entries = tuple(
        RankingEntry(
            region=region_id,
            final_score=score,
            shortlisted=shortlisted,
            rank=i + 1,
            distance_score=distance_scores[region_id],
            ping_score=ping_scores.get(region_id),
            http_score=http_scores.get(region_id),
        )
        for i, (shortlisted, score, region_id) in enumerate(ranked)
    )

    measured = [distance_scores, ping_scores, http_scores]
    provenance = {
        "graphs_scored": sum(len(scores) for scores in measured),
        "failed_edges": sum(s.failed_edges for scores in measured for s in scores.values()),
        "metrics": sorted(m.value for m in providers),
        "cache_entries": len(store),
    }
    config_echo = {
        "shortlist_n": config.shortlist_n,
        "weight_ping": config.weight_ping,
        "weight_http": config.weight_http,
        "failure_penalty": config.failure_penalty,
    }
    return RankingReport(
        workflow=spec.name,
        entries=entries,
        config=config_echo,
        provenance=provenance,
        generated_at=time.time(),
    )


def _score_to_json(score: GraphScore | None) -> dict | None:
    if score is None:
        return None
    return {
        "region": score.region,
        "metric": score.metric.value,
        "value": score.value,
        "failed_edges": score.failed_edges,
    }


def _score_from_json(data: dict | None) -> GraphScore | None:
    if data is None:
        return None
    return GraphScore(
        region=data["region"],
        metric=Metric(data["metric"]),
        value=data["value"],
        failed_edges=data["failed_edges"],
    )


def report_to_json(report: RankingReport) -> str:
    doc = {
        "workflow": report.workflow,
        "config": report.config,
        "provenance": report.provenance,
        "generated_at": report.generated_at,
        "entries": [
            {
                "rank": e.rank,
                "region": e.region,
                "final_score": e.final_score,
                "shortlisted": e.shortlisted,
                "distance_score": _score_to_json(e.distance_score),
                "ping_score": _score_to_json(e.ping_score),
                "http_score": _score_to_json(e.http_score),
            }
            for e in report.entries
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def report_from_json(text: str) -> RankingReport:
    doc = json.loads(text)
    entries = tuple(
        RankingEntry(
            region=e["region"],
            final_score=e["final_score"],
            shortlisted=e["shortlisted"],
            rank=e["rank"],
            distance_score=_score_from_json(e["distance_score"]),
            ping_score=_score_from_json(e["ping_score"]),
            http_score=_score_from_json(e["http_score"]),
        )
        for e in doc["entries"]
    )
    return RankingReport(
        workflow=doc["workflow"],
        entries=entries,
        config=doc["config"],
        provenance=doc["provenance"],
        generated_at=doc["generated_at"],
    )


def render_report(report: RankingReport, format: str = "table") -> str:
    """Render as `table` (rank/region/final_score/shortlisted), `json`, or `csv`."""
    if format == "json":
        return report_to_json(report)
    if format == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(
            [
                "rank",
                "region",
                "final_score",
                "shortlisted",
                "distance_km",
                "ping_ms",
                "http_ms",
                "failed_edges",
            ]
        )
        for e in report.entries:
            failed = sum(
                s.failed_edges for s in (e.distance_score, e.ping_score, e.http_score) if s
            )
            writer.writerow(
                [
                    e.rank,
                    e.region,
                    f"{e.final_score:.3f}",
                    str(e.shortlisted).lower(),
                    "" if e.distance_score is None else f"{e.distance_score.value:.3f}",
                    "" if e.ping_score is None else f"{e.ping_score.value:.3f}",
                    "" if e.http_score is None else f"{e.http_score.value:.3f}",
                    failed,
                ]
            )
        return out.getvalue()
    if format != "table":
        raise ValueError(f"unknown report format: {format!r}")

    header = ("rank", "region", "final_score", "shortlisted")
    rows = [
        (str(e.rank), e.region, f"{e.final_score:.3f}", str(e.shortlisted).lower())
        for e in report.entries
    ]
    widths = [max(len(col), *(len(row[i]) for row in rows)) if rows else len(col)
              for i, col in enumerate(header)]
    lines = [f"workflow: {report.workflow}"]
    lines.append("  ".join(col.ljust(widths[i]) for i, col in enumerate(header)).rstrip())
    lines.append("  ".join("-" * widths[i] for i in range(len(header))))
    for row in rows:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(header))).rstrip())
    return "\n".join(lines) + "\n"
