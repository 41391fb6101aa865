"""Edge-weight measurement: distance, echo latency, HTTP round-trip, synthetic model.

Providers are callables `(src, dst) -> Measurement` for one metric. Live probe
failures never raise; they come back as success=False measurements so scoring
can penalize unreachable endpoints instead of aborting the analysis.
"""

import json
import os
import socket
import statistics
import struct
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Callable

import requests

from .candidates import Metric, Pair
from .geo import (
    LocationTable,
    RegionCatalog,
    build_location_table,
    haversine_km,
    host_of,
    resolve_location,
)
from .workflow import WorkflowSpec, node_locations

PairProvider = Callable[[Pair], "Measurement"]

UNIT_BY_METRIC = {Metric.DISTANCE: "km", Metric.PING: "ms", Metric.HTTP_RTT: "ms"}

_TCP_PROBE_PORTS = (80, 443)


class Aggregator(str, Enum):
    MEAN = "mean"
    MEDIAN = "median"
    MIN = "min"


def aggregate(values: list[float], aggregator: Aggregator) -> float:
    if not values:
        raise ValueError("cannot aggregate zero samples")
    if aggregator is Aggregator.MEAN:
        # clamp: summation rounding may push fmean one ulp past the extremes
        return min(max(statistics.fmean(values), min(values)), max(values))
    if aggregator is Aggregator.MEDIAN:
        return statistics.median(values)
    return min(values)


@dataclass(frozen=True)
class ProbeConfig:
    samples_per_pair: int = 5
    timeout_ms: float = 3000.0
    aggregator: Aggregator = Aggregator.MEAN
    max_parallel_probes: int = 8

    def __post_init__(self):
        if self.samples_per_pair < 1:
            raise ValueError("samples_per_pair must be >= 1")
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if self.max_parallel_probes < 1:
            raise ValueError("max_parallel_probes must be >= 1")


@dataclass(frozen=True)
class Measurement:
    src: str
    dst: str
    metric: Metric
    value: float
    unit: str
    samples: int
    success: bool
    taken_at: float
    note: str = ""

    def __post_init__(self):
        if self.success and self.value < 0:
            raise ValueError("successful measurement value must be >= 0")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


def _failed(pair: Pair, metric: Metric, samples: int, note: str) -> Measurement:
    return Measurement(
        src=pair[0],
        dst=pair[1],
        metric=metric,
        value=0.0,
        unit=UNIT_BY_METRIC[metric],
        samples=max(1, samples),
        success=False,
        taken_at=time.time(),
        note=note,
    )


@dataclass(frozen=True)
class SyntheticNetworkModel:
    """Deterministic stand-in for live probing: latency grows linearly with distance."""

    base_latency_ms: float = 5.0
    ms_per_100km: float = 1.0
    http_overhead_ms: float = 20.0
    jitter: float = 0.0  # reserved; the model must stay deterministic

    def __post_init__(self):
        for name in ("base_latency_ms", "ms_per_100km", "http_overhead_ms"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.jitter != 0:
            raise ValueError("jitter is fixed at 0")

    def ping_ms(self, km: float) -> float:
        return self.base_latency_ms + self.ms_per_100km * (km / 100.0)

    def http_ms(self, km: float) -> float:
        return self.ping_ms(km) + self.http_overhead_ms


class MeasurementStore:
    """TTL cache of measurements keyed by (src, dst, metric).

    Symmetric metrics share one entry per unordered pair via key
    canonicalization. Thread-safe; concurrent misses may probe twice
    (last write wins).
    """

    def __init__(
        self,
        ttl_s: float = 3600.0,
        symmetric_metrics: frozenset[Metric] = frozenset(Metric),
    ):
        if ttl_s <= 0:
            raise ValueError("ttl_s must be positive")
        self.ttl_s = ttl_s
        self.symmetric_metrics = symmetric_metrics
        self._entries: dict[tuple[str, str, str], Measurement] = {}
        self._lock = threading.Lock()

    def canonical_key(self, pair: Pair, metric: Metric) -> tuple[str, str, str]:
        src, dst = pair
        if metric in self.symmetric_metrics and dst < src:
            src, dst = dst, src
        return (src, dst, metric.value)

    def get(self, pair: Pair, metric: Metric, now: float | None = None) -> Measurement | None:
        key = self.canonical_key(pair, metric)
        now = time.time() if now is None else now
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                return None
            if now - entry.taken_at > self.ttl_s:
                del self._entries[key]
                return None
            return entry

    def put(self, measurement: Measurement) -> None:
        key = self.canonical_key((measurement.src, measurement.dst), measurement.metric)
        with self._lock:
            self._entries[key] = measurement

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def save(self, path: str) -> None:
        """One JSON record per key, sorted, so repeated runs reuse probes."""
        with self._lock:
            entries = sorted(self._entries.items())
        lines = []
        for _, m in entries:
            record = asdict(m)
            record["metric"] = m.metric.value
            lines.append(json.dumps(record, sort_keys=True))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))

    @classmethod
    def load(
        cls,
        path: str,
        ttl_s: float = 3600.0,
        symmetric_metrics: frozenset[Metric] = frozenset(Metric),
    ) -> "MeasurementStore":
        """Read a cache file; on duplicate keys the later record wins."""
        store = cls(ttl_s=ttl_s, symmetric_metrics=symmetric_metrics)
        if not os.path.exists(path):
            return store
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                record["metric"] = Metric(record["metric"])
                store.put(Measurement(**record))
        return store


def location_index(spec: WorkflowSpec, catalog: RegionCatalog | None = None) -> LocationTable:
    """Host -> coordinate table over workflow nodes and (optionally) catalog regions."""
    region_entries = (
        ((r.probe_host, r.location) for r in catalog.regions) if catalog else ()
    )
    return build_location_table(node_locations(spec), region_entries)


def measure_distance(pair: Pair, locations: LocationTable) -> Measurement:
    """Great-circle distance between the pair's endpoint coordinates."""
    a = resolve_location(pair[0], locations)
    b = resolve_location(pair[1], locations)
    return Measurement(
        src=pair[0],
        dst=pair[1],
        metric=Metric.DISTANCE,
        value=haversine_km(a, b),
        unit="km",
        samples=1,
        success=True,
        taken_at=time.time(),
        note="haversine",
    )


def synthetic_measure(
    pair: Pair,
    metric: Metric,
    model: SyntheticNetworkModel,
    locations: LocationTable,
) -> Measurement:
    """Deterministic model measurement derived purely from coordinates."""
    a = resolve_location(pair[0], locations)
    b = resolve_location(pair[1], locations)
    km = haversine_km(a, b)
    if metric is Metric.DISTANCE:
        value, unit = km, "km"
    elif metric is Metric.PING:
        value, unit = model.ping_ms(km), "ms"
    else:
        value, unit = model.http_ms(km), "ms"
    return Measurement(
        src=pair[0],
        dst=pair[1],
        metric=metric,
        value=value,
        unit=unit,
        samples=1,
        success=True,
        taken_at=time.time(),
        note="synthetic",
    )


def _icmp_checksum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack("!%dH" % (len(data) // 2), data))
    total = (total >> 16) + (total & 0xFFFF)
    total += total >> 16
    return ~total & 0xFFFF


class EchoProber:
    """Best-effort echo probe: unprivileged ICMP datagram when available,
    otherwise TCP connect time to port 80/443 (an RST reply still measures
    one round trip; only timeouts count as failures)."""

    def __init__(self):
        self._mode: str | None = None
        self._seq = 0
        self._lock = threading.Lock()

    @property
    def mode(self) -> str:
        if self._mode is None:
            self._mode = "icmp" if self._icmp_usable() else "tcp-connect"
        return self._mode

    def _icmp_usable(self) -> bool:
        # capability self-test: one echo against loopback
        return self._icmp_once("127.0.0.1", 0.25) is not None

    def _next_seq(self) -> int:
        with self._lock:
            self._seq = (self._seq + 1) & 0xFFFF
            return self._seq

    def _icmp_once(self, ip: str, timeout_s: float) -> float | None:
        try:
            sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_ICMP)
        except OSError:
            return None
        try:
            sock.settimeout(timeout_s)
            seq = self._next_seq()
            payload = b"cloudforecast-echo"
            header = struct.pack("!BBHHH", 8, 0, 0, 0, seq)
            packet = struct.pack(
                "!BBHHH", 8, 0, _icmp_checksum(header + payload), 0, seq
            ) + payload
            start = time.perf_counter()
            sock.sendto(packet, (ip, 0))
            sock.recvfrom(2048)
            return (time.perf_counter() - start) * 1000.0
        except OSError:
            return None
        finally:
            sock.close()

    def _tcp_once(self, ip: str, timeout_s: float) -> float | None:
        deadline = time.perf_counter() + timeout_s
        for port in _TCP_PROBE_PORTS:
            remaining = deadline - time.perf_counter()
            if remaining <= 0:
                return None
            sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            sock.settimeout(remaining)
            start = time.perf_counter()
            try:
                sock.connect((ip, port))
                return (time.perf_counter() - start) * 1000.0
            except ConnectionRefusedError:
                # RST received: the host answered, so this is a round trip
                return (time.perf_counter() - start) * 1000.0
            except OSError:
                continue
            finally:
                sock.close()
        return None

    def probe(self, host: str, timeout_s: float) -> float | None:
        """One echo round trip in ms, or None on failure."""
        try:
            ip = socket.getaddrinfo(host, None, socket.AF_INET, socket.SOCK_STREAM)[0][4][0]
        except socket.gaierror:
            return None
        if self.mode == "icmp":
            return self._icmp_once(ip, timeout_s)
        return self._tcp_once(ip, timeout_s)


_default_prober = EchoProber()


def measure_latency(
    pair: Pair,
    config: ProbeConfig,
    prober: EchoProber | None = None,
) -> Measurement:
    """Echo-probe the pair's dst; aggregate successful round trips."""
    prober = prober or _default_prober
    host = host_of(pair[1])
    timeout_s = config.timeout_ms / 1000.0
    rtts = []
    for _ in range(config.samples_per_pair):
        rtt = prober.probe(host, timeout_s)
        if rtt is not None:
            rtts.append(rtt)
    if not rtts:
        return _failed(pair, Metric.PING, config.samples_per_pair, f"echo/{prober.mode}")
    return Measurement(
        src=pair[0],
        dst=pair[1],
        metric=Metric.PING,
        value=aggregate(rtts, config.aggregator),
        unit="ms",
        samples=len(rtts),
        success=True,
        taken_at=time.time(),
        note=f"echo/{prober.mode}",
    )


def as_url(endpoint: str) -> str:
    """Default scheme http and path / for bare hostnames."""
    if "://" not in endpoint:
        endpoint = f"http://{endpoint}"
    if endpoint.count("/") == 2:  # scheme://host with no path
        endpoint += "/"
    return endpoint


def measure_http_rtt(pair: Pair, config: ProbeConfig) -> Measurement:
    """Timed GET requests against the pair's dst; any completed response counts."""
    url = as_url(pair[1])
    timeout_s = config.timeout_ms / 1000.0
    rtts = []
    for _ in range(config.samples_per_pair):
        start = time.perf_counter()
        try:
            requests.get(url, timeout=timeout_s)
        except requests.RequestException:
            continue
        rtts.append((time.perf_counter() - start) * 1000.0)
    if not rtts:
        return _failed(pair, Metric.HTTP_RTT, config.samples_per_pair, "http-get")
    return Measurement(
        src=pair[0],
        dst=pair[1],
        metric=Metric.HTTP_RTT,
        value=aggregate(rtts, config.aggregator),
        unit="ms",
        samples=len(rtts),
        success=True,
        taken_at=time.time(),
        note="http-get",
    )


class AgentClient:
    """Client for the remote probe-agent wire protocol."""

    def __init__(self, base_url: str, request_timeout_s: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.request_timeout_s = request_timeout_s

    def _call(self, endpoint: str, params: dict) -> dict:
        response = requests.get(
            f"{self.base_url}{endpoint}", params=params, timeout=self.request_timeout_s
        )
        response.raise_for_status()
        return response.json()

    def health(self) -> bool:
        try:
            return bool(self._call("/v1/health", {}).get("ok"))
        except requests.RequestException:
            return False

    def ping(self, host: str, samples: int, timeout_ms: float) -> dict:
        return self._call(
            "/v1/ping", {"host": host, "samples": samples, "timeout_ms": int(timeout_ms)}
        )

    def http(self, url: str, samples: int, timeout_ms: float) -> dict:
        return self._call(
            "/v1/http", {"url": url, "samples": samples, "timeout_ms": int(timeout_ms)}
        )


def get_or_measure(
    store: MeasurementStore,
    pair: Pair,
    metric: Metric,
    provider: PairProvider,
) -> Measurement:
    """Return the unexpired cached measurement or invoke the provider and cache it."""
    cached = store.get(pair, metric)
    if cached is not None:
        return cached
    measurement = provider(pair)
    if measurement.metric is not metric:
        raise ValueError(
            f"provider returned {measurement.metric.value}, expected {metric.value}"
        )
    store.put(measurement)
    return measurement


def collect_measurements(
    store: MeasurementStore,
    pairs: list[Pair],
    metric: Metric,
    provider: PairProvider,
    max_parallel: int = 1,
) -> dict[Pair, Measurement]:
    """Measure (or fetch from cache) every pair, optionally fanning out probes."""
    if max_parallel <= 1 or len(pairs) <= 1:
        return {pair: get_or_measure(store, pair, metric, provider) for pair in pairs}
    with ThreadPoolExecutor(max_workers=min(max_parallel, len(pairs))) as pool:
        futures = {
            pair: pool.submit(get_or_measure, store, pair, metric, provider) for pair in pairs
        }
        return {pair: future.result() for pair, future in futures.items()}


def synthetic_providers(
    model: SyntheticNetworkModel,
    locations: LocationTable,
) -> dict[Metric, PairProvider]:
    return {
        metric: (lambda pair, m=metric: synthetic_measure(pair, m, model, locations))
        for metric in Metric
    }


def local_providers(
    config: ProbeConfig,
    locations: LocationTable,
    prober: EchoProber | None = None,
) -> dict[Metric, PairProvider]:
    """Probe each pair's dst from the analysis machine (vantage approximation)."""
    prober = prober or EchoProber()
    return {
        Metric.DISTANCE: lambda pair: measure_distance(pair, locations),
        Metric.PING: lambda pair: measure_latency(pair, config, prober),
        Metric.HTTP_RTT: lambda pair: measure_http_rtt(pair, config),
    }


def agent_providers(
    catalog: RegionCatalog,
    config: ProbeConfig,
    locations: LocationTable,
    agent_port: int = 9001,
    agent_scheme: str = "http",
) -> dict[Metric, PairProvider]:
    """Ask the probe agent at the pair's region side to measure the other side."""
    region_hosts = {region.probe_host for region in catalog.regions}
    request_timeout_s = (config.samples_per_pair * config.timeout_ms) / 1000.0 + 10.0

    def split(pair: Pair) -> tuple[str, str] | None:
        if pair[0] in region_hosts:
            return pair[0], pair[1]
        if pair[1] in region_hosts:
            return pair[1], pair[0]
        return None

    def agent_for(region_host: str) -> AgentClient:
        # probe_host may carry a port for probing; the agent has its own port
        return AgentClient(
            f"{agent_scheme}://{host_of(region_host)}:{agent_port}", request_timeout_s
        )

    def from_reply(pair: Pair, metric: Metric, reply: dict, note: str) -> Measurement:
        rtts = [float(v) for v in reply.get("rtts_ms", [])]
        if not reply.get("ok") or not rtts:
            return _failed(pair, metric, config.samples_per_pair, note)
        return Measurement(
            src=pair[0],
            dst=pair[1],
            metric=metric,
            value=aggregate(rtts, config.aggregator),
            unit="ms",
            samples=len(rtts),
            success=True,
            taken_at=time.time(),
            note=note,
        )

    def ping(pair: Pair) -> Measurement:
        sides = split(pair)
        if sides is None:
            return _failed(pair, Metric.PING, config.samples_per_pair, "agent/no-region-side")
        region_host, target = sides
        try:
            reply = agent_for(region_host).ping(
                host_of(target), config.samples_per_pair, config.timeout_ms
            )
        except (requests.RequestException, ValueError):
            return _failed(pair, Metric.PING, config.samples_per_pair, "agent/unreachable")
        return from_reply(pair, Metric.PING, reply, "agent/ping")

    def http_rtt(pair: Pair) -> Measurement:
        sides = split(pair)
        if sides is None:
            return _failed(pair, Metric.HTTP_RTT, config.samples_per_pair, "agent/no-region-side")
        region_host, target = sides
        try:
            reply = agent_for(region_host).http(
                as_url(target), config.samples_per_pair, config.timeout_ms
            )
        except (requests.RequestException, ValueError):
            return _failed(pair, Metric.HTTP_RTT, config.samples_per_pair, "agent/unreachable")
        return from_reply(pair, Metric.HTTP_RTT, reply, "agent/http")

    return {
        Metric.DISTANCE: lambda pair: measure_distance(pair, locations),
        Metric.PING: ping,
        Metric.HTTP_RTT: http_rtt,
    }
