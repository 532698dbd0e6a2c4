"""Throughput models for placed feature-computation units.

Two models share one configuration and one report type:

* ``simulate_analytic`` -- steady-state bottleneck arithmetic.  A stage's
  service time is its compute cycles plus the cycles to pull its input
  payload over the link; one unit sustains one Gaussian per
  max-service-time cycles.
* ``simulate_event`` -- integer-cycle timing of every Gaussian through every
  kernel with bounded edge buffers.  A kernel starts an item once all inputs
  have arrived and it has released the previous item; it releases an item
  once every output buffer has a free slot.  This is the exact recurrence
  of a cycle-stepped machine, evaluated per event instead of per cycle.

Throughput is always measured against input bytes (236 per Gaussian).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .arch import (
    METHODS,
    ContentionModel,
    InterfaceSpec,
    KernelCostProfile,
    MeshConfig,
    PlioSpec,
    method_interface,
    method_profile,
    transfer_cycles,
)
from .errors import ConfigurationError
from .kernels.types import RECORD_BYTES
from .mapper import SINK, SOURCE, Placement, build_task_graph, place


@dataclass(frozen=True)
class SimConfig:
    profile: KernelCostProfile
    mesh: MeshConfig = field(default_factory=MeshConfig)
    iface: InterfaceSpec = field(default_factory=InterfaceSpec)
    plio: PlioSpec = field(default_factory=PlioSpec)
    contention: ContentionModel = field(default_factory=ContentionModel)
    n_gaussians: int = 100
    n_units: int = 1
    mode: str = "analytic"
    seed: int = 0
    method: str = ""
    transfer: bool = True
    jitter: bool = False
    pipelined: bool = True

    def __post_init__(self):
        if self.n_gaussians < 1:
            raise ConfigurationError("n_gaussians must be >= 1")
        if self.n_units < 1:
            raise ConfigurationError("n_units must be >= 1")
        if self.mode not in ("analytic", "event"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")


def method_config(
    method: str,
    n_units: int = 1,
    *,
    profile_source: str = "calibrated",
    fifo_depth: int | None = None,
    external_cap: float | None = None,
    **kwargs,
) -> SimConfig:
    """A :class:`SimConfig` with the profile and link type of ``method``."""
    plio = PlioSpec(external_cap_bytes_per_sec=external_cap)
    return SimConfig(
        profile=method_profile(method, profile_source),
        iface=method_interface(method, fifo_depth),
        plio=plio,
        n_units=n_units,
        method=method,
        **kwargs,
    )


def placement_for(cfg: SimConfig) -> Placement:
    graph = build_task_graph(cfg.profile.partitioned)
    return place(graph, cfg.n_units, cfg.mesh)


@dataclass
class KernelStats:
    avg: float
    min: int
    max: int
    busy_cycles: int = 0
    stall_cycles: int = 0
    transfer_cycles: int = 0


@dataclass
class SimReport:
    method: str
    mode: str
    interface: str
    profile_source: str
    n_units: int
    n_gaussians: int
    clock_hz: float
    total_cycles: float
    throughput_bytes_per_sec: float
    bottleneck_kernel: str
    effective_parallel_efficiency: float
    contention_factor: float
    cap_bytes_per_sec: float
    kernels: dict
    profile: dict
    bytes_per_gaussian: int = RECORD_BYTES

    @property
    def throughput_mb_per_sec(self) -> float:
        return self.throughput_bytes_per_sec / 1e6

    def recomputed_throughput(self) -> float:
        return self.n_gaussians * self.bytes_per_gaussian * self.clock_hz / self.total_cycles

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["throughput_mb_per_sec"] = self.throughput_mb_per_sec
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        """One row per kernel followed by a summary row."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for name, k in self.kernels.items():
            p = self.profile[name]
            w.writerow(
                [
                    self.method, self.mode, self.n_units, name,
                    p["avg"], p["min"], p["max"],
                    _fmt(k["avg"]), k["min"], k["max"],
                    k["busy_cycles"], k["stall_cycles"], "", "",
                ]
            )
        w.writerow(
            [
                self.method, self.mode, self.n_units, "SUMMARY",
                "", "", "", "", "", "", "", "",
                _fmt(self.total_cycles), _fmt(self.throughput_mb_per_sec),
            ]
        )
        return buf.getvalue()


CSV_COLUMNS = (
    "method", "mode", "n_units", "kernel",
    "profile_avg", "profile_min", "profile_max",
    "cycles_avg", "cycles_min", "cycles_max",
    "busy_cycles", "stall_cycles", "total_cycles", "throughput_mb_s",
)


def _fmt(x: float) -> str:
    return f"{x:.6f}".rstrip("0").rstrip(".") if isinstance(x, float) else str(x)


def _check(cfg: SimConfig, placement: Placement) -> None:
    if placement.n_units != cfg.n_units:
        raise ConfigurationError(
            f"placement has {placement.n_units} units but the config asks for {cfg.n_units}"
        )
    if set(placement.graph.kernel_names) != set(cfg.profile.kernels):
        raise ConfigurationError("placement graph and cost profile name different kernels")


def stage_transfer(cfg: SimConfig, placement: Placement) -> dict:
    """Input-link cycles per kernel (zero when transfers are switched off)."""
    g = placement.graph
    if not cfg.transfer:
        return {k: 0 for k in g.kernel_names}
    return {k: transfer_cycles(g.input_bytes(k), cfg.iface) for k in g.kernel_names}


def throughput_cap(cfg: SimConfig, placement: Placement) -> float:
    """Largest input byte rate the PLIO ports (and any external cap) admit."""
    out_ratio = placement.graph.sink_bytes / RECORD_BYTES
    caps = [cfg.plio.pl_to_aie_bytes_per_sec, cfg.plio.aie_to_pl_bytes_per_sec / out_ratio]
    if cfg.plio.external_cap_bytes_per_sec is not None:
        caps.append(cfg.plio.external_cap_bytes_per_sec)
    return min(caps)


def _single_unit_cycles(service: dict, pipelined: bool) -> int:
    return max(service.values()) if pipelined else sum(service.values())


def _profile_dict(profile: KernelCostProfile) -> dict:
    return {k: {"avg": c.avg, "min": c.min, "max": c.max} for k, c in profile.costs.items()}


def simulate_analytic(cfg: SimConfig, placement: Placement) -> SimReport:
    _check(cfg, placement)
    order = placement.graph.topological_order()
    xfer = stage_transfer(cfg, placement)
    service = {k: cfg.profile[k].avg + xfer[k] for k in order}
    per_gaussian = _single_unit_cycles(service, cfg.pipelined)
    clock = cfg.mesh.clock_hz
    single = RECORD_BYTES * clock / per_gaussian
    factor = cfg.contention.factor(cfg.n_units)
    cap = throughput_cap(cfg, placement)
    throughput = min(cfg.n_units * single * factor, cap)
    total = cfg.n_gaussians * RECORD_BYTES * clock / throughput
    # cycles between consecutive Gaussians entering one unit
    period = cfg.n_units * RECORD_BYTES * clock / throughput
    kernels = {}
    for k in order:
        c = cfg.profile[k]
        stall = cfg.n_gaussians * (period - service[k]) if cfg.pipelined else 0.0
        kernels[k] = asdict(
            KernelStats(
                avg=float(service[k]),
                min=c.min + xfer[k],
                max=c.max + xfer[k],
                busy_cycles=cfg.n_gaussians * service[k],
                stall_cycles=int(round(max(stall, 0.0))),
                transfer_cycles=xfer[k],
            )
        )
    return SimReport(
        method=cfg.method or cfg.profile.name,
        mode="analytic",
        interface=cfg.iface.kind,
        profile_source=cfg.profile.source,
        n_units=cfg.n_units,
        n_gaussians=cfg.n_gaussians,
        clock_hz=clock,
        total_cycles=total,
        throughput_bytes_per_sec=throughput,
        bottleneck_kernel=max(order, key=lambda k: service[k]),
        effective_parallel_efficiency=throughput / (cfg.n_units * single),
        contention_factor=factor,
        cap_bytes_per_sec=cap,
        kernels=kernels,
        profile=_profile_dict(cfg.profile),
    )


def _release_times(n: int, cap: float, clock: float) -> np.ndarray:
    """Cycle at which Gaussian ``i`` has fully entered through the capped input."""
    interval = RECORD_BYTES * clock / cap
    return np.floor(np.arange(n) * interval).astype(np.int64)


@dataclass
class _UnitTrace:
    total: int
    cycles: dict
    busy: dict
    stall: dict


def _simulate_unit(
    cfg: SimConfig,
    placement: Placement,
    releases: np.ndarray,
    xfer: dict,
    extra_fraction: float,
    rng: np.random.Generator | None,
) -> _UnitTrace:
    g = placement.graph
    order = g.topological_order()
    idx = {k: j for j, k in enumerate(order)}
    preds = [[idx[p] for p in g.predecessors(k)] for k in order]
    fed = [any(e.src == SOURCE for e in g.in_edges(k)) for k in order]
    succs = [[idx[s] for s in g.successors(k)] for k in order]
    sinks = [idx[e.src] for e in g.in_edges(SINK)]
    costs = [cfg.profile[k] for k in order]
    xf = [xfer[k] for k in order]
    depth = cfg.iface.fifo_depth
    stream = cfg.iface.kind == "stream"
    n, K = len(releases), len(order)

    S = np.zeros((n, K), dtype=np.int64)
    F = np.zeros((n, K), dtype=np.int64)
    D = np.zeros((n, K), dtype=np.int64)
    occupancy = [[] for _ in range(K)]
    busy = [0] * K
    stall = [0] * K
    prev_D = [0] * K
    for i in range(n):
        r = int(releases[i])
        for j in range(K):
            ready = r if fed[j] else 0
            for p in preds[j]:
                if D[i, p] > ready:
                    ready = D[i, p]
            start = max(ready, prev_D[j]) if i else ready
            c = costs[j]
            if rng is not None and c.min != c.max:
                compute = int(rng.integers(c.min, c.max + 1))
            else:
                compute = c.avg
            service = compute + xf[j]
            extra = math.ceil(service * extra_fraction) if extra_fraction else 0
            finish = start + service + extra
            depart = finish
            if i >= depth:
                for s in succs[j]:
                    # slot of item i - depth frees once the consumer is done reading it
                    freed = S[i - depth, s] + xf[s] if stream else F[i - depth, s]
                    if freed > depart:
                        depart = freed
            S[i, j], F[i, j], D[i, j] = start, finish, depart
            prev_D[j] = depart
            busy[j] += service
            stall[j] += extra + (depart - finish)
            occupancy[j].append(int(depart - start) if stream else int(finish - start))
    total = int(max(D[n - 1, j] for j in sinks)) if n else 0
    return _UnitTrace(
        total=total,
        cycles={order[j]: occupancy[j] for j in range(K)},
        busy={order[j]: busy[j] for j in range(K)},
        stall={order[j]: stall[j] for j in range(K)},
    )


def simulate_event(cfg: SimConfig, placement: Placement) -> SimReport:
    """Per-Gaussian timing of every unit; Gaussians are dealt to units round-robin."""
    _check(cfg, placement)
    order = placement.graph.topological_order()
    xfer = stage_transfer(cfg, placement)
    clock = cfg.mesh.clock_hz
    cap = throughput_cap(cfg, placement)
    releases = _release_times(cfg.n_gaussians, cap, clock)
    factor = cfg.contention.factor(cfg.n_units)
    extra_fraction = 1.0 / factor - 1.0

    total = 0
    cycles = {k: [] for k in order}
    busy = {k: 0 for k in order}
    stall = {k: 0 for k in order}
    for unit in range(cfg.n_units):
        mine = releases[unit :: cfg.n_units]
        if mine.size == 0:
            continue
        rng = np.random.default_rng([cfg.seed, unit]) if cfg.jitter else None
        if cfg.pipelined:
            trace = _simulate_unit(cfg, placement, mine, xfer, extra_fraction, rng)
        else:
            trace = _simulate_sequential(cfg, order, mine, xfer, extra_fraction, rng)
        total = max(total, trace.total)
        for k in order:
            cycles[k].extend(trace.cycles[k])
            busy[k] += trace.busy[k]
            stall[k] += trace.stall[k]

    service = {k: cfg.profile[k].avg + xfer[k] for k in order}
    single = RECORD_BYTES * clock / _single_unit_cycles(service, cfg.pipelined)
    throughput = cfg.n_gaussians * RECORD_BYTES * clock / total
    kernels = {
        k: asdict(
            KernelStats(
                avg=float(np.mean(cycles[k])),
                min=int(min(cycles[k])),
                max=int(max(cycles[k])),
                busy_cycles=int(busy[k]),
                stall_cycles=int(stall[k]),
                transfer_cycles=xfer[k],
            )
        )
        for k in order
    }
    return SimReport(
        method=cfg.method or cfg.profile.name,
        mode="event",
        interface=cfg.iface.kind,
        profile_source=cfg.profile.source,
        n_units=cfg.n_units,
        n_gaussians=cfg.n_gaussians,
        clock_hz=clock,
        total_cycles=float(total),
        throughput_bytes_per_sec=throughput,
        bottleneck_kernel=max(order, key=lambda k: service[k]),
        effective_parallel_efficiency=throughput / (cfg.n_units * single),
        contention_factor=factor,
        cap_bytes_per_sec=cap,
        kernels=kernels,
        profile=_profile_dict(cfg.profile),
    )


def _simulate_sequential(cfg, order, releases, xfer, extra_fraction, rng) -> _UnitTrace:
    """All kernels of a unit run back to back for one Gaussian before the next starts."""
    t = 0
    cycles = {k: [] for k in order}
    busy = {k: 0 for k in order}
    stall = {k: 0 for k in order}
    for r in releases:
        t = max(t, int(r))
        for k in order:
            c = cfg.profile[k]
            compute = int(rng.integers(c.min, c.max + 1)) if rng is not None and c.min != c.max else c.avg
            service = compute + xfer[k]
            extra = math.ceil(service * extra_fraction) if extra_fraction else 0
            t += service + extra
            cycles[k].append(service)
            busy[k] += service
            stall[k] += extra
    return _UnitTrace(t, cycles, busy, stall)


def simulate(cfg: SimConfig, placement: Placement | None = None) -> SimReport:
    placement = placement or placement_for(cfg)
    if cfg.mode == "event":
        return simulate_event(cfg, placement)
    return simulate_analytic(cfg, placement)


@dataclass
class SweepRow:
    method: str
    n_units: int
    report: SimReport
    speedup_vs_naive1: float

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n_units": self.n_units,
            "mode": self.report.mode,
            "throughput_mb_per_sec": self.report.throughput_mb_per_sec,
            "speedup_vs_naive1": self.speedup_vs_naive1,
            "bottleneck_kernel": self.report.bottleneck_kernel,
            "effective_parallel_efficiency": self.report.effective_parallel_efficiency,
        }


DEFAULT_GRID = (("naive", (1,)), ("stream", (1,)), ("window", (1, 4, 8, 25, 50)))


def sweep(
    grid=DEFAULT_GRID,
    *,
    mode: str = "analytic",
    baseline: SimReport | None = None,
    **config_kwargs,
) -> list:
    """Simulate every ``(method, unit count)`` cell and attach speedup over naive-1.

    ``config_kwargs`` are passed to :func:`method_config` for every cell;
    the naive single-unit baseline uses the same settings.
    """
    if baseline is None:
        baseline = simulate(method_config("naive", 1, mode=mode, **config_kwargs))
    rows = []
    for method, unit_counts in grid:
        if method not in METHODS:
            raise ConfigurationError(f"unknown method {method!r}")
        for n in unit_counts:
            report = simulate(method_config(method, n, mode=mode, **config_kwargs))
            rows.append(
                SweepRow(method, n, report, report.throughput_bytes_per_sec / baseline.throughput_bytes_per_sec)
            )
    return rows


def fit_excess_stall_fraction(
    target_speedup: float = 226.0,
    n_units: int = 50,
    *,
    profile_source: str = "calibrated",
    saturation_units: int = 25,
) -> float:
    """Stall fraction that makes window-``n_units`` reach ``target_speedup`` over naive-1.

    Closed form: the analytic model's throughput is linear in the contention
    factor, so one uncontended run fixes the required factor.
    """
    if n_units <= saturation_units:
        raise ConfigurationError("calibration point must lie beyond saturation")
    free = ContentionModel(saturation_units, 0.0)
    naive = simulate(method_config("naive", 1, profile_source=profile_source, contention=free))
    window = simulate(method_config("window", n_units, profile_source=profile_source, contention=free))
    uncontended = window.throughput_bytes_per_sec / naive.throughput_bytes_per_sec
    factor = target_speedup / uncontended
    if factor > 1.0:
        raise ConfigurationError(
            f"target {target_speedup} exceeds the uncontended speedup {uncontended:.1f}"
        )
    return (1.0 / factor - 1.0) / (n_units - saturation_units)


def with_overrides(cfg: SimConfig, **kwargs) -> SimConfig:
    return replace(cfg, **kwargs)
