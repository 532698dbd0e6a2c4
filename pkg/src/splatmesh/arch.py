"""Tile-mesh architecture description and per-kernel cycle cost profiles.

Defaults describe the VCK190 AI Engine array: an 8 x 50 mesh of VLIW/SIMD
tiles at 1.25 GHz with 32 KB data memory each, window (shared local
memory) and stream (32-bit FIFO) links between tiles, and PLIO ports to
the programmable logic.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError
from .kernels.lanes import LANES

NAIVE_KERNELS = ("projection", "cov3D", "cov2D", "cov2D_inv", "color")
PARTITIONED_KERNELS = ("projection", "Jacobian", "cov3D", "cov2D", "cov2D_inv", "dir_vec", "color")
TABLE_COLUMNS = ("color", "dir_vec", "cov2D", "Jacobian", "cov2D_inv", "projection", "cov3D")

METHODS = ("naive", "stream", "window")

ANALYTIC_OVERHEAD_CYCLES = 20


@dataclass(frozen=True)
class MeshConfig:
    rows: int = 8
    cols: int = 50
    clock_hz: float = 1.25e9
    local_mem_bytes: int = 32 * 1024
    instr_mem_bytes: int = 16 * 1024

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigurationError("mesh needs at least one row and one column")
        if self.clock_hz <= 0:
            raise ConfigurationError("clock_hz must be positive")

    @property
    def tiles(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class InterfaceSpec:
    """Inter-tile link model.

    ``window``: producer stores through one 256-bit unit, consumer loads
    through two.  ``stream``: 32 bits per cycle sustained (the 128-bit
    burst every four cycles averages the same).  ``fifo_depth`` is the
    number of Gaussian payloads an edge buffer holds in the event model.
    """

    kind: str = "window"
    window_load_bits: int = 256
    window_load_units: int = 2
    window_store_bits: int = 256
    window_store_units: int = 1
    stream_bits_per_cycle: int = 32
    stream_ports_in: int = 2
    stream_ports_out: int = 2
    fifo_depth: int = 4

    def __post_init__(self):
        if self.kind not in ("window", "stream"):
            raise ConfigurationError(f"unknown interface kind {self.kind!r}")
        if self.fifo_depth < 1:
            raise ConfigurationError("fifo_depth must be >= 1")

    @property
    def load_bits_per_cycle(self) -> int:
        return self.window_load_bits * self.window_load_units

    @property
    def store_bits_per_cycle(self) -> int:
        return self.window_store_bits * self.window_store_units


@dataclass(frozen=True)
class PlioSpec:
    """Aggregate PLIO bandwidths in bytes/s, plus an optional external cap on input bytes."""

    aie_to_pl_bytes_per_sec: float = 1.0e12
    pl_to_aie_bytes_per_sec: float = 1.3e12
    external_cap_bytes_per_sec: float | None = None

    def __post_init__(self):
        if self.aie_to_pl_bytes_per_sec <= 0 or self.pl_to_aie_bytes_per_sec <= 0:
            raise ConfigurationError("PLIO bandwidths must be positive")
        cap = self.external_cap_bytes_per_sec
        if cap is not None and cap <= 0:
            raise ConfigurationError("external cap must be positive")


@dataclass(frozen=True)
class KernelCost:
    avg: int
    min: int
    max: int

    def __post_init__(self):
        if min(self.avg, self.min, self.max) <= 0:
            raise ConfigurationError("kernel cycle costs must be positive")
        if not self.min <= self.avg <= self.max:
            raise ConfigurationError(f"avg {self.avg} outside [{self.min}, {self.max}]")

    @classmethod
    def fixed(cls, cycles: int) -> "KernelCost":
        return cls(cycles, cycles, cycles)


@dataclass(frozen=True)
class KernelCostProfile:
    name: str
    costs: dict = field(hash=False)
    source: str = "calibrated"

    def __post_init__(self):
        if self.source not in ("calibrated", "analytic"):
            raise ConfigurationError(f"unknown profile source {self.source!r}")
        kernels = set(self.costs)
        if kernels not in (set(NAIVE_KERNELS), set(PARTITIONED_KERNELS)):
            raise ConfigurationError(f"profile kernels {sorted(kernels)} match neither task graph")

    @property
    def partitioned(self) -> bool:
        return len(self.costs) == len(PARTITIONED_KERNELS)

    @property
    def kernels(self) -> tuple:
        return PARTITIONED_KERNELS if self.partitioned else NAIVE_KERNELS

    def __getitem__(self, kernel: str) -> KernelCost:
        return self.costs[kernel]

    def bottleneck(self) -> str:
        return max(self.kernels, key=lambda k: self.costs[k].avg)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["profile"] = {"name": self.name, "source": self.source}
        for k in self.kernels:
            c = self.costs[k]
            cp[k] = {"avg": str(c.avg), "min": str(c.min), "max": str(c.max)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "KernelCostProfile":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        if "profile" not in cp:
            raise ConfigurationError("profile file lacks a [profile] section")
        costs = {}
        for section in cp.sections():
            if section == "profile":
                continue
            sec = cp[section]
            try:
                costs[section] = KernelCost(int(sec["avg"]), int(sec["min"]), int(sec["max"]))
            except KeyError as exc:
                raise ConfigurationError(f"kernel {section!r} lacks {exc}") from None
        return cls(cp["profile"]["name"], costs, cp["profile"].get("source", "calibrated"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_ini())

    @classmethod
    def load(cls, path) -> "KernelCostProfile":
        return cls.from_ini(Path(path).read_text())


# Excess stall per unit beyond saturation.  Fit with
# splatmesh.sim.fit_excess_stall_fraction() so that 50 window units reach a
# 226x speedup over one naive unit under the default analytic model.
DEFAULT_EXCESS_STALL_FRACTION = 0.004014


@dataclass(frozen=True)
class ContentionModel:
    saturation_units: int = 25
    excess_stall_fraction: float = DEFAULT_EXCESS_STALL_FRACTION

    def __post_init__(self):
        if self.saturation_units < 1:
            raise ConfigurationError("saturation_units must be >= 1")
        if self.excess_stall_fraction < 0:
            raise ConfigurationError("excess_stall_fraction must be >= 0")

    def factor(self, n_units: int) -> float:
        """Throughput multiplier for ``n_units`` parallel units (1 up to saturation)."""
        excess = max(0, n_units - self.saturation_units)
        return 1.0 / (1.0 + self.excess_stall_fraction * excess)


def transfer_cycles(nbytes: int, iface: InterfaceSpec, leg: str = "hop") -> int:
    """Cycles to move ``nbytes`` across one link.

    For window links ``leg`` picks the producer store (``"store"``), the
    consumer load (``"load"``) or a whole hop (``"hop"``, the slower of the
    two).  Stream links ignore ``leg``.
    """
    if nbytes < 0:
        raise ValueError("byte count must be non-negative")
    bits = nbytes * 8
    if iface.kind == "stream":
        return math.ceil(bits / iface.stream_bits_per_cycle)
    load = math.ceil(bits / iface.load_bits_per_cycle)
    store = math.ceil(bits / iface.store_bits_per_cycle)
    if leg == "load":
        return load
    if leg == "store":
        return store
    if leg == "hop":
        return max(load, store)
    raise ValueError(f"unknown leg {leg!r}")


# avg, min, max cycles per Gaussian measured on the vendor simulator
MEASURED_CYCLES = {
    "naive": {
        "color": (1822, 1812, 1861),
        "cov2D": (1342, 1332, 1381),
        "cov2D_inv": (1180, 1180, 1181),
        "projection": (670, 670, 671),
        "cov3D": (276, 276, 277),
    },
    "stream": {
        "color": (433, 428, 485),
        "dir_vec": (262, 77, 428),
        "cov2D": (225, 158, 429),
        "Jacobian": (135, 124, 214),
        "cov2D_inv": (230, 158, 483),
        "projection": (79, 79, 429),
        "cov3D": (210, 210, 429),
    },
    "window": {
        "color": (371, 371, 371),
        "dir_vec": (83, 83, 83),
        "cov2D": (184, 183, 185),
        "Jacobian": (130, 130, 132),
        "cov2D_inv": (57, 57, 57),
        "projection": (89, 89, 89),
        "cov3D": (194, 194, 196),
    },
}


def calibrated_profile(method: str) -> KernelCostProfile:
    if method not in MEASURED_CYCLES:
        raise ConfigurationError(f"unknown method {method!r}; expected one of {METHODS}")
    costs = {k: KernelCost(*v) for k, v in MEASURED_CYCLES[method].items()}
    return KernelCostProfile(method, costs, "calibrated")


def analytic_profile(
    op_counts: dict,
    lanes_per_mac: int = LANES,
    *,
    overhead: int = ANALYTIC_OVERHEAD_CYCLES,
    kernels: tuple | None = None,
    name: str = "analytic",
) -> KernelCostProfile:
    """Cycle costs from instrumented op counts.

    Each kernel costs one cycle per scalar op, one issue cycle per vector
    instruction per ``lanes_per_mac`` populated lanes, plus ``overhead``.
    ``kernels`` names the kernels that must be present; by default the
    keys of ``op_counts`` must form one of the two task graphs.
    """
    if kernels is not None:
        missing = [k for k in kernels if k not in op_counts]
        if missing:
            raise ConfigurationError(f"op counts missing for kernels {missing}")
    else:
        kernels = tuple(op_counts)
    costs = {}
    for k in kernels:
        c = op_counts[k]
        cycles = max(1, c.scalar_ops + c.vector_cycles(lanes_per_mac) + overhead)
        costs[k] = KernelCost.fixed(cycles)
    return KernelCostProfile(name, costs, "analytic")


def method_profile(method: str, source: str = "calibrated") -> KernelCostProfile:
    """The cost profile a method runs with, either measured on the vendor simulator or derived from op counts."""
    if source == "calibrated":
        return calibrated_profile(method)
    if source != "analytic":
        raise ConfigurationError(f"unknown profile source {source!r}")
    from .kernels.staged import stage_op_counts

    if method == "naive":
        counts = stage_op_counts(partitioned=False, vectorized=False)
        return analytic_profile(counts, kernels=NAIVE_KERNELS, name="naive")
    if method in ("stream", "window"):
        counts = stage_op_counts(partitioned=True, vectorized=True)
        return analytic_profile(counts, kernels=PARTITIONED_KERNELS, name=method)
    raise ConfigurationError(f"unknown method {method!r}; expected one of {METHODS}")


def method_interface(method: str, fifo_depth: int | None = None) -> InterfaceSpec:
    """Link type a method uses: window links for ``window``, streams otherwise."""
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}; expected one of {METHODS}")
    kind = "window" if method == "window" else "stream"
    if fifo_depth is None:
        return InterfaceSpec(kind=kind)
    return InterfaceSpec(kind=kind, fifo_depth=fifo_depth)
