"""Task graphs for feature computation and their column-aligned mesh placement.

Each feature-computation unit is a chain of kernels stacked in one mesh
column, starting at the row next to the PLIO interface.  Every kernel
forwards the payload fields that later kernels or the output still need,
so a unit has exactly one PLIO input stream and one output stream and all
inter-kernel links join vertically adjacent tiles (a requirement of window
links).  Edge byte volumes follow from the field widths in
:data:`splatmesh.kernels.staged.FIELD_BYTES`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .arch import MeshConfig
from .errors import CapacityError, ConfigurationError, HeightError
from .kernels.staged import FIELD_BYTES, RECORD_FIELDS, SINK_FIELDS, stages

SOURCE = "plio_in"
SINK = "plio_out"


@dataclass(frozen=True)
class KernelNode:
    name: str
    consumes: tuple
    produces: tuple


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    nbytes: int
    fields: tuple = ()

    @property
    def is_plio(self) -> bool:
        return self.src == SOURCE or self.dst == SINK


@dataclass(frozen=True)
class TaskGraph:
    nodes: tuple
    edges: tuple
    partitioned: bool

    def __post_init__(self):
        self.topological_order()

    @property
    def kernel_names(self) -> tuple:
        return tuple(n.name for n in self.nodes)

    def in_edges(self, name: str) -> list:
        return [e for e in self.edges if e.dst == name]

    def out_edges(self, name: str) -> list:
        return [e for e in self.edges if e.src == name]

    def input_bytes(self, name: str) -> int:
        return sum(e.nbytes for e in self.in_edges(name))

    @property
    def source_bytes(self) -> int:
        return sum(e.nbytes for e in self.out_edges(SOURCE))

    @property
    def sink_bytes(self) -> int:
        return sum(e.nbytes for e in self.in_edges(SINK))

    def predecessors(self, name: str) -> list:
        return [e.src for e in self.in_edges(name) if e.src != SOURCE]

    def successors(self, name: str) -> list:
        return [e.dst for e in self.out_edges(name) if e.dst != SINK]

    def topological_order(self) -> tuple:
        """Kahn's algorithm; raises if the graph has a cycle or unreachable kernels."""
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise ConfigurationError("duplicate kernel names")
        known = set(names) | {SOURCE, SINK}
        for e in self.edges:
            if e.src not in known or e.dst not in known:
                raise ConfigurationError(f"edge {e.src}->{e.dst} references an unknown kernel")
        indeg = {n: 0 for n in names}
        for e in self.edges:
            if e.src != SOURCE and e.dst != SINK:
                indeg[e.dst] += 1
        order = []
        ready = [n for n in names if indeg[n] == 0]
        while ready:
            n = ready.pop(0)
            order.append(n)
            for s in self.successors(n):
                indeg[s] -= 1
                if indeg[s] == 0:
                    ready.append(s)
        if len(order) != len(names):
            raise ConfigurationError("task graph has a cycle")
        reached = {e.dst for e in self.out_edges(SOURCE)}
        for n in order:
            if n in reached:
                reached.update(self.successors(n))
        unreachable = [n for n in names if n not in reached]
        if unreachable:
            raise ConfigurationError(f"kernels unreachable from the source: {unreachable}")
        return tuple(order)


def _field_bytes(fields) -> int:
    return sum(FIELD_BYTES[f] for f in fields)


def _ordered(fields: set) -> tuple:
    return tuple(f for f in FIELD_BYTES if f in fields)


def build_task_graph(partitioned: bool, byte_overrides: dict | None = None) -> TaskGraph:
    """Chain of 5 (naive) or 7 (partitioned) kernels with derived edge volumes.

    ``byte_overrides`` maps ``(src, dst)`` pairs to a replacement byte count.
    """
    specs = stages(partitioned)
    nodes = tuple(KernelNode(s.name, s.consumes, s.produces) for s in specs)
    available = set(RECORD_FIELDS)
    names = [SOURCE] + [s.name for s in specs] + [SINK]
    carried = [_ordered(set(RECORD_FIELDS))]
    for i, spec in enumerate(specs):
        available |= set(spec.produces)
        later = set(SINK_FIELDS)
        for s in specs[i + 1:]:
            later |= set(s.consumes)
        carried.append(_ordered(available & later))
    overrides = byte_overrides or {}
    edges = []
    for i, fields in enumerate(carried):
        src, dst = names[i], names[i + 1]
        nbytes = overrides.get((src, dst), _field_bytes(fields))
        edges.append(Edge(src, dst, int(nbytes), fields))
    return TaskGraph(nodes, tuple(edges), partitioned)


@dataclass(frozen=True)
class UnitPlacement:
    unit: int
    column: int
    rows: tuple  # (kernel, row) in dataflow order

    def row_of(self, kernel: str) -> int:
        return dict(self.rows)[kernel]


@dataclass(frozen=True)
class Placement:
    graph: TaskGraph
    mesh: MeshConfig
    units: tuple
    plio_in_per_unit: int = 1
    plio_out_per_unit: int = 1

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def tiles_used(self) -> int:
        return sum(len(u.rows) for u in self.units)

    @property
    def columns(self) -> tuple:
        return tuple(u.column for u in self.units)

    def tiles(self) -> dict:
        """``(row, col) -> (unit, kernel)`` for every occupied tile."""
        out = {}
        for u in self.units:
            for kernel, row in u.rows:
                key = (row, u.column)
                if key in out:
                    raise ConfigurationError(f"tile {key} assigned twice")
                if not (0 <= row < self.mesh.rows and 0 <= u.column < self.mesh.cols):
                    raise ConfigurationError(f"tile {key} outside the mesh")
                out[key] = (u.unit, kernel)
        return out

    def edges_adjacent(self) -> bool:
        """True when every non-PLIO edge joins vertically adjacent tiles of one column."""
        for u in self.units:
            rows = dict(u.rows)
            for e in self.graph.edges:
                if e.is_plio:
                    continue
                if abs(rows[e.src] - rows[e.dst]) != 1:
                    return False
        return True

    def to_dict(self) -> dict:
        return {
            "n_units": self.n_units,
            "tiles_used": self.tiles_used,
            "mesh": {"rows": self.mesh.rows, "cols": self.mesh.cols},
            "units": [
                {"unit": u.unit, "column": u.column, "kernels": {k: r for k, r in u.rows}}
                for u in self.units
            ],
        }

    def report(self) -> str:
        """Markdown table: one line per column, one cell per mesh row (row 0 next to PLIO)."""
        header = "| column | " + " | ".join(f"row {r}" for r in range(self.mesh.rows)) + " |"
        sep = "|---" * (self.mesh.rows + 1) + "|"
        lines = [header, sep]
        for u in self.units:
            by_row = {r: k for k, r in u.rows}
            cells = [by_row.get(r, "-") for r in range(self.mesh.rows)]
            lines.append(f"| {u.column} | " + " | ".join(cells) + " |")
        lines.append(f"\n{self.n_units} units, {self.tiles_used} tiles of {self.mesh.tiles}")
        return "\n".join(lines)


def place(graph: TaskGraph, n_units: int, mesh: MeshConfig | None = None) -> Placement:
    """Give each unit its own column and stack its kernels upward from the PLIO row."""
    mesh = mesh or MeshConfig()
    if n_units < 1:
        raise ConfigurationError("n_units must be >= 1")
    if n_units > mesh.cols:
        raise CapacityError(f"{n_units} units requested but the mesh has {mesh.cols} columns")
    order = graph.topological_order()
    if len(order) > mesh.rows - 1:
        raise HeightError(
            f"{len(order)} kernels exceed the {mesh.rows - 1} usable tiles per column"
        )
    rows = tuple((k, r) for r, k in enumerate(order))
    units = tuple(UnitPlacement(u, u, rows) for u in range(n_units))
    return Placement(graph, mesh, units)


@dataclass
class PlioReport:
    passed: bool
    ports_per_column: int
    usage: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def total_streams(self) -> int:
        return sum(self.usage.values())


def validate_plio(placement: Placement, ports_per_column: int = 2) -> PlioReport:
    usage = {}
    for u in placement.units:
        usage[u.column] = usage.get(u.column, 0) + placement.plio_in_per_unit + placement.plio_out_per_unit
    violations = sorted(c for c, n in usage.items() if n > ports_per_column)
    return PlioReport(not violations, ports_per_column, usage, violations)
