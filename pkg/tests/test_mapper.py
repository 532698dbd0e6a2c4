import pytest

from splatmesh.arch import MeshConfig
from splatmesh.errors import CapacityError, ConfigurationError, HeightError
from splatmesh.mapper import SINK, SOURCE, Edge, KernelNode, TaskGraph, build_task_graph, place, validate_plio


def _bytes(graph):
    return [e.nbytes for e in graph.edges]


def test_partitioned_chain_volumes():
    g = build_task_graph(partitioned=True)
    assert g.topological_order() == (
        "projection", "Jacobian", "cov3D", "cov2D", "cov2D_inv", "dir_vec", "color",
    )
    # record + carried intermediates, computed from the field widths by hand
    assert _bytes(g) == [236, 264, 276, 272, 236, 252, 252, 60]
    assert g.source_bytes == 236 and g.sink_bytes == 60


def test_naive_chain_volumes():
    g = build_task_graph(partitioned=False)
    assert len(g.nodes) == 5
    assert _bytes(g) == [236, 264, 260, 236, 252, 60]


def test_byte_overrides():
    g = build_task_graph(True, {("cov3D", "cov2D"): 1000})
    assert g.input_bytes("cov2D") == 1000


def test_cycle_and_unknown_edges_rejected():
    a, b = KernelNode("a", (), ()), KernelNode("b", (), ())
    with pytest.raises(ConfigurationError):
        TaskGraph((a, b), (Edge(SOURCE, "a", 1), Edge("a", "b", 1), Edge("b", "a", 1)), True)
    with pytest.raises(ConfigurationError):
        TaskGraph((a,), (Edge(SOURCE, "zzz", 1),), True)
    with pytest.raises(ConfigurationError):
        TaskGraph((a, b), (Edge(SOURCE, "a", 1), Edge("a", SINK, 1)), True)


@pytest.mark.parametrize("n", [1, 4, 8, 25, 50])
def test_column_placement(n):
    p = place(build_task_graph(True), n)
    assert p.tiles_used == 7 * n
    assert len(p.tiles()) == 7 * n
    assert p.edges_adjacent()
    assert sorted(p.columns) == list(range(n))
    plio = validate_plio(p)
    assert plio.passed and plio.total_streams == 2 * n


def test_capacity_and_height_errors():
    g = build_task_graph(True)
    with pytest.raises(CapacityError):
        place(g, 51)
    with pytest.raises(HeightError):
        place(g, 1, MeshConfig(rows=7))
    with pytest.raises(ConfigurationError):
        place(g, 0)


def test_plio_budget_violation():
    p = place(build_task_graph(True), 2)
    report = validate_plio(p, ports_per_column=1)
    assert not report.passed and report.violations == [0, 1]


def test_placement_report_and_dict():
    p = place(build_task_graph(False), 2)
    text = p.report()
    assert "| 1 | projection | cov3D | cov2D | cov2D_inv | color | - | - | - |" in text
    d = p.to_dict()
    assert d["tiles_used"] == 10
    assert d["units"][1]["kernels"]["color"] == 4


def test_plio_fifty_violations_at_one_port():
    report = validate_plio(place(build_task_graph(True), 50), ports_per_column=1)
    assert len(report.violations) == 50
    assert report.total_streams == 100
